/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/dataset.hpp
 *
 * Copyright 2026 The facefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef FACEFIT_IO_DATASET_HPP
#define FACEFIT_IO_DATASET_HPP

#include "facefit/io/json_io.hpp"
#include "facefit/io/pfm.hpp"
#include "facefit/io/png.hpp"
#include "facefit/synth.hpp"

#include <filesystem>
#include <string>

namespace facefit::io {

namespace fs = std::filesystem;

/**
 * On-disk frame layout inside a sequence directory:
 *   frame_NNNN_color.png        8-bit input color
 *   frame_NNNN_depth.pfm        float input depth (mm)
 *   frame_NNNN_clean_color.png  supervision color
 *   frame_NNNN_clean_depth.pfm  supervision depth
 *   frame_NNNN_flow.pfm         2-channel flow to the previous frame (k > 0)
 *   frame_NNNN_meta.json        chi, intrinsics, landmarks, flags
 * The dataset root holds manifest.json listing sequences, seeds and counts.
 */
inline std::string frame_stem(int k)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", k);
    return buf;
}

inline void write_frame(const fs::path& dir, int index, const synth::GroundTruthFrame& g)
{
    const std::string stem = (dir / frame_stem(index)).string();
    write_png_rgb8(stem + "_color.png", g.input.color);
    write_pfm(stem + "_depth.pfm", g.input.depth);
    write_png_rgb8(stem + "_clean_color.png", g.supervision.color);
    write_pfm(stem + "_clean_depth.pfm", g.supervision.depth);
    if (g.input.flow_to_previous)
        write_pfm(stem + "_flow.pfm", *g.input.flow_to_previous);

    json meta;
    meta["chi"] = to_json(g.chi);
    meta["intrinsics"] = to_json(g.input.intrinsics);
    meta["clean_intrinsics"] = to_json(g.supervision.intrinsics);
    meta["landmarks"] = to_json(g.input.landmarks);
    meta["clean_landmarks"] = to_json(g.supervision.landmarks);
    json pairs = json::array();
    for (const auto& p : g.input.eyelid_pairs)
        pairs.push_back({p[0], p[1]});
    meta["eyelid_pairs"] = pairs;
    meta["flipped"] = g.flipped;
    meta["crop_origin"] = {g.crop_origin.x(), g.crop_origin.y()};
    meta["outlier_pixels"] = g.outlier_pixels;
    if (g.gt_displacement.size() > 0)
        meta["gt_displacement"] = to_json(g.gt_displacement);
    write_json_file(stem + "_meta.json", meta);
}

inline synth::GroundTruthFrame read_frame(const fs::path& dir, int index)
{
    const std::string stem = (dir / frame_stem(index)).string();
    synth::GroundTruthFrame g;
    g.input.color = read_png_rgb8(stem + "_color.png");
    g.input.depth = read_pfm(stem + "_depth.pfm");
    g.supervision.color = read_png_rgb8(stem + "_clean_color.png");
    g.supervision.depth = read_pfm(stem + "_clean_depth.pfm");
    if (fs::exists(stem + "_flow.pfm"))
    {
        g.input.flow_to_previous = read_pfm(stem + "_flow.pfm");
        g.supervision.flow_to_previous = g.input.flow_to_previous;
    }
    const json meta = read_json_file(stem + "_meta.json");
    g.chi = parameters_from_json(meta.at("chi"));
    g.input.intrinsics = intrinsics_from_json(meta.at("intrinsics"));
    g.supervision.intrinsics = intrinsics_from_json(meta.at("clean_intrinsics"));
    g.input.landmarks = landmarks_from_json(meta.at("landmarks"));
    g.supervision.landmarks = landmarks_from_json(meta.at("clean_landmarks"));
    for (const auto& p : meta.at("eyelid_pairs"))
        g.input.eyelid_pairs.push_back({p[0].get<int>(), p[1].get<int>()});
    g.supervision.eyelid_pairs = g.input.eyelid_pairs;
    g.flipped = meta.at("flipped").get<bool>();
    g.crop_origin = Eigen::Vector2i(meta.at("crop_origin")[0].get<int>(),
                                    meta.at("crop_origin")[1].get<int>());
    g.outlier_pixels = meta.at("outlier_pixels").get<int>();
    if (meta.contains("gt_displacement"))
        g.gt_displacement = vec_from_json(meta.at("gt_displacement"));
    return g;
}

} // namespace facefit::io

#endif // FACEFIT_IO_DATASET_HPP
