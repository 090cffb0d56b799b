/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/frame.hpp
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

#ifndef FACEFIT_FRAME_HPP
#define FACEFIT_FRAME_HPP

#include "facefit/camera.hpp"
#include "facefit/image.hpp"

#include <array>
#include <optional>
#include <vector>

namespace facefit {

struct Landmark
{
    int semantic_id = 0;
    Vec2 position = Vec2::Zero(); // pixels
};

/**
 * One observed RGB-D frame: color in [0,1], depth in mm (0 invalid), the
 * intrinsics of this (possibly cropped) view, detected landmarks, eyelid
 * pairs as semantic-id pairs, and an optional dense flow field to the
 * previous frame (2 channels, pixels).
 */
struct RGBDFrame
{
    Image color;
    Image depth;
    CameraIntrinsics intrinsics;
    std::vector<Landmark> landmarks;
    std::vector<std::array<int, 2>> eyelid_pairs;
    std::optional<Image> flow_to_previous;

    void validate() const
    {
        if (color.width() != depth.width() || color.height() != depth.height())
            throw std::invalid_argument("RGBDFrame: color and depth resolution differ");
        for (const auto& lm : landmarks)
            if (lm.position.x() < 0 || lm.position.x() >= color.width() || lm.position.y() < 0 ||
                lm.position.y() >= color.height())
                throw std::invalid_argument("RGBDFrame: landmark outside image bounds");
    }

    const Landmark* find_landmark(int semantic_id) const
    {
        for (const auto& lm : landmarks)
            if (lm.semantic_id == semantic_id)
                return &lm;
        return nullptr;
    }
};

/// Normal estimate from central differences of an XYZ image, oriented
/// toward the camera (n . ray < 0). Returns false when degenerate.
inline bool normal_from_tangents(const Vec3& tx, const Vec3& ty, const Vec3& ray, Vec3& n_out)
{
    const Vec3 n = tx.cross(ty);
    const Real len = n.norm();
    if (len < 1e-12)
        return false;
    n_out = n / len;
    if (n_out.dot(ray) > 0)
        n_out = -n_out;
    return true;
}

/**
 * Back-projected geometry of the observed depth plus per-pixel normals from
 * central differences of the XYZ image. Pixels with invalid depth in their
 * 4-neighborhood get no normal (normal_valid = 0); such pixels are excluded
 * from the point-to-surface term.
 */
struct RealGeometry
{
    Image xyz;          // 3ch camera-space points, z == 0 marks invalid depth
    Image normals;      // 3ch unit normals where valid
    Image normal_valid; // 1ch 0/1
};

inline RealGeometry compute_real_geometry(const Image& depth, const CameraIntrinsics& K)
{
    RealGeometry g;
    g.xyz = back_project(depth, K);
    g.normals = Image(depth.width(), depth.height(), 3, 0.0);
    g.normal_valid = Image(depth.width(), depth.height(), 1, 0.0);
    for (int y = 1; y + 1 < depth.height(); ++y)
        for (int x = 1; x + 1 < depth.width(); ++x)
        {
            if (depth.at(x, y) <= 0 || depth.at(x - 1, y) <= 0 || depth.at(x + 1, y) <= 0 ||
                depth.at(x, y - 1) <= 0 || depth.at(x, y + 1) <= 0)
                continue;
            const Vec3 tx = g.xyz.rgb(x + 1, y) - g.xyz.rgb(x - 1, y);
            const Vec3 ty = g.xyz.rgb(x, y + 1) - g.xyz.rgb(x, y - 1);
            Vec3 n;
            if (!normal_from_tangents(tx, ty, pixel_ray(x, y, K), n))
                continue;
            g.normals.set_rgb(x, y, n);
            g.normal_valid.at(x, y) = 1.0;
        }
    return g;
}

} // namespace facefit

#endif // FACEFIT_FRAME_HPP
