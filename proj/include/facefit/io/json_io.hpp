/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/json_io.hpp
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

#ifndef FACEFIT_IO_JSON_IO_HPP
#define FACEFIT_IO_JSON_IO_HPP

#include "facefit/energy.hpp"
#include "facefit/frame.hpp"
#include "facefit/model.hpp"

#include <json.hpp>

#include <fstream>

namespace facefit::io {

using nlohmann::json;

inline json to_json(const VecX& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

inline VecX vec_from_json(const json& a)
{
    VecX v(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = a[i].get<Real>();
    return v;
}

inline json to_json(const ParameterSet& chi)
{
    json j;
    j["alpha_id"] = to_json(chi.alpha_id);
    j["alpha_exp"] = to_json(chi.alpha_exp);
    j["alpha_alb"] = to_json(chi.alpha_alb);
    j["euler"] = {chi.euler.x(), chi.euler.y(), chi.euler.z()};
    j["translation"] = {chi.translation.x(), chi.translation.y(), chi.translation.z()};
    json sh = json::array();
    for (int r = 0; r < 3; ++r)
    {
        json row = json::array();
        for (int c = 0; c < kShCount; ++c)
            row.push_back(chi.sh(r, c));
        sh.push_back(row);
    }
    j["sh"] = sh;
    return j;
}

inline ParameterSet parameters_from_json(const json& j)
{
    ParameterSet chi;
    chi.alpha_id = vec_from_json(j.at("alpha_id"));
    chi.alpha_exp = vec_from_json(j.at("alpha_exp"));
    chi.alpha_alb = vec_from_json(j.at("alpha_alb"));
    for (int i = 0; i < 3; ++i)
    {
        chi.euler[i] = j.at("euler")[i].get<Real>();
        chi.translation[i] = j.at("translation")[i].get<Real>();
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < kShCount; ++c)
            chi.sh(r, c) = j.at("sh")[r][c].get<Real>();
    return chi;
}

inline json to_json(const CameraIntrinsics& K)
{
    return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
                {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j)
{
    return CameraIntrinsics(j.at("fx").get<Real>(), j.at("fy").get<Real>(), j.at("cx").get<Real>(),
                            j.at("cy").get<Real>(), j.at("width").get<int>(),
                            j.at("height").get<int>());
}

inline json to_json(const std::vector<Landmark>& lms)
{
    json a = json::array();
    for (const auto& lm : lms)
        a.push_back(json{{"id", lm.semantic_id}, {"x", lm.position.x()}, {"y", lm.position.y()}});
    return a;
}

inline std::vector<Landmark> landmarks_from_json(const json& a)
{
    std::vector<Landmark> out;
    for (const auto& e : a)
        out.push_back({e.at("id").get<int>(), Vec2(e.at("x").get<Real>(), e.at("y").get<Real>())});
    return out;
}

inline json to_json(const EnergyWeights& w)
{
    return json{{"w_pp", w.w_pp},     {"w_ps", w.w_ps},     {"w_col", w.w_col},
                {"w_lan", w.w_lan},   {"w_reg", w.w_reg},   {"w_flow", w.w_flow},
                {"w_same", w.w_same}, {"w_Areg", w.w_Areg}, {"w_Asmo", w.w_Asmo},
                {"w_face", w.w_face}, {"w_edge", w.w_edge}, {"w_sm", w.w_sm},
                {"w_mi", w.w_mi},     {"w_cl", w.w_cl},     {"w_n", w.w_n},
                {"eps_geo", w.eps_geo}, {"eps_col", w.eps_col},
                {"norm_mode", w.norm_mode == EnergyWeights::NormMode::robust ? "robust" : "squared"}};
}

inline EnergyWeights weights_from_json(const json& j)
{
    EnergyWeights w;
    auto load = [&](const char* key, Real& field) {
        if (j.contains(key))
            field = j.at(key).get<Real>();
    };
    load("w_pp", w.w_pp);
    load("w_ps", w.w_ps);
    load("w_col", w.w_col);
    load("w_lan", w.w_lan);
    load("w_reg", w.w_reg);
    load("w_flow", w.w_flow);
    load("w_same", w.w_same);
    load("w_Areg", w.w_Areg);
    load("w_Asmo", w.w_Asmo);
    load("w_face", w.w_face);
    load("w_edge", w.w_edge);
    load("w_sm", w.w_sm);
    load("w_mi", w.w_mi);
    load("w_cl", w.w_cl);
    load("w_n", w.w_n);
    load("eps_geo", w.eps_geo);
    load("eps_col", w.eps_col);
    if (j.contains("norm_mode"))
        w.norm_mode = j.at("norm_mode").get<std::string>() == "squared"
                          ? EnergyWeights::NormMode::squared
                          : EnergyWeights::NormMode::robust;
    return w;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("read_json_file: cannot open " + path);
    json j;
    f >> j;
    return j;
}

/// Atomic write: temp file in the same directory, then rename.
inline void write_json_file(const std::string& path, const json& j, int indent = 2)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f)
            throw std::runtime_error("write_json_file: cannot open " + tmp);
        f << j.dump(indent) << "\n";
        if (!f)
            throw std::runtime_error("write_json_file: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_json_file: rename failed for " + path);
}

} // namespace facefit::io

#endif // FACEFIT_IO_JSON_IO_HPP
