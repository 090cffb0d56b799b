/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/container.hpp
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

#ifndef FACEFIT_IO_CONTAINER_HPP
#define FACEFIT_IO_CONTAINER_HPP

#include "facefit/model.hpp"

#include <cstring>
#include <fstream>
#include <string>

namespace facefit::io {

/**
 * Little-endian binary container: 4-byte magic "FFBC", u32 version, u32
 * kind, then kind-specific shape header and float64 payload. Kinds: 1 =
 * CoreTensor (dim0, k_id, k_exp), 2 = FaceModel (full model bundle).
 */
inline constexpr char kMagic[4] = {'F', 'F', 'B', 'C'};
inline constexpr uint32_t kVersion = 1;
inline constexpr uint32_t kKindTensor = 1;
inline constexpr uint32_t kKindModel = 2;

namespace detail {

template <typename T>
void put(std::ostream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw std::runtime_error("container: truncated stream");
    return v;
}

inline void put_vec(std::ostream& os, const VecX& v)
{
    put<uint64_t>(os, static_cast<uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(Real) * v.size()));
}

inline VecX get_vec(std::istream& is)
{
    const auto n = get<uint64_t>(is);
    VecX v(static_cast<Eigen::Index>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(Real) * n));
    if (!is)
        throw std::runtime_error("container: truncated vector");
    return v;
}

inline void put_mat(std::ostream& os, const MatX& m)
{
    put<uint64_t>(os, static_cast<uint64_t>(m.rows()));
    put<uint64_t>(os, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        os.write(reinterpret_cast<const char*>(m.col(c).data()),
                 static_cast<std::streamsize>(sizeof(Real) * m.rows()));
}

inline MatX get_mat(std::istream& is)
{
    const auto r = get<uint64_t>(is);
    const auto c = get<uint64_t>(is);
    MatX m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index cc = 0; cc < m.cols(); ++cc)
    {
        is.read(reinterpret_cast<char*>(m.col(cc).data()),
                static_cast<std::streamsize>(sizeof(Real) * r));
        if (!is)
            throw std::runtime_error("container: truncated matrix");
    }
    return m;
}

inline void put_tensor_body(std::ostream& os, const CoreTensor& t)
{
    put<uint32_t>(os, static_cast<uint32_t>(t.dim0()));
    put<uint32_t>(os, static_cast<uint32_t>(t.k_id()));
    put<uint32_t>(os, static_cast<uint32_t>(t.k_exp()));
    os.write(reinterpret_cast<const char*>(t.raw().data()),
             static_cast<std::streamsize>(sizeof(Real) * t.raw().size()));
}

inline CoreTensor get_tensor_body(std::istream& is)
{
    const auto d0 = get<uint32_t>(is);
    const auto ki = get<uint32_t>(is);
    const auto ke = get<uint32_t>(is);
    CoreTensor t(static_cast<int>(d0), static_cast<int>(ki), static_cast<int>(ke));
    is.read(reinterpret_cast<char*>(t.raw().data()),
            static_cast<std::streamsize>(sizeof(Real) * t.raw().size()));
    if (!is)
        throw std::runtime_error("container: truncated tensor");
    return t;
}

inline void check_header(std::istream& is, uint32_t expected_kind)
{
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("container: bad magic");
    const auto version = get<uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("container: unsupported version");
    const auto kind = get<uint32_t>(is);
    if (kind != expected_kind)
        throw std::runtime_error("container: unexpected kind");
}

} // namespace detail

inline void save_tensor(const std::string& path, const CoreTensor& t)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("save_tensor: cannot open " + path);
    os.write(kMagic, 4);
    detail::put<uint32_t>(os, kVersion);
    detail::put<uint32_t>(os, kKindTensor);
    detail::put_tensor_body(os, t);
    if (!os)
        throw std::runtime_error("save_tensor: write failed for " + path);
}

inline CoreTensor load_tensor(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("load_tensor: cannot open " + path);
    detail::check_header(is, kKindTensor);
    return detail::get_tensor_body(is);
}

inline void save_model(const std::string& path, const FaceModel& m)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("save_model: cannot open " + path);
    os.write(kMagic, 4);
    detail::put<uint32_t>(os, kVersion);
    detail::put<uint32_t>(os, kKindModel);
    detail::put_tensor_body(os, m.tensor);
    detail::put_tensor_body(os, m.tensor_initial);
    detail::put_vec(os, m.mean_score_id);
    detail::put_vec(os, m.mean_score_exp);
    detail::put_vec(os, m.sigma_id);
    detail::put_vec(os, m.sigma_exp);
    detail::put_vec(os, m.sigma_rms_id);
    detail::put_vec(os, m.sigma_rms_exp);
    detail::put_vec(os, m.albedo.mean);
    detail::put_mat(os, m.albedo.basis);
    detail::put_vec(os, m.albedo.sigma);
    detail::put<uint64_t>(os, static_cast<uint64_t>(m.triangles.rows()));
    os.write(reinterpret_cast<const char*>(m.triangles.data()),
             static_cast<std::streamsize>(sizeof(int) * m.triangles.size()));
    detail::put_mat(os, m.uv);
    detail::put<uint64_t>(os, static_cast<uint64_t>(m.landmarks.size()));
    for (const auto& lb : m.landmarks)
    {
        detail::put<int32_t>(os, lb.semantic_id);
        detail::put<int32_t>(os, lb.vertex);
        detail::put<int32_t>(os, static_cast<int32_t>(lb.side));
    }
    detail::put<uint64_t>(os, static_cast<uint64_t>(m.eyelid_pairs.size()));
    for (const auto& p : m.eyelid_pairs)
    {
        detail::put<int32_t>(os, p[0]);
        detail::put<int32_t>(os, p[1]);
    }
    if (!os)
        throw std::runtime_error("save_model: write failed for " + path);
}

inline FaceModel load_model(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("load_model: cannot open " + path);
    detail::check_header(is, kKindModel);
    FaceModel m;
    m.tensor = detail::get_tensor_body(is);
    m.tensor_initial = detail::get_tensor_body(is);
    m.mean_score_id = detail::get_vec(is);
    m.mean_score_exp = detail::get_vec(is);
    m.sigma_id = detail::get_vec(is);
    m.sigma_exp = detail::get_vec(is);
    m.sigma_rms_id = detail::get_vec(is);
    m.sigma_rms_exp = detail::get_vec(is);
    m.albedo.mean = detail::get_vec(is);
    m.albedo.basis = detail::get_mat(is);
    m.albedo.sigma = detail::get_vec(is);
    const auto ntris = detail::get<uint64_t>(is);
    m.triangles.resize(static_cast<Eigen::Index>(ntris), 3);
    is.read(reinterpret_cast<char*>(m.triangles.data()),
            static_cast<std::streamsize>(sizeof(int) * m.triangles.size()));
    MatX uv = detail::get_mat(is);
    m.uv = uv;
    const auto nlm = detail::get<uint64_t>(is);
    for (uint64_t i = 0; i < nlm; ++i)
    {
        LandmarkBinding lb;
        lb.semantic_id = detail::get<int32_t>(is);
        lb.vertex = detail::get<int32_t>(is);
        lb.side = static_cast<ContourSide>(detail::get<int32_t>(is));
        m.landmarks.push_back(lb);
    }
    const auto npairs = detail::get<uint64_t>(is);
    for (uint64_t i = 0; i < npairs; ++i)
    {
        std::array<int, 2> p{};
        p[0] = detail::get<int32_t>(is);
        p[1] = detail::get<int32_t>(is);
        m.eyelid_pairs.push_back(p);
    }
    if (!is)
        throw std::runtime_error("load_model: truncated file " + path);
    // Rebuild adjacency from connectivity (positions are irrelevant here).
    MatX3 dummy = MatX3::Zero(m.tensor.dim0() / 3, 3);
    m.adjacency = MeshAdjacency::build(FaceMesh{dummy, m.triangles, {}});
    return m;
}

} // namespace facefit::io

#endif // FACEFIT_IO_CONTAINER_HPP
