/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/support/helpers.hpp
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

#include "facefit/core.hpp"
#include "facefit/mesh.hpp"

#include <functional>
#include <map>
#include <vector>

namespace facefit::testing {

/// Icosphere with the given subdivision level, radius in mm.
inline FaceMesh make_icosphere(int subdivisions, Real radius)
{
    const Real t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : verts)
        v.normalize();
    for (int s = 0; s < subdivisions; ++s)
    {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end())
                return it->second;
            const int idx = static_cast<int>(verts.size());
            verts.push_back(((verts[a] + verts[b]) / 2).normalized());
            midpoints[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& f : faces)
        {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    FaceMesh mesh;
    mesh.vertices.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(static_cast<int>(i)) = (verts[i] * radius).transpose();
    mesh.triangles.resize(static_cast<int>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f)
        mesh.triangles.row(static_cast<int>(f)) << faces[f][0], faces[f][1], faces[f][2];
    mesh.albedo = MatX3::Constant(mesh.vertices.rows(), 3, 0.7);
    return mesh;
}

/// Regular grid in the xy-plane, z = 0; nx * ny vertices.
inline FaceMesh make_plane_grid(int nx, int ny, Real spacing)
{
    FaceMesh mesh;
    mesh.vertices.resize(nx * ny, 3);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            mesh.vertices.row(y * nx + x) << x * spacing, y * spacing, 0.0;
    std::vector<std::array<int, 3>> faces;
    for (int y = 0; y + 1 < ny; ++y)
        for (int x = 0; x + 1 < nx; ++x)
        {
            const int a = y * nx + x, b = y * nx + x + 1, c = (y + 1) * nx + x,
                      d = (y + 1) * nx + x + 1;
            faces.push_back({a, d, b});
            faces.push_back({a, c, d});
        }
    mesh.triangles.resize(static_cast<int>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f)
        mesh.triangles.row(static_cast<int>(f)) << faces[f][0], faces[f][1], faces[f][2];
    mesh.albedo = MatX3::Constant(mesh.vertices.rows(), 3, 0.6);
    return mesh;
}

/// Central finite difference of a scalar function at x, per coordinate step.
inline VecX central_difference(const std::function<Real(const VecX&)>& f, const VecX& x,
                               const VecX& steps)
{
    VecX g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        VecX xp = x, xm = x;
        xp[i] += steps[i];
        xm[i] -= steps[i];
        g[i] = (f(xp) - f(xm)) / (2 * steps[i]);
    }
    return g;
}

/// Relative error between an analytic and a finite-difference gradient.
inline Real gradient_relative_error(const VecX& analytic, const VecX& fd)
{
    const Real denom = std::max({analytic.norm(), fd.norm(), Real(1e-12)});
    return (analytic - fd).norm() / denom;
}

inline Vec3 random_unit(Rng& rng)
{
    std::normal_distribution<Real> n(0, 1);
    Vec3 v(n(rng), n(rng), n(rng));
    while (v.norm() < 1e-6)
        v = Vec3(n(rng), n(rng), n(rng));
    return v.normalized();
}

} // namespace facefit::testing
