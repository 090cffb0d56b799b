/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/mesh.hpp
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

#ifndef FACEFIT_MESH_HPP
#define FACEFIT_MESH_HPP

#include "facefit/core.hpp"

#include <array>
#include <utility>
#include <vector>

namespace facefit {

/**
 * Fixed-connectivity triangle mesh. Positions are in millimeters, per-vertex
 * albedo is RGB reflectance in [0,1]. Connectivity is set at construction
 * and never changes; only positions (and albedo) are replaced when a new
 * shape is assembled.
 */
struct FaceMesh
{
    MatX3 vertices;   // n x 3, mm
    MatX3i triangles; // m x 3, CCW when seen from outside
    MatX3 albedo;     // n x 3 (may be empty for geometry-only meshes)

    int num_vertices() const { return static_cast<int>(vertices.rows()); }
    int num_triangles() const { return static_cast<int>(triangles.rows()); }

    Vec3 vertex(int i) const { return vertices.row(i).transpose(); }

    void validate() const
    {
        for (int f = 0; f < num_triangles(); ++f)
            for (int k = 0; k < 3; ++k)
                if (triangles(f, k) < 0 || triangles(f, k) >= num_vertices())
                    throw std::invalid_argument("FaceMesh: triangle index out of range");
    }
};

/// Vertex-to-incident-face and vertex-to-neighbor-vertex adjacency, plus the
/// unique edge list (i < j) with the two flanking faces (-1 on boundary).
struct MeshAdjacency
{
    std::vector<std::vector<int>> vertex_faces;
    std::vector<std::vector<int>> vertex_neighbors;
    std::vector<std::array<int, 2>> edges;      // (i, j), i < j
    std::vector<std::array<int, 2>> edge_faces; // faces flanking each edge

    static MeshAdjacency build(const FaceMesh& mesh)
    {
        MeshAdjacency adj;
        const int n = mesh.num_vertices();
        adj.vertex_faces.resize(n);
        adj.vertex_neighbors.resize(n);
        std::vector<std::vector<std::pair<int, int>>> edge_map(n); // j -> edge index, per i
        for (int f = 0; f < mesh.num_triangles(); ++f)
        {
            for (int k = 0; k < 3; ++k)
            {
                const int a = mesh.triangles(f, k);
                const int b = mesh.triangles(f, (k + 1) % 3);
                adj.vertex_faces[a].push_back(f);
                const int i = std::min(a, b), j = std::max(a, b);
                int edge_idx = -1;
                for (auto& [jj, idx] : edge_map[i])
                    if (jj == j)
                    {
                        edge_idx = idx;
                        break;
                    }
                if (edge_idx < 0)
                {
                    edge_idx = static_cast<int>(adj.edges.size());
                    adj.edges.push_back({i, j});
                    adj.edge_faces.push_back({-1, -1});
                    edge_map[i].push_back({j, edge_idx});
                    adj.vertex_neighbors[i].push_back(j);
                    adj.vertex_neighbors[j].push_back(i);
                }
                if (adj.edge_faces[edge_idx][0] < 0)
                    adj.edge_faces[edge_idx][0] = f;
                else
                    adj.edge_faces[edge_idx][1] = f;
            }
        }
        return adj;
    }
};

/// Unnormalized face normal (cross product of edges); its norm is twice the
/// triangle area.
inline Vec3 face_normal_unnormalized(const MatX3& V, const MatX3i& F, int f)
{
    const Vec3 v0 = V.row(F(f, 0)).transpose();
    const Vec3 v1 = V.row(F(f, 1)).transpose();
    const Vec3 v2 = V.row(F(f, 2)).transpose();
    return (v1 - v0).cross(v2 - v0);
}

struct MeshNormals
{
    MatX3 face;   // unit face normals
    MatX3 vertex; // unit, area-weighted average of incident face normals
};

/**
 * Face and vertex unit normals. Face normals follow the winding (CCW seen
 * from outside gives outward normals); vertex normals are the normalized sum
 * of unnormalized incident face normals, i.e. area-weighted.
 * Throws on a zero-area triangle when strict (the default).
 */
inline MeshNormals compute_normals(const MatX3& V, const MatX3i& F, bool strict = true)
{
    constexpr Real kDegenerate = 1e-12;
    MeshNormals out;
    const int m = static_cast<int>(F.rows());
    const int n = static_cast<int>(V.rows());
    out.face.resize(m, 3);
    MatX3 accum = MatX3::Zero(n, 3);
    for (int f = 0; f < m; ++f)
    {
        const Vec3 nf = face_normal_unnormalized(V, F, f);
        const Real len = nf.norm();
        if (len < kDegenerate)
        {
            if (strict)
                throw std::domain_error("compute_normals: zero-area triangle " + std::to_string(f));
            out.face.row(f).setZero();
        }
        else
        {
            out.face.row(f) = (nf / len).transpose();
        }
        for (int k = 0; k < 3; ++k)
            accum.row(F(f, k)) += nf.transpose();
    }
    out.vertex.resize(n, 3);
    for (int i = 0; i < n; ++i)
    {
        const Real len = accum.row(i).norm();
        if (len < kDegenerate)
        {
            if (strict)
                throw std::domain_error("compute_normals: degenerate vertex normal " + std::to_string(i));
            out.vertex.row(i).setZero();
        }
        else
        {
            out.vertex.row(i) = accum.row(i) / len;
        }
    }
    return out;
}

inline MeshNormals compute_normals(const FaceMesh& mesh, bool strict = true)
{
    return compute_normals(mesh.vertices, mesh.triangles, strict);
}

/**
 * Uniform-weight graph (umbrella) Laplacian applied to per-vertex values:
 * (L x)_i = mean of neighbor values - x_i. Works on any column count.
 */
inline MatX apply_graph_laplacian(const MatX& x, const MeshAdjacency& adj)
{
    MatX out = MatX::Zero(x.rows(), x.cols());
    for (int i = 0; i < static_cast<int>(x.rows()); ++i)
    {
        const auto& nbrs = adj.vertex_neighbors[i];
        if (nbrs.empty())
            continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
        for (int j : nbrs)
            mean += x.row(j);
        out.row(i) = mean / static_cast<Real>(nbrs.size()) - x.row(i);
    }
    return out;
}

/// Adjoint of apply_graph_laplacian (L^T y), needed by analytic gradients.
inline MatX apply_graph_laplacian_adjoint(const MatX& y, const MeshAdjacency& adj)
{
    MatX out = MatX::Zero(y.rows(), y.cols());
    for (int i = 0; i < static_cast<int>(y.rows()); ++i)
    {
        const auto& nbrs = adj.vertex_neighbors[i];
        if (nbrs.empty())
            continue;
        out.row(i) -= y.row(i);
        const Real w = 1.0 / static_cast<Real>(nbrs.size());
        for (int j : nbrs)
            out.row(j) += w * y.row(i);
    }
    return out;
}

} // namespace facefit

#endif // FACEFIT_MESH_HPP
