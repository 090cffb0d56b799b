/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/test_mesh.cpp
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
#include "facefit/mesh.hpp"

#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace facefit;
using facefit::testing::make_icosphere;
using facefit::testing::make_plane_grid;
using Catch::Approx;

TEST_CASE("axis-aligned triangle gets the expected normal", "[mesh]")
{
    FaceMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    mesh.triangles.resize(1, 3);
    mesh.triangles << 0, 1, 2;
    const MeshNormals n = compute_normals(mesh);
    CHECK((n.face.row(0).transpose() - Vec3(0, 0, 1)).norm() < 1e-15);
    for (int i = 0; i < 3; ++i)
        CHECK((n.vertex.row(i).transpose() - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("icosphere vertex normals agree with the analytic sphere", "[mesh]")
{
    const FaceMesh mesh = make_icosphere(2, 10.0);
    const MeshNormals n = compute_normals(mesh);
    for (int i = 0; i < mesh.num_vertices(); ++i)
    {
        const Vec3 exact = mesh.vertices.row(i).normalized();
        const Real angle = rad2deg(std::acos(std::clamp(
            exact.dot(n.vertex.row(i).transpose()), Real(-1), Real(1))));
        CHECK(angle < 2.0);
    }
}

TEST_CASE("normals are translation invariant", "[mesh]")
{
    FaceMesh mesh = make_icosphere(1, 5.0);
    const MeshNormals before = compute_normals(mesh);
    mesh.vertices.rowwise() += Eigen::RowVector3d(13.0, -7.0, 101.0);
    const MeshNormals after = compute_normals(mesh);
    CHECK((before.face - after.face).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((before.vertex - after.vertex).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-area triangle raises a degenerate-geometry error", "[mesh]")
{
    FaceMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 0, 0, 0, 1, 1, 1, 2, 2, 2; // collinear
    mesh.triangles.resize(1, 3);
    mesh.triangles << 0, 1, 2;
    CHECK_THROWS_AS(compute_normals(mesh), std::domain_error);
    CHECK_NOTHROW(compute_normals(mesh, /*strict=*/false));
}

TEST_CASE("graph Laplacian annihilates interior of a flat grid and constants", "[mesh]")
{
    const FaceMesh mesh = make_plane_grid(6, 6, 2.0);
    const MeshAdjacency adj = MeshAdjacency::build(mesh);
    const MatX lap = apply_graph_laplacian(mesh.vertices, adj);
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 5; ++x)
            CHECK(lap.row(y * 6 + x).norm() < 1e-12);

    // Constant shift is invisible.
    MatX shifted = mesh.vertices;
    shifted.col(2).array() += 3.5;
    const MatX lap2 = apply_graph_laplacian(shifted, adj);
    CHECK((lap - lap2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("graph Laplacian adjoint satisfies the inner-product identity", "[mesh]")
{
    const FaceMesh mesh = make_icosphere(1, 3.0);
    const MeshAdjacency adj = MeshAdjacency::build(mesh);
    Rng rng(61);
    std::normal_distribution<Real> g(0, 1);
    MatX x(mesh.num_vertices(), 3), y(mesh.num_vertices(), 3);
    for (int i = 0; i < mesh.num_vertices(); ++i)
        for (int c = 0; c < 3; ++c)
        {
            x(i, c) = g(rng);
            y(i, c) = g(rng);
        }
    const Real lhs = (apply_graph_laplacian(x, adj).cwiseProduct(y)).sum();
    const Real rhs = (x.cwiseProduct(apply_graph_laplacian_adjoint(y, adj))).sum();
    CHECK(lhs == Approx(rhs).margin(1e-10));
}

TEST_CASE("adjacency edges are consistent", "[mesh]")
{
    const FaceMesh mesh = make_icosphere(1, 1.0);
    const MeshAdjacency adj = MeshAdjacency::build(mesh);
    // Closed manifold: every edge flanked by exactly two faces, E = 3V - 6.
    CHECK(static_cast<int>(adj.edges.size()) == 3 * mesh.num_vertices() - 6);
    for (const auto& ef : adj.edge_faces)
    {
        CHECK(ef[0] >= 0);
        CHECK(ef[1] >= 0);
    }
}
