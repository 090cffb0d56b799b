/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/test_procedural.cpp
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
#include "facefit/procedural.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace facefit;
using Catch::Approx;

namespace {

const ProceduralHead& shared_head()
{
    static const ProceduralHead head = build_procedural_head(ProceduralConfig::desk());
    return head;
}

} // namespace

TEST_CASE("procedural head has the advertised desk-scale size", "[procedural]")
{
    const auto& head = shared_head();
    const ProceduralConfig cfg = ProceduralConfig::desk();
    CHECK(head.model.num_vertices() == cfg.num_vertices());
    CHECK(head.model.num_vertices() >= 1900);
    CHECK(head.model.k_id() == cfg.k_id());
    CHECK(head.model.k_exp() == cfg.k_exp());
    CHECK(head.model.albedo.k_alb() == cfg.k_alb);
    FaceMesh mesh{head.base, head.model.triangles, {}};
    CHECK_NOTHROW(mesh.validate());
}

TEST_CASE("the training grid is reconstructed exactly at the shipped ranks", "[procedural]")
{
    const auto& head = shared_head();
    // The additive construction has mode ranks (1 + id modes, 1 + exp
    // modes), which is exactly what the model requests.
    TensorBuildResult built =
        build_reduced_tensor(head.grid, head.model.k_id(), head.model.k_exp());
    Real scale = 0;
    for (const auto& s : head.grid.shapes)
        scale = std::max(scale, s.norm());
    Rng rng(1);
    std::uniform_int_distribution<int> pick_i(0, head.grid.n_id - 1);
    std::uniform_int_distribution<int> pick_j(0, head.grid.n_exp - 1);
    for (int trial = 0; trial < 8; ++trial)
    {
        const int i = pick_i(rng), j = pick_j(rng);
        const VecX r = assemble_geometry(built.tensor, built.scores_id.row(i).transpose(),
                                         built.scores_exp.row(j).transpose());
        CHECK((r - head.grid.shape(i, j)).norm() < 1e-7 * scale);
    }
}

TEST_CASE("zero parameters give a head near the grid mean", "[procedural]")
{
    const auto& head = shared_head();
    const ParameterSet chi = head.model.zero_parameters();
    const MatX3 geo = head.model.geometry(chi);
    VecX mean = VecX::Zero(3 * head.model.num_vertices());
    for (const auto& s : head.grid.shapes)
        mean += s;
    mean /= static_cast<Real>(head.grid.shapes.size());
    const Eigen::Map<const MatX3> mean3(mean.data(), head.model.num_vertices(), 3);
    Real max_err = 0;
    for (int i = 0; i < geo.rows(); ++i)
        max_err = std::max(max_err, (geo.row(i) - mean3.row(i)).norm());
    CHECK(max_err < 1.0); // mm; zero deviations reproduce the training mean
}

TEST_CASE("sampled faces stay finite-sized and well-formed", "[procedural]")
{
    const auto& head = shared_head();
    Rng rng(2026);
    for (int s = 0; s < 10; ++s)
    {
        ParameterSet chi = head.model.zero_parameters();
        for (int k = 0; k < head.model.k_id(); ++k)
            chi.alpha_id[k] = truncated_normal(rng) * head.model.sigma_id[k];
        for (int l = 0; l < head.model.k_exp(); ++l)
            chi.alpha_exp[l] = truncated_normal(rng) * head.model.sigma_exp[l];
        const MatX3 geo = head.model.geometry(chi);
        const Eigen::RowVector3d centroid = geo.colwise().mean();
        for (int i = 0; i < geo.rows(); ++i)
        {
            const Real r = (geo.row(i) - centroid).norm();
            CHECK(r > 20.0);
            CHECK(r < 220.0);
        }
        CHECK_NOTHROW(compute_normals(geo, head.model.triangles));
    }
}

TEST_CASE("albedo stays in [0,1] for 3-sigma samples", "[procedural]")
{
    const auto& head = shared_head();
    Rng rng(77);
    for (int s = 0; s < 10; ++s)
    {
        ParameterSet chi = head.model.zero_parameters();
        for (int a = 0; a < head.model.k_alb(); ++a)
            chi.alpha_alb[a] = truncated_normal(rng) * head.model.albedo.sigma[a];
        const MatX3 alb = head.model.albedo_rgb(chi);
        CHECK(alb.minCoeff() >= 0.0);
        CHECK(alb.maxCoeff() <= 1.0);
    }
}

TEST_CASE("landmarks bind distinct vertices with sensible sides", "[procedural]")
{
    const auto& head = shared_head();
    const auto& lms = head.model.landmarks;
    REQUIRE(lms.size() >= 20);
    for (size_t i = 0; i < lms.size(); ++i)
        for (size_t j = i + 1; j < lms.size(); ++j)
            CHECK(lms[i].vertex != lms[j].vertex);
    int left = 0, right = 0;
    for (const auto& lb : lms)
    {
        if (lb.side == ContourSide::left)
        {
            ++left;
            CHECK(head.base(lb.vertex, 0) < 0); // left contour sits at x < 0
        }
        if (lb.side == ContourSide::right)
        {
            ++right;
            CHECK(head.base(lb.vertex, 0) > 0);
        }
    }
    CHECK(left == 4);
    CHECK(right == 4);
    REQUIRE(head.model.eyelid_pairs.size() == 2);
    for (const auto& p : head.model.eyelid_pairs)
    {
        const Vec3 up = head.base.row(lms[p[0]].vertex).transpose();
        const Vec3 lo = head.base.row(lms[p[1]].vertex).transpose();
        CHECK(up.y() < lo.y()); // y grows downward
    }
}

TEST_CASE("uv chart is inside the unit square with the face at its center", "[procedural]")
{
    const auto& head = shared_head();
    CHECK(head.model.uv.minCoeff() >= 0.0);
    CHECK(head.model.uv.maxCoeff() <= 1.0);
    const int nose = head.model.landmarks[0].vertex;
    CHECK(head.model.uv(nose, 0) == Approx(0.5).margin(0.05));
}

TEST_CASE("out-of-span shapes are not representable by the shipped tensor", "[procedural]")
{
    const auto& head = shared_head();
    VecX idw = VecX::Zero(static_cast<int>(head.id_fields.size()));
    VecX extra = VecX::Ones(2) * 1.5;
    const MatX3 target = out_of_span_shape(head, idw, extra);
    const VecX t = Eigen::Map<const VecX>(target.data(), target.size());

    // Least-squares projection onto the identity mode with neutral
    // expression scores.
    const MatX m_id = mode_id_matrix(head.model.tensor, head.model.mean_score_exp);
    const VecX best = m_id.colPivHouseholderQr().solve(t);
    const Real residual = (m_id * best - t).norm() / std::sqrt(static_cast<Real>(target.rows()));
    CHECK(residual > 0.3); // mm RMS per vertex; genuinely outside the span
}
