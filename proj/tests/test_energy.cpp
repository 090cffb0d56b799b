/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/test_energy.cpp
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
#include "facefit/energy.hpp"

#include "support/helpers.hpp"
#include "support/scene.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace facefit;
using facefit::testing::desk_head;
using facefit::testing::fd_steps;
using facefit::testing::make_scene;
using facefit::testing::perturb;
using facefit::testing::TestScene;
using Catch::Approx;

namespace {

EnergyWeights only(const char* term, Real value = 1.0)
{
    EnergyWeights w;
    w.w_pp = w.w_ps = w.w_col = w.w_lan = w.w_reg = w.w_flow = w.w_same = w.w_n = 0;
    std::string t = term;
    if (t == "pp")
        w.w_pp = value;
    else if (t == "ps")
        w.w_ps = value;
    else if (t == "col")
        w.w_col = value;
    else if (t == "lan")
        w.w_lan = value;
    else if (t == "reg")
        w.w_reg = value;
    else if (t == "n")
        w.w_n = value;
    return w;
}

struct FdCase
{
    TestScene scene;
    ParameterSet chi;
    RealGeometry real;
    FitContext ctx;
};

FdCase make_fd_case(uint64_t seed, int image_size = 56)
{
    FdCase c{make_scene(seed, image_size), {}, {}, {}};
    c.chi = perturb(*c.scene.model, c.scene.gt, seed * 31 + 7);
    c.real = compute_real_geometry(c.scene.frame.supervision.depth,
                                   c.scene.frame.supervision.intrinsics);
    c.ctx = build_fit_context(*c.scene.model, c.chi, c.scene.frame.supervision, c.real, true);
    return c;
}

Real check_term_gradient(const char* term, FitMode mode, uint64_t seed)
{
    FdCase c = make_fd_case(seed);
    const EnergyWeights w = only(term);
    const FaceModel& model = *c.scene.model;

    ParamGradient g = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    evaluate_single_frame(model, c.chi, c.scene.frame.supervision, c.ctx, w, mode, &g);

    ParameterSet proto = c.chi;
    auto energy = [&](const VecX& x) {
        ParameterSet chi = proto;
        chi.unpack(x);
        return evaluate_single_frame(model, chi, c.scene.frame.supervision, c.ctx, w, mode).total;
    };
    const VecX fd =
        facefit::testing::central_difference(energy, c.chi.pack(), fd_steps(model));
    return facefit::testing::gradient_relative_error(g.pack(), fd);
}

} // namespace

TEST_CASE("every data term is zero at the generating parameters", "[energy]")
{
    const auto scene = make_scene(200, 64);
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);
    const FitContext ctx =
        build_fit_context(*scene.model, scene.gt, scene.frame.supervision, real, true);
    EnergyWeights w; // defaults: everything on
    const EnergyBreakdown e =
        evaluate_single_frame(*scene.model, scene.gt, scene.frame.supervision, ctx, w,
                              FitMode::rgbd);
    CHECK(e.e_pp == 0.0);
    CHECK(e.e_ps == 0.0);
    CHECK(e.e_col == 0.0);
    CHECK(e.e_lan == 0.0);
    CHECK(e.data_total == 0.0);
    CHECK(e.e_reg > 0.0);
    CHECK(e.n_corr == e.n_visible);

    // rgb mode: the normal term is also exactly self-consistent.
    const EnergyBreakdown er =
        evaluate_single_frame(*scene.model, scene.gt, scene.frame.supervision, ctx,
                              EnergyWeights{}, FitMode::rgb);
    CHECK(er.e_n == 0.0);
}

TEST_CASE("e_pp value behaviors", "[energy]")
{
    const auto scene = make_scene(201, 64);
    const FaceModel& model = *scene.model;
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);
    const FitContext ctx =
        build_fit_context(model, scene.gt, scene.frame.supervision, real, true);
    const EnergyWeights w = only("pp");

    // A constant-offset translation of the real points shifts e_pp to |v|.
    FitContext shifted = ctx;
    const Vec3 offset(0.8, -0.5, 1.1);
    for (auto& item : shifted.corr.items)
        item.p_real += offset;
    const EnergyBreakdown e =
        evaluate_single_frame(model, scene.gt, scene.frame.supervision, shifted, w, FitMode::rgbd);
    const Real expect = std::sqrt(offset.squaredNorm() + w.eps_geo * w.eps_geo) - w.eps_geo;
    CHECK(e.e_pp == Approx(expect).epsilon(1e-9));
}

TEST_CASE("e_ps is blind to tangential offsets", "[energy]")
{
    const auto scene = make_scene(202, 64);
    const FaceModel& model = *scene.model;
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);
    FitContext ctx = build_fit_context(model, scene.gt, scene.frame.supervision, real, true);

    // Displace every real point tangentially to its own normal: the
    // point-to-surface term stays at zero while point-to-point grows.
    Rng rng(11);
    std::normal_distribution<Real> g(0, 1);
    for (auto& item : ctx.corr.items)
    {
        if (!item.normal_valid)
            continue;
        Vec3 t = item.n_real.cross(facefit::testing::random_unit(rng));
        if (t.norm() < 1e-8)
            continue;
        item.p_real += 2.0 * t.normalized();
    }
    const EnergyBreakdown e = evaluate_single_frame(model, scene.gt, scene.frame.supervision, ctx,
                                                    only("ps"), FitMode::rgbd);
    CHECK(e.e_ps < 1e-9);

    // Displacement along the normal by delta gives |delta| (smoothed).
    FitContext ctx2 = build_fit_context(model, scene.gt, scene.frame.supervision, real, true);
    const Real delta = 1.7;
    for (auto& item : ctx2.corr.items)
        if (item.normal_valid)
            item.p_real += delta * item.n_real;
    const EnergyBreakdown e2 = evaluate_single_frame(model, scene.gt, scene.frame.supervision,
                                                     ctx2, only("ps"), FitMode::rgbd);
    const EnergyWeights wd;
    CHECK(e2.e_ps == Approx(std::sqrt(delta * delta + wd.eps_geo * wd.eps_geo) - wd.eps_geo)
                         .epsilon(1e-9));
}

TEST_CASE("e_col constant channel offset", "[energy]")
{
    const auto scene = make_scene(203, 64);
    const FaceModel& model = *scene.model;
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);
    const FitContext ctx =
        build_fit_context(model, scene.gt, scene.frame.supervision, real, true);
    RGBDFrame offset_frame = scene.frame.supervision;
    for (int y = 0; y < offset_frame.color.height(); ++y)
        for (int x = 0; x < offset_frame.color.width(); ++x)
            offset_frame.color.at(x, y, 0) += 0.1;
    const EnergyBreakdown e =
        evaluate_single_frame(model, scene.gt, offset_frame, ctx, only("col"), FitMode::rgbd);
    const EnergyWeights wd;
    CHECK(e.e_col == Approx(std::sqrt(0.01 + wd.eps_col * wd.eps_col) - wd.eps_col).epsilon(1e-9));
}

TEST_CASE("e_lan squared-norm example and discard rule", "[energy]")
{
    const auto scene = make_scene(204, 64);
    const FaceModel& model = *scene.model;
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);

    // Single landmark off by (3,4): first term is 25 / |L|; here we keep one
    // landmark only so the value is exactly 25 (no eyelid pairs survive).
    RGBDFrame frame = scene.frame.supervision;
    const Landmark* nose = frame.find_landmark(0);
    REQUIRE(nose);
    RGBDFrame one;
    one.color = frame.color;
    one.depth = frame.depth;
    one.intrinsics = frame.intrinsics;
    one.landmarks = {Landmark{0, nose->position + Vec2(3, 4)}};
    const FitContext ctx = build_fit_context(model, scene.gt, one, real, false);
    REQUIRE(ctx.active_landmarks.size() == 1);
    const EnergyBreakdown e =
        evaluate_single_frame(model, scene.gt, one, ctx, only("lan"), FitMode::rgbd);
    CHECK(e.e_lan == Approx(25.0).epsilon(1e-9));

    // Yaw discard: only membership changes, retained values stay put.
    ParameterSet left = scene.gt;
    left.euler.y() = deg2rad(-9.0);
    const FitContext ctx_l = build_fit_context(model, left, frame, real, false);
    ParameterSet mid = scene.gt;
    mid.euler.y() = 0.0;
    const FitContext ctx_m = build_fit_context(model, mid, frame, real, false);
    int left_side = 0;
    for (const auto& lb : model.landmarks)
        if (lb.side == ContourSide::left)
            ++left_side;
    CHECK(ctx_m.active_landmarks.size() == ctx_l.active_landmarks.size() + left_side);
}

TEST_CASE("e_reg closed forms", "[energy]")
{
    const auto scene = make_scene(205, 32);
    const FaceModel& model = *scene.model;
    const RealGeometry real = compute_real_geometry(scene.frame.supervision.depth,
                                                    scene.frame.supervision.intrinsics);
    const FitContext ctx =
        build_fit_context(model, model.zero_parameters(), scene.frame.supervision, real, false);

    ParameterSet zero = model.zero_parameters();
    EnergyBreakdown e = evaluate_single_frame(model, zero, scene.frame.supervision, ctx,
                                              only("reg"), FitMode::rgbd);
    CHECK(e.e_reg == 0.0);

    ParameterSet unit = zero;
    unit.alpha_id = model.sigma_id;
    e = evaluate_single_frame(model, unit, scene.frame.supervision, ctx, only("reg"),
                              FitMode::rgbd);
    CHECK(e.e_reg == Approx(static_cast<Real>(model.k_id())).epsilon(1e-12));

    // Random case matches the explicit summation oracle.
    Rng rng(7);
    std::normal_distribution<Real> g(0, 1);
    ParameterSet chi = zero;
    for (int k = 0; k < model.k_id(); ++k)
        chi.alpha_id[k] = g(rng) * model.sigma_id[k];
    for (int l = 0; l < model.k_exp(); ++l)
        chi.alpha_exp[l] = g(rng) * model.sigma_exp[l];
    for (int a = 0; a < model.k_alb(); ++a)
        chi.alpha_alb[a] = g(rng);
    Real oracle = 0;
    for (int k = 0; k < model.k_id(); ++k)
        oracle += std::pow(chi.alpha_id[k] / model.sigma_id[k], 2);
    for (int l = 0; l < model.k_exp(); ++l)
        oracle += std::pow(chi.alpha_exp[l] / model.sigma_exp[l], 2);
    for (int a = 0; a < model.k_alb(); ++a)
        oracle += std::pow(chi.alpha_alb[a] / model.albedo.sigma[a], 2);
    e = evaluate_single_frame(model, chi, scene.frame.supervision, ctx, only("reg"), FitMode::rgbd);
    CHECK(e.e_reg == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences per term", "[energy]")
{
    struct TermCase
    {
        const char* term;
        FitMode mode;
    };
    const TermCase cases[] = {{"pp", FitMode::rgbd},
                              {"ps", FitMode::rgbd},
                              {"col", FitMode::rgbd},
                              {"lan", FitMode::rgbd},
                              {"reg", FitMode::rgbd},
                              {"n", FitMode::rgb}};
    for (const auto& tc : cases)
        for (uint64_t seed : {301u, 302u, 303u})
        {
            const Real err = check_term_gradient(tc.term, tc.mode, seed);
            INFO("term " << tc.term << " seed " << seed);
            CHECK(err < 1e-4);
        }
}

TEST_CASE("combined-weight gradient matches finite differences", "[energy]")
{
    FdCase c = make_fd_case(310);
    const FaceModel& model = *c.scene.model;
    EnergyWeights w; // defaults
    ParamGradient g = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    evaluate_single_frame(model, c.chi, c.scene.frame.supervision, c.ctx, w, FitMode::rgbd, &g);
    auto energy = [&](const VecX& x) {
        ParameterSet chi = c.chi;
        chi.unpack(x);
        return evaluate_single_frame(model, chi, c.scene.frame.supervision, c.ctx, w,
                                     FitMode::rgbd)
            .total;
    };
    const VecX fd = facefit::testing::central_difference(energy, c.chi.pack(), fd_steps(model));
    CHECK(facefit::testing::gradient_relative_error(g.pack(), fd) < 1e-4);
}

TEST_CASE("e_same values and gradients", "[energy]")
{
    const FaceModel& model = desk_head().model;
    Rng rng(8);
    ParameterSet a = model.zero_parameters(), b = model.zero_parameters();
    CHECK(e_same(a, b) == 0.0);

    a.alpha_id[0] = 1.0;
    CHECK(e_same(a, b) == Approx(1.0));

    std::normal_distribution<Real> g(0, 1);
    for (int k = 0; k < model.k_id(); ++k)
    {
        a.alpha_id[k] = g(rng);
        b.alpha_id[k] = g(rng);
    }
    for (int q = 0; q < model.k_alb(); ++q)
    {
        a.alpha_alb[q] = g(rng);
        b.alpha_alb[q] = g(rng);
    }
    const Real expect = (a.alpha_id - b.alpha_id).squaredNorm() +
                        (a.alpha_alb - b.alpha_alb).squaredNorm();
    CHECK(e_same(a, b) == Approx(expect).epsilon(1e-12));

    ParamGradient ga = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    ParamGradient gb = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    e_same(a, b, &ga, &gb, 1.0);
    CHECK((ga.alpha_id - 2.0 * (a.alpha_id - b.alpha_id)).norm() < 1e-12);
    CHECK((gb.alpha_id + 2.0 * (a.alpha_id - b.alpha_id)).norm() < 1e-12);
}

TEST_CASE("e_flow is zero for a static pair and matches finite differences", "[energy]")
{
    const FaceModel& model = desk_head().model;
    Rng rng(2101);
    const ParameterSet base = synth::sample_parameters(rng, model);
    const CameraIntrinsics K = synth::default_intrinsics(56);
    const auto script = synth::MotionScript::yaw_sweep(base, 2, deg2rad(4.0));
    auto frames = synth::generate_sequence(model, base, script, K,
                                           synth::AugmentationSpec::none(), rng);
    REQUIRE(frames.size() == 2);
    REQUIRE(frames[1].supervision.flow_to_previous.has_value());

    const RasterBuffer raster_prev =
        rasterize(model.mesh(frames[0].chi), frames[0].chi.pose(), K);

    // Zero at ground truth.
    const Real at_gt = e_flow(model, frames[1].chi, frames[0].chi, raster_prev,
                              *frames[1].supervision.flow_to_previous, K, K);
    CHECK(at_gt < 1e-16);

    // Static pair with zero flow is exactly zero.
    Image zero_flow(K.width, K.height, 2, 0.0);
    CHECK(e_flow(model, frames[0].chi, frames[0].chi, raster_prev, zero_flow, K, K) == 0.0);

    // Gradients w.r.t. both frames.
    const ParameterSet cur = perturb(model, frames[1].chi, 77, 0.15, 1.0, 2.0);
    const ParameterSet prev = perturb(model, frames[0].chi, 78, 0.15, 1.0, 2.0);
    ParamGradient gc = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    ParamGradient gp = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
    e_flow(model, cur, prev, raster_prev, *frames[1].supervision.flow_to_previous, K, K, &gc, &gp);

    auto energy_cur = [&](const VecX& x) {
        ParameterSet chi = cur;
        chi.unpack(x);
        return e_flow(model, chi, prev, raster_prev, *frames[1].supervision.flow_to_previous, K, K);
    };
    auto energy_prev = [&](const VecX& x) {
        ParameterSet chi = prev;
        chi.unpack(x);
        return e_flow(model, cur, chi, raster_prev, *frames[1].supervision.flow_to_previous, K, K);
    };
    const VecX steps = fd_steps(model);
    const VecX fd_cur = facefit::testing::central_difference(energy_cur, cur.pack(), steps);
    const VecX fd_prev = facefit::testing::central_difference(energy_prev, prev.pack(), steps);
    CHECK(facefit::testing::gradient_relative_error(gc.pack(), fd_cur) < 1e-4);
    CHECK(facefit::testing::gradient_relative_error(gp.pack(), fd_prev) < 1e-4);
}

TEST_CASE("total_loss composes weighted terms and rgb mode swaps geometry", "[energy]")
{
    FdCase c = make_fd_case(320);
    const FaceModel& model = *c.scene.model;
    EnergyWeights w; // defaults
    const EnergyBreakdown e = evaluate_single_frame(model, c.chi, c.scene.frame.supervision,
                                                    c.ctx, w, FitMode::rgbd);
    const Real hand = w.w_pp * e.e_pp + w.w_ps * e.e_ps + w.w_col * e.e_col + w.w_lan * e.e_lan +
                      w.w_reg * e.e_reg;
    CHECK(e.total == Approx(hand).epsilon(1e-12));

    // rgb mode is independent of w_pp and w_ps.
    EnergyWeights w2 = w;
    w2.w_pp = 123.0;
    w2.w_ps = 77.0;
    const EnergyBreakdown r1 = evaluate_single_frame(model, c.chi, c.scene.frame.supervision,
                                                     c.ctx, w, FitMode::rgb);
    const EnergyBreakdown r2 = evaluate_single_frame(model, c.chi, c.scene.frame.supervision,
                                                     c.ctx, w2, FitMode::rgb);
    CHECK(r1.total == Approx(r2.total).epsilon(1e-14));
    CHECK(r1.e_n > 0.0);
}

TEST_CASE("robust norms beat squared-l2 under gross outliers on a 1-DOF family", "[energy]")
{
    // Translation family chi(s) = gt + s * e_z; with a fraction of gross
    // depth outliers the robust minimizer stays closer to s = 0.
    const auto scene = make_scene(210, 56);
    const FaceModel& model = *scene.model;

    for (Real frac : {0.05, 0.10, 0.20})
    {
        Rng rng(1000 + static_cast<uint64_t>(frac * 100));
        Image depth = scene.frame.supervision.depth;
        std::uniform_real_distribution<Real> u01(0, 1);
        std::uniform_real_distribution<Real> mag(50.0, 150.0);
        for (int y = 0; y < depth.height(); ++y)
            for (int x = 0; x < depth.width(); ++x)
                if (depth.at(x, y) > 0 && u01(rng) < frac)
                    depth.at(x, y) += mag(rng); // one-sided: a biased corruption
        RGBDFrame noisy = scene.frame.supervision;
        noisy.depth = depth;
        const RealGeometry real = compute_real_geometry(depth, noisy.intrinsics);

        // Identity correspondences frozen from the ground-truth raster keep
        // the corrupted pixels in the residual set, isolating the norms
        // (the window re-search would mask outliers on its own).
        FitContext ctx = build_fit_context(model, scene.gt, noisy, real, true);
        ctx.corr.items.clear();
        const int w_img = ctx.raster.width;
        for (int idx : ctx.raster.visible)
        {
            const int x = idx % w_img, y = idx / w_img;
            if (real.xyz.at(x, y, 2) <= 0)
                continue;
            Correspondence item;
            item.pixel = idx;
            item.match_pixel = idx;
            item.p_real = real.xyz.rgb(x, y);
            item.normal_valid = real.normal_valid.at(x, y) > 0;
            if (item.normal_valid)
                item.n_real = real.normals.rgb(x, y);
            ctx.corr.items.push_back(item);
        }
        REQUIRE(!ctx.corr.items.empty());

        auto geo_energy = [&](Real s, EnergyWeights::NormMode mode) {
            ParameterSet chi = scene.gt;
            chi.translation.z() += s;
            EnergyWeights w = only("pp");
            w.w_ps = 1.0;
            w.norm_mode = mode;
            return evaluate_single_frame(model, chi, noisy, ctx, w, FitMode::rgbd).total;
        };
        auto minimize = [&](EnergyWeights::NormMode mode) {
            Real best_s = 0, best_e = std::numeric_limits<Real>::infinity();
            for (Real s = -4.0; s <= 20.0; s += 0.05)
            {
                const Real e = geo_energy(s, mode);
                if (e < best_e)
                {
                    best_e = e;
                    best_s = s;
                }
            }
            return best_s;
        };
        const Real bias_robust = std::abs(minimize(EnergyWeights::NormMode::robust));
        const Real bias_squared = std::abs(minimize(EnergyWeights::NormMode::squared));
        INFO("outlier fraction " << frac);
        CHECK(bias_robust < bias_squared);
    }
}
