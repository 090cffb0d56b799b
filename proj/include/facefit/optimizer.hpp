/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/optimizer.hpp
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

#ifndef FACEFIT_OPTIMIZER_HPP
#define FACEFIT_OPTIMIZER_HPP

#include "facefit/energy.hpp"

#include <chrono>
#include <functional>
#include <string>

namespace facefit {

/// Parameter blocks stepped in sequence each cycle. The ordering (lighting
/// and albedo first, then pose, then shape) is deliberate: the photometric
/// block is the best conditioned and stabilizes the others.
enum class ParamBlock
{
    lighting, // sh + alpha_alb
    pose,     // euler + translation
    shape     // alpha_id + alpha_exp
};

struct FitStage
{
    bool use_raster = true; // false: landmark + regularizer warmup
    EnergyWeights weights;
    int max_outer = 50;
    int block_cycles = 2;
    int steps_per_block = 4;
};

struct FitSchedule
{
    std::vector<FitStage> stages;
    Real energy_tol = 1e-5; // relative decrease per outer iteration

    /// Landmark warmup followed by the full loss.
    static FitSchedule standard(const EnergyWeights& w, FitMode mode = FitMode::rgbd)
    {
        (void)mode;
        FitSchedule s;
        FitStage warmup;
        warmup.use_raster = false;
        warmup.weights = EnergyWeights{};
        warmup.weights.w_pp = warmup.weights.w_ps = warmup.weights.w_col = warmup.weights.w_n = 0;
        warmup.weights.w_lan = w.w_lan > 0 ? w.w_lan : 0.5;
        warmup.weights.w_reg = w.w_reg;
        warmup.weights.norm_mode = w.norm_mode;
        warmup.max_outer = 20;
        warmup.block_cycles = 2;
        warmup.steps_per_block = 6;
        FitStage full;
        full.weights = w;
        full.max_outer = 50;
        s.stages = {warmup, full};
        return s;
    }

    /// Full loss only (an already-initialized fit, e.g. continuing a track).
    static FitSchedule full_only(const EnergyWeights& w, int max_outer = 50)
    {
        FitSchedule s;
        FitStage full;
        full.weights = w;
        full.max_outer = max_outer;
        s.stages = {full};
        return s;
    }
};

struct FitReport
{
    ParameterSet chi;
    std::vector<EnergyBreakdown> outer_energies; // after each outer iteration
    std::vector<Real> accepted_energies;         // every accepted inner step
    std::vector<int> correspondence_counts;
    bool converged = false;
    bool failed = false;
    std::string failure;
    int outer_iterations = 0;
    double wall_seconds = 0;
};

/// Frozen pair couplings used while tracking: the previous frame's final
/// raster and parameters anchor the flow and same-identity terms of the
/// frame being fitted.
struct TrackAnchors
{
    const RasterBuffer* raster_prev = nullptr;
    const Image* flow = nullptr; // defined on the previous frame's pixels
    CameraIntrinsics K_prev;
    const ParameterSet* chi_prev = nullptr;
    std::vector<const ParameterSet*> same_targets;
};

namespace detail {

/// Per-parameter step scales (descent runs in these units).
struct StepScales
{
    VecX id, exp, alb;
    Vec3 euler = Vec3::Constant(0.1);       // rad
    Vec3 translation = Vec3::Constant(10.0); // mm
    Real sh = 0.25;

    static StepScales from_model(const FaceModel& m)
    {
        StepScales s;
        s.id = m.sigma_id;
        s.exp = m.sigma_exp;
        s.alb = m.albedo.sigma;
        return s;
    }
};

inline void apply_block_step(ParameterSet& chi, const ParamGradient& g, const StepScales& s,
                             ParamBlock block, Real lr)
{
    switch (block)
    {
    case ParamBlock::lighting:
        chi.alpha_alb -= lr * s.alb.array().square().matrix().cwiseProduct(g.alpha_alb);
        chi.sh -= (lr * s.sh * s.sh) * g.sh;
        break;
    case ParamBlock::pose:
        chi.euler -= lr * s.euler.array().square().matrix().cwiseProduct(g.euler);
        chi.translation -= lr * s.translation.array().square().matrix().cwiseProduct(g.translation);
        break;
    case ParamBlock::shape:
        chi.alpha_id -= lr * s.id.array().square().matrix().cwiseProduct(g.alpha_id);
        chi.alpha_exp -= lr * s.exp.array().square().matrix().cwiseProduct(g.alpha_exp);
        break;
    }
}

inline Real block_gradient_measure(const ParamGradient& g, const StepScales& s, ParamBlock block)
{
    switch (block)
    {
    case ParamBlock::lighting:
        return g.alpha_alb.cwiseProduct(s.alb).squaredNorm() + s.sh * s.sh * g.sh.squaredNorm();
    case ParamBlock::pose:
        return g.euler.cwiseProduct(s.euler).squaredNorm() +
               g.translation.cwiseProduct(s.translation).squaredNorm();
    case ParamBlock::shape:
        return g.alpha_id.cwiseProduct(s.id).squaredNorm() +
               g.alpha_exp.cwiseProduct(s.exp).squaredNorm();
    }
    return 0;
}

} // namespace detail

/**
 * Minimizes the single-frame loss (plus optional frozen track anchors) over
 * the ParameterSet. Outer iterations rebuild rasterization and depth
 * correspondences (the non-rigid sparse ICP structure); inner iterations run
 * per-block preconditioned gradient descent with Armijo backtracking, so
 * accepted steps never increase the frozen-structure energy.
 */
inline FitReport fit_frame(const FaceModel& model, const RGBDFrame& frame, const ParameterSet& init,
                           const FitSchedule& schedule, FitMode mode,
                           const TrackAnchors* anchors = nullptr)
{
    const auto t_start = std::chrono::steady_clock::now();
    FitReport report;
    report.chi = init;

    const RealGeometry real = compute_real_geometry(frame.depth, frame.intrinsics);
    const detail::StepScales scales = detail::StepScales::from_model(model);
    const ParamBlock blocks[3] = {ParamBlock::lighting, ParamBlock::pose, ParamBlock::shape};

    for (const FitStage& stage : schedule.stages)
    {
        const EnergyWeights& w = stage.weights;
        Real lr[3] = {0.25, 0.25, 0.25};

        auto evaluate = [&](const ParameterSet& chi, const FitContext& ctx, ParamGradient* grad) {
            EnergyBreakdown e = evaluate_single_frame(model, chi, frame, ctx, w, mode, grad);
            if (anchors && stage.use_raster)
            {
                EnergyBreakdown pair;
                if (anchors->raster_prev && anchors->flow && w.w_flow > 0)
                    pair.e_flow = e_flow(model, chi, *anchors->chi_prev, *anchors->raster_prev,
                                         *anchors->flow, frame.intrinsics, anchors->K_prev, grad,
                                         nullptr, w.w_flow);
                if (w.w_same > 0)
                    for (const ParameterSet* target : anchors->same_targets)
                        pair.e_same += e_same(chi, *target, grad, nullptr, w.w_same);
                pair.total = w.w_flow * pair.e_flow + w.w_same * pair.e_same;
                e.add_pair(pair);
            }
            return e;
        };

        Real prev_outer_energy = std::numeric_limits<Real>::infinity();
        for (int outer = 0; outer < stage.max_outer; ++outer)
        {
            FitContext ctx = build_fit_context(model, report.chi, frame, real, stage.use_raster);
            if (stage.use_raster && ctx.corr.empty() && (w.w_pp > 0 || w.w_ps > 0 || w.w_n > 0))
            {
                report.failed = true;
                report.failure = "no overlap between rendered face and observed depth";
                break;
            }
            if (!stage.use_raster && ctx.active_landmarks.empty() && w.w_lan > 0)
            {
                report.failed = true;
                report.failure = "no usable landmarks";
                break;
            }

            EnergyBreakdown cur = evaluate(report.chi, ctx, nullptr);
            for (int cycle = 0; cycle < stage.block_cycles; ++cycle)
                for (int b = 0; b < 3; ++b)
                {
                    for (int step = 0; step < stage.steps_per_block; ++step)
                    {
                        ParamGradient g = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
                        cur = evaluate(report.chi, ctx, &g);
                        const Real measure = detail::block_gradient_measure(g, scales, blocks[b]);
                        if (measure < 1e-28)
                            break;
                        bool accepted = false;
                        Real trial_lr = lr[b];
                        for (int bt = 0; bt < 40; ++bt)
                        {
                            ParameterSet trial = report.chi;
                            detail::apply_block_step(trial, g, scales, blocks[b], trial_lr);
                            const EnergyBreakdown et = evaluate(trial, ctx, nullptr);
                            if (et.total <= cur.total - 1e-4 * trial_lr * measure)
                            {
                                report.chi = trial;
                                cur = et;
                                report.accepted_energies.push_back(et.total);
                                lr[b] = (bt == 0) ? std::min(trial_lr * 1.5, Real(1e6)) : trial_lr;
                                accepted = true;
                                break;
                            }
                            trial_lr *= 0.5;
                        }
                        if (!accepted)
                        {
                            lr[b] = std::max(trial_lr, Real(1e-12));
                            break;
                        }
                    }
                }

            report.outer_energies.push_back(cur);
            report.correspondence_counts.push_back(cur.n_corr);
            ++report.outer_iterations;

            if (std::isfinite(prev_outer_energy))
            {
                const Real rel =
                    (prev_outer_energy - cur.total) / std::max(std::abs(prev_outer_energy), Real(1e-12));
                if (rel < schedule.energy_tol)
                {
                    report.converged = true;
                    break;
                }
            }
            prev_outer_energy = cur.total;
        }
        if (report.failed)
            break;
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

/**
 * Joint minimization of two frames' single losses plus the pair terms
 * (flow between them, identity/albedo consistency). Blocks alternate
 * between the two frames; contexts are rebuilt per outer iteration.
 */
inline std::pair<FitReport, FitReport> fit_pair(const FaceModel& model, const RGBDFrame& frame_prev,
                                                const RGBDFrame& frame_cur,
                                                const ParameterSet& init_prev,
                                                const ParameterSet& init_cur,
                                                const EnergyWeights& w, FitMode mode,
                                                int max_outer = 50, Real energy_tol = 1e-5)
{
    if (!frame_cur.flow_to_previous)
        throw std::invalid_argument("fit_pair: current frame has no flow field");
    const auto t_start = std::chrono::steady_clock::now();
    FitReport rep_prev, rep_cur;
    rep_prev.chi = init_prev;
    rep_cur.chi = init_cur;

    const RealGeometry real_prev = compute_real_geometry(frame_prev.depth, frame_prev.intrinsics);
    const RealGeometry real_cur = compute_real_geometry(frame_cur.depth, frame_cur.intrinsics);
    const detail::StepScales scales = detail::StepScales::from_model(model);
    const ParamBlock blocks[3] = {ParamBlock::lighting, ParamBlock::pose, ParamBlock::shape};

    Real lr[2][3] = {{0.25, 0.25, 0.25}, {0.25, 0.25, 0.25}};
    Real prev_outer_energy = std::numeric_limits<Real>::infinity();
    bool converged = false;

    for (int outer = 0; outer < max_outer && !converged; ++outer)
    {
        FitContext ctx_prev = build_fit_context(model, rep_prev.chi, frame_prev, real_prev, true);
        FitContext ctx_cur = build_fit_context(model, rep_cur.chi, frame_cur, real_cur, true);
        if (ctx_prev.corr.empty() || ctx_cur.corr.empty())
        {
            rep_prev.failed = rep_cur.failed = true;
            rep_prev.failure = rep_cur.failure = "no overlap between rendered face and observed depth";
            break;
        }

        auto evaluate = [&](const ParameterSet& cp, const ParameterSet& cc, ParamGradient* gp,
                            ParamGradient* gc) {
            EnergyBreakdown ep = evaluate_single_frame(model, cp, frame_prev, ctx_prev, w, mode, gp);
            EnergyBreakdown ec = evaluate_single_frame(model, cc, frame_cur, ctx_cur, w, mode, gc);
            Real total = ep.total + ec.total;
            if (w.w_flow > 0)
                total += w.w_flow * e_flow(model, cc, cp, ctx_prev.raster, *frame_cur.flow_to_previous,
                                           frame_cur.intrinsics, frame_prev.intrinsics, gc, gp,
                                           w.w_flow);
            if (w.w_same > 0)
                total += w.w_same * e_same(cc, cp, gc, gp, w.w_same);
            return total;
        };

        Real cur = evaluate(rep_prev.chi, rep_cur.chi, nullptr, nullptr);
        for (int cycle = 0; cycle < 2; ++cycle)
            for (int fi = 0; fi < 2; ++fi)
                for (int b = 0; b < 3; ++b)
                    for (int step = 0; step < 3; ++step)
                    {
                        ParamGradient gp = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
                        ParamGradient gc = ParamGradient::zero(model.k_id(), model.k_exp(), model.k_alb());
                        cur = evaluate(rep_prev.chi, rep_cur.chi, &gp, &gc);
                        const ParamGradient& g = fi == 0 ? gp : gc;
                        const Real measure = detail::block_gradient_measure(g, scales, blocks[b]);
                        if (measure < 1e-28)
                            break;
                        bool accepted = false;
                        Real trial_lr = lr[fi][b];
                        for (int bt = 0; bt < 40; ++bt)
                        {
                            ParameterSet trial = fi == 0 ? rep_prev.chi : rep_cur.chi;
                            detail::apply_block_step(trial, g, scales, blocks[b], trial_lr);
                            const Real et = fi == 0 ? evaluate(trial, rep_cur.chi, nullptr, nullptr)
                                                    : evaluate(rep_prev.chi, trial, nullptr, nullptr);
                            if (et <= cur - 1e-4 * trial_lr * measure)
                            {
                                (fi == 0 ? rep_prev.chi : rep_cur.chi) = trial;
                                cur = et;
                                rep_prev.accepted_energies.push_back(et);
                                lr[fi][b] = (bt == 0) ? std::min(trial_lr * 1.5, Real(1e6)) : trial_lr;
                                accepted = true;
                                break;
                            }
                            trial_lr *= 0.5;
                        }
                        if (!accepted)
                            break;
                    }

        EnergyBreakdown ep = evaluate_single_frame(model, rep_prev.chi, frame_prev, ctx_prev, w, mode);
        EnergyBreakdown ec = evaluate_single_frame(model, rep_cur.chi, frame_cur, ctx_cur, w, mode);
        rep_prev.outer_energies.push_back(ep);
        rep_cur.outer_energies.push_back(ec);
        ++rep_prev.outer_iterations;
        ++rep_cur.outer_iterations;

        if (std::isfinite(prev_outer_energy))
        {
            const Real rel = (prev_outer_energy - cur) / std::max(std::abs(prev_outer_energy), Real(1e-12));
            if (rel < energy_tol)
                converged = true;
        }
        prev_outer_energy = cur;
    }

    rep_prev.converged = rep_cur.converged = converged;
    rep_prev.wall_seconds = rep_cur.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {rep_prev, rep_cur};
}

struct TrackOptions
{
    EnergyWeights weights;
    FitMode mode = FitMode::rgbd;
    uint64_t seed = 1;
    int max_outer_warm = 25;
};

/**
 * Tracks a sequence: frame 0 runs a landmark warmup from the mean face,
 * each later frame starts from the previous estimate and is coupled to it
 * through the flow term plus same-identity anchors (the previous frame and
 * one uniformly sampled earlier frame). A failed frame is re-initialized
 * from the warmup and recorded.
 */
inline std::vector<FitReport> track_sequence(const FaceModel& model,
                                             const std::vector<RGBDFrame>& frames,
                                             const TrackOptions& opt)
{
    if (frames.empty())
        throw std::invalid_argument("track_sequence: no frames");
    std::vector<FitReport> reports;
    reports.reserve(frames.size());
    std::vector<RasterBuffer> final_rasters(frames.size());

    for (size_t k = 0; k < frames.size(); ++k)
    {
        FitReport rep;
        if (k == 0)
        {
            rep = fit_frame(model, frames[0], model.zero_parameters(),
                            FitSchedule::standard(opt.weights, opt.mode), opt.mode);
        }
        else
        {
            TrackAnchors anchors;
            anchors.chi_prev = &reports[k - 1].chi;
            anchors.K_prev = frames[k - 1].intrinsics;
            anchors.raster_prev = &final_rasters[k - 1];
            if (frames[k].flow_to_previous)
                anchors.flow = &*frames[k].flow_to_previous;
            anchors.same_targets.push_back(&reports[k - 1].chi);
            if (k >= 2)
            {
                Rng rng(opt.seed * 1000003ull + k);
                std::uniform_int_distribution<size_t> pick(0, k - 2);
                anchors.same_targets.push_back(&reports[pick(rng)].chi);
            }
            rep = fit_frame(model, frames[k], reports[k - 1].chi,
                            FitSchedule::full_only(opt.weights, opt.max_outer_warm), opt.mode,
                            &anchors);
            if (rep.failed)
                rep = fit_frame(model, frames[k], model.zero_parameters(),
                                FitSchedule::standard(opt.weights, opt.mode), opt.mode);
        }
        final_rasters[k] = rasterize(model.mesh(rep.chi), rep.chi.pose(), frames[k].intrinsics);
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace facefit

#endif // FACEFIT_OPTIMIZER_HPP
