/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/eval.hpp
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

#ifndef FACEFIT_EVAL_HPP
#define FACEFIT_EVAL_HPP

#include "facefit/energy.hpp"

namespace facefit {

struct FittingError
{
    Real mean = 0; // mm
    Real stddev = 0;
    int pixels = 0;
};

/**
 * Geometry fitting error: mean (and std) over visible pixels of the
 * point-to-point distances after a converged correspondence search — the
 * same quantity as E_pp without the epsilon smoothing.
 */
inline FittingError fitting_error(const FaceModel& model, const ParameterSet& chi,
                                  const RGBDFrame& frame, const RealGeometry& real)
{
    FittingError out;
    const RasterBuffer raster = rasterize(model.mesh(chi), chi.pose(), frame.intrinsics);
    const CorrespondenceSet corr = correspondence_search(raster, real);
    if (corr.empty())
        return out;
    Real sum = 0, sum2 = 0;
    for (const auto& c : corr.items)
    {
        const int x = c.pixel % raster.width, y = c.pixel / raster.width;
        const Real d = (raster.point_at(x, y) - c.p_real).norm();
        sum += d;
        sum2 += d * d;
    }
    out.pixels = static_cast<int>(corr.items.size());
    out.mean = sum / out.pixels;
    out.stddev = std::sqrt(std::max(Real(0), sum2 / out.pixels - out.mean * out.mean));
    return out;
}

/**
 * Per-frame jitter: the mean vertex displacement of each reconstruction
 * w.r.t. the mean reconstruction over the sequence (posed, camera space).
 */
inline std::vector<Real> jitter_series(const std::vector<MatX3>& posed_vertices)
{
    std::vector<Real> out;
    if (posed_vertices.empty())
        return out;
    MatX3 mean = MatX3::Zero(posed_vertices[0].rows(), 3);
    for (const auto& v : posed_vertices)
        mean += v;
    mean /= static_cast<Real>(posed_vertices.size());
    out.reserve(posed_vertices.size());
    for (const auto& v : posed_vertices)
    {
        Real acc = 0;
        for (int i = 0; i < v.rows(); ++i)
            acc += (v.row(i) - mean.row(i)).norm();
        out.push_back(acc / static_cast<Real>(v.rows()));
    }
    return out;
}

inline std::pair<Real, Real> mean_std(const std::vector<Real>& xs)
{
    if (xs.empty())
        return {0, 0};
    Real m = 0;
    for (Real x : xs)
        m += x;
    m /= xs.size();
    Real v = 0;
    for (Real x : xs)
        v += (x - m) * (x - m);
    return {m, std::sqrt(v / xs.size())};
}

inline Real pearson_correlation(const VecX& a, const VecX& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("pearson_correlation: size mismatch");
    const Real ma = a.mean(), mb = b.mean();
    const VecX da = a.array() - ma, db = b.array() - mb;
    const Real denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
    if (denom < 1e-30)
        return 0;
    return da.dot(db) / denom;
}

/// Mean per-vertex position error between two shapes (mm).
inline Real mean_vertex_error(const MatX3& a, const MatX3& b)
{
    Real acc = 0;
    for (int i = 0; i < a.rows(); ++i)
        acc += (a.row(i) - b.row(i)).norm();
    return acc / static_cast<Real>(a.rows());
}

/// Angular distance between two rotations, degrees.
inline Real rotation_error_deg(const Vec3& euler_a, const Vec3& euler_b)
{
    const Mat3 R = rotation_from_euler(euler_a) * rotation_from_euler(euler_b).transpose();
    const Real c = std::clamp((R.trace() - 1.0) / 2.0, Real(-1), Real(1));
    return rad2deg(std::acos(c));
}

struct EvaluationReport
{
    std::vector<Real> fitting_means; // per frame, mm
    std::vector<Real> fitting_stds;
    std::vector<Real> jitter; // per frame, mm
    Real fitting_mean = 0, fitting_std = 0;
    Real jitter_mean = 0, jitter_std = 0;
    std::vector<Real> rotation_errors_deg;    // vs ground truth, when known
    std::vector<Real> translation_errors_mm;
    std::vector<Real> vertex_errors_mm;
};

} // namespace facefit

#endif // FACEFIT_EVAL_HPP
