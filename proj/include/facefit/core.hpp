/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/core.hpp
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

#ifndef FACEFIT_CORE_HPP
#define FACEFIT_CORE_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace facefit {

using Real = double;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX3i = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Deterministic engine used for all randomness in the library.
using Rng = std::mt19937_64;

inline constexpr Real kPi = 3.14159265358979323846;

inline Real deg2rad(Real d) { return d * kPi / 180.0; }
inline Real rad2deg(Real r) { return r * 180.0 / kPi; }

/**
 * Smoothed Euclidean norm, zero at zero:
 *   |x|_eps = sqrt(|x|^2 + eps^2) - eps.
 *
 * Behaves like |x| for |x| >> eps and like |x|^2/(2 eps) near zero, so the
 * gradient vanishes smoothly at a zero residual. All l2,1 / l1 data terms
 * use this form.
 */
inline Real smooth_norm(const Vec3& x, Real eps)
{
    return std::sqrt(x.squaredNorm() + eps * eps) - eps;
}

/// Gradient of smooth_norm w.r.t. x.
inline Vec3 smooth_norm_grad(const Vec3& x, Real eps)
{
    return x / std::sqrt(x.squaredNorm() + eps * eps);
}

inline Real smooth_abs(Real x, Real eps) { return std::sqrt(x * x + eps * eps) - eps; }

inline Real smooth_abs_grad(Real x, Real eps) { return x / std::sqrt(x * x + eps * eps); }

/// Skew-symmetric matrix [v]x with [v]x w = v x w.
inline Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

/// Standard normal truncated at +/- limit standard deviations.
inline Real truncated_normal(Rng& rng, Real limit = 3.0)
{
    std::normal_distribution<Real> dist(0.0, 1.0);
    Real z = dist(rng);
    while (std::abs(z) > limit)
        z = dist(rng);
    return z;
}

} // namespace facefit

#endif // FACEFIT_CORE_HPP
