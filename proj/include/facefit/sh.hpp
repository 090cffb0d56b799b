/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/sh.hpp
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

#ifndef FACEFIT_SH_HPP
#define FACEFIT_SH_HPP

#include "facefit/core.hpp"

namespace facefit {

inline constexpr int kShBands = 3;
inline constexpr int kShCount = kShBands * kShBands; // 9

using ShVec = Eigen::Matrix<Real, kShCount, 1>;
using ShJacobian = Eigen::Matrix<Real, kShCount, 3>;
/// Per-channel SH lighting coefficients, rows = (r, g, b).
using ShCoeffs = Eigen::Matrix<Real, 3, kShCount>;

namespace detail {
// Real orthonormal SH constants, bands 0-2.
inline constexpr Real kSh0 = 0.28209479177387814;  // 1 / (2 sqrt(pi))
inline constexpr Real kSh1 = 0.4886025119029199;   // sqrt(3 / (4 pi))
inline constexpr Real kSh2_m2 = 1.0925484305920792; // sqrt(15 / (4 pi))
inline constexpr Real kSh2_0 = 0.31539156525252005; // sqrt(5 / (16 pi))
inline constexpr Real kSh2_2 = 0.5462742152960396;  // sqrt(15 / (16 pi)) * ... (x^2 - y^2)
} // namespace detail

/**
 * Real orthonormal spherical-harmonics basis, bands 0-2, evaluated at a unit
 * normal. Ordering: [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22] =
 * [const, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2] with the constants above.
 * Throws if the input deviates from unit length by more than 1e-6.
 */
inline ShVec sh_basis(const Vec3& n)
{
    if (std::abs(n.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("sh_basis: normal must be unit length");
    using namespace detail;
    const Real x = n.x(), y = n.y(), z = n.z();
    ShVec phi;
    phi[0] = kSh0;
    phi[1] = kSh1 * y;
    phi[2] = kSh1 * z;
    phi[3] = kSh1 * x;
    phi[4] = kSh2_m2 * x * y;
    phi[5] = kSh2_m2 * y * z;
    phi[6] = kSh2_0 * (3 * z * z - 1);
    phi[7] = kSh2_m2 * x * z;
    phi[8] = kSh2_2 * (x * x - y * y);
    return phi;
}

/// Unchecked variant for inner loops (caller guarantees unit length).
inline ShVec sh_basis_unchecked(const Vec3& n)
{
    using namespace detail;
    const Real x = n.x(), y = n.y(), z = n.z();
    ShVec phi;
    phi[0] = kSh0;
    phi[1] = kSh1 * y;
    phi[2] = kSh1 * z;
    phi[3] = kSh1 * x;
    phi[4] = kSh2_m2 * x * y;
    phi[5] = kSh2_m2 * y * z;
    phi[6] = kSh2_0 * (3 * z * z - 1);
    phi[7] = kSh2_m2 * x * z;
    phi[8] = kSh2_2 * (x * x - y * y);
    return phi;
}

/// 9x3 Jacobian of sh_basis w.r.t. the (unconstrained) normal components.
inline ShJacobian sh_basis_jacobian(const Vec3& n)
{
    using namespace detail;
    const Real x = n.x(), y = n.y(), z = n.z();
    ShJacobian J = ShJacobian::Zero();
    J(1, 1) = kSh1;
    J(2, 2) = kSh1;
    J(3, 0) = kSh1;
    J(4, 0) = kSh2_m2 * y;
    J(4, 1) = kSh2_m2 * x;
    J(5, 1) = kSh2_m2 * z;
    J(5, 2) = kSh2_m2 * y;
    J(6, 2) = kSh2_0 * 6 * z;
    J(7, 0) = kSh2_m2 * z;
    J(7, 2) = kSh2_m2 * x;
    J(8, 0) = kSh2_2 * 2 * x;
    J(8, 1) = -kSh2_2 * 2 * y;
    return J;
}

/**
 * Lambertian irradiance of a point with unit normal n, per-channel albedo b
 * and per-channel SH coefficients gamma: I_ch = b_ch * (phi(n) . gamma_ch).
 * No clamping; values are clamped only when images are exported.
 */
inline Vec3 irradiance(const Vec3& n, const Vec3& albedo, const ShCoeffs& gamma)
{
    const ShVec phi = sh_basis_unchecked(n);
    return albedo.cwiseProduct(gamma * phi);
}

} // namespace facefit

#endif // FACEFIT_SH_HPP
