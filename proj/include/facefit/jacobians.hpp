/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/jacobians.hpp
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

#ifndef FACEFIT_JACOBIANS_HPP
#define FACEFIT_JACOBIANS_HPP

#include "facefit/core.hpp"

#include <array>

namespace facefit {

/// Jacobians of the unnormalized triangle normal n = (v1-v0) x (v2-v0)
/// w.r.t. each vertex. dn/dv1 = -[e2]x, dn/dv2 = [e1]x, dn/dv0 = [e2]x-[e1]x.
inline std::array<Mat3, 3> face_normal_jacobians(const Vec3& v0, const Vec3& v1, const Vec3& v2)
{
    const Mat3 se1 = skew(v1 - v0);
    const Mat3 se2 = skew(v2 - v0);
    return {se2 - se1, -se2, se1};
}

/// d(x/|x|)/dx = (I - u u^T)/|x| with u = x/|x|.
inline Mat3 normalize_jacobian(const Vec3& x)
{
    const Real len = x.norm();
    const Vec3 u = x / len;
    return (Mat3::Identity() - u * u.transpose()) / len;
}

/**
 * Intersection of the ray {t * dir : t > 0} with the plane of triangle
 * (v0, v1, v2), together with the 3x3 Jacobians of the intersection point
 * w.r.t. each vertex. The ray origin is the camera center (origin).
 *
 * Point: p = dir * (n.v0) / (n.dir) with n the unnormalized face normal.
 * The intersection is the perspective-correct surface point seen through a
 * pixel, so differentiating it is what "differentiating the barycentric
 * weights and depths" of the rasterizer means.
 */
struct RayTriangleIntersection
{
    Vec3 point;
    std::array<Mat3, 3> d_point_d_vertex;
    bool valid = false;
};

inline RayTriangleIntersection intersect_ray_triangle_grad(const Vec3& dir, const Vec3& v0,
                                                           const Vec3& v1, const Vec3& v2)
{
    RayTriangleIntersection out;
    const Vec3 n = (v1 - v0).cross(v2 - v0);
    const Real q = n.dot(dir);
    if (std::abs(q) < 1e-14)
        return out;
    const Real s = n.dot(v0);
    const Real alpha = s / q;
    out.point = dir * alpha;
    const auto dn = face_normal_jacobians(v0, v1, v2);
    for (int k = 0; k < 3; ++k)
    {
        // ds/dvk = dn/dvk^T v0 (+ n for k == 0); dq/dvk = dn/dvk^T dir
        Vec3 ds = dn[k].transpose() * v0;
        if (k == 0)
            ds += n;
        const Vec3 dq = dn[k].transpose() * dir;
        const Vec3 dalpha = (ds * q - s * dq) / (q * q);
        out.d_point_d_vertex[k] = dir * dalpha.transpose();
    }
    out.valid = true;
    return out;
}

/// Plain value version for hot loops that do not need derivatives.
inline bool intersect_ray_triangle(const Vec3& dir, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                                   Vec3& point)
{
    const Vec3 n = (v1 - v0).cross(v2 - v0);
    const Real q = n.dot(dir);
    if (std::abs(q) < 1e-14)
        return false;
    point = dir * (n.dot(v0) / q);
    return true;
}

/**
 * Barycentric coordinates of a point w.r.t. a triangle (solving the 2x2
 * normal equations in the triangle plane), with Jacobians w.r.t. the point
 * and the three vertices. The point is assumed (approximately) coplanar with
 * the triangle; out-of-plane components are projected away by construction.
 */
struct BarycentricGrad
{
    Vec3 lambda;                         // (l0, l1, l2), sums to 1
    std::array<Vec3, 3> d_lambda_d_p;    // d lambda_k / d point (rows)
    std::array<Mat3, 3> d_lambda_d_v;    // d lambda / d v_k : (k) -> 3x3, row i = d lambda_i / d v_k
    bool valid = false;
};

inline BarycentricGrad barycentric_grad(const Vec3& p, const Vec3& v0, const Vec3& v1, const Vec3& v2)
{
    BarycentricGrad out;
    const Vec3 e1 = v1 - v0, e2 = v2 - v0, r = p - v0;
    const Real a = e1.dot(e1), b = e1.dot(e2), c = e2.dot(e2);
    const Real det = a * c - b * b;
    if (std::abs(det) < 1e-18)
        return out;
    const Real u1 = e1.dot(r), u2 = e2.dot(r);
    const Real l1 = (c * u1 - b * u2) / det;
    const Real l2 = (a * u2 - b * u1) / det;
    out.lambda = Vec3(1.0 - l1 - l2, l1, l2);

    // Derivatives of (l1, l2) via d(G^-1 u) = G^-1 (du - dG * l).
    Eigen::Matrix2d G;
    G << a, b, b, c;
    const Eigen::Matrix2d Ginv = G.inverse();

    auto assemble = [&](const Vec3& da, const Vec3& db, const Vec3& dc, const Vec3& du1,
                        const Vec3& du2) {
        // Each input is the gradient (w.r.t. one 3-vector) of the scalars.
        Eigen::Matrix<Real, 2, 3> dU, dGl;
        dU.row(0) = du1.transpose();
        dU.row(1) = du2.transpose();
        dGl.row(0) = (da * l1 + db * l2).transpose();
        dGl.row(1) = (db * l1 + dc * l2).transpose();
        const Eigen::Matrix<Real, 2, 3> dl12 = Ginv * (dU - dGl);
        Mat3 full;
        full.row(1) = dl12.row(0);
        full.row(2) = dl12.row(1);
        full.row(0) = -(dl12.row(0) + dl12.row(1));
        return full;
    };

    // w.r.t. p: only u1, u2 depend on it.
    {
        Eigen::Matrix<Real, 2, 3> dU;
        dU.row(0) = e1.transpose();
        dU.row(1) = e2.transpose();
        const Eigen::Matrix<Real, 2, 3> dl12 = Ginv * dU;
        out.d_lambda_d_p[1] = dl12.row(0).transpose();
        out.d_lambda_d_p[2] = dl12.row(1).transpose();
        out.d_lambda_d_p[0] = -(out.d_lambda_d_p[1] + out.d_lambda_d_p[2]);
    }
    // w.r.t. v0: e1, e2, r all change by -I.
    out.d_lambda_d_v[0] = assemble(-2 * e1, -(e1 + e2), -2 * e2, -(r + e1), -(r + e2));
    // w.r.t. v1: e1 changes by I.
    out.d_lambda_d_v[1] = assemble(2 * e1, e2, Vec3::Zero(), r, Vec3::Zero());
    // w.r.t. v2: e2 changes by I.
    out.d_lambda_d_v[2] = assemble(Vec3::Zero(), e1, 2 * e2, Vec3::Zero(), r);
    out.valid = true;
    return out;
}

/// Value-only barycentric coordinates (same projection as barycentric_grad).
inline Vec3 barycentric(const Vec3& p, const Vec3& v0, const Vec3& v1, const Vec3& v2)
{
    const Vec3 e1 = v1 - v0, e2 = v2 - v0, r = p - v0;
    const Real a = e1.dot(e1), b = e1.dot(e2), c = e2.dot(e2);
    const Real det = a * c - b * b;
    const Real u1 = e1.dot(r), u2 = e2.dot(r);
    const Real l1 = (c * u1 - b * u2) / det;
    const Real l2 = (a * u2 - b * u1) / det;
    return Vec3(1.0 - l1 - l2, l1, l2);
}

} // namespace facefit

#endif // FACEFIT_JACOBIANS_HPP
