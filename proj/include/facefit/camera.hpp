/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/camera.hpp
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

#ifndef FACEFIT_CAMERA_HPP
#define FACEFIT_CAMERA_HPP

#include "facefit/core.hpp"
#include "facefit/image.hpp"

#include <array>
#include <optional>

namespace facefit {

/**
 * Pinhole camera. Convention used everywhere in this library: the camera
 * looks down +z, x points right and y points down in the image, units are
 * millimeters in camera space and pixels in the image plane.
 */
struct CameraIntrinsics
{
    Real fx = 0, fy = 0;
    Real cx = 0, cy = 0;
    int width = 0, height = 0;

    CameraIntrinsics() = default;
    CameraIntrinsics(Real fx_, Real fy_, Real cx_, Real cy_, int w, int h)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h)
    {
        if (fx <= 0 || fy <= 0)
            throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
        if (cx < 0 || cx > w || cy < 0 || cy > h)
            throw std::invalid_argument("CameraIntrinsics: principal point outside image");
    }

    /// Intrinsics of the sub-image starting at integer pixel (x0, y0).
    /// Projection of any 3D point into the crop equals its projection into
    /// the full image minus the crop origin.
    CameraIntrinsics cropped(int x0, int y0, int w, int h) const
    {
        CameraIntrinsics out = *this;
        out.cx = cx - x0;
        out.cy = cy - y0;
        out.width = w;
        out.height = h;
        return out;
    }

    CameraIntrinsics flipped_horizontal() const
    {
        CameraIntrinsics out = *this;
        out.cx = (width - 1) - cx;
        return out;
    }
};

/// Rigid head pose: Euler angles (pitch, yaw, roll) in radians and a
/// translation in millimeters. R = Rz(roll) * Ry(yaw) * Rx(pitch).
struct Pose
{
    Vec3 euler = Vec3::Zero(); // (pitch, yaw, roll)
    Vec3 translation = Vec3::Zero();
};

inline Mat3 rotation_x(Real a)
{
    const Real c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return m;
}

inline Mat3 rotation_y(Real a)
{
    const Real c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return m;
}

inline Mat3 rotation_z(Real a)
{
    const Real c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

/// Rotation from Euler angles, composed as R = Rz(roll) * Ry(yaw) * Rx(pitch).
inline Mat3 rotation_from_euler(Real pitch, Real yaw, Real roll)
{
    return rotation_z(roll) * rotation_y(yaw) * rotation_x(pitch);
}

inline Mat3 rotation_from_euler(const Vec3& euler)
{
    return rotation_from_euler(euler.x(), euler.y(), euler.z());
}

/// Partial derivatives of rotation_from_euler w.r.t. (pitch, yaw, roll).
inline std::array<Mat3, 3> rotation_from_euler_derivs(const Vec3& euler)
{
    const Real p = euler.x(), y = euler.y(), r = euler.z();
    Mat3 dRx, dRy, dRz;
    {
        const Real c = std::cos(p), s = std::sin(p);
        dRx << 0, 0, 0, 0, -s, -c, 0, c, -s;
    }
    {
        const Real c = std::cos(y), s = std::sin(y);
        dRy << -s, 0, c, 0, 0, 0, -c, 0, -s;
    }
    {
        const Real c = std::cos(r), s = std::sin(r);
        dRz << -s, -c, 0, c, -s, 0, 0, 0, 0;
    }
    const Mat3 Rx = rotation_x(p), Ry = rotation_y(y), Rz = rotation_z(r);
    return {Rz * Ry * dRx, Rz * dRy * Rx, dRz * Ry * Rx};
}

/**
 * Perspective projection of a camera-space point to pixel coordinates.
 * Requires z > 0; returns nullopt for points at or behind the camera plane.
 */
inline std::optional<Vec2> project(const Vec3& p, const CameraIntrinsics& K)
{
    if (p.z() <= 0)
        return std::nullopt;
    return Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
}

/// 2x3 Jacobian of project() w.r.t. the camera-space point.
inline Eigen::Matrix<Real, 2, 3> project_jacobian(const Vec3& p, const CameraIntrinsics& K)
{
    Eigen::Matrix<Real, 2, 3> J;
    const Real iz = 1.0 / p.z();
    J << K.fx * iz, 0, -K.fx * p.x() * iz * iz, 0, K.fy * iz, -K.fy * p.y() * iz * iz;
    return J;
}

/// Unit-less ray direction through pixel (u, v): ((u-cx)/fx, (v-cy)/fy, 1).
inline Vec3 pixel_ray(Real u, Real v, const CameraIntrinsics& K)
{
    return Vec3((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
}

/// Back-projection of one depth sample to a camera-space point.
inline Vec3 back_project_pixel(int u, int v, Real depth_mm, const CameraIntrinsics& K)
{
    return pixel_ray(static_cast<Real>(u), static_cast<Real>(v), K) * depth_mm;
}

/**
 * Converts a depth image (mm, 0 = invalid) to a 3-channel XYZ image of
 * camera-space coordinates. Invalid pixels map to (0,0,0); z = 0 marks them.
 */
inline Image back_project(const Image& depth, const CameraIntrinsics& K)
{
    if (depth.channels() != 1)
        throw std::invalid_argument("back_project: depth image must have one channel");
    Image xyz(depth.width(), depth.height(), 3, 0.0);
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x)
        {
            const Real z = depth.at(x, y);
            if (z <= 0)
                continue;
            xyz.set_rgb(x, y, back_project_pixel(x, y, z, K));
        }
    return xyz;
}

} // namespace facefit

#endif // FACEFIT_CAMERA_HPP
