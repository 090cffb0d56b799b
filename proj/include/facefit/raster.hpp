/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/raster.hpp
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

#ifndef FACEFIT_RASTER_HPP
#define FACEFIT_RASTER_HPP

#include "facefit/camera.hpp"
#include "facefit/jacobians.hpp"
#include "facefit/mesh.hpp"

#include <limits>
#include <vector>

namespace facefit {

/**
 * Z-buffered visibility of a mesh: per pixel the covering front-facing
 * triangle (-1 if none), the barycentric coordinates of the exact
 * ray/triangle intersection, the interpolated (perspective-correct) depth,
 * and the camera-space intersection point. `visible` lists the covered
 * pixels (the set F), row-major.
 */
struct RasterBuffer
{
    int width = 0, height = 0;
    std::vector<int> tri;
    std::vector<Vec3> bary;
    Image depth; // 1 channel, mm; 0 where empty
    Image xyz;   // 3 channels, camera-space intersection points
    std::vector<int> visible;

    bool covered(int x, int y) const { return tri[static_cast<size_t>(y) * width + x] >= 0; }
    int tri_at(int x, int y) const { return tri[static_cast<size_t>(y) * width + x]; }
    const Vec3& bary_at(int x, int y) const { return bary[static_cast<size_t>(y) * width + x]; }
    Vec3 point_at(int x, int y) const { return xyz.rgb(x, y); }
};

/**
 * Scanline edge-function rasterizer over camera-space vertices.
 * Front-facing = outward normal toward the camera; ties on shared edges are
 * broken with a top-left fill rule so each boundary pixel is covered exactly
 * once. Depth and the stored surface point come from the exact ray/plane
 * intersection of the covering triangle (so back-projecting the depth map
 * lands on the mesh surface).
 */
inline RasterBuffer rasterize(const MatX3& v_cam, const MatX3i& faces, const CameraIntrinsics& K)
{
    constexpr Real kNear = 1e-3; // mm
    RasterBuffer rb;
    rb.width = K.width;
    rb.height = K.height;
    rb.tri.assign(static_cast<size_t>(K.width) * K.height, -1);
    rb.bary.assign(static_cast<size_t>(K.width) * K.height, Vec3::Zero());
    rb.depth = Image(K.width, K.height, 1, 0.0);
    rb.xyz = Image(K.width, K.height, 3, 0.0);

    const int n = static_cast<int>(v_cam.rows());
    std::vector<Vec2> proj(n);
    std::vector<char> in_front(n);
    for (int i = 0; i < n; ++i)
    {
        const Vec3 p = v_cam.row(i).transpose();
        in_front[i] = p.z() > kNear;
        if (in_front[i])
            proj[i] = Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
    }

    for (int f = 0; f < faces.rows(); ++f)
    {
        const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
        if (!in_front[i0] || !in_front[i1] || !in_front[i2])
            continue; // no near-plane clipping at desk scale; drop the triangle
        Vec2 p0 = proj[i0], p1 = proj[i1], p2 = proj[i2];
        Real area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
        // Outward-CCW triangles facing the camera project with negative
        // orientation in (x right, y down) pixel coordinates.
        if (area2 >= 0)
            continue;
        std::swap(p1, p2); // make the screen orientation positive
        const Vec3 v0 = v_cam.row(i0).transpose();
        const Vec3 v1 = v_cam.row(i1).transpose();
        const Vec3 v2 = v_cam.row(i2).transpose();

        const int xmin = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
        const int xmax =
            std::min(K.width - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
        const int ymin = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
        const int ymax =
            std::min(K.height - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
        if (xmin > xmax || ymin > ymax)
            continue;

        struct Edge
        {
            Real a, b, c; // E(x, y) = a x + b y + c
            bool top_left;
        };
        auto make_edge = [](const Vec2& s, const Vec2& e) {
            Edge ed;
            ed.a = -(e.y() - s.y());
            ed.b = e.x() - s.x();
            ed.c = -(ed.a * s.x() + ed.b * s.y());
            const Real dx = e.x() - s.x(), dy = e.y() - s.y();
            ed.top_left = (dy < 0) || (dy == 0 && dx > 0);
            return ed;
        };
        const Edge edges[3] = {make_edge(p0, p1), make_edge(p1, p2), make_edge(p2, p0)};

        for (int y = ymin; y <= ymax; ++y)
            for (int x = xmin; x <= xmax; ++x)
            {
                bool inside = true;
                for (const Edge& e : edges)
                {
                    const Real val = e.a * x + e.b * y + e.c;
                    if (val < 0 || (val == 0 && !e.top_left))
                    {
                        inside = false;
                        break;
                    }
                }
                if (!inside)
                    continue;
                Vec3 point;
                if (!intersect_ray_triangle(pixel_ray(x, y, K), v0, v1, v2, point))
                    continue;
                if (point.z() <= kNear)
                    continue;
                const size_t idx = static_cast<size_t>(y) * K.width + x;
                if (rb.tri[idx] >= 0 && rb.depth.at(x, y) <= point.z())
                    continue;
                rb.tri[idx] = f;
                rb.depth.at(x, y) = point.z();
                rb.xyz.set_rgb(x, y, point);
                rb.bary[idx] = barycentric(point, v0, v1, v2);
            }
    }

    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x)
            if (rb.covered(x, y))
                rb.visible.push_back(y * K.width + x);
    return rb;
}

inline MatX3 transform_vertices(const MatX3& v_model, const Pose& pose)
{
    const Mat3 R = rotation_from_euler(pose.euler);
    MatX3 out = v_model * R.transpose();
    out.rowwise() += pose.translation.transpose();
    return out;
}

inline RasterBuffer rasterize(const FaceMesh& mesh, const Pose& pose, const CameraIntrinsics& K)
{
    if (mesh.num_vertices() == 0 || mesh.num_triangles() == 0)
        throw std::invalid_argument("rasterize: empty mesh");
    return rasterize(transform_vertices(mesh.vertices, pose), mesh.triangles, K);
}

} // namespace facefit

#endif // FACEFIT_RASTER_HPP
