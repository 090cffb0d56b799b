/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/render.hpp
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

#ifndef FACEFIT_RENDER_HPP
#define FACEFIT_RENDER_HPP

#include "facefit/raster.hpp"
#include "facefit/sh.hpp"

namespace facefit {

struct RenderOptions
{
    /// Default shading interpolates vertex irradiance with the barycentric
    /// coordinates of the surface point. Flat shading evaluates the face
    /// normal instead (used by fine-scale self-consistency setups where the
    /// shading model is face-based).
    bool flat_shading = false;
};

struct RenderResult
{
    Image color; // 3 channels, unclamped; clamp on 8-bit export only
    Image depth; // 1 channel, mm
    RasterBuffer raster;
};

/// Per-vertex Lambertian irradiance under per-channel SH lighting, with
/// normals taken in camera space.
inline MatX3 vertex_irradiance(const MatX3& v_cam, const MatX3i& faces, const MatX3& albedo,
                               const ShCoeffs& gamma)
{
    const MeshNormals nrm = compute_normals(v_cam, faces, /*strict=*/false);
    const int n = static_cast<int>(v_cam.rows());
    MatX3 out(n, 3);
    for (int i = 0; i < n; ++i)
        out.row(i) =
            irradiance(nrm.vertex.row(i).transpose(), albedo.row(i).transpose(), gamma).transpose();
    return out;
}

/**
 * Renders the posed mesh: rasterization, then color by barycentric
 * interpolation of vertex irradiance (or per-face irradiance when flat) and
 * depth from the interpolated camera-space z.
 */
inline RenderResult render(const FaceMesh& mesh, const Pose& pose, const ShCoeffs& gamma,
                           const CameraIntrinsics& K, const RenderOptions& opt = {})
{
    RenderResult out;
    const MatX3 v_cam = transform_vertices(mesh.vertices, pose);
    out.raster = rasterize(v_cam, mesh.triangles, K);
    out.depth = out.raster.depth;
    out.color = Image(K.width, K.height, 3, 0.0);

    if (opt.flat_shading)
    {
        const MeshNormals nrm = compute_normals(v_cam, mesh.triangles, /*strict=*/false);
        for (int idx : out.raster.visible)
        {
            const int x = idx % K.width, y = idx / K.width;
            const int f = out.raster.tri_at(x, y);
            Vec3 alb = Vec3::Zero();
            for (int k = 0; k < 3; ++k)
                alb += mesh.albedo.row(mesh.triangles(f, k)).transpose();
            alb /= 3.0;
            out.color.set_rgb(x, y, irradiance(nrm.face.row(f).transpose(), alb, gamma));
        }
        return out;
    }

    const MatX3 c = vertex_irradiance(v_cam, mesh.triangles, mesh.albedo, gamma);
    for (int idx : out.raster.visible)
    {
        const int x = idx % K.width, y = idx / K.width;
        const int f = out.raster.tri_at(x, y);
        const Vec3& l = out.raster.bary_at(x, y);
        Vec3 col = Vec3::Zero();
        for (int k = 0; k < 3; ++k)
            col += l[k] * c.row(mesh.triangles(f, k)).transpose();
        out.color.set_rgb(x, y, col);
    }
    return out;
}

} // namespace facefit

#endif // FACEFIT_RENDER_HPP
