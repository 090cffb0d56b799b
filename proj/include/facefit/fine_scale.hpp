/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/fine_scale.hpp
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

#ifndef FACEFIT_FINE_SCALE_HPP
#define FACEFIT_FINE_SCALE_HPP

#include "facefit/energy.hpp"
#include "facefit/model.hpp"
#include "facefit/raster.hpp"

namespace facefit {

/**
 * UV chart of the face mesh: per-vertex coordinates in [0,1]^2 plus a baked
 * texel-to-surface map (covering triangle and barycentric weights per texel
 * center). Triangles crossing the chart seam (u extent > 0.5) are not baked,
 * keeping the covered interior injective.
 */
struct UVChart
{
    int resolution = 128;
    MatX uv; // n x 2
    std::vector<int> texel_tri;
    std::vector<Vec3> texel_bary;

    bool texel_valid(int x, int y) const
    {
        return texel_tri[static_cast<size_t>(y) * resolution + x] >= 0;
    }

    static UVChart build(const MatX& uv, const MatX3i& F, int resolution)
    {
        UVChart chart;
        chart.resolution = resolution;
        chart.uv = uv;
        chart.texel_tri.assign(static_cast<size_t>(resolution) * resolution, -1);
        chart.texel_bary.assign(static_cast<size_t>(resolution) * resolution, Vec3::Zero());
        for (int f = 0; f < F.rows(); ++f)
        {
            const Vec2 a = uv.row(F(f, 0)).transpose();
            const Vec2 b = uv.row(F(f, 1)).transpose();
            const Vec2 c = uv.row(F(f, 2)).transpose();
            const Real umin = std::min({a.x(), b.x(), c.x()});
            const Real umax = std::max({a.x(), b.x(), c.x()});
            if (umax - umin > 0.5) // seam crosser
                continue;
            const Real det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
            if (std::abs(det) < 1e-16)
                continue;
            const int x0 = std::max(0, static_cast<int>(std::floor(umin * resolution - 1)));
            const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(umax * resolution + 1)));
            const Real vmin = std::min({a.y(), b.y(), c.y()});
            const Real vmax = std::max({a.y(), b.y(), c.y()});
            const int y0 = std::max(0, static_cast<int>(std::floor(vmin * resolution - 1)));
            const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(vmax * resolution + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                {
                    const Vec2 p((x + 0.5) / resolution, (y + 0.5) / resolution);
                    const Real l1 =
                        ((p.x() - a.x()) * (c.y() - a.y()) - (p.y() - a.y()) * (c.x() - a.x())) / det;
                    const Real l2 =
                        ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x())) / det;
                    const Real l0 = 1.0 - l1 - l2;
                    if (l0 < 0 || l1 < 0 || l2 < 0)
                        continue;
                    const size_t idx = static_cast<size_t>(y) * resolution + x;
                    if (chart.texel_tri[idx] >= 0)
                        continue;
                    chart.texel_tri[idx] = f;
                    chart.texel_bary[idx] = Vec3(l0, l1, l2);
                }
        }
        return chart;
    }
};

/// Per-vertex scalar displacements along the (frozen) medium-scale vertex
/// normals, with a baked single-channel UV-image view.
struct DisplacementField
{
    VecX d; // mm
    Image uv_image;

    static DisplacementField bake(const VecX& d, const UVChart& chart, const MatX3i& F)
    {
        DisplacementField out;
        out.d = d;
        out.uv_image = Image(chart.resolution, chart.resolution, 1, 0.0);
        for (int y = 0; y < chart.resolution; ++y)
            for (int x = 0; x < chart.resolution; ++x)
            {
                const size_t idx = static_cast<size_t>(y) * chart.resolution + x;
                const int f = chart.texel_tri[idx];
                if (f < 0)
                    continue;
                const Vec3& l = chart.texel_bary[idx];
                out.uv_image.at(x, y) =
                    l[0] * d[F(f, 0)] + l[1] * d[F(f, 1)] + l[2] * d[F(f, 2)];
            }
        return out;
    }
};

/// 4-channel UV input: intensity + camera-space XYZ of the medium mesh.
struct UVInputMap
{
    Image map;   // channels: intensity, x, y, z
    Image valid; // 1 channel, 0/1
};

/**
 * Bakes the fine-scale network inputs: per valid texel, the image intensity
 * sampled at the projection of the medium-scale surface point (bilinear) and
 * the point's camera-space coordinates. Texels that fall outside the image
 * or are occluded (rendered depth in front of the point) are invalid.
 */
inline UVInputMap bake_uv_inputs(const MatX3& v_cam, const MatX3i& F, const UVChart& chart,
                                 const Image& color, const CameraIntrinsics& K,
                                 const RasterBuffer& raster)
{
    if (chart.uv.rows() != v_cam.rows())
        throw std::invalid_argument("bake_uv_inputs: chart does not match mesh");
    UVInputMap out;
    const int res = chart.resolution;
    out.map = Image(res, res, 4, 0.0);
    out.valid = Image(res, res, 1, 0.0);
    constexpr Real kOcclusionTol = 2.0; // mm
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
        {
            const size_t idx = static_cast<size_t>(y) * res + x;
            const int f = chart.texel_tri[idx];
            if (f < 0)
                continue;
            const Vec3& l = chart.texel_bary[idx];
            Vec3 p = Vec3::Zero();
            for (int k = 0; k < 3; ++k)
                p += l[k] * v_cam.row(F(f, k)).transpose();
            const auto q = project(p, K);
            if (!q || q->x() < 1 || q->x() > K.width - 2 || q->y() < 1 || q->y() > K.height - 2)
                continue;
            const int qx = static_cast<int>(std::lround(q->x()));
            const int qy = static_cast<int>(std::lround(q->y()));
            if (!raster.covered(qx, qy) || raster.depth.at(qx, qy) < p.z() - kOcclusionTol)
                continue;
            const Real intensity = (color.sample_bilinear(q->x(), q->y(), 0) +
                                    color.sample_bilinear(q->x(), q->y(), 1) +
                                    color.sample_bilinear(q->x(), q->y(), 2)) /
                                   3.0;
            out.map.at(x, y, 0) = intensity;
            out.map.at(x, y, 1) = p.x();
            out.map.at(x, y, 2) = p.y();
            out.map.at(x, y, 3) = p.z();
            out.valid.at(x, y) = 1.0;
        }
    return out;
}

/**
 * p_i' = p_i + d_i n_i with the medium-scale vertex normals. Displacements
 * beyond d_max are clamped; the count of clamped entries is returned via
 * n_clamped.
 */
inline MatX3 apply_displacements(const MatX3& v, const MatX3& normals, const VecX& d, Real d_max,
                                 int* n_clamped = nullptr)
{
    if (d.size() != v.rows())
        throw std::invalid_argument("apply_displacements: size mismatch");
    MatX3 out = v;
    int clamped = 0;
    for (int i = 0; i < v.rows(); ++i)
    {
        Real di = d[i];
        if (std::abs(di) > d_max)
        {
            di = std::clamp(di, -d_max, d_max);
            ++clamped;
        }
        out.row(i) += di * normals.row(i);
    }
    if (n_clamped)
        *n_clamped = clamped;
    return out;
}

/**
 * Frozen inputs of one fine-scale solve: the camera-space medium mesh, its
 * vertex normals (displacement directions), per-face effective lighting
 * vectors, the sampled per-face intensities, validity flags, and the valid
 * face-adjacency edges. All sampled quantities stay fixed for the solve.
 */
struct FineContext
{
    MatX3 v_medium;
    MatX3 n_medium; // unit vertex normals, frozen
    MatX3i faces;
    MeshAdjacency adjacency;
    MatX face_gamma;          // m x 9 effective per-face SH vector
    VecX c;                   // m sampled intensities
    std::vector<char> face_valid;
    std::vector<std::array<int, 2>> valid_edges;
    MatX3 prev_face_normals;  // empty when no previous frame

    int num_faces() const { return static_cast<int>(faces.rows()); }
};

/**
 * Builds the fine-scale context from a medium-scale fit: per-face albedo is
 * the barycentric average at the face center, effective lighting is the
 * channel mean of albedo-weighted SH coefficients, intensities are sampled
 * at the projected face centers (bilinear). A face is valid when its center
 * projects inside the image and its bilinear support lies on the face
 * itself (visible, unoccluded, not crossing a silhouette).
 */
inline FineContext build_fine_context(const FaceModel& model, const ParameterSet& chi,
                                      const RGBDFrame& frame,
                                      const MatX3* prev_face_normals = nullptr)
{
    FineContext ctx;
    const MatX3 P = model.geometry(chi);
    ctx.faces = model.triangles;
    ctx.adjacency = model.adjacency;
    ctx.v_medium = transform_vertices(P, chi.pose());
    const MeshNormals nrm = compute_normals(ctx.v_medium, ctx.faces, /*strict=*/false);
    ctx.n_medium = nrm.vertex;

    const MatX3 albedo = model.albedo_rgb(chi);
    const int m = ctx.num_faces();
    ctx.face_gamma.resize(m, kShCount);
    ctx.c = VecX::Zero(m);
    ctx.face_valid.assign(m, 0);

    const RasterBuffer raster = rasterize(ctx.v_medium, ctx.faces, frame.intrinsics);
    const CameraIntrinsics& K = frame.intrinsics;
    for (int f = 0; f < m; ++f)
    {
        Vec3 center = Vec3::Zero(), b = Vec3::Zero();
        for (int k = 0; k < 3; ++k)
        {
            center += ctx.v_medium.row(ctx.faces(f, k)).transpose();
            b += albedo.row(ctx.faces(f, k)).transpose();
        }
        center /= 3.0;
        b /= 3.0;
        Eigen::Matrix<Real, kShCount, 1> g = Eigen::Matrix<Real, kShCount, 1>::Zero();
        for (int ch = 0; ch < 3; ++ch)
            g += (b[ch] / 3.0) * chi.sh.row(ch).transpose();
        ctx.face_gamma.row(f) = g.transpose();

        const auto q = project(center, K);
        if (!q || q->x() < 1 || q->x() > K.width - 2 || q->y() < 1 || q->y() > K.height - 2)
            continue;
        const int x0 = static_cast<int>(std::floor(q->x()));
        const int y0 = static_cast<int>(std::floor(q->y()));
        bool support_ok = true;
        for (int dy = 0; dy <= 1 && support_ok; ++dy)
            for (int dx = 0; dx <= 1; ++dx)
                if (!raster.covered(x0 + dx, y0 + dy) || raster.tri_at(x0 + dx, y0 + dy) != f)
                {
                    support_ok = false;
                    break;
                }
        if (!support_ok)
            continue;
        ctx.c[f] = (frame.color.sample_bilinear(q->x(), q->y(), 0) +
                    frame.color.sample_bilinear(q->x(), q->y(), 1) +
                    frame.color.sample_bilinear(q->x(), q->y(), 2)) /
                   3.0;
        ctx.face_valid[f] = 1;
    }

    for (size_t e = 0; e < ctx.adjacency.edges.size(); ++e)
    {
        const auto& ef = ctx.adjacency.edge_faces[e];
        if (ef[0] >= 0 && ef[1] >= 0 && ctx.face_valid[ef[0]] && ctx.face_valid[ef[1]])
            ctx.valid_edges.push_back({ef[0], ef[1]});
    }
    if (prev_face_normals)
        ctx.prev_face_normals = *prev_face_normals;
    return ctx;
}

struct FineEnergyBreakdown
{
    Real shading = 0, smooth = 0, coherence = 0;
    Real total = 0;
    int degenerate_faces = 0;
};

/**
 * Fine-scale energy at displacement d: face/edge shading residuals against
 * the sampled intensities (face normals recomputed from displaced vertices),
 * the Laplacian + magnitude regularizer, and the temporal normal-coherence
 * term. Writes dE/dd when grad is non-null.
 */
inline FineEnergyBreakdown evaluate_fine(const FineContext& ctx, const VecX& d,
                                         const EnergyWeights& w, VecX* grad = nullptr)
{
    const int n = static_cast<int>(ctx.v_medium.rows());
    const int m = ctx.num_faces();
    FineEnergyBreakdown e;
    const MatX3 V = apply_displacements(ctx.v_medium, ctx.n_medium, d, 1e30);

    MatX3 dE_dv;
    if (grad)
    {
        dE_dv = MatX3::Zero(n, 3);
        grad->setZero(n);
    }

    // Face normals of the displaced mesh plus residual bookkeeping.
    MatX3 unit_normals(m, 3);
    VecX intensity = VecX::Zero(m);
    std::vector<char> usable(m, 0);
    for (int f = 0; f < m; ++f)
    {
        const Vec3 nf = face_normal_unnormalized(V, ctx.faces, f);
        const Real len = nf.norm();
        if (len < 1e-12)
        {
            ++e.degenerate_faces;
            unit_normals.row(f).setZero();
            continue;
        }
        unit_normals.row(f) = (nf / len).transpose();
        usable[f] = 1;
        if (ctx.face_valid[f])
            intensity[f] =
                sh_basis_unchecked(unit_normals.row(f).transpose()).dot(ctx.face_gamma.row(f));
    }

    VecX dE_dI = VecX::Zero(m);       // shading residual coefficients
    MatX3 dE_dnf = MatX3::Zero(m, 3); // direct face-normal gradients (coherence)

    if (w.w_face > 0)
        for (int f = 0; f < m; ++f)
        {
            if (!ctx.face_valid[f] || !usable[f])
                continue;
            const Real r = intensity[f] - ctx.c[f];
            e.shading += w.w_face * r * r;
            if (grad)
                dE_dI[f] += 2.0 * w.w_face * r;
        }
    if (w.w_edge > 0)
        for (const auto& edge : ctx.valid_edges)
        {
            const int i = edge[0], j = edge[1];
            if (!usable[i] || !usable[j])
                continue;
            const Real r = (intensity[i] - intensity[j]) - (ctx.c[i] - ctx.c[j]);
            e.shading += w.w_edge * r * r;
            if (grad)
            {
                dE_dI[i] += 2.0 * w.w_edge * r;
                dE_dI[j] -= 2.0 * w.w_edge * r;
            }
        }

    if (w.w_cl > 0 && ctx.prev_face_normals.rows() == m)
        for (int f = 0; f < m; ++f)
        {
            if (!usable[f])
                continue;
            const Vec3 r = unit_normals.row(f).transpose() - ctx.prev_face_normals.row(f).transpose();
            e.coherence += w.w_cl * r.squaredNorm();
            if (grad)
                dE_dnf.row(f) += (2.0 * w.w_cl * r).transpose();
        }

    if (grad)
        for (int f = 0; f < m; ++f)
        {
            if (!usable[f])
                continue;
            Vec3 dn = dE_dnf.row(f).transpose();
            if (dE_dI[f] != 0.0)
            {
                const Vec3 nf = unit_normals.row(f).transpose();
                dn += dE_dI[f] * (sh_basis_jacobian(nf).transpose() *
                                  ctx.face_gamma.row(f).transpose());
            }
            if (dn.squaredNorm() == 0.0)
                continue;
            const Vec3 raw = face_normal_unnormalized(V, ctx.faces, f);
            const Vec3 h = normalize_jacobian(raw).transpose() * dn;
            const auto J = face_normal_jacobians(V.row(ctx.faces(f, 0)).transpose(),
                                                 V.row(ctx.faces(f, 1)).transpose(),
                                                 V.row(ctx.faces(f, 2)).transpose());
            for (int k = 0; k < 3; ++k)
                dE_dv.row(ctx.faces(f, k)) += (J[k].transpose() * h).transpose();
        }

    // Smoothness: l2,1 of Laplacian vectors of the displaced mesh plus the
    // squared magnitude of d.
    if (w.w_sm > 0 || w.w_mi > 0)
    {
        const MatX lap = apply_graph_laplacian(V, ctx.adjacency);
        MatX dlap = MatX::Zero(n, 3);
        for (int i = 0; i < n; ++i)
        {
            const Vec3 li = lap.row(i).transpose();
            Vec3 g;
            e.smooth +=
                w.w_sm * detail::robust_norm<3>(li, w.eps_geo, EnergyWeights::NormMode::robust,
                                                grad ? &g : nullptr);
            if (grad)
                dlap.row(i) = (w.w_sm * g).transpose();
        }
        e.smooth += w.w_mi * d.squaredNorm();
        if (grad)
        {
            const MatX back = apply_graph_laplacian_adjoint(dlap, ctx.adjacency);
            dE_dv += back;
            *grad += 2.0 * w.w_mi * d;
        }
    }

    if (grad)
        for (int i = 0; i < n; ++i)
            (*grad)[i] += dE_dv.row(i).dot(ctx.n_medium.row(i));

    e.total = e.shading + e.smooth + e.coherence;
    return e;
}

struct FineSolveOptions
{
    int max_iters = 200;
    Real tol = 1e-8; // relative decrease
    Real lr0 = 0.5;
    Real d_max = 5.0; // mm
};

struct FineSolveResult
{
    DisplacementField field;
    std::vector<Real> energies;
    bool converged = false;
    bool failed = false;
    int clamped = 0;
};

/**
 * Minimizes the fine-scale energy over d with backtracked gradient descent,
 * projecting onto |d| <= d_max after each accepted step. Returns d = 0 with
 * the failed flag if no descent is possible from a diverged state.
 */
inline FineSolveResult refine_details(const FineContext& ctx, const UVChart& chart,
                                      const VecX& d_init, const EnergyWeights& w,
                                      const FineSolveOptions& opt = {})
{
    const int n = static_cast<int>(ctx.v_medium.rows());
    FineSolveResult out;
    VecX d = d_init.size() == n ? d_init : VecX::Zero(n);
    d = d.cwiseMax(-opt.d_max).cwiseMin(opt.d_max);

    VecX grad(n);
    Real lr = opt.lr0;
    FineEnergyBreakdown cur = evaluate_fine(ctx, d, w, &grad);
    out.energies.push_back(cur.total);
    if (!std::isfinite(cur.total))
    {
        out.failed = true;
        out.field = DisplacementField::bake(VecX::Zero(n), chart, ctx.faces);
        return out;
    }

    for (int it = 0; it < opt.max_iters; ++it)
    {
        const Real gnorm2 = grad.squaredNorm();
        if (gnorm2 < 1e-24)
        {
            out.converged = true;
            break;
        }
        bool accepted = false;
        Real trial_lr = lr;
        for (int bt = 0; bt < 40; ++bt)
        {
            VecX trial = (d - trial_lr * grad).cwiseMax(-opt.d_max).cwiseMin(opt.d_max);
            const FineEnergyBreakdown et = evaluate_fine(ctx, trial, w, nullptr);
            if (et.total <= cur.total - 1e-4 * trial_lr * gnorm2 * 0.01)
            {
                const Real rel = (cur.total - et.total) / std::max(std::abs(cur.total), Real(1e-15));
                d = trial;
                cur = evaluate_fine(ctx, d, w, &grad);
                out.energies.push_back(cur.total);
                lr = (bt == 0) ? std::min(trial_lr * 1.5, Real(1e4)) : trial_lr;
                accepted = true;
                if (rel < opt.tol)
                {
                    out.converged = true;
                    it = opt.max_iters;
                }
                break;
            }
            trial_lr *= 0.5;
        }
        if (!accepted)
        {
            out.converged = true;
            break;
        }
    }

    int clamped = 0;
    for (int i = 0; i < n; ++i)
        if (std::abs(d[i]) >= opt.d_max)
            ++clamped;
    out.clamped = clamped;
    out.field = DisplacementField::bake(d, chart, ctx.faces);
    return out;
}

} // namespace facefit

#endif // FACEFIT_FINE_SCALE_HPP
