/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/energy.hpp
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

#ifndef FACEFIT_ENERGY_HPP
#define FACEFIT_ENERGY_HPP

#include "facefit/correspond.hpp"
#include "facefit/frame.hpp"
#include "facefit/model.hpp"
#include "facefit/raster.hpp"
#include "facefit/render.hpp"

namespace facefit {

/**
 * Tuning weights of the medium- and fine-scale losses plus the smoothing
 * constants of the robust norms. Defaults follow the reference setting
 * (w_pp, w_ps, w_col, w_lan, w_reg, w_flow, w_same, w_Areg, w_Asmo, w_face,
 * w_edge, w_sm, w_mi, w_cl) = (2, 2, 1, 0.5, 0.5, 0.5, 1e-4, 1000, 2000,
 * 0.1, 1, 0.1, 0.02, 0.01).
 */
struct EnergyWeights
{
    Real w_pp = 2, w_ps = 2, w_col = 1, w_lan = 0.5, w_reg = 0.5;
    Real w_flow = 0.5, w_same = 0.0001;
    Real w_Areg = 1000, w_Asmo = 2000;
    Real w_face = 0.1, w_edge = 1, w_sm = 0.1, w_mi = 0.02, w_cl = 0.01;
    Real w_n = 2; // weight of the normal term that replaces E_geo in rgb mode

    Real eps_geo = 1e-4; // mm; also used for pixel-valued non-squared norms
    Real eps_col = 1e-4; // intensity

    /// squared switches every l2,1 / l1 data norm to its squared-l2 variant
    /// (the ablation the robust norms are compared against).
    enum class NormMode
    {
        robust,
        squared
    } norm_mode = NormMode::robust;
};

enum class FitMode
{
    rgbd,
    rgb
};

struct EnergyBreakdown
{
    Real e_pp = 0, e_ps = 0, e_col = 0, e_lan = 0, e_reg = 0, e_n = 0;
    Real e_flow = 0, e_same = 0;
    Real total = 0;      // weighted sum of everything evaluated
    Real data_total = 0; // weighted data terms only (no regularizer, no pair terms)
    int n_visible = 0;
    int n_corr = 0;

    void add_pair(const EnergyBreakdown& pair)
    {
        e_flow += pair.e_flow;
        e_same += pair.e_same;
        total += pair.total;
    }
};

/**
 * Frozen per-outer-iteration structure: the visible set F with per-pixel
 * triangle assignment, the depth correspondences, the normal-term neighbor
 * table and the active landmark subset (yaw-based contour discard applied).
 * Energies evaluated against one context are smooth functions of chi.
 */
struct FitContext
{
    bool has_raster = false;
    RasterBuffer raster;
    CorrespondenceSet corr;
    std::vector<std::array<int, 4>> item_nbrs; // per corr item: +x, -x, +y, -y pixels or -1
    int n_ps_items = 0;
    int n_normal_items = 0;

    struct ActiveLandmark
    {
        int vertex;
        Vec2 q;
    };
    struct ActiveEyelid
    {
        int v_upper, v_lower;
        Vec2 dq;
    };
    std::vector<ActiveLandmark> active_landmarks;
    std::vector<ActiveEyelid> eyelids;
};

namespace detail {

/// Face unnormalized normals, per-vertex accumulated normals and unit
/// vertex normals in one pass (energy paths tolerate degeneracy).
struct NormalScratch
{
    MatX3 face_unnorm;
    MatX3 vertex_accum;
    MatX3 vertex_unit;
};

inline NormalScratch compute_normal_scratch(const MatX3& V, const MatX3i& F)
{
    NormalScratch s;
    const int m = static_cast<int>(F.rows());
    const int n = static_cast<int>(V.rows());
    s.face_unnorm.resize(m, 3);
    s.vertex_accum = MatX3::Zero(n, 3);
    for (int f = 0; f < m; ++f)
    {
        const Vec3 nf = face_normal_unnormalized(V, F, f);
        s.face_unnorm.row(f) = nf.transpose();
        for (int k = 0; k < 3; ++k)
            s.vertex_accum.row(F(f, k)) += nf.transpose();
    }
    s.vertex_unit.resize(n, 3);
    for (int i = 0; i < n; ++i)
    {
        const Real len = s.vertex_accum.row(i).norm();
        if (len > 1e-12)
            s.vertex_unit.row(i) = s.vertex_accum.row(i) / len;
        else
            s.vertex_unit.row(i) = s.vertex_accum.row(i);
    }
    return s;
}

/// Distributes gradients w.r.t. unit vertex normals onto the camera-space
/// vertex positions they are built from.
inline void backprop_vertex_normals(const MatX3& V, const MatX3i& F, const NormalScratch& s,
                                    const MatX3& dE_dn, MatX3& dE_dv)
{
    const int n = static_cast<int>(V.rows());
    MatX3 h = MatX3::Zero(n, 3);
    std::vector<char> active(n, 0);
    for (int i = 0; i < n; ++i)
    {
        if (dE_dn.row(i).squaredNorm() == 0.0)
            continue;
        const Vec3 g = s.vertex_accum.row(i).transpose();
        if (g.squaredNorm() < 1e-20)
            continue;
        h.row(i) = (normalize_jacobian(g).transpose() * dE_dn.row(i).transpose()).transpose();
        active[i] = 1;
    }
    for (int f = 0; f < F.rows(); ++f)
    {
        const int ia = F(f, 0), ib = F(f, 1), ic = F(f, 2);
        if (!active[ia] && !active[ib] && !active[ic])
            continue;
        const auto J = face_normal_jacobians(V.row(ia).transpose(), V.row(ib).transpose(),
                                             V.row(ic).transpose());
        for (int a = 0; a < 3; ++a)
        {
            const int i = F(f, a);
            if (!active[i])
                continue;
            const Vec3 hi = h.row(i).transpose();
            for (int b = 0; b < 3; ++b)
                dE_dv.row(F(f, b)) += (J[b].transpose() * hi).transpose();
        }
    }
}

template <int N>
inline Real robust_norm(const Eigen::Matrix<Real, N, 1>& r, Real eps,
                        EnergyWeights::NormMode mode, Eigen::Matrix<Real, N, 1>* grad)
{
    if (mode == EnergyWeights::NormMode::squared)
    {
        if (grad)
            *grad = 2.0 * r;
        return r.squaredNorm();
    }
    const Real s = std::sqrt(r.squaredNorm() + eps * eps);
    if (grad)
        *grad = r / s;
    return s - eps;
}

inline Real robust_abs(Real x, Real eps, EnergyWeights::NormMode mode, Real* grad)
{
    if (mode == EnergyWeights::NormMode::squared)
    {
        if (grad)
            *grad = 2.0 * x;
        return x * x;
    }
    const Real s = std::sqrt(x * x + eps * eps);
    if (grad)
        *grad = x / s;
    return s - eps;
}

} // namespace detail

/// Yaw-discard rule for contour landmarks: beyond +/-5 degrees of yaw the
/// turned-away side's contour points are dropped.
inline bool landmark_active_for_yaw(ContourSide side, Real yaw)
{
    constexpr Real kThreshold = 5.0 * kPi / 180.0;
    if (side == ContourSide::left && yaw < -kThreshold)
        return false;
    if (side == ContourSide::right && yaw > kThreshold)
        return false;
    return true;
}

/**
 * Builds the frozen evaluation structure at the current parameters:
 * rasterize, search depth correspondences in the [-5,5]^2 window, freeze the
 * normal-term neighbor table and resolve the active landmark set.
 */
inline FitContext build_fit_context(const FaceModel& model, const ParameterSet& chi,
                                    const RGBDFrame& frame, const RealGeometry& real,
                                    bool with_raster = true)
{
    FitContext ctx;
    const MatX3 P = model.geometry(chi);
    const Mat3 R = rotation_from_euler(chi.euler);
    MatX3 V = P * R.transpose();
    V.rowwise() += chi.translation.transpose();

    if (with_raster)
    {
        ctx.raster = rasterize(V, model.triangles, frame.intrinsics);
        ctx.corr = correspondence_search(ctx.raster, real);
        ctx.has_raster = true;
        ctx.item_nbrs.resize(ctx.corr.items.size());
        const int w = ctx.raster.width;
        for (size_t it = 0; it < ctx.corr.items.size(); ++it)
        {
            const int px = ctx.corr.items[it].pixel;
            const int x = px % w, y = px / w;
            auto& nb = ctx.item_nbrs[it];
            nb = {-1, -1, -1, -1};
            if (x + 1 < ctx.raster.width && x - 1 >= 0 && y + 1 < ctx.raster.height && y - 1 >= 0 &&
                ctx.raster.covered(x + 1, y) && ctx.raster.covered(x - 1, y) &&
                ctx.raster.covered(x, y + 1) && ctx.raster.covered(x, y - 1))
            {
                nb = {px + 1, px - 1, px + w, px - w};
                if (ctx.corr.items[it].normal_valid)
                    ++ctx.n_normal_items;
            }
            if (ctx.corr.items[it].normal_valid)
                ++ctx.n_ps_items;
        }
    }

    for (size_t li = 0; li < model.landmarks.size(); ++li)
    {
        const LandmarkBinding& lb = model.landmarks[li];
        if (!landmark_active_for_yaw(lb.side, chi.euler.y()))
            continue;
        const Landmark* obs = frame.find_landmark(lb.semantic_id);
        if (!obs)
            continue;
        if (V(lb.vertex, 2) <= 0)
            continue;
        ctx.active_landmarks.push_back({lb.vertex, obs->position});
    }
    for (const auto& pair : model.eyelid_pairs)
    {
        const LandmarkBinding& up = model.landmarks[pair[0]];
        const LandmarkBinding& lo = model.landmarks[pair[1]];
        const Landmark* qu = frame.find_landmark(up.semantic_id);
        const Landmark* ql = frame.find_landmark(lo.semantic_id);
        if (!qu || !ql || V(up.vertex, 2) <= 0 || V(lo.vertex, 2) <= 0)
            continue;
        ctx.eyelids.push_back({up.vertex, lo.vertex, qu->position - ql->position});
    }
    return ctx;
}

/**
 * Evaluates the single-frame loss terms at chi against a frozen context and
 * optionally their analytic gradient. In rgb mode the point terms are
 * replaced by the depth-normal term. grad_geom (3n, model space), when
 * requested, receives dE/dp for the core-tensor dictionary update.
 */
inline EnergyBreakdown evaluate_single_frame(const FaceModel& model, const ParameterSet& chi,
                                             const RGBDFrame& frame, const FitContext& ctx,
                                             const EnergyWeights& w, FitMode mode,
                                             ParamGradient* grad = nullptr,
                                             VecX* grad_geom = nullptr)
{
    const bool rgbd = mode == FitMode::rgbd;
    const Real wpp = rgbd ? w.w_pp : 0.0;
    const Real wps = rgbd ? w.w_ps : 0.0;
    const Real wn = rgbd ? 0.0 : w.w_n;

    EnergyBreakdown e;
    e.n_visible = ctx.has_raster ? static_cast<int>(ctx.raster.visible.size()) : 0;
    e.n_corr = ctx.has_raster ? static_cast<int>(ctx.corr.items.size()) : 0;

    const VecX cid = model.full_id_coeffs(chi);
    const VecX cexp = model.full_exp_coeffs(chi);
    const VecX p_vec = assemble_geometry(model.tensor, cid, cexp);
    const int n = model.num_vertices();
    const Eigen::Map<const MatX3> P(p_vec.data(), n, 3);
    const Mat3 R = rotation_from_euler(chi.euler);
    MatX3 V = P * R.transpose();
    V.rowwise() += chi.translation.transpose();
    const MatX3i& F = model.triangles;
    const CameraIntrinsics& K = frame.intrinsics;

    MatX3 dE_dv, dE_dn, dE_dc, dE_db;
    if (grad)
    {
        dE_dv = MatX3::Zero(n, 3);
        dE_dn = MatX3::Zero(n, 3);
        dE_dc = MatX3::Zero(n, 3);
        dE_db = MatX3::Zero(n, 3);
    }

    const bool need_color = w.w_col > 0;
    const bool need_normals_term = wn > 0 && ctx.has_raster;

    detail::NormalScratch nrm;
    MatX3 albedo_rows, irr;
    if (need_color || need_normals_term)
        nrm = detail::compute_normal_scratch(V, F);
    if (need_color)
    {
        albedo_rows = model.albedo_rgb(chi);
        irr.resize(n, 3);
        for (int i = 0; i < n; ++i)
            irr.row(i) = irradiance(nrm.vertex_unit.row(i).transpose(),
                                    albedo_rows.row(i).transpose(), chi.sh)
                             .transpose();
    }

    // Per-pixel ray/triangle intersections of the frozen assignment.
    std::vector<RayTriangleIntersection> hits;
    std::vector<int> slot_of_pixel;
    if (ctx.has_raster && (wpp > 0 || wps > 0 || wn > 0 || need_color))
    {
        hits.resize(ctx.raster.visible.size());
        slot_of_pixel.assign(static_cast<size_t>(K.width) * K.height, -1);
        for (size_t s = 0; s < ctx.raster.visible.size(); ++s)
        {
            const int px = ctx.raster.visible[s];
            const int x = px % K.width, y = px / K.width;
            const int f = ctx.raster.tri[px];
            const Vec3 dir = pixel_ray(x, y, K);
            hits[s] = intersect_ray_triangle_grad(dir, V.row(F(f, 0)).transpose(),
                                                  V.row(F(f, 1)).transpose(),
                                                  V.row(F(f, 2)).transpose());
            slot_of_pixel[px] = static_cast<int>(s);
        }
    }

    // Point-to-point and point-to-surface terms over the correspondences.
    if ((wpp > 0 || wps > 0) && ctx.has_raster && !ctx.corr.empty())
    {
        const Real inv_pp = 1.0 / static_cast<Real>(ctx.corr.items.size());
        const Real inv_ps = ctx.n_ps_items > 0 ? 1.0 / ctx.n_ps_items : 0.0;
        for (const Correspondence& c : ctx.corr.items)
        {
            const int s = slot_of_pixel[c.pixel];
            const auto& hit = hits[s];
            if (!hit.valid)
                continue;
            const int f = ctx.raster.tri[c.pixel];
            const Vec3 r = hit.point - c.p_real;
            if (wpp > 0)
            {
                Vec3 g;
                e.e_pp += inv_pp * detail::robust_norm<3>(r, w.eps_geo, w.norm_mode, grad ? &g : nullptr);
                if (grad)
                {
                    const Vec3 u = (wpp * inv_pp) * g;
                    for (int k = 0; k < 3; ++k)
                        dE_dv.row(F(f, k)) += (hit.d_point_d_vertex[k].transpose() * u).transpose();
                }
            }
            if (wps > 0 && c.normal_valid)
            {
                Real gs;
                const Real sdist = c.n_real.dot(r);
                e.e_ps += inv_ps * detail::robust_abs(sdist, w.eps_geo, w.norm_mode, grad ? &gs : nullptr);
                if (grad)
                {
                    const Vec3 u = (wps * inv_ps * gs) * c.n_real;
                    for (int k = 0; k < 3; ++k)
                        dE_dv.row(F(f, k)) += (hit.d_point_d_vertex[k].transpose() * u).transpose();
                }
            }
        }
    }

    // Depth-normal term (rgb mode): central-difference normals of the
    // rendered XYZ against the real ones, both with the same estimator.
    if (need_normals_term && ctx.n_normal_items > 0)
    {
        const Real inv_n = 1.0 / ctx.n_normal_items;
        for (size_t it = 0; it < ctx.corr.items.size(); ++it)
        {
            const Correspondence& c = ctx.corr.items[it];
            const auto& nb = ctx.item_nbrs[it];
            if (nb[0] < 0 || !c.normal_valid)
                continue;
            const int sxp = slot_of_pixel[nb[0]], sxm = slot_of_pixel[nb[1]];
            const int syp = slot_of_pixel[nb[2]], sym = slot_of_pixel[nb[3]];
            if (sxp < 0 || sxm < 0 || syp < 0 || sym < 0)
                continue;
            const Vec3 a = hits[sxp].point - hits[sxm].point;
            const Vec3 b = hits[syp].point - hits[sym].point;
            const Vec3 ntil = a.cross(b);
            const Real len = ntil.norm();
            if (len < 1e-12)
                continue;
            const int x = c.pixel % K.width, y = c.pixel / K.width;
            const Real sign = ntil.dot(pixel_ray(x, y, K)) > 0 ? -1.0 : 1.0;
            const Vec3 n_syn = sign * ntil / len;
            const Vec3 r = n_syn - c.n_real;
            Vec3 g;
            e.e_n += inv_n * detail::robust_norm<3>(r, w.eps_col, w.norm_mode, grad ? &g : nullptr);
            if (grad)
            {
                const Vec3 gtil = sign * (normalize_jacobian(ntil).transpose() * ((wn * inv_n) * g));
                const Vec3 dE_da = b.cross(gtil);
                const Vec3 dE_db2 = gtil.cross(a);
                const int slots[4] = {sxp, sxm, syp, sym};
                const Vec3 contrib[4] = {dE_da, -dE_da, dE_db2, -dE_db2};
                for (int q = 0; q < 4; ++q)
                {
                    const int px = ctx.raster.visible[slots[q]];
                    const int f = ctx.raster.tri[px];
                    for (int k = 0; k < 3; ++k)
                        dE_dv.row(F(f, k)) +=
                            (hits[slots[q]].d_point_d_vertex[k].transpose() * contrib[q]).transpose();
                }
            }
        }
    }

    // Color term over all of F.
    if (need_color && ctx.has_raster && !ctx.raster.visible.empty())
    {
        const Real inv_f = 1.0 / static_cast<Real>(ctx.raster.visible.size());
        for (size_t s = 0; s < ctx.raster.visible.size(); ++s)
        {
            const auto& hit = hits[s];
            if (!hit.valid)
                continue;
            const int px = ctx.raster.visible[s];
            const int x = px % K.width, y = px / K.width;
            const int f = ctx.raster.tri[px];
            const int va = F(f, 0), vb = F(f, 1), vc = F(f, 2);
            const Vec3 A = V.row(va).transpose(), B = V.row(vb).transpose(), C = V.row(vc).transpose();
            const BarycentricGrad bc = grad ? barycentric_grad(hit.point, A, B, C) : BarycentricGrad{};
            const Vec3 lambda = grad ? bc.lambda : barycentric(hit.point, A, B, C);
            const Vec3 i_syn =
                lambda[0] * irr.row(va).transpose() + lambda[1] * irr.row(vb).transpose() +
                lambda[2] * irr.row(vc).transpose();
            const Vec3 rho = i_syn - frame.color.rgb(x, y);
            Vec3 g;
            e.e_col += inv_f * detail::robust_norm<3>(rho, w.eps_col, w.norm_mode, grad ? &g : nullptr);
            if (grad && bc.valid)
            {
                const Vec3 u = (w.w_col * inv_f) * g;
                const int verts[3] = {va, vb, vc};
                Vec3 svec;
                for (int k = 0; k < 3; ++k)
                {
                    dE_dc.row(verts[k]) += (lambda[k] * u).transpose();
                    svec[k] = u.dot(irr.row(verts[k]).transpose());
                }
                // The barycentric weights move with both the vertices and
                // the intersection point.
                const Vec3 dE_dX =
                    svec[0] * bc.d_lambda_d_p[0] + svec[1] * bc.d_lambda_d_p[1] + svec[2] * bc.d_lambda_d_p[2];
                for (int j = 0; j < 3; ++j)
                {
                    dE_dv.row(verts[j]) += (bc.d_lambda_d_v[j].transpose() * svec).transpose();
                    dE_dv.row(verts[j]) += (hit.d_point_d_vertex[j].transpose() * dE_dX).transpose();
                }
            }
        }
    }

    // Landmark term: squared pixel distances plus the eyelid-distance part.
    if (w.w_lan > 0 && !ctx.active_landmarks.empty())
    {
        const Real inv_l = 1.0 / static_cast<Real>(ctx.active_landmarks.size());
        for (const auto& al : ctx.active_landmarks)
        {
            const Vec3 v = V.row(al.vertex).transpose();
            const auto proj = project(v, K);
            if (!proj)
                continue;
            const Vec2 r = al.q - *proj;
            e.e_lan += inv_l * r.squaredNorm();
            if (grad)
            {
                const Vec2 u = (w.w_lan * inv_l * -2.0) * r;
                dE_dv.row(al.vertex) += (project_jacobian(v, K).transpose() * u).transpose();
            }
        }
        if (!ctx.eyelids.empty())
        {
            const Real inv_p = 1.0 / static_cast<Real>(ctx.eyelids.size());
            for (const auto& el : ctx.eyelids)
            {
                const Vec3 vu = V.row(el.v_upper).transpose();
                const Vec3 vl = V.row(el.v_lower).transpose();
                const auto pu = project(vu, K), pl = project(vl, K);
                if (!pu || !pl)
                    continue;
                const Vec2 r = el.dq - (*pu - *pl);
                Eigen::Matrix<Real, 2, 1> g2;
                e.e_lan += inv_p * detail::robust_norm<2>(r, w.eps_geo, w.norm_mode, grad ? &g2 : nullptr);
                if (grad)
                {
                    const Vec2 u = (w.w_lan * inv_p) * g2;
                    dE_dv.row(el.v_upper) -= (project_jacobian(vu, K).transpose() * u).transpose();
                    dE_dv.row(el.v_lower) += (project_jacobian(vl, K).transpose() * u).transpose();
                }
            }
        }
    }

    // Coefficient regularizer.
    if (w.w_reg > 0)
    {
        const VecX rid = chi.alpha_id.cwiseQuotient(model.sigma_id);
        const VecX rexp = chi.alpha_exp.cwiseQuotient(model.sigma_exp);
        const VecX ralb = chi.alpha_alb.cwiseQuotient(model.albedo.sigma);
        e.e_reg = rid.squaredNorm() + rexp.squaredNorm() + ralb.squaredNorm();
        if (grad)
        {
            grad->alpha_id += (2.0 * w.w_reg) * rid.cwiseQuotient(model.sigma_id);
            grad->alpha_exp += (2.0 * w.w_reg) * rexp.cwiseQuotient(model.sigma_exp);
            grad->alpha_alb += (2.0 * w.w_reg) * ralb.cwiseQuotient(model.albedo.sigma);
        }
    }

    if (grad)
    {
        // Irradiance chain: color gradients through vertex normals, albedo
        // and lighting.
        if (need_color)
        {
            for (int i = 0; i < n; ++i)
            {
                const Vec3 dc = dE_dc.row(i).transpose();
                if (dc.squaredNorm() == 0.0)
                    continue;
                const Vec3 nu = nrm.vertex_unit.row(i).transpose();
                const ShVec phi = sh_basis_unchecked(nu);
                const ShJacobian Jphi = sh_basis_jacobian(nu);
                Vec3 dn = Vec3::Zero();
                for (int ch = 0; ch < 3; ++ch)
                {
                    const Eigen::Matrix<Real, 1, kShCount> gam = chi.sh.row(ch);
                    dn += dc[ch] * albedo_rows(i, ch) * (Jphi.transpose() * gam.transpose());
                    dE_db(i, ch) += dc[ch] * gam.dot(phi);
                    grad->sh.row(ch) += dc[ch] * albedo_rows(i, ch) * phi.transpose();
                }
                dE_dn.row(i) += dn.transpose();
            }
            detail::backprop_vertex_normals(V, F, nrm, dE_dn, dE_dv);
            const Eigen::Map<const VecX> db_flat(dE_db.data(), 3 * n);
            grad->alpha_alb += model.albedo.basis.transpose() * db_flat;
        }

        // Pull camera-space vertex gradients back onto pose and shape.
        const MatX3 Gm = dE_dv * R; // rows are dE/dp_i
        const Eigen::Map<const VecX> gm_flat(Gm.data(), 3 * n);
        for (int k = 0; k < model.k_id(); ++k)
            for (int l = 0; l < model.k_exp(); ++l)
            {
                const Real dot = model.tensor.slice_vec(k, l).dot(gm_flat);
                grad->alpha_id[k] += cexp[l] * dot;
                grad->alpha_exp[l] += cid[k] * dot;
            }
        const auto dR = rotation_from_euler_derivs(chi.euler);
        for (int a = 0; a < 3; ++a)
            grad->euler[a] += (dE_dv.cwiseProduct(P * dR[a].transpose())).sum();
        grad->translation += dE_dv.colwise().sum().transpose();
        if (grad_geom)
            *grad_geom = gm_flat;
    }

    e.data_total = wpp * e.e_pp + wps * e.e_ps + wn * e.e_n + w.w_col * e.e_col + w.w_lan * e.e_lan;
    e.total = e.data_total + w.w_reg * e.e_reg;
    return e;
}

/// E_same: squared consistency of identity and albedo coefficients.
inline Real e_same(const ParameterSet& a, const ParameterSet& b, ParamGradient* grad_a = nullptr,
                   ParamGradient* grad_b = nullptr, Real weight = 1.0)
{
    const VecX did = a.alpha_id - b.alpha_id;
    const VecX dalb = a.alpha_alb - b.alpha_alb;
    if (grad_a)
    {
        grad_a->alpha_id += (2.0 * weight) * did;
        grad_a->alpha_alb += (2.0 * weight) * dalb;
    }
    if (grad_b)
    {
        grad_b->alpha_id -= (2.0 * weight) * did;
        grad_b->alpha_alb -= (2.0 * weight) * dalb;
    }
    return did.squaredNorm() + dalb.squaredNorm();
}

/**
 * E_flow: how well the projected motion of the surface points frozen on
 * frame n-1's raster matches the observed flow. The pixel-to-surface map is
 * fixed by the stored barycentric coordinates; both frames' geometry and
 * pose stay differentiable.
 */
inline Real e_flow(const FaceModel& model, const ParameterSet& chi_cur, const ParameterSet& chi_prev,
                   const RasterBuffer& raster_prev, const Image& flow,
                   const CameraIntrinsics& K_cur, const CameraIntrinsics& K_prev,
                   ParamGradient* grad_cur = nullptr, ParamGradient* grad_prev = nullptr,
                   Real weight = 1.0)
{
    if (flow.empty())
        throw std::invalid_argument("e_flow: missing flow field");
    if (raster_prev.visible.empty())
        return 0.0;
    const int n = model.num_vertices();
    const MatX3 P_cur = model.geometry(chi_cur);
    const MatX3 P_prev = model.geometry(chi_prev);
    const Mat3 R_cur = rotation_from_euler(chi_cur.euler);
    const Mat3 R_prev = rotation_from_euler(chi_prev.euler);

    MatX3 dv_cur, dv_prev;
    if (grad_cur)
        dv_cur = MatX3::Zero(n, 3);
    if (grad_prev)
        dv_prev = MatX3::Zero(n, 3);

    Real energy = 0.0;
    const Real inv_f = 1.0 / static_cast<Real>(raster_prev.visible.size());
    const MatX3i& F = model.triangles;
    for (int px : raster_prev.visible)
    {
        const int x = px % raster_prev.width, y = px / raster_prev.width;
        const int f = raster_prev.tri[px];
        const Vec3& l = raster_prev.bary[px];
        Vec3 p_cur = Vec3::Zero(), p_prev = Vec3::Zero();
        for (int k = 0; k < 3; ++k)
        {
            p_cur += l[k] * P_cur.row(F(f, k)).transpose();
            p_prev += l[k] * P_prev.row(F(f, k)).transpose();
        }
        const Vec3 v_cur = R_cur * p_cur + chi_cur.translation;
        const Vec3 v_prev = R_prev * p_prev + chi_prev.translation;
        const auto pr_cur = project(v_cur, K_cur);
        const auto pr_prev = project(v_prev, K_prev);
        if (!pr_cur || !pr_prev)
            continue;
        const Vec2 r = (*pr_cur - *pr_prev) - Vec2(flow.at(x, y, 0), flow.at(x, y, 1));
        energy += inv_f * r.squaredNorm();
        if (grad_cur)
        {
            const Vec2 u = (2.0 * weight * inv_f) * r;
            const Vec3 gv = project_jacobian(v_cur, K_cur).transpose() * u;
            for (int k = 0; k < 3; ++k)
                dv_cur.row(F(f, k)) += (l[k] * gv).transpose();
        }
        if (grad_prev)
        {
            const Vec2 u = (-2.0 * weight * inv_f) * r;
            const Vec3 gv = project_jacobian(v_prev, K_prev).transpose() * u;
            for (int k = 0; k < 3; ++k)
                dv_prev.row(F(f, k)) += (l[k] * gv).transpose();
        }
    }

    auto pullback = [&](const MatX3& dv, const ParameterSet& chi, const MatX3& P, const Mat3& R,
                        ParamGradient& g) {
        const MatX3 Gm = dv * R;
        const Eigen::Map<const VecX> gm_flat(Gm.data(), static_cast<Eigen::Index>(3) * n);
        const VecX cid = model.full_id_coeffs(chi);
        const VecX cexp = model.full_exp_coeffs(chi);
        for (int k = 0; k < model.k_id(); ++k)
            for (int l2 = 0; l2 < model.k_exp(); ++l2)
            {
                const Real dot = model.tensor.slice_vec(k, l2).dot(gm_flat);
                g.alpha_id[k] += cexp[l2] * dot;
                g.alpha_exp[l2] += cid[k] * dot;
            }
        const auto dR = rotation_from_euler_derivs(chi.euler);
        for (int a = 0; a < 3; ++a)
            g.euler[a] += (dv.cwiseProduct(P * dR[a].transpose())).sum();
        g.translation += dv.colwise().sum().transpose();
    };
    if (grad_cur)
        pullback(dv_cur, chi_cur, P_cur, R_cur, *grad_cur);
    if (grad_prev)
        pullback(dv_prev, chi_prev, P_prev, R_prev, *grad_prev);
    return energy;
}

} // namespace facefit

#endif // FACEFIT_ENERGY_HPP
