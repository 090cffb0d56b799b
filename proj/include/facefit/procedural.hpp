/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/procedural.hpp
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

#ifndef FACEFIT_PROCEDURAL_HPP
#define FACEFIT_PROCEDURAL_HPP

#include "facefit/model.hpp"

#include <functional>

namespace facefit {

/**
 * Parameters of the procedural head family. The shipped basis is an
 * ellipsoidal head with analytic identity modes (scale, aspect, jaw width,
 * nose, brow, ...) and expression modes (jaw open, smile, brow raise, ...),
 * sampled into an identity x expression grid and reduced with
 * build_reduced_tensor. The additive mode construction makes the grid
 * exactly representable at ranks (1 + #id modes, 1 + #exp modes).
 *
 * The "desk" profile (defaults below) yields ~2,000 vertices; the "paper"
 * profile scales the same construction up to 50/47 modes and ~48k vertices.
 */
struct ProceduralConfig
{
    int nlat = 44;
    int nlon = 45;
    int id_modes = 7;  // K_id = id_modes + 1
    int exp_modes = 5; // K_exp = exp_modes + 1
    int k_alb = 4;
    int n_id = 16;  // identity grid size
    int n_exp = 12; // expression grid size
    unsigned seed = 20260810;

    static ProceduralConfig desk() { return ProceduralConfig{}; }

    /// Coarser head for fine-scale work (more pixels per triangle).
    static ProceduralConfig fine()
    {
        ProceduralConfig c;
        c.nlat = 26;
        c.nlon = 27;
        return c;
    }

    static ProceduralConfig paper()
    {
        ProceduralConfig c;
        c.nlat = 218;
        c.nlon = 220;
        c.id_modes = 49;
        c.exp_modes = 46;
        c.k_alb = 50;
        c.n_id = 60;
        c.n_exp = 56;
        return c;
    }

    int k_id() const { return id_modes + 1; }
    int k_exp() const { return exp_modes + 1; }
    int num_vertices() const { return nlat * nlon + 2; }
};

/// The built model plus the raw analytic ingredients (kept so tests can
/// construct out-of-span shapes and ground-truth grids).
struct ProceduralHead
{
    FaceModel model;
    MatX3 base;                      // neutral head, model space (mm)
    std::vector<MatX3> id_fields;    // per-vertex displacement per identity mode
    std::vector<MatX3> exp_fields;   // per expression mode
    std::vector<MatX3> extra_fields; // out-of-span modes, never in the grid
    MeshGrid grid;
    MatX id_weights;  // n_id x id_modes weights used for the grid
    MatX exp_weights; // n_exp x exp_modes
};

namespace detail {

inline Real gauss2(Real t, Real t0, Real st, Real p, Real p0, Real sp)
{
    const Real dt = (t - t0) / st;
    const Real dp = (p - p0) / sp;
    return std::exp(-0.5 * (dt * dt + dp * dp));
}

inline Real smoothstep01(Real x)
{
    x = std::clamp(x, Real(0), Real(1));
    return x * x * (3 - 2 * x);
}

} // namespace detail

/**
 * Builds the procedural head model. Model space: x right, y down, z toward
 * the back of the head; the face looks along -z, so at identity pose it
 * faces a camera placed at the origin looking down +z.
 */
inline ProceduralHead build_procedural_head(const ProceduralConfig& cfg = ProceduralConfig::desk())
{
    using detail::gauss2;
    using detail::smoothstep01;

    const int nlat = cfg.nlat, nlon = cfg.nlon;
    const int n = cfg.num_vertices();
    const int top_pole = nlat * nlon, bottom_pole = nlat * nlon + 1;

    // Angular coordinates per vertex: theta in (0, pi) from the top of the
    // head, phi in (-pi, pi] with 0 at the face center.
    std::vector<Real> theta(n), phi(n);
    for (int i = 0; i < nlat; ++i)
        for (int j = 0; j < nlon; ++j)
        {
            theta[i * nlon + j] = kPi * (i + 1) / (nlat + 1);
            phi[i * nlon + j] = -kPi + 2 * kPi * j / nlon;
        }
    theta[top_pole] = 0.0;
    phi[top_pole] = 0.0;
    theta[bottom_pole] = kPi;
    phi[bottom_pole] = 0.0;

    auto direction = [](Real t, Real p) {
        return Vec3(std::sin(t) * std::sin(p), -std::cos(t), -std::sin(t) * std::cos(p));
    };

    // Radial profile: ellipsoid plus facial features.
    const Vec3 radii(70.0, 92.0, 78.0);
    auto profile = [&](Real t, Real p) {
        Real rho = 1.0;
        rho += 0.20 * gauss2(t, 0.55 * kPi, 0.09 * kPi, p, 0.0, 0.22);  // nose
        rho += 0.06 * gauss2(t, 0.40 * kPi, 0.05 * kPi, p, -0.50, 0.35); // brow ridges
        rho += 0.06 * gauss2(t, 0.40 * kPi, 0.05 * kPi, p, 0.50, 0.35);
        rho += 0.10 * gauss2(t, 0.78 * kPi, 0.08 * kPi, p, 0.0, 0.45);  // chin
        rho -= 0.05 * gauss2(t, 0.46 * kPi, 0.045 * kPi, p, -0.50, 0.28); // eye sockets
        rho -= 0.05 * gauss2(t, 0.46 * kPi, 0.045 * kPi, p, 0.50, 0.28);
        rho += 0.05 * gauss2(t, 0.60 * kPi, 0.08 * kPi, p, -0.75, 0.30); // cheekbones
        rho += 0.05 * gauss2(t, 0.60 * kPi, 0.08 * kPi, p, 0.75, 0.30);
        rho -= 0.03 * gauss2(t, 0.71 * kPi, 0.03 * kPi, p, 0.0, 0.50);  // mouth crease
        return rho;
    };

    ProceduralHead head;
    head.base.resize(n, 3);
    for (int v = 0; v < n; ++v)
    {
        const Vec3 d = direction(theta[v], phi[v]);
        head.base.row(v) = (d.cwiseProduct(radii) * profile(theta[v], phi[v])).transpose();
    }

    // Triangles: body quads split in two, fans at the poles. CCW seen from
    // outside (outward normals).
    std::vector<std::array<int, 3>> tris;
    auto vid = [&](int i, int j) { return i * nlon + ((j % nlon) + nlon) % nlon; };
    for (int i = 0; i + 1 < nlat; ++i)
        for (int j = 0; j < nlon; ++j)
        {
            const int a = vid(i, j), b = vid(i, j + 1), c = vid(i + 1, j), d = vid(i + 1, j + 1);
            tris.push_back({a, d, b});
            tris.push_back({a, c, d});
        }
    for (int j = 0; j < nlon; ++j)
    {
        tris.push_back({top_pole, vid(0, j + 1), vid(0, j)});
        tris.push_back({bottom_pole, vid(nlat - 1, j), vid(nlat - 1, j + 1)});
    }
    MatX3i F(static_cast<int>(tris.size()), 3);
    for (size_t f = 0; f < tris.size(); ++f)
        F.row(static_cast<int>(f)) << tris[f][0], tris[f][1], tris[f][2];

    // Identity modes: smooth displacement fields with millimeter amplitudes.
    auto radial_field = [&](Real t0, Real st, Real p0, Real sp, Real amp) {
        MatX3 field(n, 3);
        for (int v = 0; v < n; ++v)
            field.row(v) =
                (direction(theta[v], phi[v]) * amp * gauss2(theta[v], t0, st, phi[v], p0, sp))
                    .transpose();
        return field;
    };
    std::vector<std::function<Vec3(int)>> id_defs;
    id_defs.push_back([&](int v) { return Vec3(head.base.row(v)) * 0.05; });           // scale
    id_defs.push_back([&](int v) { return Vec3(head.base(v, 0) * 0.06, 0, 0); });      // width
    id_defs.push_back([&](int v) { return Vec3(0, head.base(v, 1) * 0.06, 0); });      // height
    id_defs.push_back([&](int v) { return Vec3(0, 0, head.base(v, 2) * 0.06); });      // depth
    id_defs.push_back([&](int v) {                                                      // jaw width
        const Real mask = smoothstep01((theta[v] - 0.60 * kPi) / (0.12 * kPi)) *
                          std::exp(-phi[v] * phi[v] / (2 * 0.8 * 0.8));
        return Vec3(head.base(v, 0) * 0.10 * mask, 0, 0);
    });
    id_defs.push_back([&](int v) {                                                      // nose size
        return Vec3(direction(theta[v], phi[v]) * 5.0 *
                    gauss2(theta[v], 0.55 * kPi, 0.08 * kPi, phi[v], 0.0, 0.22));
    });
    id_defs.push_back([&](int v) {                                                      // brow
        return Vec3(direction(theta[v], phi[v]) * 3.0 *
                    (gauss2(theta[v], 0.40 * kPi, 0.05 * kPi, phi[v], -0.5, 0.35) +
                     gauss2(theta[v], 0.40 * kPi, 0.05 * kPi, phi[v], 0.5, 0.35)));
    });
    // Beyond the named modes, fill with smooth bumps at staggered spots so
    // larger profiles stay full rank.
    for (int extra = 7; extra < cfg.id_modes; ++extra)
    {
        const Real t0 = (0.30 + 0.45 * ((extra * 17) % 13) / 12.0) * kPi;
        const Real p0 = -1.1 + 2.2 * ((extra * 11) % 9) / 8.0;
        id_defs.push_back([&, t0, p0](int v) {
            return Vec3(direction(theta[v], phi[v]) * 3.0 *
                        gauss2(theta[v], t0, 0.06 * kPi, phi[v], p0, 0.30));
        });
    }

    std::vector<std::function<Vec3(int)>> exp_defs;
    exp_defs.push_back([&](int v) { // jaw open
        const Real mask = smoothstep01((theta[v] - 0.64 * kPi) / (0.10 * kPi)) *
                          std::exp(-phi[v] * phi[v] / (2 * 0.7 * 0.7));
        return Vec3(0, 7.0 * mask, 2.0 * mask);
    });
    exp_defs.push_back([&](int v) { // smile
        const Real gl = gauss2(theta[v], 0.66 * kPi, 0.05 * kPi, phi[v], -0.38, 0.18);
        const Real gr = gauss2(theta[v], 0.66 * kPi, 0.05 * kPi, phi[v], 0.38, 0.18);
        return Vec3(-3.0 * gl + 3.0 * gr, -3.0 * (gl + gr), -1.0 * (gl + gr));
    });
    exp_defs.push_back([&](int v) { // brow raise
        const Real g = gauss2(theta[v], 0.40 * kPi, 0.05 * kPi, phi[v], -0.5, 0.35) +
                       gauss2(theta[v], 0.40 * kPi, 0.05 * kPi, phi[v], 0.5, 0.35);
        return Vec3(0, -4.0 * g, 0);
    });
    exp_defs.push_back([&](int v) { // pucker
        return Vec3(-direction(theta[v], phi[v]) * 3.0 *
                    gauss2(theta[v], 0.67 * kPi, 0.05 * kPi, phi[v], 0.0, 0.40));
    });
    exp_defs.push_back([&](int v) { // eye close
        const Real gu = gauss2(theta[v], 0.435 * kPi, 0.02 * kPi, phi[v], -0.52, 0.20) +
                        gauss2(theta[v], 0.435 * kPi, 0.02 * kPi, phi[v], 0.52, 0.20);
        return Vec3(0, 2.0 * gu, 0);
    });
    for (int extra = 5; extra < cfg.exp_modes; ++extra)
    {
        const Real t0 = (0.38 + 0.38 * ((extra * 13) % 11) / 10.0) * kPi;
        const Real p0 = -0.9 + 1.8 * ((extra * 7) % 10) / 9.0;
        exp_defs.push_back([&, t0, p0](int v) {
            return Vec3(direction(theta[v], phi[v]) * 2.5 *
                        gauss2(theta[v], t0, 0.05 * kPi, phi[v], p0, 0.25));
        });
    }

    auto realize = [&](const std::vector<std::function<Vec3(int)>>& defs, int count) {
        std::vector<MatX3> fields;
        for (int m = 0; m < count && m < static_cast<int>(defs.size()); ++m)
        {
            MatX3 field(n, 3);
            for (int v = 0; v < n; ++v)
                field.row(v) = defs[m](v).transpose();
            fields.push_back(std::move(field));
        }
        return fields;
    };
    head.id_fields = realize(id_defs, cfg.id_modes);
    head.exp_fields = realize(exp_defs, cfg.exp_modes);

    // Out-of-span fields: an asymmetric cheek bump and a forehead bump.
    head.extra_fields.push_back(radial_field(0.58 * kPi, 0.06 * kPi, -0.80, 0.25, 5.0));
    head.extra_fields.push_back(radial_field(0.30 * kPi, 0.05 * kPi, 0.0, 0.40, 5.0));

    // Identity x expression grid: weights ~ N(0,1), first row/column neutral.
    Rng rng(cfg.seed);
    head.id_weights = MatX::Zero(cfg.n_id, cfg.id_modes);
    head.exp_weights = MatX::Zero(cfg.n_exp, cfg.exp_modes);
    std::normal_distribution<Real> unit(0.0, 1.0);
    for (int i = 1; i < cfg.n_id; ++i)
        for (int k = 0; k < cfg.id_modes; ++k)
            head.id_weights(i, k) = unit(rng);
    for (int j = 1; j < cfg.n_exp; ++j)
        for (int l = 0; l < cfg.exp_modes; ++l)
            head.exp_weights(j, l) = unit(rng);

    head.grid.n_id = cfg.n_id;
    head.grid.n_exp = cfg.n_exp;
    head.grid.n_vertices = n;
    head.grid.shapes.resize(static_cast<size_t>(cfg.n_id) * cfg.n_exp);
    for (int i = 0; i < cfg.n_id; ++i)
        for (int j = 0; j < cfg.n_exp; ++j)
        {
            MatX3 shape = head.base;
            for (int k = 0; k < cfg.id_modes; ++k)
                if (head.id_weights(i, k) != 0.0)
                    shape += head.id_weights(i, k) * head.id_fields[k];
            for (int l = 0; l < cfg.exp_modes; ++l)
                if (head.exp_weights(j, l) != 0.0)
                    shape += head.exp_weights(j, l) * head.exp_fields[l];
            head.grid.shape(i, j) =
                Eigen::Map<const VecX>(shape.data(), static_cast<Eigen::Index>(3) * n);
        }

    TensorBuildResult built = build_reduced_tensor(head.grid, cfg.k_id(), cfg.k_exp());

    FaceModel& model = head.model;
    model.tensor = built.tensor;
    model.tensor_initial = built.tensor;
    model.mean_score_id = built.mean_score_id;
    model.mean_score_exp = built.mean_score_exp;
    model.sigma_id = built.sigma_id;
    model.sigma_exp = built.sigma_exp;
    model.sigma_rms_id = built.sigma_rms_id;
    model.sigma_rms_exp = built.sigma_rms_exp;
    model.triangles = F;

    // Albedo: procedural skin with lips, brows and a lateral texture mode
    // (the texture makes the color term localize tangential slide).
    model.albedo.mean.resize(3 * n);
    for (int v = 0; v < n; ++v)
    {
        const Real t = theta[v], p = phi[v];
        Vec3 c(0.72, 0.57, 0.47);
        const Real lip = gauss2(t, 0.665 * kPi, 0.035 * kPi, p, 0.0, 0.42);
        c += lip * Vec3(0.06, -0.10, -0.10);
        const Real brow = gauss2(t, 0.40 * kPi, 0.025 * kPi, p, -0.5, 0.22) +
                          gauss2(t, 0.40 * kPi, 0.025 * kPi, p, 0.5, 0.22);
        c -= brow * Vec3(0.30, 0.26, 0.22);
        c += Vec3(0.03, 0.03, 0.03) * std::cos(t); // slightly lighter crown
        model.albedo.mean.segment<3>(3 * v) = c;
    }
    model.albedo.basis = MatX::Zero(3 * n, cfg.k_alb);
    for (int v = 0; v < n; ++v)
    {
        const Real t = theta[v], p = phi[v];
        model.albedo.basis.block<3, 1>(3 * v, 0) = Vec3(0.05, 0.05, 0.05); // lightness
        if (cfg.k_alb > 1)
            model.albedo.basis.block<3, 1>(3 * v, 1) = Vec3(0.035, -0.012, -0.012); // redness
        if (cfg.k_alb > 2)
            model.albedo.basis.block<3, 1>(3 * v, 2) =
                gauss2(t, 0.665 * kPi, 0.035 * kPi, p, 0.0, 0.42) * Vec3(0.05, -0.04, -0.04);
        if (cfg.k_alb > 3)
        {
            const Real front = std::exp(-p * p / (2 * 0.9 * 0.9));
            model.albedo.basis.block<3, 1>(3 * v, 3) =
                0.035 * std::sin(6.0 * p) * std::sin(9.0 * t) * front * Vec3(1.0, 0.9, 0.8);
        }
        for (int k = 4; k < cfg.k_alb; ++k)
        {
            const Real t0 = (0.35 + 0.4 * ((k * 19) % 7) / 6.0) * kPi;
            const Real p0 = -1.0 + 2.0 * ((k * 23) % 11) / 10.0;
            model.albedo.basis.block<3, 1>(3 * v, k) =
                0.03 * gauss2(t, t0, 0.07 * kPi, p, p0, 0.35) * Vec3(1.0, 1.0, 1.0);
        }
    }
    model.albedo.sigma = VecX::Ones(cfg.k_alb);

    // Cylindrical UV chart: u from phi (face center at u = 0.5), v from theta.
    model.uv.resize(n, 2);
    for (int v = 0; v < n; ++v)
    {
        model.uv(v, 0) = (phi[v] + kPi) / (2 * kPi);
        model.uv(v, 1) = theta[v] / kPi;
    }

    // Landmarks: nearest grid vertex to semantic (theta, phi) positions.
    auto nearest = [&](Real t0, Real p0) {
        int i = static_cast<int>(std::lround(t0 * (nlat + 1) / kPi)) - 1;
        i = std::clamp(i, 0, nlat - 1);
        int j = static_cast<int>(std::lround((p0 + kPi) * nlon / (2 * kPi)));
        j = ((j % nlon) + nlon) % nlon;
        return i * nlon + j;
    };
    auto add_lm = [&](int sem, Real t0, Real p0, ContourSide side) {
        model.landmarks.push_back({sem, nearest(t0, p0), side});
    };
    add_lm(0, 0.55 * kPi, 0.0, ContourSide::none);   // nose tip
    add_lm(1, 0.78 * kPi, 0.0, ContourSide::none);   // chin
    add_lm(2, 0.45 * kPi, 0.0, ContourSide::none);   // nose bridge
    add_lm(3, 0.455 * kPi, -0.78, ContourSide::none); // eye outer L
    add_lm(4, 0.455 * kPi, 0.78, ContourSide::none);  // eye outer R
    add_lm(5, 0.455 * kPi, -0.30, ContourSide::none); // eye inner L
    add_lm(6, 0.455 * kPi, 0.30, ContourSide::none);  // eye inner R
    add_lm(7, 0.425 * kPi, -0.52, ContourSide::none); // upper eyelid L
    add_lm(8, 0.425 * kPi, 0.52, ContourSide::none);  // upper eyelid R
    add_lm(9, 0.49 * kPi, -0.52, ContourSide::none);  // lower eyelid L
    add_lm(10, 0.49 * kPi, 0.52, ContourSide::none);  // lower eyelid R
    add_lm(11, 0.66 * kPi, -0.38, ContourSide::none); // mouth corner L
    add_lm(12, 0.66 * kPi, 0.38, ContourSide::none);  // mouth corner R
    add_lm(13, 0.64 * kPi, 0.0, ContourSide::none);   // upper lip
    add_lm(14, 0.69 * kPi, 0.0, ContourSide::none);   // lower lip
    add_lm(15, 0.40 * kPi, -0.5, ContourSide::none);  // brow L
    add_lm(16, 0.40 * kPi, 0.5, ContourSide::none);   // brow R
    int sem = 17;
    for (Real t0 : {0.45, 0.55, 0.65, 0.72})
        add_lm(sem++, t0 * kPi, -1.15, ContourSide::left);
    for (Real t0 : {0.45, 0.55, 0.65, 0.72})
        add_lm(sem++, t0 * kPi, 1.15, ContourSide::right);

    // Eyelid pairs reference landmark list indices: (upper, lower) per eye.
    model.eyelid_pairs.push_back({7, 9});
    model.eyelid_pairs.push_back({8, 10});

    model.adjacency = MeshAdjacency::build(FaceMesh{head.base, F, {}});
    return head;
}

/// An identity outside the span of the shipped basis: mean head plus the
/// requested blend of the extra (never-trained) fields and ordinary modes.
inline MatX3 out_of_span_shape(const ProceduralHead& head, const VecX& id_weights,
                               const VecX& extra_weights)
{
    MatX3 shape = head.base;
    for (int k = 0; k < id_weights.size() && k < static_cast<int>(head.id_fields.size()); ++k)
        shape += id_weights[k] * head.id_fields[k];
    for (int k = 0; k < extra_weights.size() && k < static_cast<int>(head.extra_fields.size()); ++k)
        shape += extra_weights[k] * head.extra_fields[k];
    return shape;
}

} // namespace facefit

#endif // FACEFIT_PROCEDURAL_HPP
