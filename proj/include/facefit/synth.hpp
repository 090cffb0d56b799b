/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/synth.hpp
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

#ifndef FACEFIT_SYNTH_HPP
#define FACEFIT_SYNTH_HPP

#include "facefit/model.hpp"
#include "facefit/render.hpp"

namespace facefit::synth {

/// Default desk-scale camera: the head at ~half a meter fills about half the
/// frame.
inline CameraIntrinsics default_intrinsics(int size = 112)
{
    const Real f = 1.1 * size;
    return CameraIntrinsics(f, f, (size - 1) / 2.0, (size - 1) / 2.0, size, size);
}

/**
 * Augmentations applied to the network-input copy of a frame; the stored
 * supervision copy always stays clean. Color scaling, crop jitter with
 * intrinsics compensation, a depth-consistent ellipsoid occluder, horizontal
 * flip and depth noise/outliers.
 */
struct AugmentationSpec
{
    Real color_scale_min = 1.0, color_scale_max = 1.0; // (0.5, 1.5) when enabled
    bool crop = false;
    Real crop_fraction = 0.85;     // crop box size as a fraction of the frame
    Real crop_jitter = 0.08;       // origin jitter, fraction of box size
    bool occluder = false;
    bool flip = false;
    Real depth_noise_sigma = 0.0;  // mm
    Real outlier_fraction = 0.0;   // of valid face pixels
    Real outlier_min = 50.0, outlier_max = 150.0; // mm offsets
    Real landmark_sigma = 0.0;     // px

    static AugmentationSpec none() { return AugmentationSpec{}; }

    static AugmentationSpec standard()
    {
        AugmentationSpec a;
        a.color_scale_min = 0.5;
        a.color_scale_max = 1.5;
        a.crop = true;
        a.occluder = true;
        a.depth_noise_sigma = 1.5;
        a.landmark_sigma = 1.0;
        return a;
    }

    void validate() const
    {
        if (color_scale_min > color_scale_max || outlier_fraction < 0 || outlier_fraction >= 1)
            throw std::invalid_argument("AugmentationSpec: invalid ranges");
    }
};

struct GroundTruthFrame
{
    RGBDFrame input;       // augmented copy fed to fitting
    RGBDFrame supervision; // clean copy (never altered by augmentation)
    ParameterSet chi;
    bool flipped = false;
    Eigen::Vector2i crop_origin = Eigen::Vector2i::Zero();
    int outlier_pixels = 0;
    VecX gt_displacement; // empty unless bumps were injected
};

struct PoseRanges
{
    Real euler_max = deg2rad(10.0);
    Real lateral_max = 15.0; // mm
    Real z_min = 430.0, z_max = 560.0;
};

/**
 * Draws a random ParameterSet: coefficients are zero-mean normals scaled by
 * the per-mode sigmas and truncated at 3 sigma, pose lies in the documented
 * ranges, lighting is random with a dominant positive band 0.
 */
inline ParameterSet sample_parameters(Rng& rng, const FaceModel& model,
                                      const PoseRanges& ranges = {})
{
    ParameterSet chi = model.zero_parameters();
    for (int k = 0; k < model.k_id(); ++k)
        chi.alpha_id[k] = truncated_normal(rng) * model.sigma_id[k];
    for (int l = 0; l < model.k_exp(); ++l)
        chi.alpha_exp[l] = truncated_normal(rng) * model.sigma_exp[l];
    for (int a = 0; a < model.k_alb(); ++a)
        chi.alpha_alb[a] = truncated_normal(rng) * model.albedo.sigma[a];

    std::uniform_real_distribution<Real> uni(-1.0, 1.0);
    chi.euler = Vec3(uni(rng), uni(rng), uni(rng)) * ranges.euler_max;
    std::uniform_real_distribution<Real> uz(ranges.z_min, ranges.z_max);
    chi.translation = Vec3(uni(rng) * ranges.lateral_max, uni(rng) * ranges.lateral_max, uz(rng));

    std::uniform_real_distribution<Real> band0(1.9, 2.5);
    std::uniform_real_distribution<Real> band1(-0.55, 0.55);
    std::uniform_real_distribution<Real> band2(-0.22, 0.22);
    const Real b0 = band0(rng);
    Eigen::Matrix<Real, 1, kShCount> base;
    base[0] = b0;
    for (int j = 1; j < 4; ++j)
        base[j] = band1(rng);
    for (int j = 4; j < kShCount; ++j)
        base[j] = band2(rng);
    std::uniform_real_distribution<Real> tint(0.92, 1.08);
    for (int ch = 0; ch < 3; ++ch)
        chi.sh.row(ch) = base * tint(rng);
    return chi;
}

/// Landmarks as exact projections of the bound vertices (plus optional
/// Gaussian pixel noise); landmarks that fall outside the image are dropped.
inline std::vector<Landmark> project_landmarks(const FaceModel& model, const MatX3& v_cam,
                                               const CameraIntrinsics& K, Rng& rng,
                                               Real noise_sigma)
{
    std::vector<Landmark> out;
    std::normal_distribution<Real> noise(0.0, 1.0);
    for (const auto& lb : model.landmarks)
    {
        const Vec3 v = v_cam.row(lb.vertex).transpose();
        auto q = project(v, K);
        if (!q)
            continue;
        Vec2 pos = *q;
        if (noise_sigma > 0)
            pos += Vec2(noise(rng), noise(rng)) * noise_sigma;
        if (pos.x() < 0 || pos.x() >= K.width || pos.y() < 0 || pos.y() >= K.height)
            continue;
        out.push_back({lb.semantic_id, pos});
    }
    return out;
}

inline std::vector<std::array<int, 2>> eyelid_semantic_pairs(const FaceModel& model)
{
    std::vector<std::array<int, 2>> out;
    for (const auto& p : model.eyelid_pairs)
        out.push_back({model.landmarks[p[0]].semantic_id, model.landmarks[p[1]].semantic_id});
    return out;
}

namespace detail {

/// Textured ellipsoid composited strictly nearer than the face (a stand-in
/// for a hand occluder).
inline void composite_occluder(Image& color, Image& depth, const CameraIntrinsics& K,
                               const ShCoeffs& gamma, Rng& rng)
{
    // Place the ellipsoid between camera and face, over a random part of the
    // covered region.
    Real zmin = std::numeric_limits<Real>::infinity();
    Real xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    int covered = 0;
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x)
            if (depth.at(x, y) > 0)
            {
                zmin = std::min(zmin, depth.at(x, y));
                xmin = std::min(xmin, Real(x));
                xmax = std::max(xmax, Real(x));
                ymin = std::min(ymin, Real(y));
                ymax = std::max(ymax, Real(y));
                ++covered;
            }
    if (covered == 0)
        return;
    std::uniform_real_distribution<Real> ux(xmin, xmax), uy(ymin, ymax), uz(0.55, 0.8);
    const Real cz = zmin * uz(rng);
    const Vec2 cpix(ux(rng), uy(rng));
    const Vec3 center = pixel_ray(cpix.x(), cpix.y(), K) * cz;
    std::uniform_real_distribution<Real> urad(18.0, 34.0);
    const Vec3 radii(urad(rng), urad(rng), urad(rng) * 0.6);

    // Build a small lat/long ellipsoid mesh with striped albedo.
    const int nl = 12, nm = 16;
    const int n = nl * nm + 2;
    MatX3 V(n, 3), A(n, 3);
    for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nm; ++j)
        {
            const Real t = kPi * (i + 1) / (nl + 1);
            const Real p = 2 * kPi * j / nm;
            const Vec3 dir(std::sin(t) * std::cos(p), std::cos(t), std::sin(t) * std::sin(p));
            V.row(i * nm + j) = (center + dir.cwiseProduct(radii)).transpose();
            const Real stripe = 0.5 + 0.35 * std::sin(5.0 * p);
            A.row(i * nm + j) = Vec3(0.55 * stripe + 0.2, 0.45 * stripe + 0.15, 0.4 * stripe + 0.1)
                                    .transpose();
        }
    V.row(nl * nm) = (center + Vec3(0, radii.y(), 0)).transpose();
    V.row(nl * nm + 1) = (center - Vec3(0, radii.y(), 0)).transpose();
    A.row(nl * nm) = A.row(0);
    A.row(nl * nm + 1) = A.row((nl - 1) * nm);
    std::vector<std::array<int, 3>> tris;
    auto vid = [&](int i, int j) { return i * nm + ((j % nm) + nm) % nm; };
    for (int i = 0; i + 1 < nl; ++i)
        for (int j = 0; j < nm; ++j)
        {
            tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
            tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        }
    for (int j = 0; j < nm; ++j)
    {
        tris.push_back({nl * nm, vid(0, j), vid(0, j + 1)});
        tris.push_back({nl * nm + 1, vid(nl - 1, j + 1), vid(nl - 1, j)});
    }
    MatX3i F(static_cast<int>(tris.size()), 3);
    for (size_t f = 0; f < tris.size(); ++f)
        F.row(static_cast<int>(f)) << tris[f][0], tris[f][1], tris[f][2];

    const RenderResult rr = render(FaceMesh{V, F, A}, Pose{}, gamma, K);
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x)
        {
            const Real oz = rr.depth.at(x, y);
            if (oz <= 0)
                continue;
            const Real fz = depth.at(x, y);
            if (fz > 0 && oz >= fz)
                continue; // occluder only ever composites nearer
            depth.at(x, y) = oz;
            color.set_rgb(x, y, rr.color.rgb(x, y));
        }
}

inline int flip_semantic_id(int sem)
{
    // Mirror table for the procedural head's landmark ids: (L,R) pairs.
    switch (sem)
    {
    case 3: return 4;
    case 4: return 3;
    case 5: return 6;
    case 6: return 5;
    case 7: return 8;
    case 8: return 7;
    case 9: return 10;
    case 10: return 9;
    case 11: return 12;
    case 12: return 11;
    case 15: return 16;
    case 16: return 15;
    default:
        if (sem >= 17 && sem <= 20)
            return sem + 4;
        if (sem >= 21 && sem <= 24)
            return sem - 4;
        return sem;
    }
}

} // namespace detail

struct FrameOptions
{
    bool flat_shading = false; // used by fine-scale setups
};

/**
 * Renders the ground truth for chi and derives the augmented input copy.
 * The supervision frame is the clean render; the input applies per-channel
 * color scaling, crop jitter (with intrinsics compensation), an optional
 * nearer-than-face occluder, horizontal flip and depth noise/outliers.
 */
inline GroundTruthFrame generate_frame(const FaceModel& model, const ParameterSet& chi,
                                       const CameraIntrinsics& K, const AugmentationSpec& aug,
                                       Rng& rng, const FrameOptions& fopt = {})
{
    aug.validate();
    GroundTruthFrame out;
    out.chi = chi;

    RenderOptions ropt;
    ropt.flat_shading = fopt.flat_shading;
    const FaceMesh mesh = model.mesh(chi);
    const RenderResult rr = render(mesh, chi.pose(), chi.sh, K, ropt);
    const MatX3 v_cam = transform_vertices(mesh.vertices, chi.pose());

    out.supervision.color = rr.color;
    out.supervision.depth = rr.depth;
    out.supervision.intrinsics = K;
    out.supervision.landmarks = project_landmarks(model, v_cam, K, rng, 0.0);
    out.supervision.eyelid_pairs = eyelid_semantic_pairs(model);

    // Input copy.
    Image color = rr.color;
    Image depth = rr.depth;
    CameraIntrinsics Ki = K;
    std::vector<Landmark> landmarks =
        aug.landmark_sigma > 0 ? project_landmarks(model, v_cam, K, rng, aug.landmark_sigma)
                               : out.supervision.landmarks;

    if (aug.color_scale_min != 1.0 || aug.color_scale_max != 1.0)
    {
        std::uniform_real_distribution<Real> us(aug.color_scale_min, aug.color_scale_max);
        const Real s[3] = {us(rng), us(rng), us(rng)};
        for (int y = 0; y < color.height(); ++y)
            for (int x = 0; x < color.width(); ++x)
                for (int c = 0; c < 3; ++c)
                    color.at(x, y, c) *= s[c];
    }

    if (aug.occluder)
        detail::composite_occluder(color, depth, Ki, chi.sh, rng);

    if (aug.depth_noise_sigma > 0 || aug.outlier_fraction > 0)
    {
        std::normal_distribution<Real> gauss(0.0, aug.depth_noise_sigma);
        std::uniform_real_distribution<Real> u01(0.0, 1.0);
        std::uniform_real_distribution<Real> umag(aug.outlier_min, aug.outlier_max);
        for (int y = 0; y < depth.height(); ++y)
            for (int x = 0; x < depth.width(); ++x)
            {
                Real& z = depth.at(x, y);
                if (z <= 0)
                    continue;
                if (aug.depth_noise_sigma > 0)
                    z += gauss(rng);
                if (aug.outlier_fraction > 0 && u01(rng) < aug.outlier_fraction)
                {
                    z += (u01(rng) < 0.5 ? -1.0 : 1.0) * umag(rng);
                    ++out.outlier_pixels;
                }
                if (z <= 0)
                    z = 1.0;
            }
    }

    if (aug.crop)
    {
        const int box = static_cast<int>(aug.crop_fraction * std::min(K.width, K.height));
        const int slack_x = K.width - box, slack_y = K.height - box;
        std::uniform_real_distribution<Real> uj(-aug.crop_jitter, aug.crop_jitter);
        int ox = static_cast<int>(slack_x / 2.0 + uj(rng) * box);
        int oy = static_cast<int>(slack_y / 2.0 + uj(rng) * box);
        ox = std::clamp(ox, 0, slack_x);
        oy = std::clamp(oy, 0, slack_y);
        out.crop_origin = Eigen::Vector2i(ox, oy);
        color = color.crop(ox, oy, box, box);
        depth = depth.crop(ox, oy, box, box);
        Ki = Ki.cropped(ox, oy, box, box);
        std::vector<Landmark> kept;
        for (auto lm : landmarks)
        {
            lm.position -= Vec2(ox, oy);
            if (lm.position.x() >= 0 && lm.position.x() < box && lm.position.y() >= 0 &&
                lm.position.y() < box)
                kept.push_back(lm);
        }
        landmarks = std::move(kept);
    }

    if (aug.flip)
    {
        color = color.flipped_horizontal();
        depth = depth.flipped_horizontal();
        const Real w1 = Ki.width - 1;
        Ki = Ki.flipped_horizontal();
        for (auto& lm : landmarks)
        {
            lm.position.x() = w1 - lm.position.x();
            lm.semantic_id = detail::flip_semantic_id(lm.semantic_id);
        }
        out.flipped = true;
    }

    out.input.color = std::move(color);
    out.input.depth = std::move(depth);
    out.input.intrinsics = Ki;
    out.input.landmarks = std::move(landmarks);
    out.input.eyelid_pairs = out.supervision.eyelid_pairs;
    return out;
}

/// Per-frame pose/expression trajectory of a synthetic sequence.
struct MotionScript
{
    std::vector<Vec3> euler;        // absolute, per frame
    std::vector<Vec3> translation;  // absolute, per frame
    std::vector<VecX> exp_offsets;  // optional per-frame expression deviation

    size_t length() const { return euler.size(); }

    static MotionScript static_pose(const ParameterSet& chi, int frames)
    {
        MotionScript s;
        s.euler.assign(frames, chi.euler);
        s.translation.assign(frames, chi.translation);
        return s;
    }

    static MotionScript yaw_sweep(const ParameterSet& chi, int frames, Real amplitude_rad,
                                  Real periods = 1.0)
    {
        MotionScript s = static_pose(chi, frames);
        for (int k = 0; k < frames; ++k)
        {
            Vec3 e = chi.euler;
            e.y() += amplitude_rad * std::sin(2 * kPi * periods * k / std::max(frames - 1, 1));
            s.euler[k] = e;
        }
        return s;
    }
};

/**
 * Generates a sequence with exact ground-truth flow: each frame's flow maps
 * the surface points frozen on the previous frame's raster into the current
 * frame, so E_flow at the generating parameters is exactly zero.
 */
inline std::vector<GroundTruthFrame> generate_sequence(const FaceModel& model,
                                                       const ParameterSet& base,
                                                       const MotionScript& script,
                                                       const CameraIntrinsics& K,
                                                       const AugmentationSpec& aug, Rng& rng)
{
    std::vector<GroundTruthFrame> out;
    out.reserve(script.length());
    for (size_t k = 0; k < script.length(); ++k)
    {
        ParameterSet chi = base;
        chi.euler = script.euler[k];
        chi.translation = script.translation[k];
        if (k < script.exp_offsets.size() && script.exp_offsets[k].size() == chi.alpha_exp.size())
            chi.alpha_exp += script.exp_offsets[k];
        GroundTruthFrame g = generate_frame(model, chi, K, aug, rng);
        if (k > 0)
        {
            const GroundTruthFrame& prev = out.back();
            const RasterBuffer raster_prev =
                rasterize(model.mesh(prev.chi), prev.chi.pose(), K);
            const MatX3 P_cur = model.geometry(chi);
            const Mat3 R = rotation_from_euler(chi.euler);
            Image flow(K.width, K.height, 2, 0.0);
            for (int px : raster_prev.visible)
            {
                const int x = px % K.width, y = px / K.width;
                const int f = raster_prev.tri[px];
                const Vec3& l = raster_prev.bary[px];
                Vec3 p = Vec3::Zero();
                for (int kk = 0; kk < 3; ++kk)
                    p += l[kk] * P_cur.row(model.triangles(f, kk)).transpose();
                const auto q = project(R * p + chi.translation, K);
                if (!q)
                    continue;
                const auto q_prev = project(raster_prev.point_at(x, y), K);
                if (!q_prev)
                    continue;
                flow.at(x, y, 0) = q->x() - q_prev->x();
                flow.at(x, y, 1) = q->y() - q_prev->y();
            }
            g.input.flow_to_previous = flow;
            g.supervision.flow_to_previous = std::move(flow);
        }
        out.push_back(std::move(g));
    }
    return out;
}

} // namespace facefit::synth

#endif // FACEFIT_SYNTH_HPP
