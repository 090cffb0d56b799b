/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/model.hpp
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

#ifndef FACEFIT_MODEL_HPP
#define FACEFIT_MODEL_HPP

#include "facefit/camera.hpp"
#include "facefit/core.hpp"
#include "facefit/mesh.hpp"
#include "facefit/sh.hpp"

#include <Eigen/SVD>

#include <string>
#include <vector>

namespace facefit {

/**
 * Reduced bilinear geometry basis: a rank-3 array of shape
 * (3n, K_id, K_exp) in millimeters. Geometry is assembled by contracting the
 * identity and expression modes with coefficient vectors. Slices (one per
 * (k, l) mode pair) are stored contiguously.
 */
class CoreTensor
{
public:
    CoreTensor() = default;
    CoreTensor(int dim0, int k_id, int k_exp)
        : dim0_(dim0), k_id_(k_id), k_exp_(k_exp),
          entries_(static_cast<size_t>(dim0) * k_id * k_exp, 0.0)
    {
    }

    int dim0() const { return dim0_; }
    int k_id() const { return k_id_; }
    int k_exp() const { return k_exp_; }
    size_t size() const { return entries_.size(); }

    Real* slice(int k, int l) { return entries_.data() + slice_offset(k, l); }
    const Real* slice(int k, int l) const { return entries_.data() + slice_offset(k, l); }

    Eigen::Map<VecX> slice_vec(int k, int l)
    {
        return Eigen::Map<VecX>(slice(k, l), dim0_);
    }
    Eigen::Map<const VecX> slice_vec(int k, int l) const
    {
        return Eigen::Map<const VecX>(slice(k, l), dim0_);
    }

    Real& at(int c, int k, int l) { return entries_[slice_offset(k, l) + c]; }
    Real at(int c, int k, int l) const { return entries_[slice_offset(k, l) + c]; }

    std::vector<Real>& raw() { return entries_; }
    const std::vector<Real>& raw() const { return entries_; }

    bool same_shape(const CoreTensor& other) const
    {
        return dim0_ == other.dim0_ && k_id_ == other.k_id_ && k_exp_ == other.k_exp_;
    }

private:
    size_t slice_offset(int k, int l) const
    {
        return (static_cast<size_t>(k) * k_exp_ + l) * dim0_;
    }

    int dim0_ = 0, k_id_ = 0, k_exp_ = 0;
    std::vector<Real> entries_;
};

/**
 * p = A x2 alpha_id x3 alpha_exp. Bilinear in the two coefficient vectors;
 * p[3i..3i+3] is the position of vertex i.
 */
inline VecX assemble_geometry(const CoreTensor& tensor, const VecX& alpha_id, const VecX& alpha_exp)
{
    if (alpha_id.size() != tensor.k_id() || alpha_exp.size() != tensor.k_exp())
        throw std::invalid_argument("assemble_geometry: coefficient lengths do not match tensor modes");
    VecX p = VecX::Zero(tensor.dim0());
    for (int k = 0; k < tensor.k_id(); ++k)
    {
        const Real a = alpha_id[k];
        if (a == 0.0)
            continue;
        for (int l = 0; l < tensor.k_exp(); ++l)
        {
            const Real w = a * alpha_exp[l];
            if (w == 0.0)
                continue;
            p += w * tensor.slice_vec(k, l);
        }
    }
    return p;
}

/// A x3 alpha_exp: the (3n x K_id) matrix d p / d alpha_id.
inline MatX mode_id_matrix(const CoreTensor& tensor, const VecX& alpha_exp)
{
    if (alpha_exp.size() != tensor.k_exp())
        throw std::invalid_argument("mode_id_matrix: coefficient length mismatch");
    MatX m = MatX::Zero(tensor.dim0(), tensor.k_id());
    for (int k = 0; k < tensor.k_id(); ++k)
        for (int l = 0; l < tensor.k_exp(); ++l)
            if (alpha_exp[l] != 0.0)
                m.col(k) += alpha_exp[l] * tensor.slice_vec(k, l);
    return m;
}

/// A x2 alpha_id: the (3n x K_exp) matrix d p / d alpha_exp.
inline MatX mode_exp_matrix(const CoreTensor& tensor, const VecX& alpha_id)
{
    if (alpha_id.size() != tensor.k_id())
        throw std::invalid_argument("mode_exp_matrix: coefficient length mismatch");
    MatX m = MatX::Zero(tensor.dim0(), tensor.k_exp());
    for (int k = 0; k < tensor.k_id(); ++k)
        if (alpha_id[k] != 0.0)
            for (int l = 0; l < tensor.k_exp(); ++l)
                m.col(l) += alpha_id[k] * tensor.slice_vec(k, l);
    return m;
}

/// grad_A += scale * g (outer) alpha_id (outer) alpha_exp, the pullback of a
/// geometry gradient g = dE/dp onto the tensor entries.
inline void accumulate_tensor_gradient(CoreTensor& grad, const VecX& g, const VecX& alpha_id,
                                       const VecX& alpha_exp, Real scale = 1.0)
{
    for (int k = 0; k < grad.k_id(); ++k)
    {
        const Real a = scale * alpha_id[k];
        if (a == 0.0)
            continue;
        for (int l = 0; l < grad.k_exp(); ++l)
        {
            const Real w = a * alpha_exp[l];
            if (w == 0.0)
                continue;
            grad.slice_vec(k, l) += w * g;
        }
    }
}

/**
 * PCA albedo model: b = mean + basis * alpha. Also carries the per-mode
 * standard deviations used by the regularizer and the sampler.
 */
struct AlbedoModel
{
    VecX mean;   // 3n
    MatX basis;  // 3n x K_alb
    VecX sigma;  // K_alb, > 0

    int k_alb() const { return static_cast<int>(basis.cols()); }
};

inline VecX assemble_albedo(const AlbedoModel& model, const VecX& alpha_alb)
{
    if (alpha_alb.size() != model.basis.cols())
        throw std::invalid_argument("assemble_albedo: coefficient length mismatch");
    return model.mean + model.basis * alpha_alb;
}

/**
 * The regressed unknowns of one frame. Geometry/albedo coefficients are
 * stored as deviations from the model's mean training scores, so the zero
 * vector is the mean face; pose is Euler angles (radians) plus a translation
 * (mm); sh is the 3x9 per-channel lighting.
 */
struct ParameterSet
{
    VecX alpha_id;
    VecX alpha_exp;
    VecX alpha_alb;
    Vec3 euler = Vec3::Zero();       // (pitch, yaw, roll)
    Vec3 translation = Vec3::Zero(); // mm
    ShCoeffs sh = ShCoeffs::Zero();

    static ParameterSet zero(int k_id, int k_exp, int k_alb)
    {
        ParameterSet p;
        p.alpha_id = VecX::Zero(k_id);
        p.alpha_exp = VecX::Zero(k_exp);
        p.alpha_alb = VecX::Zero(k_alb);
        return p;
    }

    Pose pose() const { return Pose{euler, translation}; }

    int flat_size() const
    {
        return static_cast<int>(alpha_id.size() + alpha_exp.size() + alpha_alb.size()) + 6 + 27;
    }

    /// Packs as [id | exp | alb | euler | translation | sh(row-major)].
    VecX pack() const
    {
        VecX v(flat_size());
        int o = 0;
        v.segment(o, alpha_id.size()) = alpha_id;
        o += static_cast<int>(alpha_id.size());
        v.segment(o, alpha_exp.size()) = alpha_exp;
        o += static_cast<int>(alpha_exp.size());
        v.segment(o, alpha_alb.size()) = alpha_alb;
        o += static_cast<int>(alpha_alb.size());
        v.segment<3>(o) = euler;
        o += 3;
        v.segment<3>(o) = translation;
        o += 3;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < kShCount; ++c)
                v[o++] = sh(r, c);
        return v;
    }

    void unpack(const VecX& v)
    {
        int o = 0;
        alpha_id = v.segment(o, alpha_id.size());
        o += static_cast<int>(alpha_id.size());
        alpha_exp = v.segment(o, alpha_exp.size());
        o += static_cast<int>(alpha_exp.size());
        alpha_alb = v.segment(o, alpha_alb.size());
        o += static_cast<int>(alpha_alb.size());
        euler = v.segment<3>(o);
        o += 3;
        translation = v.segment<3>(o);
        o += 3;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < kShCount; ++c)
                sh(r, c) = v[o++];
    }
};

/// Gradient of an energy w.r.t. a ParameterSet, same blocks as pack().
struct ParamGradient
{
    VecX alpha_id, alpha_exp, alpha_alb;
    Vec3 euler = Vec3::Zero();
    Vec3 translation = Vec3::Zero();
    ShCoeffs sh = ShCoeffs::Zero();

    static ParamGradient zero(int k_id, int k_exp, int k_alb)
    {
        ParamGradient g;
        g.alpha_id = VecX::Zero(k_id);
        g.alpha_exp = VecX::Zero(k_exp);
        g.alpha_alb = VecX::Zero(k_alb);
        return g;
    }

    void accumulate(const ParamGradient& o, Real w = 1.0)
    {
        alpha_id += w * o.alpha_id;
        alpha_exp += w * o.alpha_exp;
        alpha_alb += w * o.alpha_alb;
        euler += w * o.euler;
        translation += w * o.translation;
        sh += w * o.sh;
    }

    VecX pack() const
    {
        ParameterSet p;
        p.alpha_id = alpha_id;
        p.alpha_exp = alpha_exp;
        p.alpha_alb = alpha_alb;
        p.euler = euler;
        p.translation = translation;
        p.sh = sh;
        return p.pack();
    }
};

/// Landmark bookkeeping: a semantic id, the model vertex realizing it, and
/// the contour side used by the yaw-based discard rule.
enum class ContourSide
{
    none,
    left,
    right
};

struct LandmarkBinding
{
    int semantic_id = 0;
    int vertex = 0;
    ContourSide side = ContourSide::none;
};

/**
 * The full shipped model: bilinear geometry tensor (with mean scores and
 * per-mode std-devs), PCA albedo, fixed connectivity, landmark bindings,
 * eyelid pairs and the UV chart's per-vertex coordinates.
 */
struct FaceModel
{
    CoreTensor tensor;            // the working basis (A'_r after refinement)
    CoreTensor tensor_initial;    // A_r as built (kept for E_regA)
    VecX mean_score_id, mean_score_exp;
    VecX sigma_id, sigma_exp;     // centered per-mode score std-devs (default)
    VecX sigma_rms_id, sigma_rms_exp; // uncentered: singular values / sqrt(count)
    AlbedoModel albedo;
    MatX3i triangles;
    MatX uv;                      // n x 2, [0,1]^2
    std::vector<LandmarkBinding> landmarks;
    std::vector<std::array<int, 2>> eyelid_pairs; // indices into `landmarks`
    MeshAdjacency adjacency;

    int num_vertices() const { return tensor.dim0() / 3; }
    int k_id() const { return tensor.k_id(); }
    int k_exp() const { return tensor.k_exp(); }
    int k_alb() const { return albedo.k_alb(); }

    VecX full_id_coeffs(const ParameterSet& chi) const { return mean_score_id + chi.alpha_id; }
    VecX full_exp_coeffs(const ParameterSet& chi) const { return mean_score_exp + chi.alpha_exp; }

    VecX geometry_vector(const ParameterSet& chi) const
    {
        return assemble_geometry(tensor, full_id_coeffs(chi), full_exp_coeffs(chi));
    }

    MatX3 geometry(const ParameterSet& chi) const
    {
        const VecX p = geometry_vector(chi);
        return Eigen::Map<const MatX3>(p.data(), num_vertices(), 3);
    }

    MatX3 albedo_rgb(const ParameterSet& chi) const
    {
        const VecX b = assemble_albedo(albedo, chi.alpha_alb);
        return Eigen::Map<const MatX3>(b.data(), num_vertices(), 3);
    }

    FaceMesh mesh(const ParameterSet& chi) const
    {
        return FaceMesh{geometry(chi), triangles, albedo_rgb(chi)};
    }

    ParameterSet zero_parameters() const
    {
        return ParameterSet::zero(k_id(), k_exp(), k_alb());
    }
};

/// A complete identity x expression grid of registered meshes (fixed shared
/// connectivity), the input to build_reduced_tensor.
struct MeshGrid
{
    int n_id = 0, n_exp = 0;
    int n_vertices = 0;
    std::vector<VecX> shapes; // n_id * n_exp entries of length 3n, row-major by identity

    const VecX& shape(int i, int j) const { return shapes[static_cast<size_t>(i) * n_exp + j]; }
    VecX& shape(int i, int j) { return shapes[static_cast<size_t>(i) * n_exp + j]; }

    void validate() const
    {
        if (n_id <= 0 || n_exp <= 0 || shapes.size() != static_cast<size_t>(n_id) * n_exp)
            throw std::invalid_argument("MeshGrid: incomplete identity x expression grid");
        for (const auto& s : shapes)
            if (s.size() != 3 * n_vertices)
                throw std::invalid_argument("MeshGrid: mismatched connectivity");
    }
};

struct TensorBuildResult
{
    CoreTensor tensor;
    MatX scores_id;  // n_id x K_id training scores
    MatX scores_exp; // n_exp x K_exp
    VecX mean_score_id, mean_score_exp;
    VecX sigma_id, sigma_exp;         // centered score std-devs
    VecX sigma_rms_id, sigma_rms_exp; // singular values / sqrt(count)
};

/**
 * 2-mode SVD (Tucker-2) reduction of a registered mesh grid along the
 * identity and expression modes. Training sample (i, j) is reconstructed by
 * contracting the returned tensor with its score vectors; at full ranks the
 * reconstruction is exact, and at truncated ranks the error equals the
 * optimal mode-wise truncation of the data.
 *
 * Score convention: mode scores are U * S (PCA scores of the unfoldings),
 * so the tensor slices absorb 1/s factors and per-mode score std-devs are
 * the natural sigma of Eq.-style regularizers.
 */
inline TensorBuildResult build_reduced_tensor(const MeshGrid& grid, int k_id, int k_exp)
{
    grid.validate();
    if (k_id < 1 || k_id > grid.n_id || k_exp < 1 || k_exp > grid.n_exp)
        throw std::invalid_argument("build_reduced_tensor: requested ranks out of range");

    const int d0 = 3 * grid.n_vertices;
    const int ni = grid.n_id, ne = grid.n_exp;

    // Mode unfoldings: rows are identities (resp. expressions).
    MatX m_id(ni, static_cast<Eigen::Index>(d0) * ne);
    MatX m_exp(ne, static_cast<Eigen::Index>(d0) * ni);
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < ne; ++j)
        {
            m_id.row(i).segment(static_cast<Eigen::Index>(j) * d0, d0) = grid.shape(i, j).transpose();
            m_exp.row(j).segment(static_cast<Eigen::Index>(i) * d0, d0) = grid.shape(i, j).transpose();
        }

    Eigen::BDCSVD<MatX> svd_id(m_id, Eigen::ComputeThinU);
    Eigen::BDCSVD<MatX> svd_exp(m_exp, Eigen::ComputeThinU);

    const MatX u_id = svd_id.matrixU().leftCols(k_id);
    const MatX u_exp = svd_exp.matrixU().leftCols(k_exp);
    const VecX s_id = svd_id.singularValues().head(k_id);
    const VecX s_exp = svd_exp.singularValues().head(k_exp);

    TensorBuildResult out;
    out.scores_id = u_id * s_id.asDiagonal();
    out.scores_exp = u_exp * s_exp.asDiagonal();

    // Guard dead modes (exactly low-rank data) against division blow-up.
    const Real tol_id = s_id.size() ? s_id[0] * 1e-12 : 0.0;
    const Real tol_exp = s_exp.size() ? s_exp[0] * 1e-12 : 0.0;
    VecX inv_s_id(k_id), inv_s_exp(k_exp);
    for (int k = 0; k < k_id; ++k)
        inv_s_id[k] = s_id[k] > tol_id ? 1.0 / s_id[k] : 0.0;
    for (int l = 0; l < k_exp; ++l)
        inv_s_exp[l] = s_exp[l] > tol_exp ? 1.0 / s_exp[l] : 0.0;

    // Core with score normalization folded in:
    // A[:,k,l] = sum_ij D[:,i,j] u_id(i,k) u_exp(j,l) / (s_id[k] s_exp[l]).
    out.tensor = CoreTensor(d0, k_id, k_exp);
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < ne; ++j)
        {
            const VecX& shape = grid.shape(i, j);
            for (int k = 0; k < k_id; ++k)
            {
                const Real wik = u_id(i, k) * inv_s_id[k];
                if (wik == 0.0)
                    continue;
                for (int l = 0; l < k_exp; ++l)
                {
                    const Real w = wik * u_exp(j, l) * inv_s_exp[l];
                    if (w != 0.0)
                        out.tensor.slice_vec(k, l) += w * shape;
                }
            }
        }

    out.mean_score_id = out.scores_id.colwise().mean().transpose();
    out.mean_score_exp = out.scores_exp.colwise().mean().transpose();

    auto centered_std = [](const MatX& scores) {
        const Eigen::RowVectorXd mean = scores.colwise().mean();
        VecX sd(scores.cols());
        for (int c = 0; c < scores.cols(); ++c)
            sd[c] = std::sqrt((scores.col(c).array() - mean[c]).square().mean());
        return sd;
    };
    out.sigma_id = centered_std(out.scores_id);
    out.sigma_exp = centered_std(out.scores_exp);
    out.sigma_rms_id = s_id / std::sqrt(static_cast<Real>(ni));
    out.sigma_rms_exp = s_exp / std::sqrt(static_cast<Real>(ne));

    // Keep sigmas strictly positive (dead modes stay pinned by the prior).
    const Real floor_id = std::max(out.sigma_id.maxCoeff(), Real(1e-12)) * 1e-9;
    const Real floor_exp = std::max(out.sigma_exp.maxCoeff(), Real(1e-12)) * 1e-9;
    out.sigma_id = out.sigma_id.cwiseMax(floor_id);
    out.sigma_exp = out.sigma_exp.cwiseMax(floor_exp);
    return out;
}

/**
 * Core-tensor regularizer:
 *   E = w_reg ||A' - A||^2 + w_smo ||L (A' - A)||^2,
 * where L is the uniform-weight graph Laplacian of the face mesh applied to
 * the per-vertex 3-vectors of each (id, exp) slice. Returns the energy and
 * writes the analytic gradient w.r.t. A' if grad is non-null.
 */
inline Real tensor_regularizer(const CoreTensor& refined, const CoreTensor& initial,
                               const MeshAdjacency& adj, Real w_reg, Real w_smo,
                               CoreTensor* grad = nullptr)
{
    if (!refined.same_shape(initial))
        throw std::invalid_argument("tensor_regularizer: tensor shapes differ");
    const int n = refined.dim0() / 3;
    Real energy = 0.0;
    if (grad && !grad->same_shape(refined))
        *grad = CoreTensor(refined.dim0(), refined.k_id(), refined.k_exp());
    for (int k = 0; k < refined.k_id(); ++k)
        for (int l = 0; l < refined.k_exp(); ++l)
        {
            const auto a = refined.slice_vec(k, l);
            const auto b = initial.slice_vec(k, l);
            const VecX diff = a - b;
            energy += w_reg * diff.squaredNorm();
            const Eigen::Map<const MatX3> d3(diff.data(), n, 3);
            const MatX lap = apply_graph_laplacian(d3, adj);
            energy += w_smo * lap.squaredNorm();
            if (grad)
            {
                MatX g3 = 2.0 * w_smo * apply_graph_laplacian_adjoint(lap, adj);
                Eigen::Map<MatX3> gmap(grad->slice(k, l), n, 3);
                gmap = g3;
                grad->slice_vec(k, l) += 2.0 * w_reg * diff;
            }
        }
    return energy;
}

} // namespace facefit

#endif // FACEFIT_MODEL_HPP
