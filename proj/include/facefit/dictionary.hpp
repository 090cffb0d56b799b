/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/dictionary.hpp
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

#ifndef FACEFIT_DICTIONARY_HPP
#define FACEFIT_DICTIONARY_HPP

#include "facefit/optimizer.hpp"

namespace facefit {

struct RefineOptions
{
    int rounds = 3;
    int dict_steps = 8;      // gradient steps on the tensor per round
    Real dict_lr = 1e-3;     // initial step, adapted by backtracking
    int coding_max_outer = 10;
    FitMode mode = FitMode::rgbd;
};

struct RefineResult
{
    std::vector<ParameterSet> chis;
    std::vector<Real> round_energies; // total corpus energy after each round
    int accepted_dict_steps = 0;
};

namespace detail {

inline Real corpus_energy(const FaceModel& model, const std::vector<RGBDFrame>& frames,
                          const std::vector<RealGeometry>& reals,
                          const std::vector<ParameterSet>& chis, const EnergyWeights& w,
                          FitMode mode, std::vector<FitContext>* ctxs_out = nullptr)
{
    Real total = 0;
    for (size_t i = 0; i < frames.size(); ++i)
    {
        FitContext ctx = build_fit_context(model, chis[i], frames[i], reals[i], true);
        total += evaluate_single_frame(model, chis[i], frames[i], ctx, w, mode).total;
        if (ctxs_out)
            (*ctxs_out)[i] = std::move(ctx);
    }
    CoreTensor unused;
    total += tensor_regularizer(model.tensor, model.tensor_initial, model.adjacency, w.w_Areg,
                                w.w_Asmo, nullptr);
    return total;
}

} // namespace detail

/**
 * Alternating refinement of the core tensor over a fitted corpus:
 * a coding step re-fits every chi with the tensor fixed, a dictionary step
 * runs backtracked gradient descent on the corpus loss plus E_regA w.r.t.
 * the tensor with all chi fixed. model.tensor is mutated in place (the
 * single writer); model.tensor_initial stays the E_regA reference.
 * The corpus energy is non-increasing across accepted dictionary steps.
 */
inline RefineResult refine_core_tensor(FaceModel& model, const std::vector<RGBDFrame>& frames,
                                       const std::vector<ParameterSet>& init_chis,
                                       const EnergyWeights& w, const RefineOptions& opt = {})
{
    if (frames.empty())
        throw std::invalid_argument("refine_core_tensor: empty corpus");
    if (frames.size() != init_chis.size())
        throw std::invalid_argument("refine_core_tensor: chi count mismatch");

    RefineResult out;
    out.chis = init_chis;

    std::vector<RealGeometry> reals;
    reals.reserve(frames.size());
    for (const auto& f : frames)
        reals.push_back(compute_real_geometry(f.depth, f.intrinsics));

    const int kid = model.k_id(), kexp = model.k_exp(), kalb = model.k_alb();
    Real lr = opt.dict_lr;

    for (int round = 0; round < opt.rounds; ++round)
    {
        // Coding: re-fit parameters with the dictionary fixed.
        for (size_t i = 0; i < frames.size(); ++i)
        {
            FitReport rep = fit_frame(model, frames[i], out.chis[i],
                                      FitSchedule::full_only(w, opt.coding_max_outer), opt.mode);
            if (!rep.failed)
                out.chis[i] = rep.chi;
        }

        // Dictionary update: descend on the corpus loss w.r.t. the tensor.
        for (int step = 0; step < opt.dict_steps && opt.dict_lr > 0; ++step)
        {
            std::vector<FitContext> ctxs(frames.size());
            Real cur = 0;
            CoreTensor grad(model.tensor.dim0(), kid, kexp);
            for (size_t i = 0; i < frames.size(); ++i)
            {
                ctxs[i] = build_fit_context(model, out.chis[i], frames[i], reals[i], true);
                ParamGradient pg = ParamGradient::zero(kid, kexp, kalb);
                VecX gg;
                cur += evaluate_single_frame(model, out.chis[i], frames[i], ctxs[i], w, opt.mode,
                                             &pg, &gg)
                           .total;
                accumulate_tensor_gradient(grad, gg, model.full_id_coeffs(out.chis[i]),
                                           model.full_exp_coeffs(out.chis[i]));
            }
            CoreTensor reg_grad;
            cur += tensor_regularizer(model.tensor, model.tensor_initial, model.adjacency, w.w_Areg,
                                      w.w_Asmo, &reg_grad);
            Real gnorm2 = 0;
            for (size_t e = 0; e < grad.raw().size(); ++e)
            {
                grad.raw()[e] += reg_grad.raw()[e];
                gnorm2 += grad.raw()[e] * grad.raw()[e];
            }
            if (gnorm2 < 1e-28)
                break;

            const CoreTensor saved = model.tensor;
            bool accepted = false;
            Real trial_lr = lr;
            for (int bt = 0; bt < 30; ++bt)
            {
                for (size_t e = 0; e < saved.raw().size(); ++e)
                    model.tensor.raw()[e] = saved.raw()[e] - trial_lr * grad.raw()[e];
                // Frozen contexts during the line search; structure refreshes
                // next step.
                Real trial = 0;
                for (size_t i = 0; i < frames.size(); ++i)
                    trial += evaluate_single_frame(model, out.chis[i], frames[i], ctxs[i], w,
                                                   opt.mode)
                                 .total;
                trial += tensor_regularizer(model.tensor, model.tensor_initial, model.adjacency,
                                            w.w_Areg, w.w_Asmo, nullptr);
                if (trial <= cur - 1e-4 * trial_lr * gnorm2)
                {
                    accepted = true;
                    lr = (bt == 0) ? trial_lr * 1.5 : trial_lr;
                    ++out.accepted_dict_steps;
                    break;
                }
                trial_lr *= 0.5;
            }
            if (!accepted)
            {
                model.tensor = saved;
                break;
            }
        }

        out.round_energies.push_back(
            detail::corpus_energy(model, frames, reals, out.chis, w, opt.mode));
    }
    return out;
}

} // namespace facefit

#endif // FACEFIT_DICTIONARY_HPP
