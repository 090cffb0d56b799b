/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/correspond.hpp
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

#ifndef FACEFIT_CORRESPOND_HPP
#define FACEFIT_CORRESPOND_HPP

#include "facefit/frame.hpp"
#include "facefit/raster.hpp"

namespace facefit {

inline constexpr int kSearchRadius = 5; // the [-5,5] x [-5,5] window

/**
 * One matched pixel: m (visible in the render), the matched real pixel m'
 * within the search window, the back-projected real point and its normal.
 */
struct Correspondence
{
    int pixel = -1;       // m, row-major index
    int match_pixel = -1; // m'
    Vec3 p_real = Vec3::Zero();
    Vec3 n_real = Vec3::Zero();
    bool normal_valid = false;
};

struct CorrespondenceSet
{
    std::vector<Correspondence> items;
    int num_visible = 0; // |F| before dropping pixels without a valid match

    bool empty() const { return items.empty(); }
};

/**
 * For every visible pixel m, finds the real-depth pixel m' in the
 * [-5,5]x[-5,5] window whose back-projected point is closest to the rendered
 * surface point at m. Pixels with no valid real depth in the window are
 * dropped for this iteration. Ties keep m' = m when it is valid, otherwise
 * the first minimum in row-major window order.
 */
inline CorrespondenceSet correspondence_search(const RasterBuffer& raster, const RealGeometry& real)
{
    if (raster.width != real.xyz.width() || raster.height != real.xyz.height())
        throw std::invalid_argument("correspondence_search: resolution mismatch");
    CorrespondenceSet out;
    out.num_visible = static_cast<int>(raster.visible.size());
    out.items.reserve(raster.visible.size());
    const int w = raster.width, h = raster.height;
    for (int idx : raster.visible)
    {
        const int x = idx % w, y = idx / w;
        const Vec3 p_syn = raster.point_at(x, y);
        Real best = std::numeric_limits<Real>::infinity();
        int best_x = -1, best_y = -1;
        if (real.xyz.at(x, y, 2) > 0)
        {
            best = (real.xyz.rgb(x, y) - p_syn).norm();
            best_x = x;
            best_y = y;
        }
        for (int dy = -kSearchRadius; dy <= kSearchRadius; ++dy)
            for (int dx = -kSearchRadius; dx <= kSearchRadius; ++dx)
            {
                const int nx = x + dx, ny = y + dy;
                if ((dx == 0 && dy == 0) || nx < 0 || nx >= w || ny < 0 || ny >= h)
                    continue;
                if (real.xyz.at(nx, ny, 2) <= 0)
                    continue;
                const Real d = (real.xyz.rgb(nx, ny) - p_syn).norm();
                if (d < best)
                {
                    best = d;
                    best_x = nx;
                    best_y = ny;
                }
            }
        if (best_x < 0)
            continue;
        Correspondence c;
        c.pixel = idx;
        c.match_pixel = best_y * w + best_x;
        c.p_real = real.xyz.rgb(best_x, best_y);
        c.normal_valid = real.normal_valid.at(best_x, best_y) > 0;
        if (c.normal_valid)
            c.n_real = real.normals.rgb(best_x, best_y);
        out.items.push_back(c);
    }
    return out;
}

} // namespace facefit

#endif // FACEFIT_CORRESPOND_HPP
