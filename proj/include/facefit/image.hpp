/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/image.hpp
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

#ifndef FACEFIT_IMAGE_HPP
#define FACEFIT_IMAGE_HPP

#include "facefit/core.hpp"

#include <algorithm>
#include <cassert>
#include <vector>

namespace facefit {

/**
 * Dense row-major image with a runtime channel count.
 *
 * Color images hold 3 channels in [0,1] (unclamped values are legal in
 * intermediate buffers and only clamped on 8-bit export), depth images hold
 * 1 channel in millimeters with 0 marking an invalid pixel, flow fields hold
 * 2 channels in pixels, and XYZ maps hold 3 channels in millimeters.
 */
class Image
{
public:
    Image() = default;
    Image(int width, int height, int channels, Real fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill)
    {
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

    Real& at(int x, int y, int c = 0)
    {
        assert(in_bounds(x, y) && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    Real at(int x, int y, int c = 0) const
    {
        assert(in_bounds(x, y) && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    Vec3 rgb(int x, int y) const
    {
        assert(channels_ >= 3);
        return Vec3(at(x, y, 0), at(x, y, 1), at(x, y, 2));
    }

    void set_rgb(int x, int y, const Vec3& v)
    {
        at(x, y, 0) = v.x();
        at(x, y, 1) = v.y();
        at(x, y, 2) = v.z();
    }

    std::vector<Real>& data() { return data_; }
    const std::vector<Real>& data() const { return data_; }

    /// Bilinear sample of channel c at a continuous pixel position (pixel
    /// centers at integer coordinates). Clamps to the border.
    Real sample_bilinear(Real x, Real y, int c = 0) const
    {
        const Real cx = std::clamp(x, Real(0), Real(width_ - 1));
        const Real cy = std::clamp(y, Real(0), Real(height_ - 1));
        const int x0 = static_cast<int>(std::floor(cx));
        const int y0 = static_cast<int>(std::floor(cy));
        const int x1 = std::min(x0 + 1, width_ - 1);
        const int y1 = std::min(y0 + 1, height_ - 1);
        const Real fx = cx - x0;
        const Real fy = cy - y0;
        return (1 - fx) * (1 - fy) * at(x0, y0, c) + fx * (1 - fy) * at(x1, y0, c) +
               (1 - fx) * fy * at(x0, y1, c) + fx * fy * at(x1, y1, c);
    }

    /// Crop to [x0, x0+w) x [y0, y0+h); the box must lie inside the image.
    Image crop(int x0, int y0, int w, int h) const
    {
        if (x0 < 0 || y0 < 0 || x0 + w > width_ || y0 + h > height_)
            throw std::invalid_argument("Image::crop: box outside image");
        Image out(w, h, channels_);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < channels_; ++c)
                    out.at(x, y, c) = at(x0 + x, y0 + y, c);
        return out;
    }

    Image flipped_horizontal() const
    {
        Image out(width_, height_, channels_);
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                for (int c = 0; c < channels_; ++c)
                    out.at(x, y, c) = at(width_ - 1 - x, y, c);
        return out;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<Real> data_;
};

} // namespace facefit

#endif // FACEFIT_IMAGE_HPP
