/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/pfm.hpp
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

#ifndef FACEFIT_IO_PFM_HPP
#define FACEFIT_IO_PFM_HPP

#include "facefit/image.hpp"

#include <fstream>
#include <string>

namespace facefit::io {

/**
 * PFM float images, little-endian (negative scale line), top-down row order.
 * Banners: "Pf" one channel, "PF" three channels, and the documented
 * two-channel extension "PF2" used for flow fields.
 */
inline void write_pfm(const std::string& path, const Image& img)
{
    const char* banner = img.channels() == 1 ? "Pf" : img.channels() == 2 ? "PF2" : "PF";
    if (img.channels() > 3)
        throw std::invalid_argument("write_pfm: unsupported channel count");
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("write_pfm: cannot open " + path);
    f << banner << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(img.width()) * img.channels());
    for (int y = 0; y < img.height(); ++y)
    {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                row[static_cast<size_t>(x) * img.channels() + c] =
                    static_cast<float>(img.at(x, y, c));
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f)
        throw std::runtime_error("write_pfm: write failed for " + path);
}

inline Image read_pfm(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("read_pfm: cannot open " + path);
    std::string banner;
    int w = 0, h = 0;
    double scale = 0;
    f >> banner >> w >> h >> scale;
    f.get(); // single whitespace after the scale line
    int channels;
    if (banner == "Pf")
        channels = 1;
    else if (banner == "PF2")
        channels = 2;
    else if (banner == "PF")
        channels = 3;
    else
        throw std::runtime_error("read_pfm: bad banner in " + path);
    if (w <= 0 || h <= 0 || scale >= 0)
        throw std::runtime_error("read_pfm: unsupported header in " + path);
    Image img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = 0; y < h; ++y)
    {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!f)
            throw std::runtime_error("read_pfm: truncated file " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = row[static_cast<size_t>(x) * channels + c];
    }
    return img;
}

} // namespace facefit::io

#endif // FACEFIT_IO_PFM_HPP
