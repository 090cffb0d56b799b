/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/png.hpp
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

#ifndef FACEFIT_IO_PNG_HPP
#define FACEFIT_IO_PNG_HPP

#include "facefit/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

namespace facefit::io {

namespace detail {

struct FileCloser
{
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

/// Color image to 8-bit RGB PNG; values are clamped to [0,1] on export.
inline void write_png_rgb8(const std::string& path, const Image& img)
{
    if (img.channels() != 3)
        throw std::invalid_argument("write_png_rgb8: need a 3-channel image");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw std::runtime_error("write_png_rgb8: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png_rgb8: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y)
    {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
            {
                const Real v = std::clamp(img.at(x, y, c), Real(0), Real(1));
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image read_png_rgb8(const std::string& path)
{
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw std::runtime_error("read_png_rgb8: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_rgb8: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    Image img(w, h, 3);
    std::vector<png_byte> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y)
    {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Depth to 16-bit grayscale PNG in tenths of a millimeter (0 = invalid).
inline void write_png_depth16(const std::string& path, const Image& depth)
{
    if (depth.channels() != 1)
        throw std::invalid_argument("write_png_depth16: need a 1-channel image");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw std::runtime_error("write_png_depth16: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png_depth16: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, depth.width(), depth.height(), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(depth.width()) * 2);
    for (int y = 0; y < depth.height(); ++y)
    {
        for (int x = 0; x < depth.width(); ++x)
        {
            const Real mm = depth.at(x, y);
            const long tenths = mm <= 0 ? 0 : std::lround(std::clamp(mm * 10.0, 0.0, 65535.0));
            row[static_cast<size_t>(x) * 2] = static_cast<png_byte>((tenths >> 8) & 0xff);
            row[static_cast<size_t>(x) * 2 + 1] = static_cast<png_byte>(tenths & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image read_png_depth16(const std::string& path)
{
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw std::runtime_error("read_png_depth16: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_depth16: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY)
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_depth16: not 16-bit grayscale: " + path);
    }
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    Image img(w, h, 1);
    std::vector<png_byte> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y)
    {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
        {
            const int tenths = (row[static_cast<size_t>(x) * 2] << 8) | row[x * 2 + 1];
            img.at(x, y) = tenths / 10.0;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

} // namespace facefit::io

#endif // FACEFIT_IO_PNG_HPP
