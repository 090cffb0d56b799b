/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: include/facefit/io/obj.hpp
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

#ifndef FACEFIT_IO_OBJ_HPP
#define FACEFIT_IO_OBJ_HPP

#include "facefit/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace facefit::io {

/**
 * Wavefront OBJ with positions and triangles. Per-vertex RGB albedo, when
 * present, goes to a sidecar "<path>.albedo" with one "r g b" line per
 * vertex in file order.
 */
inline void write_obj(const std::string& path, const FaceMesh& mesh)
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("write_obj: cannot open " + path);
    f << std::setprecision(10);
    for (int i = 0; i < mesh.num_vertices(); ++i)
        f << "v " << mesh.vertices(i, 0) << " " << mesh.vertices(i, 1) << " " << mesh.vertices(i, 2)
          << "\n";
    for (int t = 0; t < mesh.num_triangles(); ++t)
        f << "f " << mesh.triangles(t, 0) + 1 << " " << mesh.triangles(t, 1) + 1 << " "
          << mesh.triangles(t, 2) + 1 << "\n";
    if (!f)
        throw std::runtime_error("write_obj: write failed for " + path);
    if (mesh.albedo.rows() == mesh.vertices.rows() && mesh.albedo.rows() > 0)
    {
        std::ofstream fa(path + ".albedo");
        if (!fa)
            throw std::runtime_error("write_obj: cannot open " + path + ".albedo");
        fa << std::setprecision(10);
        for (int i = 0; i < mesh.albedo.rows(); ++i)
            fa << mesh.albedo(i, 0) << " " << mesh.albedo(i, 1) << " " << mesh.albedo(i, 2) << "\n";
    }
}

inline FaceMesh read_obj(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("read_obj: cannot open " + path);
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    std::string line;
    while (std::getline(f, line))
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v")
        {
            Vec3 v;
            ss >> v.x() >> v.y() >> v.z();
            verts.push_back(v);
        }
        else if (tag == "f")
        {
            std::array<int, 3> t{};
            for (int k = 0; k < 3; ++k)
            {
                std::string tok;
                ss >> tok;
                t[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            tris.push_back(t);
        }
    }
    FaceMesh mesh;
    mesh.vertices.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(static_cast<int>(i)) = verts[i].transpose();
    mesh.triangles.resize(static_cast<int>(tris.size()), 3);
    for (size_t t = 0; t < tris.size(); ++t)
        mesh.triangles.row(static_cast<int>(t)) << tris[t][0], tris[t][1], tris[t][2];

    std::ifstream fa(path + ".albedo");
    if (fa)
    {
        mesh.albedo.resize(mesh.vertices.rows(), 3);
        for (int i = 0; i < mesh.vertices.rows(); ++i)
            fa >> mesh.albedo(i, 0) >> mesh.albedo(i, 1) >> mesh.albedo(i, 2);
    }
    mesh.validate();
    return mesh;
}

} // namespace facefit::io

#endif // FACEFIT_IO_OBJ_HPP
