/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/test_raster_render.cpp
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
#include "facefit/render.hpp"

#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace facefit;
using facefit::testing::make_icosphere;
using Catch::Approx;

namespace {

/// Brute-force visibility: nearest front-facing ray/triangle hit per pixel
/// (Moller-Trumbore), written independently of the rasterizer.
struct RayCastResult
{
    int tri = -1;
    Real z = 0;
};

RayCastResult ray_cast(const MatX3& v, const MatX3i& f, const CameraIntrinsics& K, int x, int y)
{
    RayCastResult best;
    const Vec3 dir = pixel_ray(x, y, K);
    for (int t = 0; t < f.rows(); ++t)
    {
        const Vec3 a = v.row(f(t, 0)).transpose();
        const Vec3 b = v.row(f(t, 1)).transpose();
        const Vec3 c = v.row(f(t, 2)).transpose();
        const Vec3 e1 = b - a, e2 = c - a;
        const Vec3 pv = dir.cross(e2);
        const Real det = e1.dot(pv); // equals -(n . dir): positive when front-facing
        if (det <= 0)
            continue;
        const Vec3 tv = -a;
        const Real u = tv.dot(pv) / det;
        if (u < 0 || u > 1)
            continue;
        const Vec3 qv = tv.cross(e1);
        const Real w = dir.dot(qv) / det;
        if (w < 0 || u + w > 1)
            continue;
        const Real dist = e2.dot(qv) / det;
        if (dist <= 1e-3)
            continue;
        const Real z = dist * dir.z();
        if (best.tri < 0 || z < best.z)
        {
            best.tri = t;
            best.z = z;
        }
    }
    return best;
}

} // namespace

TEST_CASE("single triangle covers the frame center", "[raster]")
{
    const CameraIntrinsics K(100, 100, 16, 16, 33, 33);
    MatX3 v(3, 3);
    // Front-facing (outward normal toward -z).
    v << -40, 40, 400, 40, 40, 400, 0, -40, 400;
    MatX3i f(1, 3);
    f << 0, 1, 2;
    const RasterBuffer rb = rasterize(v, f, K);
    REQUIRE(rb.covered(16, 16));
    CHECK(rb.tri_at(16, 16) == 0);
    const Vec3 l = rb.bary_at(16, 16);
    CHECK(l.sum() == Approx(1.0).margin(1e-12));
    CHECK(l.minCoeff() >= 0.0);
    CHECK(rb.depth.at(16, 16) == Approx(400.0).margin(1e-9));
}

TEST_CASE("nearer of two stacked triangles wins every contested pixel", "[raster]")
{
    const CameraIntrinsics K(100, 100, 16, 16, 33, 33);
    MatX3 v(6, 3);
    v << -40, 40, 500, 40, 40, 500, 0, -40, 500, // far
        -40, 40, 300, 40, 40, 300, 0, -40, 300;  // near
    MatX3i f(2, 3);
    f << 0, 1, 2, 3, 4, 5;
    const RasterBuffer rb = rasterize(v, f, K);
    int contested = 0;
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x)
            if (rb.covered(x, y) && ray_cast(v, f, K, x, y).tri >= 0)
            {
                ++contested;
                if (rb.depth.at(x, y) < 400)
                    CHECK(rb.tri_at(x, y) == 1);
            }
    CHECK(contested > 50);
}

TEST_CASE("back-facing and behind-camera geometry yields an empty F", "[raster]")
{
    const CameraIntrinsics K(100, 100, 16, 16, 33, 33);
    MatX3 v(3, 3);
    v << -40, 40, -400, 40, 40, -400, 0, -40, -400;
    MatX3i f(1, 3);
    f << 0, 1, 2;
    CHECK(rasterize(v, f, K).visible.empty());
}

TEST_CASE("shared edges are rasterized exactly once (top-left rule)", "[raster]")
{
    const CameraIntrinsics K(60, 60, 20, 20, 41, 41);
    // A quad split along the diagonal, axis-aligned so pixel centers land
    // exactly on the shared edge.
    MatX3 v(4, 3);
    v << -100, -100, 300, 100, -100, 300, 100, 100, 300, -100, 100, 300;
    MatX3i fa(1, 3), fb(1, 3);
    // Both CCW outward (normal -z toward camera).
    fa << 0, 2, 1;
    fb << 0, 3, 2;
    MatX3i f(2, 3);
    f << 0, 2, 1, 0, 3, 2;
    // Rasterize the triangles separately: their coverage must partition the
    // quad (no overlap on the shared diagonal, no hole either).
    const RasterBuffer ra = rasterize(v, fa, K);
    const RasterBuffer rbuf = rasterize(v, fb, K);
    const RasterBuffer rq = rasterize(v, f, K);
    int both = 0, either = 0;
    for (int y = 0; y < 41; ++y)
        for (int x = 0; x < 41; ++x)
        {
            if (ra.covered(x, y) && rbuf.covered(x, y))
                ++both;
            if (ra.covered(x, y) || rbuf.covered(x, y))
                ++either;
            CHECK((ra.covered(x, y) || rbuf.covered(x, y)) == rq.covered(x, y));
        }
    CHECK(both == 0);
    CHECK(either == 40 * 40); // left/top edges in, right/bottom edges out
    for (int d = 1; d < 40; ++d)
        CHECK(rq.covered(d, d)); // diagonal has no holes
}

TEST_CASE("rasterizer visibility matches brute-force ray casting", "[raster]")
{
    Rng rng(2027);
    for (int trial = 0; trial < 6; ++trial)
    {
        FaceMesh sphere = make_icosphere(2, 60.0); // 320 triangles at level 1... level 2 = 1280
        if (trial % 2 == 0)
            sphere = make_icosphere(1, 60.0); // 80 triangles
        // Random small rotation + offset, placed in front of the camera.
        std::uniform_real_distribution<Real> u(-0.4, 0.4);
        const Mat3 R = rotation_from_euler(u(rng), u(rng), u(rng));
        MatX3 v = sphere.vertices * R.transpose();
        v.rowwise() += Eigen::RowVector3d(u(rng) * 30, u(rng) * 30, 400);
        const CameraIntrinsics K(90, 90, 31.5, 31.5, 64, 64);
        const RasterBuffer rb = rasterize(v, sphere.triangles, K);
        REQUIRE(!rb.visible.empty());
        int checked = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
            {
                const RayCastResult rc = ray_cast(v, sphere.triangles, K, x, y);
                CHECK((rc.tri >= 0) == rb.covered(x, y));
                if (rc.tri >= 0 && rb.covered(x, y))
                {
                    ++checked;
                    // Same triangle (or a coplanar tie at a shared edge).
                    if (rb.tri_at(x, y) != rc.tri)
                        CHECK(rb.depth.at(x, y) == Approx(rc.z).margin(1e-6));
                    else
                        CHECK(rb.depth.at(x, y) == Approx(rc.z).margin(1e-9));
                }
            }
        CHECK(checked > 300);
    }
}

TEST_CASE("rendered depth back-projects onto the mesh surface", "[render]")
{
    const FaceMesh sphere = make_icosphere(2, 50.0);
    const CameraIntrinsics K(120, 120, 47.5, 47.5, 96, 96);
    Pose pose;
    pose.translation = Vec3(0, 0, 420);
    ShCoeffs gamma = ShCoeffs::Zero();
    gamma.col(0).setConstant(2.0);
    const RenderResult rr = render(sphere, pose, gamma, K);
    REQUIRE(!rr.raster.visible.empty());
    const Image xyz = back_project(rr.depth, K);
    int on_surface = 0;
    for (int idx : rr.raster.visible)
    {
        const int x = idx % 96, y = idx / 96;
        const Vec3 p = xyz.rgb(x, y);
        // The back-projected point lies on the plane of the covering
        // triangle.
        const int f = rr.raster.tri_at(x, y);
        const Vec3 a = sphere.vertices.row(sphere.triangles(f, 0)).transpose() + pose.translation;
        const Vec3 b = sphere.vertices.row(sphere.triangles(f, 1)).transpose() + pose.translation;
        const Vec3 c = sphere.vertices.row(sphere.triangles(f, 2)).transpose() + pose.translation;
        const Vec3 n = (b - a).cross(c - a).normalized();
        CHECK(std::abs(n.dot(p - a)) < 1e-6);
        ++on_surface;
    }
    CHECK(on_surface > 500);
}

TEST_CASE("uniform band-0 lighting gives a constant silhouette", "[render]")
{
    const FaceMesh sphere = make_icosphere(2, 50.0);
    const CameraIntrinsics K(120, 120, 47.5, 47.5, 96, 96);
    Pose pose;
    pose.translation = Vec3(0, 0, 420);
    ShCoeffs gamma = ShCoeffs::Zero();
    gamma(0, 0) = 1.3;
    gamma(1, 0) = 1.7;
    gamma(2, 0) = 2.1;
    const RenderResult rr = render(sphere, pose, gamma, K);
    const Real expect_r = 0.7 * 1.3 * 0.28209479177387814;
    const Real expect_g = 0.7 * 1.7 * 0.28209479177387814;
    for (int idx : rr.raster.visible)
    {
        const int x = idx % 96, y = idx / 96;
        CHECK(rr.color.at(x, y, 0) == Approx(expect_r).margin(1e-10));
        CHECK(rr.color.at(x, y, 1) == Approx(expect_g).margin(1e-10));
    }
}

TEST_CASE("flat shading matches per-face irradiance exactly", "[render]")
{
    const FaceMesh sphere = make_icosphere(1, 50.0);
    const CameraIntrinsics K(110, 110, 47.5, 47.5, 96, 96);
    Pose pose;
    pose.translation = Vec3(0, 0, 400);
    ShCoeffs gamma = ShCoeffs::Zero();
    gamma.col(0).setConstant(1.8);
    gamma.col(2).setConstant(-0.5);
    RenderOptions opt;
    opt.flat_shading = true;
    const RenderResult rr = render(sphere, pose, gamma, K, opt);
    const MatX3 v_cam = transform_vertices(sphere.vertices, pose);
    const MeshNormals nrm = compute_normals(v_cam, sphere.triangles);
    for (int idx : rr.raster.visible)
    {
        const int x = idx % 96, y = idx / 96;
        const int f = rr.raster.tri_at(x, y);
        const Vec3 expect =
            irradiance(nrm.face.row(f).transpose(), Vec3::Constant(0.7), gamma);
        CHECK((rr.color.rgb(x, y) - expect).norm() < 1e-12);
    }
}
