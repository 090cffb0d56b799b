/*
 * facefit - RGB-D face capture by inverse rendering in modern C++.
 *
 * File: tests/test_camera_sh.cpp
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
#include "facefit/camera.hpp"
#include "facefit/sh.hpp"

#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace facefit;
using Catch::Approx;

TEST_CASE("rotation_from_euler basics", "[camera]")
{
    CHECK(rotation_from_euler(0, 0, 0).isApprox(Mat3::Identity(), 1e-15));

    // Quarter yaw turn maps +z to +x under the documented convention.
    const Mat3 r = rotation_from_euler(0, kPi / 2, 0);
    CHECK((r * Vec3(0, 0, 1) - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("rotation_from_euler matches a quaternion oracle and is orthonormal", "[camera]")
{
    Rng rng(7);
    std::uniform_real_distribution<Real> u(-kPi, kPi);
    for (int i = 0; i < 50; ++i)
    {
        const Real pitch = u(rng), yaw = u(rng), roll = u(rng);
        const Mat3 r = rotation_from_euler(pitch, yaw, roll);
        CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == Approx(1.0).margin(1e-12));
        const Eigen::Quaterniond q = Eigen::AngleAxisd(roll, Vec3::UnitZ()) *
                                     Eigen::AngleAxisd(yaw, Vec3::UnitY()) *
                                     Eigen::AngleAxisd(pitch, Vec3::UnitX());
        CHECK((r - q.toRotationMatrix()).norm() < 1e-12);
    }
}

TEST_CASE("rotation derivatives match finite differences", "[camera]")
{
    Rng rng(11);
    std::uniform_real_distribution<Real> u(-1.2, 1.2);
    for (int trial = 0; trial < 10; ++trial)
    {
        const Vec3 e(u(rng), u(rng), u(rng));
        const auto d = rotation_from_euler_derivs(e);
        const Real h = 1e-6;
        for (int a = 0; a < 3; ++a)
        {
            Vec3 ep = e, em = e;
            ep[a] += h;
            em[a] -= h;
            const Mat3 fd = (rotation_from_euler(ep) - rotation_from_euler(em)) / (2 * h);
            CHECK((d[a] - fd).norm() < 1e-8);
        }
    }
}

TEST_CASE("project basics", "[camera]")
{
    const CameraIntrinsics K(200, 210, 112, 112, 224, 224);
    const auto q = project(Vec3(0, 0, 500), K);
    REQUIRE(q.has_value());
    CHECK(q->x() == Approx(112.0));
    CHECK(q->y() == Approx(112.0));

    // Projective invariance under positive scaling.
    const Vec3 p(31.0, -17.0, 430.0);
    const auto q1 = project(p, K);
    const auto q2 = project(2.0 * p, K);
    REQUIRE(q1);
    REQUIRE(q2);
    CHECK((*q1 - *q2).norm() < 1e-12);

    CHECK_FALSE(project(Vec3(0, 0, -1), K).has_value());
    CHECK_FALSE(project(Vec3(1, 1, 0), K).has_value());
}

TEST_CASE("project matches a homogeneous matrix oracle", "[camera]")
{
    const CameraIntrinsics K(180, 175, 60, 64, 128, 128);
    Eigen::Matrix<Real, 3, 4> M = Eigen::Matrix<Real, 3, 4>::Zero();
    M(0, 0) = K.fx;
    M(0, 2) = K.cx;
    M(1, 1) = K.fy;
    M(1, 2) = K.cy;
    M(2, 2) = 1.0;
    Rng rng(3);
    std::uniform_real_distribution<Real> u(-80, 80);
    std::uniform_real_distribution<Real> uz(100, 900);
    for (int i = 0; i < 100; ++i)
    {
        const Vec3 p(u(rng), u(rng), uz(rng));
        const Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
        const Vec3 h = M * ph;
        const auto q = project(p, K);
        REQUIRE(q);
        CHECK((*q - Vec2(h.x() / h.z(), h.y() / h.z())).norm() < 1e-10);
    }
}

TEST_CASE("project jacobian matches finite differences", "[camera]")
{
    const CameraIntrinsics K(180, 175, 60, 64, 128, 128);
    Rng rng(5);
    std::uniform_real_distribution<Real> u(-50, 50);
    std::uniform_real_distribution<Real> uz(200, 700);
    for (int i = 0; i < 20; ++i)
    {
        const Vec3 p(u(rng), u(rng), uz(rng));
        const auto J = project_jacobian(p, K);
        const Real h = 1e-5;
        for (int a = 0; a < 3; ++a)
        {
            Vec3 pp = p, pm = p;
            pp[a] += h;
            pm[a] -= h;
            const Vec2 fd = (*project(pp, K) - *project(pm, K)) / (2 * h);
            CHECK((J.col(a) - fd).norm() < 1e-6);
        }
    }
}

TEST_CASE("back_project inverts projection and keeps planes flat", "[camera]")
{
    const CameraIntrinsics K(150, 150, 32, 32, 64, 64);
    Image depth(64, 64, 1, 0.0);
    Rng rng(9);
    std::uniform_real_distribution<Real> uz(100, 800);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if ((x + y) % 3 != 0)
                depth.at(x, y) = uz(rng);
    const Image xyz = back_project(depth, K);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
        {
            if (depth.at(x, y) <= 0)
            {
                CHECK(xyz.at(x, y, 2) == 0.0);
                continue;
            }
            const auto q = project(xyz.rgb(x, y), K);
            REQUIRE(q);
            CHECK(q->x() == Approx(x).margin(1e-9));
            CHECK(q->y() == Approx(y).margin(1e-9));
        }

    Image plane(32, 32, 1, 350.0);
    const Image pxyz = back_project(plane, K);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            CHECK(pxyz.at(x, y, 2) == Approx(350.0));
}

TEST_CASE("crop-compensated intrinsics leave projections unchanged", "[camera]")
{
    const CameraIntrinsics K(150, 160, 70, 66, 140, 132);
    const CameraIntrinsics Kc = K.cropped(20, 12, 100, 100);
    Rng rng(13);
    std::uniform_real_distribution<Real> u(-60, 60);
    std::uniform_real_distribution<Real> uz(200, 600);
    for (int i = 0; i < 50; ++i)
    {
        const Vec3 p(u(rng), u(rng), uz(rng));
        const auto q = project(p, K);
        const auto qc = project(p, Kc);
        REQUIRE(q);
        REQUIRE(qc);
        CHECK((*q - (*qc + Vec2(20, 12))).norm() < 1e-12);
    }
}

TEST_CASE("sh_basis constants at the north pole", "[sh]")
{
    const ShVec phi = sh_basis(Vec3(0, 0, 1));
    CHECK(phi[0] == Approx(0.282095).margin(1e-6));
    CHECK(phi[1] == Approx(0.0).margin(1e-12));
    CHECK(phi[2] == Approx(0.488603).margin(1e-6));
    CHECK(phi[3] == Approx(0.0).margin(1e-12));
    CHECK(phi[4] == Approx(0.0).margin(1e-12));
    CHECK(phi[5] == Approx(0.0).margin(1e-12));
    CHECK(phi[6] == Approx(0.630783).margin(1e-6));
    CHECK(phi[7] == Approx(0.0).margin(1e-12));
    CHECK(phi[8] == Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(sh_basis(Vec3(0, 0, 2)), std::invalid_argument);
}

TEST_CASE("band 0 is constant over the sphere", "[sh]")
{
    Rng rng(17);
    for (int i = 0; i < 100; ++i)
    {
        const Vec3 n = facefit::testing::random_unit(rng);
        CHECK(sh_basis(n)[0] == Approx(0.28209479177387814));
    }
}

TEST_CASE("sh basis is orthonormal under Monte-Carlo sphere integration", "[sh]")
{
    Rng rng(23);
    const int samples = 200000;
    Eigen::Matrix<Real, kShCount, kShCount> gram = Eigen::Matrix<Real, kShCount, kShCount>::Zero();
    for (int s = 0; s < samples; ++s)
    {
        const ShVec phi = sh_basis_unchecked(facefit::testing::random_unit(rng));
        gram += phi * phi.transpose();
    }
    gram *= 4.0 * kPi / samples;
    for (int i = 0; i < kShCount; ++i)
        for (int j = 0; j < kShCount; ++j)
            CHECK(gram(i, j) == Approx(i == j ? 1.0 : 0.0).margin(0.01));
}

TEST_CASE("sh_basis_jacobian matches finite differences", "[sh]")
{
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Vec3 n = facefit::testing::random_unit(rng);
        const ShJacobian J = sh_basis_jacobian(n);
        const Real h = 1e-6;
        for (int a = 0; a < 3; ++a)
        {
            Vec3 np = n, nm = n;
            np[a] += h;
            nm[a] -= h;
            const ShVec fd = (sh_basis_unchecked(np) - sh_basis_unchecked(nm)) / (2 * h);
            CHECK((J.col(a) - fd).norm() < 1e-8);
        }
    }
}

TEST_CASE("irradiance behaviors", "[sh]")
{
    Rng rng(31);
    ShCoeffs gamma = ShCoeffs::Zero();

    SECTION("uniform lighting shades every normal identically")
    {
        gamma(0, 0) = gamma(1, 0) = gamma(2, 0) = 1.7;
        const Vec3 albedo(0.6, 0.5, 0.4);
        for (int i = 0; i < 20; ++i)
        {
            const Vec3 c = irradiance(facefit::testing::random_unit(rng), albedo, gamma);
            CHECK(c.x() == Approx(0.6 * 1.7 * 0.28209479177387814));
            CHECK(c.y() == Approx(0.5 * 1.7 * 0.28209479177387814));
        }
    }

    SECTION("black albedo kills any lighting")
    {
        std::normal_distribution<Real> g(0, 1);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < kShCount; ++c)
                gamma(r, c) = g(rng);
        const Vec3 c = irradiance(facefit::testing::random_unit(rng), Vec3::Zero(), gamma);
        CHECK(c.norm() == 0.0);
    }

    SECTION("matches the explicit 9-term dot product and is linear in gamma and albedo")
    {
        std::normal_distribution<Real> g(0, 1);
        for (int trial = 0; trial < 20; ++trial)
        {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < kShCount; ++c)
                    gamma(r, c) = g(rng);
            const Vec3 n = facefit::testing::random_unit(rng);
            const Vec3 albedo(0.2 + 0.1 * g(rng), 0.5, 0.7);
            const Vec3 got = irradiance(n, albedo, gamma);
            const ShVec phi = sh_basis(n);
            for (int ch = 0; ch < 3; ++ch)
            {
                Real acc = 0;
                for (int k = 0; k < kShCount; ++k)
                    acc += gamma(ch, k) * phi[k];
                CHECK(got[ch] == Approx(albedo[ch] * acc).margin(1e-14));
            }
            CHECK((irradiance(n, albedo, 2.0 * gamma) - 2.0 * got).norm() < 1e-12);
            CHECK((irradiance(n, 2.0 * albedo, gamma) - 2.0 * got).norm() < 1e-12);
        }
    }
}
