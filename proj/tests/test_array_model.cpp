// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field source localization under mutual coupling
// Copyright (C) 2026 The nfloc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace nfloc;
using nfloc::test::default_array;

namespace
{
    // Element m sits at (m d, 0); the source at (r cos t, r sin t).
    double distance_by_coordinates(double doa_deg, double r, int m, double d)
    {
        const double t = doa_deg * std::numbers::pi / 180.0;
        return std::hypot(r * std::cos(t) - m * d, r * std::sin(t));
    }
}

TEST(ArrayConfig, FresnelIntervalOfFiveElementHalfWavelengthArray)
{
    const ArrayConfig cfg = default_array();
    EXPECT_DOUBLE_EQ(cfg.aperture(), 2.0);
    EXPECT_NEAR(cfg.fresnel_min(), 0.62 * std::sqrt(8.0), 1e-15);
    EXPECT_NEAR(cfg.fresnel_min(), 1.7536248173426378, 1e-12);
    EXPECT_DOUBLE_EQ(cfg.fresnel_max(), 8.0);
    EXPECT_TRUE(cfg.in_fresnel_region(3.3));
    EXPECT_FALSE(cfg.in_fresnel_region(1.7));
    EXPECT_FALSE(cfg.in_fresnel_region(8.0));
}

TEST(ArrayConfig, RejectsInvalidGeometry)
{
    EXPECT_THROW((ArrayConfig{4, 0.5, 1.0, 2}.validate()), std::invalid_argument); // even M
    EXPECT_THROW((ArrayConfig{5, 0.0, 1.0, 2}.validate()), std::invalid_argument);
    EXPECT_THROW((ArrayConfig{5, 0.5, -1.0, 2}.validate()), std::invalid_argument);
    EXPECT_THROW((ArrayConfig{5, 0.5, 1.0, 0}.validate()), std::invalid_argument);
    EXPECT_THROW((ArrayConfig{5, 0.5, 1.0, 6}.validate()), std::invalid_argument);
    EXPECT_NO_THROW(default_array().validate());
}

TEST(ElementDistance, FrozenValues)
{
    const ArrayConfig cfg = default_array();
    EXPECT_NEAR(element_distance(cfg, {30.0, 3.3}, 1), 2.8778666000201176, 1e-13);
    EXPECT_NEAR(element_distance(cfg, {90.0, 3.3}, 1), 3.337663853655727, 1e-13);
    EXPECT_NEAR(element_distance(cfg, {90.0, 3.3}, -1), 3.337663853655727, 1e-13);
    EXPECT_DOUBLE_EQ(element_distance(cfg, {47.0, 3.3}, 0), 3.3);
}

TEST(ElementDistance, MatchesCoordinateGeometry)
{
    const ArrayConfig cfg = default_array();
    std::mt19937_64 rng(11);
    for (int k = 0; k < 500; ++k)
    {
        const auto pos = test::random_position(rng, cfg);
        for (int m = -2; m <= 2; ++m)
            EXPECT_NEAR(element_distance(cfg, pos, m), distance_by_coordinates(pos.doa_deg, pos.range, m, 0.5), 1e-12);
    }
}

TEST(ElementDistance, RejectsIndexOutsideArray)
{
    EXPECT_THROW(element_distance(default_array(), {30.0, 3.3}, 3), std::out_of_range);
    EXPECT_THROW(element_distance(default_array(), {30.0, 3.3}, -3), std::out_of_range);
}

TEST(ExactSteering, FrozenEntryAndReference)
{
    const ArrayConfig cfg = default_array();
    const auto a = exact_steering(cfg, {30.0, 3.3});
    ASSERT_EQ(a.size(), 5);
    // row 3 is element m = 1
    EXPECT_NEAR(std::abs(a(3)), 1.14668275450187, 1e-12);
    EXPECT_NEAR(std::arg(a(3)), 2.652342376423359, 1e-12);
    EXPECT_NEAR(std::abs(a(2) - cdouble(1.0, 0.0)), 0.0, 1e-15);
}

TEST(ExactSteering, MatchesDistanceDefinition)
{
    const ArrayConfig cfg = default_array();
    std::mt19937_64 rng(12);
    const double k = 2.0 * std::numbers::pi;
    for (int n = 0; n < 200; ++n)
    {
        const auto pos = test::random_position(rng, cfg);
        const auto a = exact_steering(cfg, pos);
        for (int m = -2; m <= 2; ++m)
        {
            const double rm = distance_by_coordinates(pos.doa_deg, pos.range, m, 0.5);
            const cdouble want = (pos.range / rm) * std::exp(cdouble(0.0, -k * (rm - pos.range)));
            EXPECT_NEAR(std::abs(a(m + 2) - want), 0.0, 1e-12);
        }
    }
}

TEST(ExactSteering, BroadsideIsSymmetric)
{
    const auto a = exact_steering(default_array(), {90.0, 3.3});
    EXPECT_NEAR(std::abs(a(0) - a(4)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(a(1) - a(3)), 0.0, 1e-14);
}

TEST(FresnelSteering, ApproachesExactModelWithRange)
{
    const ArrayConfig cfg = default_array();
    // relative phase error of the quadratic expansion shrinks as the range grows
    double previous = std::numeric_limits<double>::infinity();
    for (double r : {2.0, 3.0, 5.0, 7.9})
    {
        const auto e = exact_steering(cfg, {40.0, r});
        const auto f = fresnel_steering(cfg, {40.0, r});
        double err = 0.0;
        for (int i = 0; i < 5; ++i)
            err = std::max(err, std::abs(std::arg(e(i) / std::abs(e(i)) * std::conj(f(i)))));
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 0.05);
}

TEST(FresnelSteering, UnitModulusAndClosedForm)
{
    const ArrayConfig cfg = default_array();
    const auto f = fresnel_steering(cfg, {30.0, 3.3});
    const double k = 2.0 * std::numbers::pi, d = 0.5, t = std::numbers::pi / 6.0;
    for (int m = -2; m <= 2; ++m)
    {
        const double phase = k * d * std::cos(t) * m - (k * d * d / (2.0 * 3.3)) * std::sin(t) * std::sin(t) * m * m;
        EXPECT_NEAR(std::abs(f(m + 2) - std::polar(1.0, phase)), 0.0, 1e-14);
    }
}

TEST(FarfieldSteering, IsLimitOfFresnelModel)
{
    const ArrayConfig cfg = default_array();
    const auto g = farfield_steering(cfg, 35.0);
    const auto f = fresnel_steering(cfg, {35.0, 1e9});
    EXPECT_LT((g - f).cwiseAbs().maxCoeff(), 1e-8);
    for (int i = 0; i < 5; ++i)
        EXPECT_NEAR(std::abs(g(i)), 1.0, 1e-15);
}

TEST(CouplingMatrix, BandedSymmetricToeplitz)
{
    const ArrayConfig cfg = default_array();
    CouplingVector c(3);
    c << cdouble(1, 0), cdouble(0.4, -0.2), cdouble(-0.1, 0.05);
    const CMatrix C = coupling_matrix(cfg, c);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
        {
            const int s = std::abs(i - j);
            const cdouble want = s < 3 ? c(s) : cdouble(0.0, 0.0);
            EXPECT_EQ(C(i, j), want) << i << "," << j;
        }
    EXPECT_TRUE(C.isApprox(C.transpose())); // symmetric, not Hermitian
}

TEST(CouplingMatrix, SingleCoefficientIsIdentity)
{
    CouplingVector c(1);
    c << cdouble(1.0, 0.0);
    EXPECT_TRUE(coupling_matrix(default_array(1), c).isIdentity(0.0));
}

TEST(CouplingMatrix, RejectsWrongLength)
{
    CouplingVector c = CouplingVector::Ones(2);
    EXPECT_THROW(coupling_matrix(default_array(3), c), std::invalid_argument);
}

TEST(SelectionMatrices, MarkEachCoefficientBand)
{
    const auto E = selection_matrices(default_array(3));
    ASSERT_EQ(E.size(), 3u);
    for (int p = 0; p < 3; ++p)
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                EXPECT_EQ(E[p](i, j), std::abs(i - j) == p ? 1.0 : 0.0);
    EXPECT_TRUE(E[0].isIdentity(0.0));
}

// C(c) a = X(a) c for random geometry and coupling, every supported P.
TEST(TransformMatrix, CouplingIdentityHolds)
{
    std::mt19937_64 rng(13);
    for (int P = 1; P <= 3; ++P)
    {
        const ArrayConfig cfg = default_array(P);
        const auto E = selection_matrices(cfg);
        for (int n = 0; n < 1000; ++n)
        {
            const auto pos = test::random_position(rng, cfg);
            CouplingVector c = test::random_cvector(rng, P);
            const auto a = exact_steering(cfg, pos);
            const CVector lhs = transform_matrix(a, E) * c;
            const CVector rhs = coupling_matrix(cfg, c) * a;
            ASSERT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12) << "P=" << P << " n=" << n;
        }
    }
}

TEST(TransformMatrix, FirstColumnIsSteeringVector)
{
    const ArrayConfig cfg = default_array();
    const auto a = exact_steering(cfg, {50.0, 4.0});
    const CMatrix X = transform_matrix(a, selection_matrices(cfg));
    EXPECT_EQ(X.rows(), 5);
    EXPECT_EQ(X.cols(), 3);
    EXPECT_TRUE(X.col(0).isApprox(a));
}

TEST(SourcePosition, ValidationRejectsOutsideFresnelRegion)
{
    const ArrayConfig cfg = default_array();
    EXPECT_NO_THROW(validate_position(cfg, {30.0, 3.3}));
    EXPECT_THROW(validate_position(cfg, {30.0, 1.5}), std::invalid_argument);
    EXPECT_THROW(validate_position(cfg, {30.0, 9.0}), std::invalid_argument);
    EXPECT_THROW(validate_position(cfg, {-1.0, 3.3}), std::invalid_argument);
    EXPECT_THROW(validate_position(cfg, {181.0, 3.3}), std::invalid_argument);
}
