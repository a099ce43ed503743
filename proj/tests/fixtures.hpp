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

// Shared random fixtures for the test suites.

#ifndef NFLOC_TEST_FIXTURES_HPP
#define NFLOC_TEST_FIXTURES_HPP

#include <nfloc/harness.hpp>

#include <random>

namespace nfloc::test
{
    inline ArrayConfig default_array(int P = 3) { return ArrayConfig{5, 0.5, 1.0, P}; }

    inline CVector random_cvector(std::mt19937_64 &rng, Eigen::Index n)
    {
        std::normal_distribution<double> g;
        CVector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = {g(rng), g(rng)};
        return v;
    }

    inline CMatrix random_cmatrix(std::mt19937_64 &rng, Eigen::Index rows, Eigen::Index cols)
    {
        CMatrix A(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            A.col(j) = random_cvector(rng, rows);
        return A;
    }

    inline CMatrix random_unitary(std::mt19937_64 &rng, Eigen::Index n)
    {
        Eigen::HouseholderQR<CMatrix> qr(random_cmatrix(rng, n, n));
        return qr.householderQ() * CMatrix::Identity(n, n);
    }

    // Orthonormal n x k basis of a random subspace.
    inline CMatrix random_basis(std::mt19937_64 &rng, Eigen::Index n, Eigen::Index k)
    {
        return random_unitary(rng, n).leftCols(k);
    }

    // Random position inside the Fresnel interval of cfg.
    inline SourcePosition random_position(std::mt19937_64 &rng, const ArrayConfig &cfg)
    {
        std::uniform_real_distribution<double> doa(0.0, 180.0);
        std::uniform_real_distribution<double> range(cfg.fresnel_min() * 1.001, cfg.fresnel_max() * 0.999);
        return {doa(rng), range(rng)};
    }

    inline CouplingVector random_coupling(std::mt19937_64 &rng, int P)
    {
        return generate_coupling(P, rng());
    }

    // Noise subspace of the noiseless single-source covariance C a a^H C^H.
    inline CMatrix noiseless_noise_basis(const ArrayConfig &cfg, const SourcePosition &pos, const CouplingVector &c)
    {
        const CVector v = coupling_matrix(cfg, c) * exact_steering(cfg, pos);
        const CMatrix R = v * v.adjoint();
        return noise_subspace(R, 1).noise_basis;
    }
}

#endif // NFLOC_TEST_FIXTURES_HPP
