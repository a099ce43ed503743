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

#ifndef NFLOC_SUBSPACE_HPP
#define NFLOC_SUBSPACE_HPP

#include "signal_sim.hpp"

#include <Eigen/Eigenvalues>

namespace nfloc
{
    struct SubspaceDecomposition
    {
        CMatrix signal_basis;        // M x N, dominant eigenvectors
        CMatrix noise_basis;         // M x (M - N)
        Eigen::VectorXd eigenvalues; // descending
        bool degenerate_split = false; // eigenvalues N and N+1 (nearly) coincide
    };

    // R = (1/L) Y Y^H
    inline CMatrix sample_covariance(const SnapshotMatrix &Y)
    {
        if (Y.data.rows() == 0 || Y.data.cols() == 0)
            throw std::invalid_argument("sample_covariance: empty snapshot matrix");
        CMatrix R = (Y.data * Y.data.adjoint()) / static_cast<double>(Y.data.cols());
        // exact Hermitian symmetry regardless of the product kernel's rounding
        R = (0.5 * (R + R.adjoint())).eval();
        return R;
    }

    // Splits the eigenvectors of a Hermitian R into the N-dimensional signal subspace and its complement.
    inline SubspaceDecomposition noise_subspace(const CMatrix &R, int num_sources)
    {
        const Eigen::Index M = R.rows();
        if (R.cols() != M || M == 0)
            throw std::invalid_argument("noise_subspace: covariance must be square and non-empty");
        if (num_sources < 1 || num_sources >= M)
            throw std::invalid_argument("noise_subspace: need 1 <= N < M, got N = " + std::to_string(num_sources));
        const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
        if ((R - R.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw std::invalid_argument("noise_subspace: covariance is not Hermitian");

        Eigen::SelfAdjointEigenSolver<CMatrix> eig(R);
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("noise_subspace: eigendecomposition failed");

        // Eigen returns ascending order; reverse into descending.
        SubspaceDecomposition out;
        out.eigenvalues = eig.eigenvalues().reverse();
        const CMatrix U = eig.eigenvectors().rowwise().reverse();
        out.signal_basis = U.leftCols(num_sources);
        out.noise_basis = U.rightCols(M - num_sources);

        const double trace = R.trace().real();
        const double gap = out.eigenvalues(num_sources - 1) - out.eigenvalues(num_sources);
        out.degenerate_split = gap < 1e-12 * std::abs(trace);
        return out;
    }
}

#endif // NFLOC_SUBSPACE_HPP
