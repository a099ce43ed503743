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

#ifndef NFLOC_SIGNAL_SIM_HPP
#define NFLOC_SIGNAL_SIM_HPP

#include "array_model.hpp"

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace nfloc
{
    // splitmix64 finaliser; used to derive independent stream seeds.
    inline constexpr std::uint64_t mix_seed(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Seed for a sub-stream identified by a path of indices below a master seed.
    inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
    {
        std::uint64_t s = mix_seed(master);
        for (auto k : path)
            s = mix_seed(s ^ mix_seed(k + 0x632be59bd9b4e019ULL));
        return s;
    }

    struct SourceTruth
    {
        SourcePosition position;
        CouplingVector coupling; // normalized, first entry 1
        double power = 1.0;
    };

    struct SimulationConfig
    {
        ArrayConfig array;
        std::vector<SourceTruth> sources;
        int snapshots = 200;
        double snr_db = 10.0; // +inf gives noise-free data
        std::uint64_t seed = 0;
    };

    struct SnapshotMatrix
    {
        CMatrix data; // M x L
    };

    // Noise variance for a unit-power reference source.
    inline double noise_variance(double snr_db)
    {
        if (std::isinf(snr_db) && snr_db > 0)
            return 0.0;
        return std::pow(10.0, -snr_db / 10.0);
    }

    // Random normalized coupling vector: c_1 = 1, |c_p| = u_p |c_{p-1}| with u_p ~ U(0.3, 0.7)
    // and uniform phase, so magnitudes strictly decay with element separation.
    inline CouplingVector generate_coupling(int P, std::uint64_t seed)
    {
        if (P < 1)
            throw std::invalid_argument("generate_coupling: P must be >= 1");
        std::mt19937_64 rng(mix_seed(seed));
        std::uniform_real_distribution<double> decay(0.3, 0.7);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        CouplingVector c(P);
        c(0) = cdouble(1.0, 0.0);
        double magnitude = 1.0;
        for (int p = 1; p < P; ++p)
        {
            magnitude *= decay(rng);
            c(p) = std::polar(magnitude, phase(rng));
        }
        return c;
    }

    inline void validate(const SimulationConfig &cfg)
    {
        cfg.array.validate();
        if (cfg.snapshots < 1)
            throw std::invalid_argument("SimulationConfig: snapshots must be >= 1");
        if (std::isnan(cfg.snr_db) || (std::isinf(cfg.snr_db) && cfg.snr_db < 0))
            throw std::invalid_argument("SimulationConfig: snr_db must be a number or +inf");
        for (const auto &s : cfg.sources)
        {
            validate_position(cfg.array, s.position);
            if (s.coupling.size() != cfg.array.coupling_support)
                throw std::invalid_argument("SimulationConfig: source coupling length does not match P");
            if (!(s.power >= 0.0) || !std::isfinite(s.power))
                throw std::invalid_argument("SimulationConfig: source power must be finite and >= 0");
        }
    }

    // Y = sum_n C(c_n) a(theta_n, r_n) s_n + W with circular Gaussian symbols and noise.
    inline SnapshotMatrix simulate_snapshots(const SimulationConfig &cfg)
    {
        validate(cfg);
        const int M = cfg.array.num_elements;
        const int L = cfg.snapshots;
        std::mt19937_64 rng(mix_seed(cfg.seed));
        std::normal_distribution<double> unit(0.0, 1.0);

        SnapshotMatrix Y{CMatrix::Zero(M, L)};
        for (const auto &src : cfg.sources)
        {
            const CVector response = coupling_matrix(cfg.array, src.coupling) * exact_steering(cfg.array, src.position);
            const double scale = std::sqrt(src.power / 2.0);
            for (int t = 0; t < L; ++t)
            {
                const double re = unit(rng);
                const double im = unit(rng);
                Y.data.col(t) += response * cdouble(scale * re, scale * im);
            }
        }

        const double sigma2 = noise_variance(cfg.snr_db);
        if (sigma2 > 0.0)
        {
            const double scale = std::sqrt(sigma2 / 2.0);
            for (int t = 0; t < L; ++t)
                for (int i = 0; i < M; ++i)
                {
                    const double re = unit(rng);
                    const double im = unit(rng);
                    Y.data(i, t) += cdouble(scale * re, scale * im);
                }
        }
        return Y;
    }
}

#endif // NFLOC_SIGNAL_SIM_HPP
