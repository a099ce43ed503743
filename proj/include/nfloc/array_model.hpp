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

#ifndef NFLOC_ARRAY_MODEL_HPP
#define NFLOC_ARRAY_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfloc
{
    using cdouble = std::complex<double>;
    using CVector = Eigen::VectorXcd;
    using CMatrix = Eigen::MatrixXcd;

    // Steering and coupling vectors are plain complex columns. Row i of every
    // array-sized vector or matrix belongs to element m = i - (M-1)/2.
    using SteeringVector = CVector;
    using CouplingVector = CVector;

    inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
    inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

    // Uniform linear array with a banded coupling model.
    // All lengths share one unit; with the default wavelength of 1 they are in wavelengths.
    struct ArrayConfig
    {
        int num_elements = 5;         // M, odd, >= 3
        double element_spacing = 0.5; // d
        double wavelength = 1.0;      // lambda
        int coupling_support = 3;     // P, number of non-zero coupling coefficients, 1 <= P < M

        void validate() const
        {
            if (num_elements < 3 || num_elements % 2 == 0)
                throw std::invalid_argument("ArrayConfig: num_elements must be odd and >= 3, got " + std::to_string(num_elements));
            if (coupling_support < 1 || coupling_support >= num_elements)
                throw std::invalid_argument("ArrayConfig: coupling_support must satisfy 1 <= P < M, got " + std::to_string(coupling_support));
            if (!(element_spacing > 0.0) || !std::isfinite(element_spacing))
                throw std::invalid_argument("ArrayConfig: element_spacing must be positive");
            if (!(wavelength > 0.0) || !std::isfinite(wavelength))
                throw std::invalid_argument("ArrayConfig: wavelength must be positive");
        }

        int max_index() const { return (num_elements - 1) / 2; }
        int index_of_row(int row) const { return row - max_index(); }
        double aperture() const { return (num_elements - 1) * element_spacing; }
        double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }

        // Open Fresnel interval (0.62 sqrt(D^3/lambda), 2 D^2/lambda)
        double fresnel_min() const
        {
            const double D = aperture();
            return 0.62 * std::sqrt(D * D * D / wavelength);
        }
        double fresnel_max() const
        {
            const double D = aperture();
            return 2.0 * D * D / wavelength;
        }
        bool in_fresnel_region(double range) const { return range > fresnel_min() && range < fresnel_max(); }
    };

    struct SourcePosition
    {
        double doa_deg = 0.0; // angle between the array axis and the source, seen from the centre element
        double range = 0.0;   // distance from the centre element
    };

    // Throws std::invalid_argument unless pos is a Fresnel-region source of cfg with 0 <= doa <= 180 deg.
    inline void validate_position(const ArrayConfig &cfg, const SourcePosition &pos)
    {
        if (!std::isfinite(pos.doa_deg) || pos.doa_deg < 0.0 || pos.doa_deg > 180.0)
            throw std::invalid_argument("SourcePosition: doa must lie in [0, 180] deg, got " + std::to_string(pos.doa_deg));
        if (!(pos.range > 0.5 * cfg.aperture()))
            throw std::invalid_argument("SourcePosition: range " + std::to_string(pos.range) + " is inside the aperture radius");
        if (!cfg.in_fresnel_region(pos.range))
            throw std::invalid_argument("SourcePosition: range " + std::to_string(pos.range) + " outside Fresnel interval (" +
                                        std::to_string(cfg.fresnel_min()) + ", " + std::to_string(cfg.fresnel_max()) + ")");
    }

    inline bool is_normalized(const CouplingVector &c)
    {
        return c.size() >= 1 && c(0) == cdouble(1.0, 0.0);
    }

    // Distance between the source and element m.
    inline double element_distance(const ArrayConfig &cfg, const SourcePosition &pos, int m)
    {
        if (m < -cfg.max_index() || m > cfg.max_index())
            throw std::out_of_range("element_distance: element index " + std::to_string(m) + " outside the array");
        const double md = m * cfg.element_spacing;
        const double radicand = pos.range * pos.range + md * md - 2.0 * md * pos.range * std::cos(deg_to_rad(pos.doa_deg));
        if (!(radicand > 0.0))
            throw std::domain_error("element_distance: non-positive squared distance");
        return std::sqrt(radicand);
    }

    namespace detail
    {
        // Kernel shared by the public steering function and the grid searches. out must have M entries.
        inline void exact_steering_into(const ArrayConfig &cfg, double cos_doa, double range, CVector &out)
        {
            const int half = cfg.max_index();
            const double k = cfg.wavenumber();
            for (int m = -half; m <= half; ++m)
            {
                if (m == 0)
                {
                    out(half) = cdouble(1.0, 0.0);
                    continue;
                }
                const double md = m * cfg.element_spacing;
                const double rm = std::sqrt(range * range + md * md - 2.0 * md * range * cos_doa);
                out(m + half) = (range / rm) * std::polar(1.0, -k * (rm - range));
            }
        }

        inline void farfield_steering_into(const ArrayConfig &cfg, double cos_doa, CVector &out)
        {
            const int half = cfg.max_index();
            const double gamma = cfg.wavenumber() * cfg.element_spacing * cos_doa;
            for (int m = -half; m <= half; ++m)
                out(m + half) = m == 0 ? cdouble(1.0, 0.0) : std::polar(1.0, gamma * m);
        }

        // Columns p = 0..P-1 of X, i.e. E_{p+1} a, written without materialising E.
        inline void transform_into(const CVector &a, int P, CMatrix &X)
        {
            const Eigen::Index M = a.size();
            X.col(0) = a;
            for (int p = 1; p < P; ++p)
                for (Eigen::Index i = 0; i < M; ++i)
                {
                    cdouble s(0.0, 0.0);
                    if (i + p < M)
                        s += a(i + p);
                    if (i - p >= 0)
                        s += a(i - p);
                    X(i, p) = s;
                }
        }

        inline void check_degenerate(const ArrayConfig &cfg, double range)
        {
            if (!(range > 0.5 * cfg.aperture()))
                throw std::domain_error("steering: range " + std::to_string(range) + " is inside the aperture radius");
        }
    }

    // Exact spherical-wave steering vector, entries (r0/r_m) exp(-j k (r_m - r0)).
    inline SteeringVector exact_steering(const ArrayConfig &cfg, const SourcePosition &pos)
    {
        cfg.validate();
        detail::check_degenerate(cfg, pos.range);
        SteeringVector a(cfg.num_elements);
        detail::exact_steering_into(cfg, std::cos(deg_to_rad(pos.doa_deg)), pos.range, a);
        return a;
    }

    // Second-order (Fresnel) phase expansion of exact_steering, magnitude dropped:
    // exp(j (k d cos(theta) m - (k d^2 / (2 r0)) sin^2(theta) m^2)).
    inline SteeringVector fresnel_steering(const ArrayConfig &cfg, const SourcePosition &pos)
    {
        cfg.validate();
        detail::check_degenerate(cfg, pos.range);
        const double th = deg_to_rad(pos.doa_deg);
        const double k = cfg.wavenumber();
        const double d = cfg.element_spacing;
        const double linear = k * d * std::cos(th);
        const double quadratic = -0.5 * k * d * d * std::sin(th) * std::sin(th) / pos.range;
        const int half = cfg.max_index();
        SteeringVector a(cfg.num_elements);
        for (int m = -half; m <= half; ++m)
            a(m + half) = m == 0 ? cdouble(1.0, 0.0) : std::polar(1.0, linear * m + quadratic * m * m);
        return a;
    }

    // First-order phase expansion (plane wave), entries exp(j k d cos(theta) m).
    inline SteeringVector farfield_steering(const ArrayConfig &cfg, double doa_deg)
    {
        cfg.validate();
        SteeringVector g(cfg.num_elements);
        detail::farfield_steering_into(cfg, std::cos(deg_to_rad(doa_deg)), g);
        return g;
    }

    // Symmetric banded Toeplitz matrix with first column [c_1 .. c_P, 0 .. 0].
    inline CMatrix coupling_matrix(const ArrayConfig &cfg, const CouplingVector &c)
    {
        cfg.validate();
        if (c.size() != cfg.coupling_support)
            throw std::invalid_argument("coupling_matrix: expected " + std::to_string(cfg.coupling_support) +
                                        " coefficients, got " + std::to_string(c.size()));
        const int M = cfg.num_elements;
        CMatrix C = CMatrix::Zero(M, M);
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
            {
                const int lag = std::abs(i - j);
                if (lag < c.size())
                    C(i, j) = c(lag);
            }
        return C;
    }

    // E_p (p = 1..P, stored at index p-1) marks the entries of C that carry c_p.
    inline std::vector<Eigen::MatrixXd> selection_matrices(const ArrayConfig &cfg)
    {
        cfg.validate();
        const int M = cfg.num_elements;
        std::vector<Eigen::MatrixXd> E;
        E.reserve(cfg.coupling_support);
        for (int p = 0; p < cfg.coupling_support; ++p)
        {
            Eigen::MatrixXd Ep = Eigen::MatrixXd::Zero(M, M);
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j)
                    if (std::abs(i - j) == p)
                        Ep(i, j) = 1.0;
            E.push_back(std::move(Ep));
        }
        return E;
    }

    // M x P matrix whose column p is E_p a, so that X c == C(c) a for every c.
    inline CMatrix transform_matrix(const SteeringVector &a, const std::vector<Eigen::MatrixXd> &selections)
    {
        if (selections.empty())
            throw std::invalid_argument("transform_matrix: no selection matrices");
        CMatrix X(a.size(), static_cast<Eigen::Index>(selections.size()));
        for (std::size_t p = 0; p < selections.size(); ++p)
        {
            const auto &Ep = selections[p];
            if (Ep.rows() != a.size() || Ep.cols() != a.size())
                throw std::invalid_argument("transform_matrix: selection matrix " + std::to_string(p) + " does not match steering length");
            X.col(static_cast<Eigen::Index>(p)) = Ep.cast<cdouble>() * a;
        }
        return X;
    }
}

#endif // NFLOC_ARRAY_MODEL_HPP
