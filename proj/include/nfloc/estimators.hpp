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

#ifndef NFLOC_ESTIMATORS_HPP
#define NFLOC_ESTIMATORS_HPP

#include "array_model.hpp"
#include "peaks.hpp"

#include <chrono>
#include <cstdlib>
#include <span>

namespace nfloc
{
    // Spectrum values are capped here; a capped node carries the `clamped` flag.
    inline constexpr double kSpectrumCap = 1e18;
    // Relative ridge added to Omega when its factorisation has a pivot at or below this fraction of trace/P.
    inline constexpr double kOmegaRidge = 1e-12;

    // Evenly spaced ascending axis; point i is start + i * step for i < size().
    struct GridAxis
    {
        double start = 0.0;
        double stop = 0.0;
        double step = 1.0;

        std::size_t size() const
        {
            if (!(step > 0.0) || stop < start)
                return 0;
            return static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        }
        double at(std::size_t i) const { return start + static_cast<double>(i) * step; }
        double back() const { return at(size() - 1); }

        std::size_t nearest_index(double v) const
        {
            const double x = std::round((v - start) / step);
            if (x <= 0.0)
                return 0;
            return std::min(static_cast<std::size_t>(x), size() - 1);
        }
    };

    struct SearchGrid
    {
        GridAxis doa;   // degrees
        GridAxis range; // same length unit as the array (wavelengths by default)

        std::size_t nodes() const { return doa.size() * range.size(); }

        void validate(const ArrayConfig &cfg) const
        {
            if (!(doa.step > 0.0) || !(range.step > 0.0))
                throw std::invalid_argument("SearchGrid: steps must be positive");
            if (doa.size() < 2 || range.size() < 2)
                throw std::invalid_argument("SearchGrid: each axis needs at least 2 points");
            if (doa.start < 0.0 || doa.back() > 180.0)
                throw std::invalid_argument("SearchGrid: doa axis must lie within [0, 180] deg");
            if (!cfg.in_fresnel_region(range.start) || !cfg.in_fresnel_region(range.back()))
                throw std::invalid_argument("SearchGrid: range axis [" + std::to_string(range.start) + ", " +
                                            std::to_string(range.back()) + "] leaves the Fresnel interval");
        }
    };

    // DOA 0..90 deg and the Fresnel interval of cfg, snapped to multiples of the steps.
    inline SearchGrid default_grid(const ArrayConfig &cfg, double doa_step = 0.1, double range_step = 0.01)
    {
        SearchGrid g;
        g.doa = {0.0, 90.0, doa_step};
        const double lo = std::floor(cfg.fresnel_min() / range_step + 1e-9) + 1.0;
        const double hi = std::ceil(cfg.fresnel_max() / range_step - 1e-9) - 1.0;
        g.range = {lo * range_step, hi * range_step, range_step};
        return g;
    }

    // Two-stage search for the 2D methods: a coarse pass over the full extent, then the fine grid
    // restricted to +/- refine_halfwidth coarse steps around every coarse peak.
    struct SearchOptions
    {
        bool two_stage = false;
        double coarse_doa_step = 1.0;
        double coarse_range_step = 0.1;
        int refine_halfwidth = 2;
    };

    struct Algorithm2Options
    {
        double q_deg = 0.1;
        int max_iter = 30;
        int initial_candidates = 3; // starting DOAs tried per source
    };

    struct SpectrumValue
    {
        double value = 0.0;
        bool clamped = false;
    };

    struct Estimate
    {
        double doa_deg = 0.0;
        double range = 0.0;
        double peak_value = 0.0;
        bool clamped = false;
        std::size_t doa_index = 0;
        std::size_t range_index = 0;
        int iterations = 0;
        bool converged = true;
    };

    struct EstimateRecord
    {
        std::vector<Estimate> estimates;
        int iterations = 0;      // Algorithm 2: largest per-source iteration count, 0 otherwise
        bool converged = true;   // Algorithm 2: all sources met the stopping rule
        double wall_time_s = 0.0;
        std::size_t evaluations = 0; // spectrum evaluations spent
    };

    // Row-major doa x range spectrum.
    struct Spectrum2D
    {
        SearchGrid grid;
        std::vector<double> values;
        std::size_t clamped_nodes = 0;

        double operator()(std::size_t doa_i, std::size_t range_j) const { return values[doa_i * grid.range.size() + range_j]; }
    };

    // e1^H Omega^{-1} e1, the reciprocal of min{c^H Omega c : c_1 = 1}. Omega is Hermitian PSD.
    // A ridge of kOmegaRidge * trace/P is added only when the LDLT factorisation shows a pivot at or below it.
    // Not thread-safe: holds factorisation workspace.
    class ConstrainedReciprocal
    {
    public:
        explicit ConstrainedReciprocal(Eigen::Index P) : ldlt_(P), rhs_(CVector::Zero(P)), x_(P) { rhs_(0) = 1.0; }

        SpectrumValue operator()(CMatrix &omega)
        {
            const Eigen::Index P = omega.rows();
            const double trace = omega.trace().real();
            const double ridge = kOmegaRidge * trace / static_cast<double>(P);
            ldlt_.compute(omega);
            if (ldlt_.info() != Eigen::Success || !(ldlt_.vectorD().real().minCoeff() > ridge))
            {
                omega.diagonal().array() += ridge;
                ldlt_.compute(omega);
            }
            x_ = ldlt_.solve(rhs_);
            const double v = x_(0).real();
            if (!std::isfinite(v) || !(v > 0.0) || v > kSpectrumCap)
                return {kSpectrumCap, true};
            return {v, false};
        }

    private:
        Eigen::LDLT<CMatrix> ldlt_;
        CVector rhs_;
        CVector x_;
    };

    inline SpectrumValue rank_reduced_from_omega(CMatrix omega)
    {
        if (omega.rows() != omega.cols() || omega.rows() == 0)
            throw std::invalid_argument("rank_reduced_from_omega: Omega must be square");
        ConstrainedReciprocal solve(omega.rows());
        return solve(omega);
    }

    // Coupling-free spectrum e1^H (X^H Uw Uw^H X)^{-1} e1 evaluated node by node.
    // Holds workspace; build one per thread.
    class RankReducedSpectrum
    {
    public:
        RankReducedSpectrum(const ArrayConfig &cfg, const CMatrix &noise_basis)
            : cfg_(cfg),
              projector_rows_(noise_basis.adjoint()),
              a_(cfg.num_elements),
              X_(cfg.num_elements, cfg.coupling_support),
              Y_(noise_basis.cols(), cfg.coupling_support),
              omega_(cfg.coupling_support, cfg.coupling_support),
              solve_(cfg.coupling_support)
        {
            cfg_.validate();
            if (noise_basis.rows() != cfg.num_elements || noise_basis.cols() < 1)
                throw std::invalid_argument("RankReducedSpectrum: noise basis must be M x K with K >= 1");
        }

        // Exact near-field steering at (doa, range).
        SpectrumValue at(double doa_deg, double range)
        {
            detail::exact_steering_into(cfg_, std::cos(deg_to_rad(doa_deg)), range, a_);
            return evaluate();
        }

        // Far-field steering; used by the DOA initialiser.
        SpectrumValue at_farfield(double doa_deg)
        {
            detail::farfield_steering_into(cfg_, std::cos(deg_to_rad(doa_deg)), a_);
            return evaluate();
        }

        // Omega = X^H Uw Uw^H X at (doa, range), before any ridge.
        CMatrix omega_at(double doa_deg, double range)
        {
            detail::exact_steering_into(cfg_, std::cos(deg_to_rad(doa_deg)), range, a_);
            build_omega();
            return omega_;
        }

    private:
        void build_omega()
        {
            detail::transform_into(a_, cfg_.coupling_support, X_);
            Y_.noalias() = projector_rows_ * X_;
            omega_.noalias() = Y_.adjoint() * Y_;
        }

        SpectrumValue evaluate()
        {
            build_omega();
            return solve_(omega_);
        }

        ArrayConfig cfg_;
        CMatrix projector_rows_; // Uw^H
        CVector a_;
        CMatrix X_;
        CMatrix Y_;
        CMatrix omega_;
        ConstrainedReciprocal solve_;
    };

    // 1 / (a^H C^H Uw Uw^H C a) with the coupling matrix known. Holds workspace; build one per thread.
    class MusicSpectrum
    {
    public:
        MusicSpectrum(const ArrayConfig &cfg, const CMatrix &noise_basis, const CMatrix &coupling)
            : cfg_(cfg), a_(cfg.num_elements), z_(noise_basis.cols())
        {
            cfg_.validate();
            if (noise_basis.rows() != cfg.num_elements || noise_basis.cols() < 1)
                throw std::invalid_argument("MusicSpectrum: noise basis must be M x K with K >= 1");
            if (coupling.rows() != cfg.num_elements || coupling.cols() != cfg.num_elements)
                throw std::invalid_argument("MusicSpectrum: coupling matrix must be M x M");
            projected_coupling_ = noise_basis.adjoint() * coupling;
        }

        SpectrumValue at(double doa_deg, double range)
        {
            detail::exact_steering_into(cfg_, std::cos(deg_to_rad(doa_deg)), range, a_);
            z_.noalias() = projected_coupling_ * a_;
            const double denom = z_.squaredNorm();
            if (!(denom >= 1.0 / kSpectrumCap))
                return {kSpectrumCap, true};
            return {1.0 / denom, false};
        }

    private:
        ArrayConfig cfg_;
        CMatrix projected_coupling_; // Uw^H C
        CVector a_;
        CVector z_;
    };

    namespace detail
    {
        template <class Eval>
        Spectrum2D evaluate_grid(const SearchGrid &grid, Eval &&eval)
        {
            Spectrum2D s{grid, {}, 0};
            const std::size_t nd = grid.doa.size();
            const std::size_t nr = grid.range.size();
            s.values.resize(nd * nr);
            for (std::size_t i = 0; i < nd; ++i)
                for (std::size_t j = 0; j < nr; ++j)
                {
                    const SpectrumValue v = eval(grid.doa.at(i), grid.range.at(j));
                    s.values[i * nr + j] = v.value;
                    s.clamped_nodes += v.clamped ? 1 : 0;
                }
            return s;
        }

        struct Node
        {
            std::size_t doa_index;
            std::size_t range_index;
            SpectrumValue value;
        };

        // Index range [lo, hi] of `fine` within +/- halfwidth of centre.
        inline std::pair<std::size_t, std::size_t> window(const GridAxis &fine, double centre, double halfwidth)
        {
            return {fine.nearest_index(centre - halfwidth), fine.nearest_index(centre + halfwidth)};
        }

        // N peaks of a 2D spectrum, optionally via the coarse/fine two-stage search.
        template <class Eval>
        std::vector<Node> search_2d(const SearchGrid &grid, std::size_t count, const SearchOptions &opts, Eval &&eval,
                                    std::size_t &evaluations)
        {
            std::vector<Node> out;
            if (!opts.two_stage)
            {
                const Spectrum2D s = evaluate_grid(grid, eval);
                evaluations += s.values.size();
                const std::size_t nr = grid.range.size();
                for (std::size_t k : find_peaks_2d(s.values, grid.doa.size(), nr, count))
                {
                    const std::size_t i = k / nr, j = k % nr;
                    out.push_back({i, j, {s.values[k], s.values[k] >= kSpectrumCap}});
                }
                return out;
            }

            if (!(opts.coarse_doa_step > 0.0) || !(opts.coarse_range_step > 0.0) || opts.refine_halfwidth < 1)
                throw std::invalid_argument("SearchOptions: coarse steps and refine_halfwidth must be positive");
            SearchGrid coarse{{grid.doa.start, grid.doa.back(), opts.coarse_doa_step},
                              {grid.range.start, grid.range.back(), opts.coarse_range_step}};
            if (coarse.doa.size() < 2 || coarse.range.size() < 2)
                throw std::invalid_argument("SearchOptions: coarse grid needs at least 2 points per axis");
            const Spectrum2D cs = evaluate_grid(coarse, eval);
            evaluations += cs.values.size();
            const std::size_t cnr = coarse.range.size();
            for (std::size_t k : find_peaks_2d(cs.values, coarse.doa.size(), cnr, count))
            {
                const auto [dlo, dhi] = window(grid.doa, coarse.doa.at(k / cnr), opts.refine_halfwidth * opts.coarse_doa_step);
                const auto [rlo, rhi] = window(grid.range, coarse.range.at(k % cnr), opts.refine_halfwidth * opts.coarse_range_step);
                Node best{dlo, rlo, {-1.0, false}};
                for (std::size_t i = dlo; i <= dhi; ++i)
                    for (std::size_t j = rlo; j <= rhi; ++j)
                    {
                        const SpectrumValue v = eval(grid.doa.at(i), grid.range.at(j));
                        ++evaluations;
                        if (v.value > best.value.value)
                            best = {i, j, v};
                    }
                out.push_back(best);
            }
            return out;
        }

        inline Estimate to_estimate(const SearchGrid &grid, const Node &n)
        {
            Estimate e;
            e.doa_deg = grid.doa.at(n.doa_index);
            e.range = grid.range.at(n.range_index);
            e.peak_value = n.value.value;
            e.clamped = n.value.clamped;
            e.doa_index = n.doa_index;
            e.range_index = n.range_index;
            return e;
        }

        inline void check_inputs(const ArrayConfig &cfg, const CMatrix &noise_basis, const SearchGrid &grid, int num_sources)
        {
            cfg.validate();
            grid.validate(cfg);
            if (num_sources < 1 || num_sources >= cfg.num_elements)
                throw std::invalid_argument("estimator: need 1 <= N < M sources");
            if (noise_basis.rows() != cfg.num_elements || noise_basis.cols() != cfg.num_elements - num_sources)
                throw std::invalid_argument("estimator: noise basis must be M x (M - N)");
        }

        using clock = std::chrono::steady_clock;
        inline double seconds_since(clock::time_point t0)
        {
            return std::chrono::duration<double>(clock::now() - t0).count();
        }
    }

    // Known-coupling MUSIC spectrum over the full grid.
    inline Spectrum2D music_spectrum_known_coupling(const ArrayConfig &cfg, const CMatrix &noise_basis, const CMatrix &coupling,
                                                    const SearchGrid &grid)
    {
        grid.validate(cfg);
        MusicSpectrum music(cfg, noise_basis, coupling);
        return detail::evaluate_grid(grid, [&](double t, double r) { return music.at(t, r); });
    }

    // Coupling-free spectrum over the full grid.
    inline Spectrum2D rank_reduced_spectrum(const ArrayConfig &cfg, const CMatrix &noise_basis, const SearchGrid &grid)
    {
        grid.validate(cfg);
        RankReducedSpectrum spec(cfg, noise_basis);
        return detail::evaluate_grid(grid, [&](double t, double r) { return spec.at(t, r); });
    }

    inline SpectrumValue rank_reduced_value(const ArrayConfig &cfg, const CMatrix &noise_basis, const SourcePosition &pos)
    {
        detail::check_degenerate(cfg, pos.range);
        RankReducedSpectrum spec(cfg, noise_basis);
        return spec.at(pos.doa_deg, pos.range);
    }

    // MUSIC baseline with oracle coupling. `couplings` holds either one matrix shared by all sources
    // (N peaks of one spectrum) or one matrix per source (top peak of each source's spectrum).
    inline EstimateRecord music_known_coupling(const ArrayConfig &cfg, const CMatrix &noise_basis, std::span<const CMatrix> couplings,
                                               const SearchGrid &grid, int num_sources, const SearchOptions &opts = {})
    {
        const auto t0 = detail::clock::now();
        detail::check_inputs(cfg, noise_basis, grid, num_sources);
        if (couplings.size() != 1 && couplings.size() != static_cast<std::size_t>(num_sources))
            throw std::invalid_argument("music_known_coupling: need one coupling matrix or one per source");

        EstimateRecord rec;
        if (couplings.size() == 1)
        {
            MusicSpectrum music(cfg, noise_basis, couplings[0]);
            auto nodes = detail::search_2d(grid, static_cast<std::size_t>(num_sources), opts,
                                           [&](double t, double r) { return music.at(t, r); }, rec.evaluations);
            for (const auto &n : nodes)
                rec.estimates.push_back(detail::to_estimate(grid, n));
        }
        else
        {
            for (const auto &C : couplings)
            {
                MusicSpectrum music(cfg, noise_basis, C);
                auto nodes = detail::search_2d(grid, 1, opts, [&](double t, double r) { return music.at(t, r); }, rec.evaluations);
                rec.estimates.push_back(detail::to_estimate(grid, nodes.front()));
            }
        }
        rec.wall_time_s = detail::seconds_since(t0);
        return rec;
    }

    // Two-dimensional search of the coupling-free spectrum; returns its N largest local maxima.
    inline EstimateRecord algorithm1(const ArrayConfig &cfg, const CMatrix &noise_basis, const SearchGrid &grid, int num_sources,
                                     const SearchOptions &opts = {})
    {
        const auto t0 = detail::clock::now();
        detail::check_inputs(cfg, noise_basis, grid, num_sources);
        RankReducedSpectrum spec(cfg, noise_basis);
        EstimateRecord rec;
        auto nodes = detail::search_2d(grid, static_cast<std::size_t>(num_sources), opts,
                                       [&](double t, double r) { return spec.at(t, r); }, rec.evaluations);
        for (const auto &n : nodes)
            rec.estimates.push_back(detail::to_estimate(grid, n));
        rec.wall_time_s = detail::seconds_since(t0);
        return rec;
    }

    // Far-field initialiser spectrum over a DOA axis.
    inline std::vector<double> initial_doa_spectrum(const ArrayConfig &cfg, const CMatrix &noise_basis, const GridAxis &doa_axis)
    {
        RankReducedSpectrum spec(cfg, noise_basis);
        std::vector<double> values(doa_axis.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = spec.at_farfield(doa_axis.at(i)).value;
        return values;
    }

    // Indices on doa_axis of the N initial DOA estimates, by descending spectrum value.
    inline std::vector<std::size_t> initial_doa_indices(const ArrayConfig &cfg, const CMatrix &noise_basis, const GridAxis &doa_axis,
                                                        int num_sources = 1)
    {
        if (doa_axis.size() < 2)
            throw std::invalid_argument("initial_doa: doa axis needs at least 2 points");
        const auto values = initial_doa_spectrum(cfg, noise_basis, doa_axis);
        return find_peaks(values, static_cast<std::size_t>(num_sources));
    }

    inline double initial_doa(const ArrayConfig &cfg, const CMatrix &noise_basis, const GridAxis &doa_axis)
    {
        return doa_axis.at(initial_doa_indices(cfg, noise_basis, doa_axis, 1).front());
    }

    namespace detail
    {
        // Alternating range / DOA refinement from one starting DOA index, DOA confined to [lo, hi].
        inline Estimate refine_alternating(RankReducedSpectrum &spec, const SearchGrid &grid, std::size_t start, std::size_t lo,
                                           std::size_t hi, const Algorithm2Options &opts, std::size_t &evaluations)
        {
            const std::size_t nr = grid.range.size();
            std::vector<double> range_values(nr);
            std::vector<double> doa_values(hi - lo + 1);

            Estimate e;
            e.converged = false;
            std::size_t doa_i = start;
            std::size_t range_j = 0;
            SpectrumValue peak;
            for (int it = 1; it <= opts.max_iter; ++it)
            {
                const double theta = grid.doa.at(doa_i);
                for (std::size_t j = 0; j < nr; ++j)
                    range_values[j] = spec.at(theta, grid.range.at(j)).value;
                range_j = argmax(range_values);

                const double r = grid.range.at(range_j);
                for (std::size_t i = lo; i <= hi; ++i)
                    doa_values[i - lo] = spec.at(grid.doa.at(i), r).value;
                const std::size_t next = lo + argmax(doa_values);
                evaluations += nr + doa_values.size();

                // grid distance, so that one step never compares below q through rounding
                const double moved = static_cast<double>(next > doa_i ? next - doa_i : doa_i - next) * grid.doa.step;
                doa_i = next;
                e.iterations = it;
                peak = {doa_values[next - lo], doa_values[next - lo] >= kSpectrumCap};
                if (moved < opts.q_deg)
                {
                    e.converged = true;
                    break;
                }
            }
            e.doa_index = doa_i;
            e.range_index = range_j;
            e.doa_deg = grid.doa.at(doa_i);
            e.range = grid.range.at(range_j);
            e.peak_value = peak.value;
            e.clamped = peak.clamped;
            return e;
        }
    }

    // Alternating one-dimensional searches of the coupling-free spectrum.
    //  1. initial DOAs: the N largest local maxima of the far-field initialiser spectrum;
    //  2. range = argmax over the range axis at the current DOA;
    //  3. DOA = argmax over the DOA axis at that range;
    //  4. repeat 2-3 until the DOA moves by less than q or max_iter passes are spent.
    // Each source's DOA search is confined to the span between the midpoints to its neighbouring
    // initial estimates. Within that span the refinement is started from up to `initial_candidates`
    // local maxima of the initialiser spectrum and the result with the largest spectrum value is kept;
    // initial_candidates = 1 runs the single-start iteration only.
    inline EstimateRecord algorithm2(const ArrayConfig &cfg, const CMatrix &noise_basis, const SearchGrid &grid, int num_sources,
                                     const Algorithm2Options &opts = {})
    {
        const auto t0 = detail::clock::now();
        detail::check_inputs(cfg, noise_basis, grid, num_sources);
        if (!(opts.q_deg > 0.0))
            throw std::invalid_argument("algorithm2: q must be positive");
        if (opts.max_iter < 1)
            throw std::invalid_argument("algorithm2: max_iter must be >= 1");
        if (opts.initial_candidates < 1)
            throw std::invalid_argument("algorithm2: initial_candidates must be >= 1");

        EstimateRecord rec;
        const std::size_t nd = grid.doa.size();
        const auto initial_values = initial_doa_spectrum(cfg, noise_basis, grid.doa);
        rec.evaluations += nd;
        const auto maxima = local_maxima(initial_values);
        if (maxima.size() < static_cast<std::size_t>(num_sources))
            throw PeakSearchError(static_cast<std::size_t>(num_sources), maxima);
        const std::vector<std::size_t> primary(maxima.begin(), maxima.begin() + num_sources);

        std::vector<std::size_t> sorted = primary;
        std::sort(sorted.begin(), sorted.end());

        RankReducedSpectrum spec(cfg, noise_basis);
        for (std::size_t start : primary)
        {
            std::size_t lo = 0, hi = nd - 1;
            const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), start) - sorted.begin());
            if (pos > 0)
                lo = (sorted[pos - 1] + start) / 2 + 1;
            if (pos + 1 < sorted.size())
                hi = (start + sorted[pos + 1]) / 2;

            std::vector<std::size_t> starts;
            for (std::size_t m : maxima)
                if (m >= lo && m <= hi && starts.size() < static_cast<std::size_t>(opts.initial_candidates))
                    starts.push_back(m);

            Estimate best;
            bool have = false;
            for (std::size_t s0 : starts)
            {
                Estimate e = detail::refine_alternating(spec, grid, s0, lo, hi, opts, rec.evaluations);
                if (!have || e.peak_value > best.peak_value)
                {
                    best = e;
                    have = true;
                }
            }
            rec.iterations = std::max(rec.iterations, best.iterations);
            rec.converged = rec.converged && best.converged;
            rec.estimates.push_back(best);
        }
        rec.wall_time_s = detail::seconds_since(t0);
        return rec;
    }
}

#endif // NFLOC_ESTIMATORS_HPP
