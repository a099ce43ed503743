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

#ifndef NFLOC_HARNESS_HPP
#define NFLOC_HARNESS_HPP

#include "estimators.hpp"
#include "subspace.hpp"

#include <atomic>
#include <optional>
#include <thread>

namespace nfloc
{
    enum class Method
    {
        music,
        alg1,
        alg2
    };

    inline const char *method_name(Method m)
    {
        switch (m)
        {
        case Method::music:
            return "music";
        case Method::alg1:
            return "alg1";
        case Method::alg2:
            return "alg2";
        }
        return "?";
    }

    inline std::optional<Method> parse_method(std::string_view s)
    {
        if (s == "music")
            return Method::music;
        if (s == "alg1")
            return Method::alg1;
        if (s == "alg2")
            return Method::alg2;
        return std::nullopt;
    }

    // Monte-Carlo experiment. Every DOA in `doas_deg` is its own single-source scenario at `range`;
    // each trial draws fresh coupling, symbols and noise from a seed derived from master_seed.
    struct ExperimentConfig
    {
        ArrayConfig array;
        std::vector<double> doas_deg{30.0, 40.0, 50.0, 60.0};
        double range = 3.3;
        double source_power = 1.0;
        std::vector<double> snr_list_db{0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0};
        int trials = 1000;
        int snapshots = 200;
        SearchGrid grid = default_grid(ArrayConfig{});
        SearchOptions search;                 // applies to music and alg1 in run_monte_carlo
        std::vector<Method> methods{Method::music, Method::alg1, Method::alg2};
        Algorithm2Options alg2;
        std::uint64_t master_seed = 0;
        double carrier_hz = 5e9;              // display only
        double max_failure_fraction = 0.10;

        void validate() const
        {
            array.validate();
            grid.validate(array);
            if (trials < 1)
                throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
            if (snapshots < 1)
                throw std::invalid_argument("ExperimentConfig: snapshots must be >= 1");
            if (snr_list_db.empty())
                throw std::invalid_argument("ExperimentConfig: snr list is empty");
            if (methods.empty())
                throw std::invalid_argument("ExperimentConfig: no methods selected");
            if (doas_deg.empty())
                throw std::invalid_argument("ExperimentConfig: no source DOAs");
            for (double doa : doas_deg)
                validate_position(array, {doa, range});
            if (!(alg2.q_deg > 0.0) || alg2.max_iter < 1)
                throw std::invalid_argument("ExperimentConfig: q must be positive and max_iter >= 1");
        }
    };

    struct McResultRow
    {
        Method method = Method::music;
        double snr_db = 0.0;
        double doa_true = 0.0;
        double range_true = 0.0;
        double rmse_doa = 0.0;   // degrees
        double rmse_range = 0.0; // wavelengths
        double mean_iterations = 0.0;
        double mean_wall_time = 0.0; // seconds
        int trials_used = 0;
        int trials_failed = 0;
    };

    // Failure count above the allowed fraction in some cell.
    class MonteCarloAbort : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // sqrt( (1/(K N)) sum_k sum_n (estimate_kn - truth_n)^2 ); estimates is K x N row-major.
    inline double rmse(std::span<const double> estimates, std::span<const double> truth)
    {
        if (estimates.empty() || truth.empty())
            throw std::invalid_argument("rmse: empty input");
        if (estimates.size() % truth.size() != 0)
            throw std::invalid_argument("rmse: estimate count is not a multiple of the source count");
        double sum = 0.0;
        for (std::size_t i = 0; i < estimates.size(); ++i)
        {
            const double e = estimates[i] - truth[i % truth.size()];
            sum += e * e;
        }
        return std::sqrt(sum / static_cast<double>(estimates.size()));
    }

    // Worker count: explicit value, else NFLOC_THREADS, else hardware concurrency.
    inline int resolve_threads(int requested = 0)
    {
        if (requested > 0)
            return requested;
        if (const char *env = std::getenv("NFLOC_THREADS"))
        {
            const int n = std::atoi(env);
            if (n > 0)
                return n;
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : static_cast<int>(hc);
    }

    // Runs job(i) for i in [0, count) on `threads` workers. Jobs write to disjoint slots.
    template <class Job>
    void parallel_for(std::size_t count, int threads, Job &&job)
    {
        const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
        if (workers <= 1)
        {
            for (std::size_t i = 0; i < count; ++i)
                job(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count && !failed; i = next++)
                {
                    try
                    {
                        job(i);
                    }
                    catch (...)
                    {
                        if (!failed.exchange(true))
                            error = std::current_exception();
                    }
                }
            });
        for (auto &t : pool)
            t.join();
        if (error)
            std::rethrow_exception(error);
    }

    // One noisy dataset and what the estimators need from it.
    struct Trial
    {
        SourceTruth truth;
        SubspaceDecomposition subspace;
    };

    inline Trial make_trial(const ArrayConfig &array, const SourcePosition &pos, double power, int snapshots, double snr_db,
                            std::uint64_t trial_seed)
    {
        Trial t;
        t.truth = {pos, generate_coupling(array.coupling_support, derive_seed(trial_seed, {1})), power};
        SimulationConfig sc{array, {t.truth}, snapshots, snr_db, derive_seed(trial_seed, {2})};
        t.subspace = noise_subspace(sample_covariance(simulate_snapshots(sc)), 1);
        return t;
    }

    inline EstimateRecord run_method(Method m, const ArrayConfig &array, const Trial &trial, const SearchGrid &grid,
                                     const SearchOptions &search, const Algorithm2Options &alg2)
    {
        switch (m)
        {
        case Method::music:
        {
            const CMatrix C = coupling_matrix(array, trial.truth.coupling);
            return music_known_coupling(array, trial.subspace.noise_basis, std::span<const CMatrix>(&C, 1), grid, 1, search);
        }
        case Method::alg1:
            return algorithm1(array, trial.subspace.noise_basis, grid, 1, search);
        case Method::alg2:
            return algorithm2(array, trial.subspace.noise_basis, grid, 1, alg2);
        }
        throw std::invalid_argument("run_method: unknown method");
    }

    // Seed of trial k in cell (snr index, doa index).
    inline std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index, std::size_t doa_index, std::size_t k)
    {
        return derive_seed(master, {snr_index, doa_index, k});
    }

    // Rows ordered method, snr, doa as listed in cfg. All methods see the same trial datasets.
    // Results are independent of the thread count.
    inline std::vector<McResultRow> run_monte_carlo(const ExperimentConfig &cfg, int threads = 0)
    {
        cfg.validate();
        const std::size_t ns = cfg.snr_list_db.size();
        const std::size_t nd = cfg.doas_deg.size();
        const std::size_t nm = cfg.methods.size();
        const std::size_t K = static_cast<std::size_t>(cfg.trials);

        struct Outcome
        {
            bool ok = false;
            double doa = 0.0;
            double range = 0.0;
            int iterations = 0;
            double wall_time = 0.0;
        };
        // [snr][doa][k][method]
        std::vector<Outcome> outcomes(ns * nd * K * nm);

        parallel_for(ns * nd * K, resolve_threads(threads), [&](std::size_t job) {
            const std::size_t k = job % K;
            const std::size_t d = (job / K) % nd;
            const std::size_t s = job / (K * nd);
            const Trial trial = make_trial(cfg.array, {cfg.doas_deg[d], cfg.range}, cfg.source_power, cfg.snapshots,
                                           cfg.snr_list_db[s], trial_seed(cfg.master_seed, s, d, k));
            for (std::size_t m = 0; m < nm; ++m)
            {
                Outcome &o = outcomes[job * nm + m];
                try
                {
                    const EstimateRecord rec = run_method(cfg.methods[m], cfg.array, trial, cfg.grid, cfg.search, cfg.alg2);
                    o = {true, rec.estimates.front().doa_deg, rec.estimates.front().range, rec.iterations, rec.wall_time_s};
                }
                catch (const PeakSearchError &)
                {
                    o.ok = false;
                }
            }
        });

        std::vector<McResultRow> rows;
        for (std::size_t m = 0; m < nm; ++m)
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t d = 0; d < nd; ++d)
                {
                    McResultRow row;
                    row.method = cfg.methods[m];
                    row.snr_db = cfg.snr_list_db[s];
                    row.doa_true = cfg.doas_deg[d];
                    row.range_true = cfg.range;
                    std::vector<double> doas, ranges;
                    double iters = 0.0, time = 0.0;
                    for (std::size_t k = 0; k < K; ++k)
                    {
                        const Outcome &o = outcomes[((s * nd + d) * K + k) * nm + m];
                        if (!o.ok)
                        {
                            ++row.trials_failed;
                            continue;
                        }
                        doas.push_back(o.doa);
                        ranges.push_back(o.range);
                        iters += o.iterations;
                        time += o.wall_time;
                    }
                    row.trials_used = static_cast<int>(doas.size());
                    if (static_cast<double>(row.trials_failed) > cfg.max_failure_fraction * static_cast<double>(K) ||
                        row.trials_used == 0)
                        throw MonteCarloAbort(std::string("monte carlo: ") + method_name(row.method) + " failed " +
                                              std::to_string(row.trials_failed) + " of " + std::to_string(K) +
                                              " trials at snr " + std::to_string(row.snr_db) + " dB, doa " +
                                              std::to_string(row.doa_true) + " deg");
                    const double doa_truth[] = {row.doa_true};
                    const double range_truth[] = {row.range_true};
                    row.rmse_doa = rmse(doas, doa_truth);
                    row.rmse_range = rmse(ranges, range_truth);
                    row.mean_iterations = iters / row.trials_used;
                    row.mean_wall_time = time / row.trials_used;
                    rows.push_back(row);
                }
        return rows;
    }

    struct TimingRow
    {
        Method method = Method::music;
        std::size_t doa_grid_points = 0;
        std::size_t range_grid_points = 0;
        double median_time_s = 0.0;
        double ratio_vs_music = 0.0; // NaN when music was not timed
        std::size_t evaluations = 0;
    };

    inline double median(std::vector<double> v)
    {
        if (v.empty())
            throw std::invalid_argument("median: empty input");
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    // Single-dataset timing of each method on cfg.grid without the two-stage shortcut, using the
    // first DOA and first SNR of cfg. Reports the median of `repetitions` runs.
    inline std::vector<TimingRow> run_timing(const ExperimentConfig &cfg, int repetitions = 5)
    {
        cfg.validate();
        if (repetitions < 5)
            throw std::invalid_argument("run_timing: need at least 5 repetitions");
        const Trial trial = make_trial(cfg.array, {cfg.doas_deg.front(), cfg.range}, cfg.source_power, cfg.snapshots,
                                       cfg.snr_list_db.front(), trial_seed(cfg.master_seed, 0, 0, 0));
        std::vector<TimingRow> rows;
        for (Method m : cfg.methods)
        {
            std::vector<double> times;
            TimingRow row{m, cfg.grid.doa.size(), cfg.grid.range.size(), 0.0, std::nan(""), 0};
            for (int r = 0; r < repetitions; ++r)
            {
                const auto t0 = detail::clock::now();
                const EstimateRecord rec = run_method(m, cfg.array, trial, cfg.grid, SearchOptions{}, cfg.alg2);
                times.push_back(detail::seconds_since(t0));
                row.evaluations = rec.evaluations;
            }
            row.median_time_s = median(times);
            rows.push_back(row);
        }
        for (const auto &r : rows)
            if (r.method == Method::music)
                for (auto &o : rows)
                    o.ratio_vs_music = o.median_time_s / r.median_time_s;
        return rows;
    }
}

#endif // NFLOC_HARNESS_HPP
