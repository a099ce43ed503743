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

// nfloc command line: simulate, estimate, mc-rmse, bench.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
// Output is buffered and written only once a subcommand has finished, so a failed run leaves no partial file.

#include <nfloc/io.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace
{
    using namespace nfloc;

    struct UsageError : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    struct CommonFlags
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::string method = "all";
        std::string snr_db;
        std::optional<int> trials;
        std::string out;
        std::optional<double> doa_step;
        std::optional<double> range_step;
        int threads = 0;
    };

    void add_common(CLI::App *cmd, CommonFlags &f)
    {
        cmd->add_option("--config", f.config, "experiment config (JSON); defaults to the example1 profile");
        cmd->add_option("--seed", f.seed, "master seed");
        cmd->add_option("--method", f.method, "music, alg1, alg2 or all")->check(CLI::IsMember({"music", "alg1", "alg2", "all"}));
        cmd->add_option("--snr-db", f.snr_db, "comma separated SNR list in dB ('inf' for noiseless)");
        cmd->add_option("--trials", f.trials, "Monte-Carlo trials per cell");
        cmd->add_option("--out", f.out, "output file (default stdout)");
        cmd->add_option("--doa-step", f.doa_step, "DOA grid step in degrees");
        cmd->add_option("--range-step", f.range_step, "range grid step in wavelengths");
        cmd->add_option("--threads", f.threads, "worker threads (default NFLOC_THREADS or hardware)");
    }

    // Config file first, then flags on top.
    ExperimentConfig build_config(const CommonFlags &f)
    {
        ExperimentConfig cfg = f.config.empty() ? example1_profile() : load_experiment(f.config);
        if (f.seed)
            cfg.master_seed = *f.seed;
        if (f.method != "all")
            cfg.methods = {*parse_method(f.method)};
        if (!f.snr_db.empty())
            cfg.snr_list_db = parse_double_list(f.snr_db);
        if (f.trials)
            cfg.trials = *f.trials;
        if (f.doa_step)
            cfg.grid.doa.step = *f.doa_step;
        if (f.range_step)
            cfg.grid.range.step = *f.range_step;
        cfg.validate();
        return cfg;
    }

    void emit(const std::string &path, const std::string &text)
    {
        if (path.empty() || path == "-")
        {
            std::cout << text << std::flush;
            return;
        }
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw UsageError("cannot write '" + path + "'");
        os << text;
    }

    std::string read_file(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw UsageError("cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    struct SimulateFlags
    {
        std::optional<double> doa;
        std::optional<double> range;
        std::optional<int> snapshots;
        std::string truth_out;
    };

    void run_simulate(const CommonFlags &f, const SimulateFlags &s)
    {
        ExperimentConfig cfg = build_config(f);
        if (cfg.snr_list_db.size() != 1 && !f.snr_db.empty())
            throw UsageError("simulate takes a single --snr-db value");
        const double snr = f.snr_db.empty() ? 10.0 : cfg.snr_list_db.front();
        SourceTruth truth;
        truth.position = {s.doa.value_or(cfg.doas_deg.front()), s.range.value_or(cfg.range)};
        truth.power = cfg.source_power;
        truth.coupling = generate_coupling(cfg.array.coupling_support, derive_seed(cfg.master_seed, {1}));
        SimulationConfig sc{cfg.array, {truth}, s.snapshots.value_or(cfg.snapshots), snr, derive_seed(cfg.master_seed, {2})};
        const SnapshotMatrix Y = simulate_snapshots(sc);

        std::ostringstream os;
        write_snapshots_csv(os, Y);
        if (!s.truth_out.empty())
        {
            json t = truth_to_json(truth);
            t["snr_db"] = std::isinf(snr) ? json("inf") : json(snr);
            t["snapshots"] = sc.snapshots;
            t["seed"] = cfg.master_seed;
            emit(s.truth_out, t.dump(2) + "\n");
        }
        emit(f.out, os.str());
    }

    struct EstimateFlags
    {
        std::string input;
        std::string truth;
        int sources = 1;
        std::string format = "csv";
    };

    void run_estimate(const CommonFlags &f, const EstimateFlags &e)
    {
        const ExperimentConfig cfg = build_config(f);
        std::istringstream in(read_file(e.input));
        const SnapshotMatrix Y = read_snapshots_csv(in);
        if (Y.data.rows() != cfg.array.num_elements)
            throw UsageError("snapshot rows (" + std::to_string(Y.data.rows()) + ") do not match the configured array size");
        if (e.sources < 1 || e.sources >= cfg.array.num_elements)
            throw UsageError("--sources must lie in [1, M-1]");

        std::optional<SourceTruth> truth;
        if (!e.truth.empty())
            truth = truth_from_json(json::parse(read_file(e.truth)));
        std::vector<Method> methods = cfg.methods;
        if (!truth)
        {
            if (f.method == "music")
                throw UsageError("music needs the true coupling: pass --truth");
            std::erase(methods, Method::music);
            if (f.method == "all")
                std::cerr << "note: no --truth given, skipping music\n";
        }

        const SubspaceDecomposition sub = noise_subspace(sample_covariance(Y), e.sources);
        std::ostringstream os;
        json all = json::array();
        bool first = true;
        for (Method m : methods)
        {
            EstimateRecord rec;
            switch (m)
            {
            case Method::music:
            {
                const CMatrix C = coupling_matrix(cfg.array, truth->coupling);
                rec = music_known_coupling(cfg.array, sub.noise_basis, std::span<const CMatrix>(&C, 1), cfg.grid, e.sources, cfg.search);
                break;
            }
            case Method::alg1:
                rec = algorithm1(cfg.array, sub.noise_basis, cfg.grid, e.sources, cfg.search);
                break;
            case Method::alg2:
                rec = algorithm2(cfg.array, sub.noise_basis, cfg.grid, e.sources, cfg.alg2);
                break;
            }
            if (e.format == "json")
                all.push_back(estimate_to_json(m, rec, cfg.carrier_hz));
            else
                write_estimate_csv(os, m, rec, cfg.carrier_hz, first);
            first = false;
        }
        if (e.format == "json")
            os << all.dump(2) << '\n';
        emit(f.out, os.str());
    }

    void run_mc(const CommonFlags &f)
    {
        if (!f.seed)
            throw UsageError("mc-rmse requires --seed");
        const ExperimentConfig cfg = build_config(f);
        const auto rows = run_monte_carlo(cfg, resolve_threads(f.threads));
        std::ostringstream os;
        write_mc_csv(os, rows);
        for (const auto &r : rows)
            if (r.trials_failed > 0)
                std::cerr << "note: " << method_name(r.method) << " snr=" << r.snr_db << " doa=" << r.doa_true << ": "
                          << r.trials_failed << " trial(s) excluded\n";
        emit(f.out, os.str());
    }

    void run_bench(const CommonFlags &f, int reps)
    {
        ExperimentConfig cfg = build_config(f);
        if (f.snr_db.empty())
            cfg.snr_list_db = {10.0};
        if (f.method == "all" || cfg.methods.size() > 1)
        {
            // keep music first so every ratio has its reference
            std::stable_partition(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return m == Method::music; });
        }
        std::ostringstream os;
        write_bench_csv(os, run_timing(cfg, reps));
        emit(f.out, os.str());
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"near-field source localization under unknown mutual coupling"};
    app.require_subcommand(1);

    CommonFlags common;

    auto *sim = app.add_subcommand("simulate", "generate one snapshot matrix Y as CSV");
    SimulateFlags sflags;
    add_common(sim, common);
    sim->add_option("--doa", sflags.doa, "source DOA in degrees (default: first config DOA)");
    sim->add_option("--range", sflags.range, "source range in wavelengths");
    sim->add_option("--snapshots", sflags.snapshots, "number of snapshots L");
    sim->add_option("--truth-out", sflags.truth_out, "write source position and coupling as JSON");

    auto *est = app.add_subcommand("estimate", "localize sources in one snapshot CSV");
    EstimateFlags eflags;
    add_common(est, common);
    est->add_option("--input", eflags.input, "snapshot CSV produced by simulate")->required();
    est->add_option("--truth", eflags.truth, "truth JSON (provides the coupling for music)");
    est->add_option("--sources", eflags.sources, "number of sources N");
    est->add_option("--format", eflags.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto *mc = app.add_subcommand("mc-rmse", "Monte-Carlo RMSE versus SNR");
    add_common(mc, common);

    auto *bench = app.add_subcommand("bench", "median single-trial run time per method");
    int reps = 5;
    add_common(bench, common);
    bench->add_option("--reps", reps, "repetitions per method (>= 5)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try
    {
        if (*sim)
            run_simulate(common, sflags);
        else if (*est)
            run_estimate(common, eflags);
        else if (*mc)
            run_mc(common);
        else if (*bench)
            run_bench(common, reps);
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    catch (const json::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    catch (const std::exception &e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
