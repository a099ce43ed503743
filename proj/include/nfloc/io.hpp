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

// Text formats: experiment configuration (JSON), snapshot matrices and result tables (CSV).

#ifndef NFLOC_IO_HPP
#define NFLOC_IO_HPP

#include "harness.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace nfloc
{
    using json = nlohmann::json;

    // Shortest round-trippable decimal ("%.17g"); "inf", "-inf", "nan" for non-finite values.
    inline std::string format_double(double x)
    {
        if (std::isnan(x))
            return "nan";
        if (std::isinf(x))
            return x > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }

    inline double parse_double(const std::string &s)
    {
        std::size_t used = 0;
        double v = 0.0;
        try
        {
            v = std::stod(s, &used);
        }
        catch (const std::exception &)
        {
            throw std::invalid_argument("not a number: '" + s + "'");
        }
        if (used != s.size())
            throw std::invalid_argument("not a number: '" + s + "'");
        return v;
    }

    inline std::vector<double> parse_double_list(const std::string &s)
    {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(parse_double(item));
        if (out.empty())
            throw std::invalid_argument("empty number list");
        return out;
    }

    // ---- experiment configuration -------------------------------------------------------------

    // All fields optional; missing fields keep the example1 defaults. Unknown keys are rejected.
    //
    // {
    //   "array":    {"num_elements": 5, "element_spacing": 0.5, "wavelength": 1.0,
    //                "coupling_support": 3, "carrier_hz": 5e9},
    //   "scenario": {"doas_deg": [30, 40, 50, 60], "range": 3.3, "power": 1.0, "snapshots": 200},
    //   "snr_db":   [0, 5, 10, 15, 20, 25, 30],
    //   "trials":   1000,
    //   "grid":     {"doa": {"start": 0, "stop": 90, "step": 0.1},
    //                "range": {"start": 1.76, "stop": 7.99, "step": 0.01}},
    //   "search":   {"two_stage": true, "coarse_doa_step": 1.0, "coarse_range_step": 0.1, "refine_halfwidth": 2},
    //   "methods":  ["music", "alg1", "alg2"],
    //   "alg2":     {"q_deg": 0.1, "max_iter": 30, "initial_candidates": 3},
    //   "seed":     7,
    //   "max_failure_fraction": 0.1
    // }
    //
    // When "grid.range" is absent the range axis spans the Fresnel interval of the configured array.

    // Single-source Monte-Carlo scenario: M=5, d=0.5, P=3, L=200, DOAs 30..60 at 3.3 wavelengths.
    inline ExperimentConfig example1_profile()
    {
        ExperimentConfig cfg;
        cfg.array = ArrayConfig{5, 0.5, 1.0, 3};
        cfg.grid = default_grid(cfg.array, 0.1, 0.01);
        cfg.search.two_stage = true;
        return cfg;
    }

    namespace detail
    {
        inline void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &where)
        {
            if (!j.is_object())
                throw std::invalid_argument("config: '" + where + "' must be an object");
            for (const auto &[key, _] : j.items())
            {
                bool ok = false;
                for (const char *a : allowed)
                    ok = ok || key == a;
                if (!ok)
                    throw std::invalid_argument("config: unknown key '" + where + "." + key + "'");
            }
        }

        template <class T>
        void read(const json &j, const char *key, T &out)
        {
            if (j.contains(key))
                out = j.at(key).get<T>();
        }

        inline GridAxis read_axis(const json &j, const std::string &where)
        {
            check_keys(j, {"start", "stop", "step"}, where);
            return {j.at("start").get<double>(), j.at("stop").get<double>(), j.at("step").get<double>()};
        }
    }

    inline ExperimentConfig experiment_from_json(const json &j)
    {
        using detail::check_keys;
        using detail::read;
        ExperimentConfig cfg = example1_profile();
        try
        {
            check_keys(j, {"array", "scenario", "snr_db", "trials", "grid", "search", "methods", "alg2", "seed", "max_failure_fraction"}, "");
            bool explicit_range = false;
            if (j.contains("array"))
            {
                const json &a = j.at("array");
                check_keys(a, {"num_elements", "element_spacing", "wavelength", "coupling_support", "carrier_hz"}, "array");
                read(a, "num_elements", cfg.array.num_elements);
                read(a, "element_spacing", cfg.array.element_spacing);
                read(a, "wavelength", cfg.array.wavelength);
                read(a, "coupling_support", cfg.array.coupling_support);
                read(a, "carrier_hz", cfg.carrier_hz);
            }
            if (j.contains("scenario"))
            {
                const json &s = j.at("scenario");
                check_keys(s, {"doas_deg", "range", "power", "snapshots"}, "scenario");
                read(s, "doas_deg", cfg.doas_deg);
                read(s, "range", cfg.range);
                read(s, "power", cfg.source_power);
                read(s, "snapshots", cfg.snapshots);
            }
            read(j, "snr_db", cfg.snr_list_db);
            read(j, "trials", cfg.trials);
            if (j.contains("grid"))
            {
                const json &g = j.at("grid");
                check_keys(g, {"doa", "range"}, "grid");
                if (g.contains("doa"))
                    cfg.grid.doa = detail::read_axis(g.at("doa"), "grid.doa");
                if (g.contains("range"))
                {
                    cfg.grid.range = detail::read_axis(g.at("range"), "grid.range");
                    explicit_range = true;
                }
            }
            if (!explicit_range)
                cfg.grid.range = default_grid(cfg.array, cfg.grid.doa.step, cfg.grid.range.step).range;
            if (j.contains("search"))
            {
                const json &s = j.at("search");
                check_keys(s, {"two_stage", "coarse_doa_step", "coarse_range_step", "refine_halfwidth"}, "search");
                read(s, "two_stage", cfg.search.two_stage);
                read(s, "coarse_doa_step", cfg.search.coarse_doa_step);
                read(s, "coarse_range_step", cfg.search.coarse_range_step);
                read(s, "refine_halfwidth", cfg.search.refine_halfwidth);
            }
            if (j.contains("methods"))
            {
                cfg.methods.clear();
                for (const auto &m : j.at("methods"))
                {
                    const auto parsed = parse_method(m.get<std::string>());
                    if (!parsed)
                        throw std::invalid_argument("config: unknown method '" + m.get<std::string>() + "'");
                    cfg.methods.push_back(*parsed);
                }
            }
            if (j.contains("alg2"))
            {
                const json &a = j.at("alg2");
                check_keys(a, {"q_deg", "max_iter", "initial_candidates"}, "alg2");
                read(a, "q_deg", cfg.alg2.q_deg);
                read(a, "max_iter", cfg.alg2.max_iter);
                read(a, "initial_candidates", cfg.alg2.initial_candidates);
            }
            read(j, "seed", cfg.master_seed);
            read(j, "max_failure_fraction", cfg.max_failure_fraction);
        }
        catch (const json::exception &e)
        {
            throw std::invalid_argument(std::string("config: ") + e.what());
        }
        return cfg;
    }

    inline json experiment_to_json(const ExperimentConfig &cfg)
    {
        json methods = json::array();
        for (Method m : cfg.methods)
            methods.push_back(method_name(m));
        auto axis = [](const GridAxis &a) { return json{{"start", a.start}, {"stop", a.stop}, {"step", a.step}}; };
        return json{
            {"array", {{"num_elements", cfg.array.num_elements}, {"element_spacing", cfg.array.element_spacing},
                       {"wavelength", cfg.array.wavelength}, {"coupling_support", cfg.array.coupling_support},
                       {"carrier_hz", cfg.carrier_hz}}},
            {"scenario", {{"doas_deg", cfg.doas_deg}, {"range", cfg.range}, {"power", cfg.source_power}, {"snapshots", cfg.snapshots}}},
            {"snr_db", cfg.snr_list_db},
            {"trials", cfg.trials},
            {"grid", {{"doa", axis(cfg.grid.doa)}, {"range", axis(cfg.grid.range)}}},
            {"search", {{"two_stage", cfg.search.two_stage}, {"coarse_doa_step", cfg.search.coarse_doa_step},
                        {"coarse_range_step", cfg.search.coarse_range_step}, {"refine_halfwidth", cfg.search.refine_halfwidth}}},
            {"methods", methods},
            {"alg2", {{"q_deg", cfg.alg2.q_deg}, {"max_iter", cfg.alg2.max_iter}, {"initial_candidates", cfg.alg2.initial_candidates}}},
            {"seed", cfg.master_seed},
            {"max_failure_fraction", cfg.max_failure_fraction}};
    }

    inline ExperimentConfig load_experiment(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::invalid_argument("cannot open config file '" + path + "'");
        json j;
        try
        {
            in >> j;
        }
        catch (const json::exception &e)
        {
            throw std::invalid_argument("config '" + path + "': " + e.what());
        }
        return experiment_from_json(j);
    }

    // ---- snapshot CSV -------------------------------------------------------------------------
    //
    // Header "m,re_1,im_1,...,re_L,im_L", then one row per element in ascending m:
    //   m,Re y_m(1),Im y_m(1),...,Re y_m(L),Im y_m(L)

    inline void write_snapshots_csv(std::ostream &os, const SnapshotMatrix &Y)
    {
        const Eigen::Index M = Y.data.rows(), L = Y.data.cols();
        os << "m";
        for (Eigen::Index t = 1; t <= L; ++t)
            os << ",re_" << t << ",im_" << t;
        os << '\n';
        const Eigen::Index half = (M - 1) / 2;
        for (Eigen::Index i = 0; i < M; ++i)
        {
            os << (i - half);
            for (Eigen::Index t = 0; t < L; ++t)
                os << ',' << format_double(Y.data(i, t).real()) << ',' << format_double(Y.data(i, t).imag());
            os << '\n';
        }
    }

    inline SnapshotMatrix read_snapshots_csv(std::istream &is)
    {
        std::string line;
        if (!std::getline(is, line) || line.rfind("m,", 0) != 0)
            throw std::invalid_argument("snapshot csv: missing header");
        std::vector<std::vector<cdouble>> rows;
        std::vector<long> indices;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            indices.push_back(static_cast<long>(parse_double(cell)));
            std::vector<double> nums;
            while (std::getline(ss, cell, ','))
                nums.push_back(parse_double(cell));
            if (nums.empty() || nums.size() % 2 != 0)
                throw std::invalid_argument("snapshot csv: row needs re,im pairs");
            std::vector<cdouble> row(nums.size() / 2);
            for (std::size_t t = 0; t < row.size(); ++t)
                row[t] = {nums[2 * t], nums[2 * t + 1]};
            rows.push_back(std::move(row));
        }
        if (rows.empty())
            throw std::invalid_argument("snapshot csv: no data rows");
        const long half = static_cast<long>(rows.size() - 1) / 2;
        SnapshotMatrix Y{CMatrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()))};
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            if (rows[i].size() != rows.front().size())
                throw std::invalid_argument("snapshot csv: ragged rows");
            if (indices[i] != static_cast<long>(i) - half)
                throw std::invalid_argument("snapshot csv: element indices must ascend from -(M-1)/2");
            for (std::size_t t = 0; t < rows[i].size(); ++t)
                Y.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[i][t];
        }
        return Y;
    }

    // ---- truth sidecar (JSON) -----------------------------------------------------------------

    inline json truth_to_json(const SourceTruth &t)
    {
        json c = json::array();
        for (Eigen::Index p = 0; p < t.coupling.size(); ++p)
            c.push_back({t.coupling(p).real(), t.coupling(p).imag()});
        return json{{"doa_deg", t.position.doa_deg}, {"range", t.position.range}, {"power", t.power}, {"coupling", c}};
    }

    inline SourceTruth truth_from_json(const json &j)
    {
        try
        {
            SourceTruth t;
            t.position = {j.at("doa_deg").get<double>(), j.at("range").get<double>()};
            if (j.contains("power"))
                t.power = j.at("power").get<double>();
            const json &c = j.at("coupling");
            t.coupling.resize(static_cast<Eigen::Index>(c.size()));
            for (std::size_t p = 0; p < c.size(); ++p)
                t.coupling(static_cast<Eigen::Index>(p)) = {c[p].at(0).get<double>(), c[p].at(1).get<double>()};
            return t;
        }
        catch (const json::exception &e)
        {
            throw std::invalid_argument(std::string("truth: ") + e.what());
        }
    }

    // ---- result tables ------------------------------------------------------------------------

    inline constexpr const char *kMcCsvHeader = "method,snr_db,doa_true_deg,range_true_wl,rmse_doa_deg,rmse_range_wl,mean_iters,trials_used";
    inline constexpr const char *kBenchCsvHeader = "method,doa_grid_points,range_grid_points,median_time_s,ratio_vs_music";
    inline constexpr const char *kEstimateCsvHeader =
        "method,source,doa_deg,range_wl,range_m,peak_value,clamped,iterations,converged,evaluations,wall_time_s";

    inline void write_mc_csv(std::ostream &os, const std::vector<McResultRow> &rows)
    {
        os << kMcCsvHeader << '\n';
        for (const auto &r : rows)
            os << method_name(r.method) << ',' << format_double(r.snr_db) << ',' << format_double(r.doa_true) << ','
               << format_double(r.range_true) << ',' << format_double(r.rmse_doa) << ',' << format_double(r.rmse_range) << ','
               << format_double(r.mean_iterations) << ',' << r.trials_used << '\n';
    }

    inline void write_bench_csv(std::ostream &os, const std::vector<TimingRow> &rows)
    {
        os << kBenchCsvHeader << '\n';
        for (const auto &r : rows)
            os << method_name(r.method) << ',' << r.doa_grid_points << ',' << r.range_grid_points << ','
               << format_double(r.median_time_s) << ',' << format_double(r.ratio_vs_music) << '\n';
    }

    // range_m converts wavelengths to metres at carrier_hz.
    inline void write_estimate_csv(std::ostream &os, Method m, const EstimateRecord &rec, double carrier_hz, bool header = true)
    {
        constexpr double c0 = 299792458.0;
        if (header)
            os << kEstimateCsvHeader << '\n';
        for (std::size_t n = 0; n < rec.estimates.size(); ++n)
        {
            const auto &e = rec.estimates[n];
            os << method_name(m) << ',' << n << ',' << format_double(e.doa_deg) << ',' << format_double(e.range) << ','
               << format_double(e.range * c0 / carrier_hz) << ',' << format_double(e.peak_value) << ',' << (e.clamped ? 1 : 0) << ','
               << e.iterations << ',' << (e.converged ? 1 : 0) << ',' << rec.evaluations << ',' << format_double(rec.wall_time_s)
               << '\n';
        }
    }

    inline json estimate_to_json(Method m, const EstimateRecord &rec, double carrier_hz)
    {
        constexpr double c0 = 299792458.0;
        json est = json::array();
        for (const auto &e : rec.estimates)
            est.push_back({{"doa_deg", e.doa_deg}, {"range_wl", e.range}, {"range_m", e.range * c0 / carrier_hz},
                           {"peak_value", e.peak_value}, {"clamped", e.clamped}, {"iterations", e.iterations},
                           {"converged", e.converged}});
        return json{{"method", method_name(m)},
                    {"estimates", est},
                    {"iterations", rec.iterations},
                    {"converged", rec.converged},
                    {"evaluations", rec.evaluations},
                    {"wall_time_s", rec.wall_time_s}};
    }
}

#endif // NFLOC_IO_HPP
