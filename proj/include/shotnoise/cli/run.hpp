#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shotnoise/asymptotics/deviations.hpp"
#include "shotnoise/asymptotics/fluctuations.hpp"
#include "shotnoise/cli/artifacts.hpp"
#include "shotnoise/cli/schema.hpp"
#include "shotnoise/ruin/ruin.hpp"
#include "shotnoise/sim/batch.hpp"
#include "shotnoise/sim/path.hpp"
#include "shotnoise/sim/records.hpp"
#include "shotnoise/stable_approx/rate.hpp"

#ifndef SHOTNOISE_VERSION
#define SHOTNOISE_VERSION "0.0.0"
#endif

namespace shotnoise::cli {

inline constexpr const char* tool_version = SHOTNOISE_VERSION;

struct Artifact {
    std::string name;
    std::string content;
    std::string kind; // csv, json, bin
};

struct RunOutput {
    std::vector<Artifact> artifacts;
};

namespace detail {

inline std::vector<std::uint64_t> grid_seeds(const std::vector<std::uint64_t>& seeds, std::uint64_t tag, std::size_t j) {
    std::vector<std::uint64_t> out;
    for (auto s : seeds) out.push_back(stream_key(s, tag + j));
    return out;
}

inline Artifact csv_artifact(const std::string& name, const Table& t) {
    check_finite(t, name);
    return {name, csv_text(t), "csv"};
}

inline Artifact json_artifact(const std::string& name, const json& j) { return {name, j.dump(2) + "\n", "json"}; }

inline std::string records_blob(const std::vector<PathRecord>& records) {
    std::ostringstream os(std::ios::binary);
    for (const auto& r : records) write_record(os, r);
    return os.str();
}

inline double ratio(double mc, double analytic) { return analytic > 0 ? mc / analytic : 0.0; }

inline TailEstimate tail_mc(const ShotModel& model, double t, double level, bool point, const Scenario& s,
                            std::uint64_t tag, std::size_t j, long* flagged) {
    BatchOptions opt;
    opt.threads = s.threads;
    (point ? opt.point_values : opt.tail_thresholds).push_back(level);
    auto op = [&](Stream& rng) {
        const PathSample p = simulate_path(model, t, rng);
        return PathOutcome{p.value, p.truncated};
    };
    const BatchSummary sum = batch(op, s.n_paths, grid_seeds(s.seeds, tag, j), opt);
    if (flagged) *flagged += sum.flagged;
    return point ? sum.points.at(0) : sum.tails.at(0);
}

inline RunOutput run_tail(const Scenario& s) {
    const ShotModel& m = *s.model;
    Table t{{"t", "analytic", "mc", "mc_stderr", "ratio"}, {}};
    long flagged = 0;
    for (std::size_t j = 0; j < s.tail.t.size(); ++j) {
        const double tj = s.tail.t[j];
        const auto est = sharp_tail(m, s.tail.x, tj, s.tail.sigma);
        const auto mc = tail_mc(m, tj, tj * s.tail.x, false, s, 0x7461696c00000000ULL, j, &flagged);
        t.rows.push_back({tj, est.value, mc.prob, mc.stderr_, ratio(mc.prob, est.value)});
    }
    return {{csv_artifact("tail.csv", t), json_artifact("tail.json", {{"x", s.tail.x}, {"flagged_paths", flagged}})}};
}

inline RunOutput run_point_mass(const Scenario& s) {
    const ShotModel& m = *s.model;
    if (!m.lattice()) throw DomainError("point-mass: the model is not lattice");
    const double t = s.point_mass.t;
    Table tab{{"x", "sigma", "t", "analytic", "mc", "mc_stderr", "ratio"}, {}};
    long flagged = 0;
    for (std::size_t j = 0; j < s.point_mass.x.size(); ++j) {
        const double x = s.point_mass.x[j];
        std::vector<double> analytic;
        for (int sigma : s.point_mass.sigma) analytic.push_back(sharp_point(m, x, t, sigma).value);
        const auto mc = tail_mc(m, t, std::round(t * x), true, s, 0x706d617373000000ULL, j, &flagged);
        for (std::size_t k = 0; k < analytic.size(); ++k)
            tab.rows.push_back({x, static_cast<double>(s.point_mass.sigma[k]), t, analytic[k], mc.prob, mc.stderr_,
                                ratio(mc.prob, analytic[k])});
    }
    return {{csv_artifact("point_mass.csv", tab), json_artifact("point_mass.json", {{"flagged_paths", flagged}})}};
}

inline RunOutput run_fluctuate(const Scenario& s) {
    const ShotModel& m = *s.model;
    const ZModel& z = m.z();
    const double mean = z.lambda() * z.mean(), var = z.lambda() * z.moment(2);
    Table tab{{"t", "y", "analytic", "mc", "mc_stderr", "ratio"}, {}};
    long flagged = 0;
    for (std::size_t j = 0; j < s.fluctuate.t.size(); ++j) {
        const double t = s.fluctuate.t[j];
        const auto est = fluctuation(m, s.fluctuate.schedule, s.fluctuate.regime, t, s.fluctuate.m);
        const double level = mean * t + est.y * std::sqrt(var * t);
        const auto mc = tail_mc(m, t, level, false, s, 0x666c756300000000ULL, j, &flagged);
        tab.rows.push_back({t, est.y, est.value, mc.prob, mc.stderr_, ratio(mc.prob, est.value)});
    }
    return {{csv_artifact("fluctuate.csv", tab), json_artifact("fluctuate.json", {{"flagged_paths", flagged}})}};
}

inline RunOutput run_ruin(const Scenario& s) {
    const ShotModel& m = *s.model;
    for (double u : s.ruin.u)
        if (!(u > 0)) throw DomainError("ruin: capital grid must be positive");
    const RuinBounds b = ruin_bounds(m, s.ruin.c);
    RuinOptions opt;
    opt.n_paths = s.n_paths;
    opt.seeds = s.seeds;
    opt.threads = s.threads;
    opt.method = s.ruin.method;
    opt.horizon_factor = s.ruin.horizon_factor;
    opt.grid_step = s.ruin.grid_step;
    const RuinResult r = ruin_mc(m, s.ruin.c, s.ruin.u, opt);
    Table tab{{"u", "psi_hat", "stderr", "lower_bound", "upper_bound", "w"}, {}};
    json horizons = json::array(), bias = json::array(), hits = json::array();
    for (const auto& e : r.estimates) {
        tab.rows.push_back({e.u, e.psi_hat, e.stderr_, b.lower(e.u), b.upper(e.u), r.w});
        horizons.push_back(e.horizon);
        bias.push_back(e.bias_estimate);
        hits.push_back(e.hits);
    }
    json summary{{"method", to_string(r.method)},
                 {"branch", b.branch},
                 {"c", b.c},
                 {"w", r.w},
                 {"d", r.d},
                 {"cl_constant", b.cl},
                 {"lower_coefficient", b.lower_coef},
                 {"crossover", b.crossover()},
                 {"gap_bound", r.gap_bound},
                 {"horizon_factor", r.horizon_factor},
                 {"retries", r.retries},
                 {"flagged_paths", r.flagged},
                 {"horizon", horizons},
                 {"bias_estimate", bias},
                 {"hits", hits}};
    return {{csv_artifact("ruin.csv", tab), json_artifact("ruin.json", summary)}};
}

inline RunOutput run_stable_rate(const Scenario& s) {
    const StableModel& sm = *s.stable;
    RateOptions opt;
    opt.threads = s.threads;
    opt.check_preconditions = s.stable_rate.check_preconditions;
    std::filesystem::path tmp;
    if (s.stable_rate.record) {
        tmp = std::filesystem::temp_directory_path() /
              ("shotnoise-rate-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()) +
               ".bin");
        opt.record_path = tmp.string();
    }
    RateReport rep;
    try {
        rep = rate_experiment(sm.params, sm.F, sm.lambda, s.stable_rate.t, s.n_paths, s.seeds, opt);
    } catch (...) {
        if (!tmp.empty()) std::filesystem::remove(tmp);
        throw;
    }
    Table tab{{"t", "distance", "noise_floor", "flagged"}, {}};
    for (std::size_t j = 0; j < rep.t_grid.size(); ++j)
        tab.rows.push_back({rep.t_grid[j], rep.distances[j], rep.noise_floor, rep.flagged[j] ? 1.0 : 0.0});
    RunOutput out{{csv_artifact("rate.csv", tab), json_artifact("rate_report.json", to_json(rep))}};
    if (!tmp.empty()) {
        out.artifacts.push_back({"paths.bin", read_text(tmp), "bin"});
        std::filesystem::remove(tmp);
    }
    return out;
}

inline RunOutput run_simulate(const Scenario& s) {
    const ShotModel& m = *s.model;
    Table tab{{"t", "mean", "variance", "mean_stderr", "flagged"}, {}};
    std::vector<PathRecord> records;
    for (std::size_t j = 0; j < s.simulate.t.size(); ++j) {
        const double t = s.simulate.t[j];
        const auto seeds = grid_seeds(s.seeds, 0x73696d0000000000ULL, j);
        check_batch_inputs(s.n_paths, seeds);
        const long blocks = (s.n_paths + batch_block - 1) / batch_block;
        std::vector<std::vector<PathRecord>> parts(static_cast<std::size_t>(blocks));
        for_each_block(blocks, s.threads, [&](long b) {
            const long end = std::min(s.n_paths, (b + 1) * batch_block);
            auto& part = parts[static_cast<std::size_t>(b)];
            for (long p = b * batch_block; p < end; ++p) {
                Stream rng = path_stream(seeds, p);
                part.push_back(to_record(simulate_path(m, t, rng)));
            }
        });
        double mean = 0.0, m2 = 0.0;
        long n = 0, flagged = 0;
        for (const auto& part : parts)
            for (const auto& r : part) {
                ++n;
                const double d = r.value - mean;
                mean += d / n;
                m2 += d * (r.value - mean);
                if (r.flags & record_truncated) ++flagged;
                if (s.simulate.record) records.push_back(r);
            }
        const double var = n > 1 ? m2 / (n - 1) : 0.0;
        tab.rows.push_back({t, mean, var, std::sqrt(var / n), static_cast<double>(flagged)});
    }
    RunOutput out{{csv_artifact("simulate.csv", tab)}};
    if (s.simulate.record) out.artifacts.push_back({"paths.bin", records_blob(records), "bin"});
    return out;
}

inline std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

inline RunOutput run_scenario(const Scenario& s) {
    check_batch_inputs(s.n_paths, s.seeds);
    switch (s.experiment) {
    case Experiment::tail: return detail::run_tail(s);
    case Experiment::point_mass: return detail::run_point_mass(s);
    case Experiment::fluctuate: return detail::run_fluctuate(s);
    case Experiment::ruin: return detail::run_ruin(s);
    case Experiment::stable_rate: return detail::run_stable_rate(s);
    case Experiment::simulate: return detail::run_simulate(s);
    }
    throw DomainError("unknown experiment");
}

// Runs the scenario and writes its artifacts, the resolved scenario and the
// manifest into dir. Nothing is written unless the whole run succeeds.
inline json run_and_write(const Scenario& s, const std::filesystem::path& dir, const std::string& source) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = detail::utc_now();
    RunOutput out = run_scenario(s);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json manifest;
    manifest["tool"] = "shotnoise";
    manifest["version"] = tool_version;
    manifest["command"] = "run";
    manifest["experiment"] = to_string(s.experiment);
    manifest["scenario_file"] = source;
    manifest["seed"] = s.seeds.front();
    manifest["seeds"] = s.seeds;
    manifest["n_paths"] = s.n_paths;
    manifest["threads"] = s.threads;
    manifest["started_utc"] = started;
    manifest["wall_time_s"] = wall;
    manifest["scenario"] = resolved_json(s);
    json files = json::array({"scenario.json"});
    for (const auto& a : out.artifacts) files.push_back(a.name);
    manifest["artifacts"] = files;

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DomainError("cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto& a : out.artifacts) write_text(dir / a.name, a.content);
    write_text(dir / "scenario.json", resolved_json(s).dump(2) + "\n");
    write_text(dir / manifest_name, manifest.dump(2) + "\n");
    return manifest;
}

} // namespace shotnoise::cli
