#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "shotnoise/dist/distribution_function.hpp"
#include "shotnoise/dist/stable.hpp"
#include "shotnoise/errors.hpp"
#include "shotnoise/numeric.hpp"
#include "shotnoise/sim/batch.hpp"
#include "shotnoise/sim/path.hpp"
#include "shotnoise/sim/records.hpp"
#include "shotnoise/stable_approx/kolmogorov.hpp"

namespace shotnoise {

enum class RateCase { infinite_integral, finite_integral, out_of_scope, inconclusive };

inline std::string to_string(RateCase c) {
    switch (c) {
    case RateCase::infinite_integral: return "infinite-integral";
    case RateCase::finite_integral: return "finite-integral";
    case RateCase::out_of_scope: return "out of theorem scope";
    case RateCase::inconclusive: return "inconclusive";
    }
    return "";
}

struct RateClass {
    RateCase kind = RateCase::inconclusive;
    double exponent = 0.0;          // d_Kol = O(t^{-exponent}); NaN unless the integral case is known
    double eta0 = 0.0;              // infinite_integral only
    bool eta0_in_A = false;         // infinite_integral only; when false any exponent below `exponent` holds
    double growth_exponent = 0.0;   // fitted slope of log increments
    double fit_residual = 0.0;      // residual standard deviation of that fit
    std::string verdict;
};

namespace detail {

// 1 - F(s)^alpha computed from the survival function.
inline double power_deficit(const DistributionFunction& F, double alpha, double s) {
    const double sf = F.survival(s);
    if (sf <= 0) return 0.0;
    if (sf >= 1) return 1.0;
    return -std::expm1(alpha * std::log1p(-sf));
}

inline double power_deficit_increment(const DistributionFunction& F, double alpha, double a, double b) {
    const double ga = power_deficit(F, alpha, a);
    if (ga == 0) return 0.0;
    std::vector<double> cuts{a};
    for (const double bp : F.breakpoints())
        if (bp > a && bp < b) cuts.push_back(bp);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    auto g = [&](double s) { return power_deficit(F, alpha, s); };
    return numeric::integrate_pieces(g, cuts, 1e-10 * ga * (b - a)).value;
}

} // namespace detail

inline constexpr int rate_grid_points = 12;
inline constexpr double rate_grid_lo = 1e2;
inline constexpr double rate_grid_hi = 1e6;

// Rate case and exponent for S_t / t^{1/alpha} from the growth of
// int_0^t (1 - F^alpha). The growth exponent is the regression slope of the
// log increments over a geometric grid: 0 for logarithmic growth, gamma for
// t^gamma growth, strongly negative for a finite integral.
inline RateClass classify_rate(const DistributionFunction& F, double alpha, double beta) {
    StableParams(1.0, alpha, beta).validate();
    const int n = rate_grid_points;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = rate_grid_lo * std::pow(rate_grid_hi / rate_grid_lo, i / double(n - 1));
    std::vector<double> x, y;
    bool vanished = false;
    for (int i = 0; i + 1 < n; ++i) {
        const double inc = detail::power_deficit_increment(F, alpha, grid[i], grid[i + 1]);
        if (!(inc > 0)) {
            vanished = true;
            break;
        }
        x.push_back(0.5 * (std::log(grid[i]) + std::log(grid[i + 1])));
        y.push_back(std::log(inc));
    }
    RateClass r;
    const double ii_exponent = alpha > 1 ? 1.0 / alpha : 1.0;
    auto finite = [&](std::string why) {
        r.kind = RateCase::finite_integral;
        r.exponent = ii_exponent;
        r.verdict = "integral of 1 - F^alpha is finite (" + why + ")";
        return r;
    };
    if (vanished && x.size() < 3) {
        r.growth_exponent = -numeric::inf;
        return finite("integrand vanishes on the grid");
    }
    const auto [slope, icpt] = numeric::weighted_fit(x, y, std::vector<double>(x.size(), 1.0));
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - (icpt + slope * x[i]), 2);
    r.growth_exponent = slope;
    r.fit_residual = x.size() > 2 ? std::sqrt(ss / (x.size() - 2)) : 0.0;
    if (vanished || slope < -0.1) return finite("increments decay like t^" + std::to_string(slope));
    r.exponent = std::numeric_limits<double>::quiet_NaN();
    if (r.fit_residual > 0.05) {
        r.verdict = "growth-exponent regression ill-conditioned (residual " + std::to_string(r.fit_residual) + ")";
        return r;
    }
    const double lower = std::max(0.0, (alpha - 1) / alpha);
    if (std::abs(slope) <= 0.05) {
        // Logarithmic growth: o(t^eta) for every eta > 0, but not O(1).
        r.kind = RateCase::infinite_integral;
        r.eta0 = lower;
        r.eta0_in_A = lower > 0;
        r.exponent = 1 - r.eta0;
        r.verdict = r.eta0_in_A ? "logarithmic growth, eta0 = (alpha-1)/alpha in A"
                                : "logarithmic growth, eta0 = 0 not in A: O(t^{-(1-eta)}) for every eta in (0,1)";
        return r;
    }
    if (slope < -0.05) {
        r.verdict = "growth exponent " + std::to_string(slope) + " between finite and logarithmic";
        return r;
    }
    if (slope > 0.5 + 0.05) {
        r.kind = RateCase::out_of_scope;
        r.verdict = "out of theorem scope: growth exponent " + std::to_string(slope) + " exceeds 1/2";
        return r;
    }
    r.kind = RateCase::infinite_integral;
    r.eta0 = std::clamp(std::max(slope, lower), 0.0, 0.5);
    r.eta0_in_A = true;
    r.exponent = 1 - r.eta0;
    r.verdict = "power growth t^" + std::to_string(slope);
    return r;
}

struct SpearmanResult {
    double rho = 0.0;
    double p_negative = 1.0; // one-sided p-value against rho < 0
};

namespace detail {

inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

} // namespace detail

// Spearman rank correlation; exact permutation p-value for n <= 9, Student t
// approximation beyond.
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DomainError("spearman: sizes differ");
    if (x.size() < 3) throw DomainError("spearman: at least 3 points are required");
    const auto rx = detail::ranks(x), ry = detail::ranks(y);
    SpearmanResult s;
    s.rho = detail::pearson(rx, ry);
    const std::size_t n = x.size();
    if (n <= 9) {
        std::vector<double> perm = ry;
        std::sort(perm.begin(), perm.end());
        long hits = 0, total = 0;
        do {
            ++total;
            if (detail::pearson(rx, perm) <= s.rho + 1e-12) ++hits;
        } while (std::next_permutation(perm.begin(), perm.end()));
        s.p_negative = static_cast<double>(hits) / total;
    } else {
        const double df = n - 2.0;
        const double r = std::clamp(s.rho, -1 + 1e-15, 1 - 1e-15);
        const double tstat = r * std::sqrt(df / (1 - r * r));
        s.p_negative = boost::math::cdf(boost::math::students_t(df), tstat);
    }
    return s;
}

struct RateOptions {
    unsigned threads = 1;
    std::string record_path;   // optional binary dump of every path value
    bool check_preconditions = true;
    double cdf_tol = 1e-9;
};

struct RateReport {
    StableParams params;
    std::string F;
    double lambda = 1.0;
    long n_paths = 0;
    std::vector<double> t_grid;
    std::vector<double> distances;
    double distance_stderr = 0.0;   // sd of the KS statistic at the noise floor
    double noise_floor = 0.0;       // expected KS statistic for an exact sample
    std::vector<bool> flagged;      // excluded from the fit
    std::optional<double> fitted_slope;
    double predicted_exponent = 0.0;
    RateClass classification;
    SpearmanResult trend;
};

// Limit law of S_t / t^{1/alpha}: scale c lambda^{1/alpha}.
inline StableParams rate_limit_law(const StableParams& p, double lambda) {
    return StableParams(p.c * std::pow(lambda, 1.0 / p.alpha), p.alpha, p.beta);
}

inline RateReport rate_experiment(const StableParams& params, const DistributionFunction& F, double lambda,
                                  const std::vector<double>& t_grid, long n_paths,
                                  const std::vector<std::uint64_t>& seeds, const RateOptions& opt = {}) {
    params.validate();
    if (!(lambda > 0)) throw DomainError("rate_experiment: lambda must be positive");
    if (t_grid.size() < 2) throw DomainError("rate_experiment: t_grid needs at least two points");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > 0)) throw DomainError("rate_experiment: t_grid must be positive");
        if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
            throw DomainError("rate_experiment: t_grid must be strictly increasing");
    }
    if (opt.check_preconditions) {
        if (std::log10(t_grid.back() / t_grid.front()) < 1.5 - 1e-12)
            throw DomainError("rate_experiment: t_grid must span at least 1.5 decades");
        if (n_paths < 100000) throw DomainError("rate_experiment: n_paths must be at least 1e5");
    }
    check_batch_inputs(n_paths, seeds);

    RateReport rep;
    rep.params = params;
    rep.F = F.name();
    rep.lambda = lambda;
    rep.n_paths = n_paths;
    rep.t_grid = t_grid;
    rep.noise_floor = ks_noise_floor(n_paths);
    rep.distance_stderr = ks_noise_sd(n_paths);
    rep.classification = classify_rate(F, params.alpha, params.beta);
    rep.predicted_exponent = rep.classification.exponent;

    const StableParams limit = rate_limit_law(params, lambda);
    auto cdf = [&](double x) { return stable_cdf(limit, x, opt.cdf_tol); };
    std::vector<PathRecord> records;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        std::vector<std::uint64_t> sj;
        for (auto s : seeds) sj.push_back(stream_key(s, 0x7261746500000000ULL + j));
        const double t = t_grid[j];
        auto op = [&](Stream& rng) { return simulate_stable_path(params, F, lambda, t, rng); };
        std::vector<double> values = batch_collect(op, n_paths, sj, opt.threads);
        if (!opt.record_path.empty())
            for (long p = 0; p < n_paths; ++p)
                records.push_back({t, values[static_cast<std::size_t>(p)], path_stream(sj, p).key(), 0u});
        std::sort(values.begin(), values.end());
        const double d = kolmogorov_distance_monotone(values, cdf);
        rep.distances.push_back(d);
        rep.flagged.push_back(d < 2 * rep.noise_floor);
    }
    if (!opt.record_path.empty()) write_records(opt.record_path, records);

    std::vector<double> x, y, w;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        if (rep.flagged[j]) continue;
        const double sd_log = rep.distance_stderr / rep.distances[j];
        x.push_back(std::log(t_grid[j]));
        y.push_back(std::log(rep.distances[j]));
        w.push_back(1.0 / (sd_log * sd_log));
    }
    if (x.size() >= 2) rep.fitted_slope = numeric::weighted_fit(x, y, w).first;
    if (t_grid.size() >= 3) rep.trend = spearman(t_grid, rep.distances);
    return rep;
}

inline nlohmann::json to_json(const RateClass& c) {
    nlohmann::json j;
    j["case"] = to_string(c.kind);
    j["exponent"] = std::isfinite(c.exponent) ? nlohmann::json(c.exponent) : nlohmann::json();
    if (c.kind == RateCase::infinite_integral) {
        j["eta0"] = c.eta0;
        j["eta0_in_A"] = c.eta0_in_A;
    }
    j["growth_exponent"] = std::isfinite(c.growth_exponent) ? nlohmann::json(c.growth_exponent) : nlohmann::json();
    j["verdict"] = c.verdict;
    return j;
}

inline nlohmann::json to_json(const RateReport& r) {
    nlohmann::json j;
    j["stable"] = {{"c", r.params.c}, {"alpha", r.params.alpha}, {"beta", r.params.beta}};
    j["F"] = r.F;
    j["lambda"] = r.lambda;
    j["n_paths"] = r.n_paths;
    j["t_grid"] = r.t_grid;
    j["distances"] = r.distances;
    j["distance_stderr"] = r.distance_stderr;
    j["noise_floor"] = r.noise_floor;
    j["flagged"] = r.flagged;
    j["fitted_slope"] = r.fitted_slope ? nlohmann::json(*r.fitted_slope) : nlohmann::json();
    j["predicted_exponent"] =
        std::isfinite(r.predicted_exponent) ? nlohmann::json(r.predicted_exponent) : nlohmann::json();
    j["case"] = to_string(r.classification.kind);
    j["classification"] = to_json(r.classification);
    j["spearman_rho"] = r.trend.rho;
    j["spearman_p"] = r.trend.p_negative;
    return j;
}

} // namespace shotnoise
