#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "shotnoise/errors.hpp"
#include "shotnoise/numeric.hpp"
#include "shotnoise/phi/phi.hpp"
#include "shotnoise/rng.hpp"
#include "shotnoise/sim/batch.hpp"
#include "shotnoise/sim/cluster.hpp"
#include "shotnoise/tilt/solve.hpp"

namespace shotnoise {

// J = int_0^inf x e^{wx} P(Z > x) dx, truncated where the Chernoff bound
// P(Z > x) <= E[e^{vZ}] e^{-vx}, w < v < edge, makes the rest negligible.
inline double cl_integral(const ZModel& z, double w, double rel_tol = 1e-10) {
    if (!(w > 0)) throw DomainError("cl_integral: w must be positive");
    const double edge = z.edge();
    if (!(w < edge) || !std::isfinite(z.tilted_moment(1, w)))
        throw DomainError("cl_integral: int x e^{wx} P(Z > x) dx diverges (w = " + std::to_string(w) +
                          " is not inside the mgf domain)");
    const double v = std::isfinite(edge) ? w + 0.5 * (edge - w) : 2 * w + 1;
    const double mv = z.mgf(v);
    const double delta = v - w;
    // Tail beyond X: mv e^{-delta X} (X/delta + 1/delta^2).
    const double scale = z.tilted_moment(1, w) / w;
    auto tail = [&](double X) { return mv * std::exp(-delta * X) * (X / delta + 1 / (delta * delta)); };
    double X = 1.0;
    while (tail(X) > 0.1 * rel_tol * scale) X *= 1.25;
    if (z.mark_discrete_or_cluster()) {
        // P(Z > x) is a step function: sum exact cell integrals. Masses are kept
        // as logs and tails summed from the top, since e^{wx} outgrows them.
        std::vector<std::pair<double, double>> atoms; // (point, log mass)
        if (z.is_cluster()) {
            const int K = static_cast<int>(std::ceil(X));
            for (int k = 1; k <= K + 1; ++k) atoms.emplace_back(k, z.progeny_log_pmf(k));
        } else {
            for (const auto& [v, p] : z.discrete_support()) atoms.emplace_back(v, std::log(p));
            std::sort(atoms.begin(), atoms.end());
        }
        std::vector<double> log_surv(atoms.size() + 1, -numeric::inf);
        for (std::size_t i = atoms.size(); i-- > 0;) {
            const double a = log_surv[i + 1], b = atoms[i].second;
            const double hi = std::max(a, b);
            log_surv[i] = hi == -numeric::inf ? hi : hi + std::log1p(std::exp(std::min(a, b) - hi));
        }
        auto G = [&](double ls, double x) { return std::exp(ls + w * x) * (x / w - 1 / (w * w)); };
        double J = 0.0, left = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const double right = std::max(left, atoms[i].first);
            if (right > left && log_surv[i] > -numeric::inf) J += G(log_surv[i], right) - G(log_surv[i], left);
            left = right;
        }
        return J;
    }
    std::vector<double> cuts{0.0};
    for (double s = 1.0; s < X; s *= 2) cuts.push_back(s);
    cuts.push_back(X);
    auto f = [&](double x) { return x * std::exp(w * x) * z.survival(x); };
    return numeric::integrate_pieces(f, cuts, 0.5 * rel_tol * scale).value;
}

// Cramer-Lundberg constant (lambda w / (c - lambda E[Z]) J)^{-1}.
inline double cl_constant(const ZModel& z, double c, double w) {
    const double lambda = z.lambda();
    const double margin = c - lambda * z.mean();
    if (!(margin > 0)) throw DomainError("cl_constant: net-profit condition c > lambda E[Z] fails");
    if (!(w > 1e-12)) throw DomainError("cl_constant: w -> 0 makes the constant diverge");
    return 1.0 / (lambda * w / margin * cl_integral(z, w));
}

inline double cl_constant(const ZModel& z, double c) { return cl_constant(z, c, lundberg_root(z, c)); }

struct RuinBounds {
    std::string branch = "i"; // "i" non-lattice, "ii" lattice
    double c = 0.0;
    double w = 0.0;
    double d = 0.0;           // (lambda E[Z e^{wZ}] - c)^{-1}
    double x = 0.0;           // lambda E[Z e^{wZ}], the deviation level with theta_x = w
    double phi_w = 0.0;
    double tilted_m2 = 0.0;   // E[Z^2 e^{wZ}]
    double cl = 0.0;          // Cramer-Lundberg constant
    double lower_coef = 0.0;  // lower(u) = lower_coef e^{-wu} / sqrt(u)

    bool lattice() const { return branch == "ii"; }
    double lower(double u) const { return lower_coef * std::exp(-w * u) / std::sqrt(u); }
    double upper(double u) const { return cl * std::exp(-w * u); }
    // lower(u) < upper(u) exactly for u above this value.
    double crossover() const { return std::pow(lower_coef / cl, 2); }
};

inline RuinBounds ruin_bounds(const ShotModel& model, double c) {
    if (!model.shape().nondecreasing()) throw DomainError("ruin_bounds: H(., m) must be nondecreasing");
    const ZModel& z = model.z();
    const double lambda = model.lambda();
    RuinBounds b;
    b.c = c;
    b.branch = model.lattice() ? "ii" : "i";
    b.w = lundberg_root(z, c);
    const double m1 = z.tilted_moment(1, b.w);
    b.x = lambda * m1;
    if (!(b.x - c > 0)) throw DomainError("ruin_bounds: d = (lambda E[Z e^{wZ}] - c)^{-1} is not positive");
    b.d = 1.0 / (b.x - c);
    b.tilted_m2 = z.tilted_moment(2, b.w);
    if (!std::isfinite(b.tilted_m2)) throw DomainError("ruin_bounds: E[Z^2 e^{wZ}] is infinite");
    b.phi_w = phi_closed_form(model, b.w).value;
    b.cl = cl_constant(z, c, b.w);
    double denom = b.w * std::sqrt(2 * lambda * numeric::pi * b.d * b.tilted_m2);
    if (b.lattice()) denom *= -std::expm1(-b.w);
    b.lower_coef = std::exp(lambda * b.phi_w) / denom;
    return b;
}

// Claim-generating model under the Lundberg change of measure: intensity
// lambda E[e^{wZ}] and Z tilted by e^{wZ} / E[e^{wZ}].
inline ShotModel lundberg_tilted_model(const ShotModel& model, double w) {
    const ZModel& z = model.z();
    const double lambda = model.lambda() * z.mgf(w);
    if (model.is_cluster()) {
        // Tilting the total progeny by e^{wZ} tilts every offspring count:
        // q_k = e^w p_k rho^{k-1} with rho = E[e^{wZ}].
        const ClusterLaw& law = model.cluster_law();
        const OffspringLaw& off = law.offspring;
        const double rho = z.mgf(w);
        OffspringLaw tilted = off;
        switch (off.kind()) {
        case OffspringLaw::Kind::poisson: tilted = OffspringLaw::poisson(off.mu() * rho); break;
        case OffspringLaw::Kind::binomial: {
            const double p = off.p();
            tilted = OffspringLaw::binomial(off.m(), p * rho / (1 - p + p * rho));
            break;
        }
        case OffspringLaw::Kind::geometric: tilted = OffspringLaw::geometric(1 - (1 - off.p()) * rho); break;
        case OffspringLaw::Kind::table: {
            std::vector<double> q(off.pmf_table().size());
            double s = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) s += q[k] = off.pmf_table()[k] * std::pow(rho, k);
            for (auto& v : q) v /= s;
            tilted = OffspringLaw::table(q);
            break;
        }
        }
        ClusterLaw tl{tilted, law.lag, law.caps};
        return ShotModel::cluster(lambda, tl);
    }
    const MarkLaw& m = model.mark();
    MarkLaw tm = m;
    switch (m.kind()) {
    case MarkLaw::Kind::exponential: tm = MarkLaw::exponential(m.rate() - w); break;
    case MarkLaw::Kind::deterministic: break;
    case MarkLaw::Kind::table: {
        std::vector<double> p(m.probs().size());
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += p[i] = m.probs()[i] * std::exp(w * m.values()[i]);
        for (auto& v : p) v /= s;
        tm = MarkLaw::table(m.values(), p);
        break;
    }
    case MarkLaw::Kind::user: throw DomainError("lundberg_tilted_model: no tilted sampler for user-supplied marks");
    }
    switch (model.shape().kind()) {
    case ShotShape::Kind::multiplicative: return ShotModel::multiplicative(lambda, tm, model.shape().F());
    case ShotShape::Kind::capped: return ShotModel::capped(lambda, tm);
    case ShotShape::Kind::constant: return ShotModel::constant(lambda, tm);
    case ShotShape::Kind::cluster_count: break;
    }
    throw DomainError("lundberg_tilted_model: unsupported shape");
}

enum class RuinMethod { crude, tilted };

inline std::string to_string(RuinMethod m) { return m == RuinMethod::crude ? "crude" : "tilted"; }

struct RuinOptions {
    long n_paths = 100000;
    std::vector<std::uint64_t> seeds{1};
    unsigned threads = 1;
    RuinMethod method = RuinMethod::tilted;
    double horizon_factor = 4.0;  // T_max(u) = horizon_factor u d
    double grid_step = 0.0;       // 0: 0.01 / c, used by shapes without exact breakpoints
};

struct RuinEstimate {
    double u = 0.0;
    double psi_hat = 0.0;
    double stderr_ = 0.0;
    double horizon = 0.0;
    long hits = 0;
    double bias_estimate = 0.0;   // heuristic probability of ruin after the horizon
};

struct RuinResult {
    RuinMethod method = RuinMethod::tilted;
    double w = 0.0;
    double d = 0.0;
    double horizon_factor = 4.0;
    double gap_bound = 0.0;       // level error of the grid supremum (0 when exact)
    long flagged = 0;             // paths with truncated clusters
    int retries = 0;
    std::vector<RuinEstimate> estimates;
};

namespace detail {

// Piecewise-linear events: jump of S, change of slope of S, increment of the
// associated Cramer-Lundberg claim total C.
struct RuinEvent {
    double t;
    double jump;
    double slope;
    double dc;
};

struct PassageOutcome {
    std::vector<double> tau;  // first passage time per level (inf if none before the end)
    std::vector<double> c_at; // C at the passage time
    bool flagged = false;
};

inline bool exact_breakpoints(const ShotModel& model) {
    if (model.is_cluster()) return true;
    switch (model.shape().kind()) {
    case ShotShape::Kind::constant:
    case ShotShape::Kind::capped: return true;
    case ShotShape::Kind::multiplicative: return model.shape().F().piecewise_linear();
    default: return false;
    }
}

// First passage of S_t - ct above each level (levels ascending) on [0, T_end].
inline PassageOutcome first_passage(const ShotModel& model, double c, const std::vector<double>& levels, double T_end,
                                    double grid_step, Stream& rng) {
    PassageOutcome out;
    const std::size_t K = levels.size();
    out.tau.assign(K, numeric::inf);
    out.c_at.assign(K, 0.0);
    const long n = std::poisson_distribution<long>(model.lambda() * T_end)(rng);
    std::vector<double> times(static_cast<std::size_t>(n));
    for (auto& t : times) t = T_end * rng.uniform();
    std::sort(times.begin(), times.end());
    std::size_t k = 0;
    while (k < K && levels[k] <= 0) {
        out.tau[k] = 0.0;
        ++k;
    }
    if (exact_breakpoints(model)) {
        std::vector<RuinEvent> ev;
        ev.reserve(2 * times.size());
        const ShotShape& shape = model.shape();
        for (double T : times) {
            if (model.is_cluster()) {
                ClusterRealization cl = simulate_cluster(model.cluster_law(), rng);
                out.flagged = out.flagged || cl.truncated;
                ev.push_back({T, 0.0, 0.0, static_cast<double>(cl.total_points)});
                for (const auto& g : cl.generations)
                    for (double b : g)
                        if (T + b <= T_end) ev.push_back({T + b, 1.0, 0.0, 0.0});
                continue;
            }
            const double m = model.mark().sample(rng);
            ev.push_back({T, 0.0, 0.0, m});
            switch (shape.kind()) {
            case ShotShape::Kind::constant: ev.push_back({T, m, 0.0, 0.0}); break;
            case ShotShape::Kind::capped:
                ev.push_back({T, 0.0, 1.0, 0.0});
                ev.push_back({T + m, 0.0, -1.0, 0.0});
                break;
            default: {
                const DistributionFunction& F = shape.F();
                if (F.kind() == DistributionFunction::Kind::uniform) {
                    ev.push_back({T, 0.0, m / F.param(), 0.0});
                    ev.push_back({T + F.param(), 0.0, -m / F.param(), 0.0});
                } else if (F.kind() == DistributionFunction::Kind::step) {
                    ev.push_back({T + F.param(), m, 0.0, 0.0});
                } else {
                    ev.push_back({T, m, 0.0, 0.0});
                }
            }
            }
        }
        std::stable_sort(ev.begin(), ev.end(), [](const RuinEvent& a, const RuinEvent& b) { return a.t < b.t; });
        double t0 = 0.0, S = 0.0, slope = 0.0, C = 0.0;
        std::size_t i = 0;
        while (k < K) {
            const double t1 = i < ev.size() ? std::min(ev[i].t, T_end) : T_end;
            // Linear segment on [t0, t1]: R(t) = S + slope (t - t0) - c t.
            const double r0 = S - c * t0;
            const double drift = slope - c;
            while (k < K && drift > 0 && r0 + drift * (t1 - t0) >= levels[k]) {
                out.tau[k] = t0 + std::max(0.0, (levels[k] - r0) / drift);
                out.c_at[k] = C;
                ++k;
            }
            S += slope * (t1 - t0);
            t0 = t1;
            if (i >= ev.size() || ev[i].t > T_end) break;
            for (; i < ev.size() && ev[i].t == t1; ++i) {
                S += ev[i].jump;
                slope += ev[i].slope;
                C += ev[i].dc;
            }
            while (k < K && S - c * t0 >= levels[k]) {
                out.tau[k] = t0;
                out.c_at[k] = C;
                ++k;
            }
        }
        return out;
    }
    // Grid evaluation for smooth nondecreasing shapes; S is nondecreasing, so
    // the supremum over a cell exceeds the grid value by at most c * step.
    std::vector<double> marks(times.size());
    for (auto& m : marks) m = model.mark().sample(rng);
    const DistributionFunction& F = model.shape().F();
    const bool expo = F.kind() == DistributionFunction::Kind::exponential;
    const double decay = expo ? std::exp(-F.param() * grid_step) : 0.0;
    double A = 0.0, E = 0.0, C = 0.0;
    std::size_t i = 0;
    const long steps = static_cast<long>(std::ceil(T_end / grid_step));
    for (long s = 1; s <= steps && k < K; ++s) {
        const double t = std::min(T_end, s * grid_step);
        if (expo) E *= decay;
        for (; i < times.size() && times[i] <= t; ++i) {
            C += marks[i];
            if (expo) {
                A += marks[i];
                E += marks[i] * std::exp(-F.param() * (t - times[i]));
            }
        }
        double S = 0.0;
        if (expo) {
            S = A - E;
        } else {
            for (std::size_t j = 0; j < i; ++j) S += marks[j] * F.cdf(t - times[j]);
        }
        while (k < K && S - c * t >= levels[k]) {
            out.tau[k] = t;
            out.c_at[k] = C;
            ++k;
        }
    }
    return out;
}

} // namespace detail

// psi_IBNR(u) = P(sup_{t <= T_max(u)} (S_t - c t) >= u) for every u of the grid,
// all levels sharing the same paths. The tilted method simulates under the
// Lundberg measure and weights a ruin at tau by exp(-w (C_tau - c tau)).
inline RuinResult ruin_mc(const ShotModel& model, double c, const std::vector<double>& u_grid, RuinOptions opt = {}) {
    if (u_grid.empty()) throw DomainError("ruin_mc: empty capital grid");
    for (std::size_t j = 0; j < u_grid.size(); ++j) {
        if (!(u_grid[j] >= 0)) throw DomainError("ruin_mc: capital must be nonnegative");
        if (j > 0 && !(u_grid[j] > u_grid[j - 1])) throw DomainError("ruin_mc: capital grid must be increasing");
    }
    if (!(opt.horizon_factor > 0)) throw DomainError("ruin_mc: horizon factor must be positive");
    check_batch_inputs(opt.n_paths, opt.seeds);
    const ZModel& z = model.z();
    const double lambda = model.lambda();
    RuinResult res;
    res.method = opt.method;
    res.w = lundberg_root(z, c);
    const double ex = lambda * z.tilted_moment(1, res.w);
    res.d = 1.0 / (ex - c);
    const double step = opt.grid_step > 0 ? opt.grid_step : 0.01 / c;
    res.gap_bound = detail::exact_breakpoints(model) ? 0.0 : c * step;
    const ShotModel sim = opt.method == RuinMethod::tilted ? lundberg_tilted_model(model, res.w) : model;
    const double cl = cl_constant(z, c, res.w);
    const double margin = c - lambda * z.mean();
    const std::size_t K = u_grid.size();

    std::vector<double> horizon(K);
    for (std::size_t j = 0; j < K; ++j) horizon[j] = opt.horizon_factor * u_grid[j] * res.d;
    res.horizon_factor = opt.horizon_factor;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const double T_end = std::max(*std::max_element(horizon.begin(), horizon.end()), step);
        struct Block {
            std::vector<double> sum, sum2;
            std::vector<long> hits;
            long flagged = 0;
        };
        const long blocks = (opt.n_paths + batch_block - 1) / batch_block;
        std::vector<Block> parts(static_cast<std::size_t>(blocks));
        for_each_block(blocks, opt.threads, [&](long b) {
            Block blk{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0), std::vector<long>(K, 0), 0};
            const long end = std::min(opt.n_paths, (b + 1) * batch_block);
            for (long p = b * batch_block; p < end; ++p) {
                Stream rng = path_stream(opt.seeds, p);
                const auto o = detail::first_passage(sim, c, u_grid, T_end, step, rng);
                if (o.flagged) ++blk.flagged;
                for (std::size_t j = 0; j < K; ++j) {
                    if (!(o.tau[j] <= horizon[j]) && u_grid[j] > 0) continue;
                    double v = 1.0;
                    if (opt.method == RuinMethod::tilted && u_grid[j] > 0)
                        v = std::exp(-res.w * (o.c_at[j] - c * o.tau[j]));
                    blk.sum[j] += v;
                    blk.sum2[j] += v * v;
                    ++blk.hits[j];
                }
            }
            parts[static_cast<std::size_t>(b)] = std::move(blk);
        });
        std::vector<double> sum(K, 0.0), sum2(K, 0.0);
        std::vector<long> hits(K, 0);
        res.flagged = 0;
        for (const auto& blk : parts) {
            for (std::size_t j = 0; j < K; ++j) {
                sum[j] += blk.sum[j];
                sum2[j] += blk.sum2[j];
                hits[j] += blk.hits[j];
            }
            res.flagged += blk.flagged;
        }
        res.estimates.clear();
        bool too_short = false;
        const double n = static_cast<double>(opt.n_paths);
        std::vector<double> wider = horizon;
        for (std::size_t j = 0; j < K; ++j) {
            RuinEstimate e;
            e.u = u_grid[j];
            e.horizon = horizon[j];
            e.hits = hits[j];
            if (e.u == 0) {
                e.psi_hat = 1.0;
            } else {
                e.psi_hat = sum[j] / n;
                e.stderr_ = std::sqrt(std::max(0.0, sum2[j] / n - e.psi_hat * e.psi_hat) / (n - 1));
                e.bias_estimate = cl * std::exp(-res.w * (e.u + margin * e.horizon));
                const double half_ci = 0.5 * 1.96 * e.stderr_;
                if (e.psi_hat > 0 && e.bias_estimate > half_ci) {
                    too_short = true;
                    // Horizon at which the estimate drops to half the allowance.
                    const double need = (std::log(cl / (0.5 * half_ci)) / res.w - e.u) / margin;
                    wider[j] = std::max(2 * horizon[j], need);
                }
            }
            res.estimates.push_back(e);
        }
        if (!too_short) return res;
        res.retries = attempt + 1;
        horizon = wider;
    }
    throw NumericError("ruin_mc: horizon too short even after widening (truncation bias above half the CI width)",
                       static_cast<double>(res.retries));
}

} // namespace shotnoise
