#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shotnoise/numeric.hpp"
#include "shotnoise/phi/shape.hpp"
#include "shotnoise/rng.hpp"
#include "shotnoise/sim/cluster.hpp"

namespace shotnoise {

// phi(theta) = int_0^inf (E[e^{theta H(s, M)}] - E[e^{theta Z}]) ds.

enum class PhiMethod { closed_form, quadrature, nested_mc };

inline std::string to_string(PhiMethod m) {
    switch (m) {
    case PhiMethod::closed_form: return "closed-form";
    case PhiMethod::quadrature: return "quadrature";
    case PhiMethod::nested_mc: return "nested-mc";
    }
    return "";
}

struct PhiValue {
    double value = 0.0;
    double abs_error = 0.0;
    double lower_bound = -numeric::inf;
    double upper_bound = numeric::inf;
    PhiMethod method = PhiMethod::closed_form;
};

struct PhiBounds {
    double lower = -numeric::inf;
    double upper = numeric::inf;
};

struct NestedMcOptions {
    long clusters = 10000;
    std::uint64_t seed = 1;
};

namespace detail {

inline void check_theta(const ShotModel& model, double theta) {
    const double edge = model.z().edge();
    if (!(theta < edge))
        throw DomainError("phi: theta = " + std::to_string(theta) + " must lie below the mgf edge " +
                          std::to_string(edge));
}

inline bool trivially_zero(const ShotModel& model) {
    const auto& sh = model.shape();
    return sh.kind() == ShotShape::Kind::constant ||
           (sh.kind() == ShotShape::Kind::multiplicative && sh.F().kind() == DistributionFunction::Kind::one);
}

// int_0^1 (1 - u)/(a - theta u) du.
inline double uniform_kernel(double a, double theta) {
    const double r = theta / a;
    if (std::abs(r) < 0.25) {
        double s = 0.0, p = 1.0;
        for (int k = 0; k < 200; ++k) {
            double term = p / ((k + 1.0) * (k + 2.0));
            s += term;
            if (std::abs(term) < 1e-18 * std::abs(s)) break;
            p *= r;
        }
        return s / a;
    }
    return 1.0 / theta + (a - theta) / (theta * theta) * std::log1p(-r);
}

// int_0^inf Fbar/(a - theta F) ds for Pareto F with shape k:
// (1/k) int_0^1 v^{-1/k}/(A + theta v) dv with A = a - theta.
inline double pareto_kernel(double a, double theta, double k) {
    const double A = a - theta;
    if (k == 2.0) {
        if (theta == 0) return 1.0 / A;
        if (theta > 0) return std::atan(std::sqrt(theta / A)) / std::sqrt(A * theta);
        return std::atanh(std::sqrt(-theta / A)) / std::sqrt(-A * theta);
    }
    auto g = [&](double v) { return std::pow(v, -1.0 / k) / (A + theta * v); };
    return numeric::integrate_endpoint_singular(g, 0.0, 1.0, 1e-14).value / k;
}

// Exact phi^{(n)}(theta) where a closed form exists.
inline std::optional<double> phi_exact(const ShotModel& model, double theta, int n) {
    if (trivially_zero(model)) return 0.0;
    if (model.is_cluster()) return std::nullopt;
    const auto& sh = model.shape();
    const auto& mark = model.mark();
    if (mark.kind() == MarkLaw::Kind::user) return std::nullopt;
    if (sh.kind() == ShotShape::Kind::multiplicative) {
        const auto& F = sh.F();
        if (F.kind() == DistributionFunction::Kind::step) {
            // H = M 1{s >= d}: the integrand is 1 - E[e^{theta M}] on [0, d).
            if (n == 0) return F.param() * (1.0 - mark.mgf(theta));
            return -F.param() * mark.tilted_moment(n, theta);
        }
        if (n != 0 || mark.kind() != MarkLaw::Kind::exponential) return std::nullopt;
        const double a = mark.rate();
        if (theta == 0) return 0.0;
        const double pre = -a * theta / (a - theta);
        switch (F.kind()) {
        case DistributionFunction::Kind::uniform: return pre * F.param() * uniform_kernel(a, theta);
        case DistributionFunction::Kind::exponential:
            // (1/r) int_0^1 dv/(a - theta + theta v).
            return pre * std::log1p(theta / (a - theta)) / (F.param() * theta);
        case DistributionFunction::Kind::pareto:
            if (F.param() <= 1.0) throw DomainError("phi: Pareto F with shape <= 1 has infinite mean, phi diverges");
            if (F.param() == 2.0) return pre * pareto_kernel(a, theta, 2.0);
            return std::nullopt;
        default: return std::nullopt;
        }
    }
    if (sh.kind() == ShotShape::Kind::capped) {
        // int_0^inf E[(e^{theta s} - e^{theta M}); M > s] ds = E[int_0^M (e^{theta s} - e^{theta M}) ds].
        if (mark.kind() == MarkLaw::Kind::exponential) {
            const double a = mark.rate();
            return numeric::factorial(n) / std::pow(a - theta, n + 1) - mark.tilted_moment(n + 1, theta);
        }
        if (n == 0) {
            if (theta == 0) return 0.0;
            double s = 0.0;
            for (std::size_t i = 0; i < mark.values().size(); ++i) {
                const double v = mark.values()[i];
                s += mark.probs()[i] * (std::expm1(theta * v) / theta - v * std::exp(theta * v));
            }
            return s;
        }
    }
    return std::nullopt;
}

// tail_tilted_moment counts M = s; the integrand needs M > s. Only matters on a null set of s,
// but keeps the integrand right-continuous at the atoms.
inline double atom_correction(const MarkLaw& mark, double theta, int n, double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mark.values().size(); ++i)
        if (mark.values()[i] == s) acc += mark.probs()[i] * std::pow(s, n) * std::exp(theta * s);
    return acc;
}

// Integrand of phi^{(n)}: E[H^n e^{theta H}] - E[Z^n e^{theta Z}] at time s.
inline double phi_integrand(const ShotModel& model, double theta, int n, double s) {
    const auto& sh = model.shape();
    const auto& mark = model.mark();
    if (sh.kind() == ShotShape::Kind::multiplicative) {
        const double F = sh.F().cdf(s);
        const double Fbar = sh.F().survival(s);
        if (n == 0) {
            switch (mark.kind()) {
            case MarkLaw::Kind::exponential: {
                const double a = mark.rate();
                return -a * theta * Fbar / ((a - theta) * (a - theta * F));
            }
            case MarkLaw::Kind::deterministic:
            case MarkLaw::Kind::table: {
                double acc = 0.0;
                for (std::size_t i = 0; i < mark.values().size(); ++i) {
                    const double v = mark.values()[i];
                    acc += mark.probs()[i] * std::exp(theta * v) * std::expm1(-theta * v * Fbar);
                }
                return acc;
            }
            case MarkLaw::Kind::user: return mark.mgf(theta * F) - mark.mgf(theta);
            }
        }
        return std::pow(F, n) * mark.tilted_moment(n, theta * F) - mark.tilted_moment(n, theta);
    }
    if (sh.kind() == ShotShape::Kind::capped) {
        if (mark.kind() == MarkLaw::Kind::user)
            throw DomainError("phi: capped shapes need the survival function and tail moments of the mark");
        return std::pow(s, n) * std::exp(theta * s) * mark.survival(s) - mark.tail_tilted_moment(n, theta, s) +
               (mark.is_discrete() ? atom_correction(mark, theta, n, s) : 0.0);
    }
    return 0.0;
}

// Certified bound on int_T^inf |integrand of phi^{(n)}| ds; nullopt if not computable.
inline std::optional<double> phi_tail_bound(const ShotModel& model, double theta, int n, double T) {
    const auto& sh = model.shape();
    const auto& mark = model.mark();
    const double edge = mark.edge();
    try {
        if (n == 0) {
            // |e^{theta H} - e^{theta Z}| <= |theta| (Z - H) e^{theta^+ Z}; Holder with q theta < a.
            if (theta < 0) {
                if (sh.kind() == ShotShape::Kind::multiplicative)
                    return -theta * mark.mean() * sh.F().tail_integral(T);
                return -theta * mark.positive_part_moment(2, T) / 2;
            }
            const double q = std::isfinite(edge) ? std::min(2.0, 0.5 * (1.0 + edge / theta)) : 2.0;
            const double qp = q / (q - 1.0);
            const int m = static_cast<int>(std::ceil(qp - 1e-12));
            const double holder = std::pow(mark.mgf(q * theta), 1.0 / q);
            if (sh.kind() == ShotShape::Kind::multiplicative)
                return theta * holder * std::pow(mark.moment(m), 1.0 / m) * sh.F().tail_integral(T);
            return theta * holder * std::pow(mark.positive_part_moment(2 * m, T), 1.0 / m) / 2;
        }
        const double tp = std::max(theta, 0.0);
        if (sh.kind() == ShotShape::Kind::multiplicative)
            return (n * mark.tilted_moment(n, tp) + std::abs(theta) * mark.tilted_moment(n + 1, tp)) *
                   sh.F().tail_integral(T);
        return 2.0 * mark.tail_tilted_moment(n + 1, tp, T);
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

inline std::vector<double> phi_cuts(const ShotModel& model, double T) {
    std::vector<double> cuts{0.0};
    std::vector<double> kinks = model.shape().F().breakpoints();
    if (model.shape().kind() == ShotShape::Kind::capped && model.mark().is_discrete())
        kinks.insert(kinks.end(), model.mark().values().begin(), model.mark().values().end());
    std::sort(kinks.begin(), kinks.end());
    for (double k : kinks)
        if (k > cuts.back() && k < T) cuts.push_back(k);
    double next = std::max(1.0, cuts.back());
    while (next < T) {
        if (next > cuts.back()) cuts.push_back(next);
        next *= 2;
    }
    cuts.push_back(T);
    return cuts;
}

// phi^{(n)} by quadrature on [0, T*] with the certified tail bound.
inline PhiValue phi_quadrature_order(const ShotModel& model, double theta, int n, double tol,
                                     std::optional<double> horizon) {
    PhiValue out;
    out.method = PhiMethod::quadrature;
    if (trivially_zero(model) || (theta == 0 && n == 0)) return out;
    double T = 0.0;
    double tail = 0.0;
    if (horizon) {
        T = *horizon;
        auto b = phi_tail_bound(model, theta, n, T);
        tail = b ? *b : 0.0;
    } else {
        T = 1.0;
        for (double k : model.shape().F().breakpoints()) T = std::max(T, k);
        auto b = phi_tail_bound(model, theta, n, T);
        if (!b || !std::isfinite(*b))
            throw DomainError("phi: tail bound not computable for this shape and mark; supply an explicit "
                              "truncation horizon");
        int doublings = 0;
        while (*b >= tol / 2) {
            if (++doublings > 200) throw NumericError("phi: truncation horizon search did not converge", *b);
            T *= 2;
            b = phi_tail_bound(model, theta, n, T);
        }
        tail = *b;
    }
    auto f = [&](double s) { return phi_integrand(model, theta, n, s); };
    auto q = numeric::integrate_pieces(f, phi_cuts(model, T), tol / 2);
    out.value = q.value;
    out.abs_error = q.error + tail;
    return out;
}

// ---- cluster-count shapes ----

// Exponential lags with rate beta: v(s) = E[e^{theta N_child(s)}-type] solves
// v' = beta (e^theta G(v) - v), v(0) = 1, and E[e^{theta N(s)}] = e^theta G(v(s)).
// Changing variables to g = v(s):
// phi = (1/beta) int_1^rho (e^theta G(g) - rho)/(e^theta G(g) - g) dg.
inline double cluster_phi_exponential_lag(const OffspringLaw& law, const CriticalExponents& crit, double beta,
                                          double theta, double tol) {
    if (theta == 0) return 0.0;
    if (!(theta < crit.b_c)) throw DomainError("phi: theta must lie below b_c for cluster shapes");
    const double rho = cluster_mgf(law, theta, crit);
    const double et = std::exp(theta);
    // With D(g) = (G(g) - G(rho))/(g - rho) the integrand is e^theta D/(e^theta D - 1).
    auto ratio = [&](double g) {
        const double slope = et * law.pgf_divided_difference(g, rho);
        return slope / (slope - 1.0);
    };
    const double lo = std::min(1.0, rho), hi = std::max(1.0, rho);
    double integral = numeric::integrate(ratio, lo, hi, tol * beta).value;
    return (rho < 1.0 ? -integral : integral) / beta;
}

// Common grid step of a discrete lag law, or nullopt if the lags are not commensurate.
inline std::optional<double> lag_grid_step(const MarkLaw& lag) {
    double vmin = numeric::inf;
    for (double v : lag.values())
        if (v > 0) vmin = std::min(vmin, v);
    if (!std::isfinite(vmin)) return std::nullopt;
    for (int k = 1; k <= 64; ++k) {
        const double d = vmin / k;
        bool ok = true;
        for (double v : lag.values()) {
            double r = v / d;
            if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) ok = false;
        }
        if (ok) return d;
    }
    return std::nullopt;
}

// Discrete lags on a grid of step delta: the count process is constant on
// [j delta, (j+1) delta), and u_j = E[e^{theta N(j delta)}] satisfies
// u_j = e^theta G(sum_{l_i > j delta} p_i + sum_{l_i <= j delta} p_i u_{j - l_i/delta}).
inline double cluster_phi_grid(const OffspringLaw& law, const CriticalExponents& crit, const MarkLaw& lag,
                               double theta, double tol) {
    if (theta == 0) return 0.0;
    if (!(theta < crit.b_c)) throw DomainError("phi: theta must lie below b_c for cluster shapes");
    auto step = lag_grid_step(lag);
    if (!step) throw DomainError("phi: lag values are not commensurate; use the nested Monte Carlo route");
    const double delta = *step;
    const double rho = cluster_mgf(law, theta, crit);
    const double et = std::exp(theta);
    std::vector<long> offs;
    long span = 0;
    for (double v : lag.values()) {
        offs.push_back(std::lround(v / delta));
        span = std::max(span, offs.back());
    }
    const auto& p = lag.probs();
    std::vector<double> u;
    double sum = 0.0;
    const long max_steps = 20000000;
    for (long j = 0; j < max_steps; ++j) {
        double base = 0.0, self = 0.0;
        for (std::size_t i = 0; i < offs.size(); ++i) {
            if (offs[i] > j) base += p[i];
            else if (offs[i] == 0) self += p[i];
            else base += p[i] * u[static_cast<std::size_t>(j - offs[i])];
        }
        double uj = et * law.pgf(base);
        if (self > 0) {
            // Zero lags: u_j = e^theta G(base + self u_j); monotone iteration to the minimal root.
            double x = 0.0;
            for (int it = 0; it < 10000; ++it) {
                double nx = et * law.pgf(base + self * x);
                if (std::abs(nx - x) <= 1e-16 * std::max(1.0, nx)) {
                    x = nx;
                    break;
                }
                x = nx;
            }
            uj = x;
        }
        u.push_back(uj);
        sum += uj - rho;
        if (j > 2 * span + 2) {
            const double now = std::abs(uj - rho);
            const double before = std::abs(u[static_cast<std::size_t>(j - span - 1)] - rho);
            if (before > 0) {
                const double r = std::pow(now / before, 1.0 / (span + 1.0));
                if (r < 1 && now * delta / (1 - r) < 0.1 * tol) {
                    return delta * sum;
                }
            } else if (now == 0) {
                return delta * sum;
            }
        }
    }
    throw NumericError("phi: grid recursion did not converge", sum);
}

// Per-cluster integral int_0^inf (N(s)^n e^{theta N(s)} - Z^n e^{theta Z}) ds, exact for
// the piecewise-constant count.
inline double cluster_path_integral(const std::vector<double>& births, double theta, int n) {
    const long Z = static_cast<long>(births.size());
    const double top = std::pow(static_cast<double>(Z), n) * std::exp(theta * Z);
    double acc = 0.0;
    for (long i = 1; i < Z; ++i) {
        const double w = births[static_cast<std::size_t>(i)] - births[static_cast<std::size_t>(i - 1)];
        if (w > 0) acc += w * (std::pow(static_cast<double>(i), n) * std::exp(theta * i) - top);
    }
    return acc;
}

} // namespace detail

// phi^{(n)}(theta) for a cluster model by nested Monte Carlo: the mean of the
// exact per-cluster integrals over independently simulated clusters. Reuses the
// same substreams for every theta (common random numbers).
inline PhiValue phi_nested_mc(const ShotModel& model, double theta, int n = 0, NestedMcOptions opt = {}) {
    if (!model.is_cluster()) throw DomainError("phi_nested_mc: cluster-count models only");
    if (opt.clusters < 2) throw DomainError("phi_nested_mc: need at least two clusters");
    detail::check_theta(model, theta);
    const auto& law = model.cluster_law();
    double mean = 0.0, m2 = 0.0;
    long truncated = 0;
    for (long i = 0; i < opt.clusters; ++i) {
        Stream rng(opt.seed, static_cast<std::uint64_t>(i));
        auto c = simulate_cluster(law, rng);
        if (c.truncated) ++truncated;
        const double v = detail::cluster_path_integral(c.birth_times(), theta, n);
        const double d = v - mean;
        mean += d / (i + 1);
        m2 += d * (v - mean);
    }
    if (truncated > 0)
        throw NumericError("phi_nested_mc: " + std::to_string(truncated) + " clusters hit the simulation caps",
                           static_cast<double>(truncated));
    PhiValue out;
    out.value = mean;
    out.abs_error = std::sqrt(m2 / (opt.clusters - 1) / opt.clusters);
    out.method = PhiMethod::nested_mc;
    return out;
}

namespace detail {

inline double cluster_phi(const ShotModel& model, double theta, double tol) {
    const auto& law = model.cluster_law();
    const auto& crit = model.z().critical();
    switch (law.lag.kind()) {
    case MarkLaw::Kind::exponential:
        return cluster_phi_exponential_lag(law.offspring, crit, law.lag.rate(), theta, tol);
    case MarkLaw::Kind::deterministic:
    case MarkLaw::Kind::table: return cluster_phi_grid(law.offspring, crit, law.lag, theta, tol);
    case MarkLaw::Kind::user: break;
    }
    throw DomainError("phi: no deterministic route for user lag laws");
}

inline bool cluster_deterministic(const ShotModel& model) {
    const auto& lag = model.cluster_law().lag;
    if (lag.kind() == MarkLaw::Kind::exponential) return true;
    if (lag.kind() == MarkLaw::Kind::user) return false;
    return lag_grid_step(lag).has_value();
}

// Derivatives of the cluster phi from a Chebyshev interpolant of theta -> phi(theta).
inline std::vector<double> cluster_phi_derivatives(const ShotModel& model, double theta, int nmax, double tol) {
    const double bc = model.z().critical().b_c;
    const double delta = std::min(0.2 * std::max(1.0, std::abs(theta)), 0.45 * (bc - theta));
    auto f = [&](double th) { return cluster_phi(model, th, std::max(tol * 1e-3, 1e-12)); };
    return numeric::chebyshev_derivatives(f, theta, delta, nmax, 25);
}

} // namespace detail

// Sign and Holder bounds. Mark-driven shapes use the exact integral of E[Z - H];
// cluster counts use the Galton-Watson forms with norms of the lag B and of Z.
// `qs` lists Holder exponents q (q' = q/(q-1)); the tightest admissible bound is kept.
inline PhiBounds phi_bounds(const ShotModel& model, double theta, const std::vector<double>& qs = {2.0}) {
    if (theta == 0) return {0.0, 0.0};
    const ZModel& z = model.z();
    const double edge = z.edge();
    const auto& sh = model.shape();
    if (detail::trivially_zero(model)) return {0.0, 0.0};
    auto admissible = [&](double q) { return q > 1 && (theta < 0 || q * theta <= edge); };
    auto fail = [&]() {
        return DomainError("phi_bounds: no admissible Holder exponent; q must lie in (1, " +
                           std::to_string(edge / theta) + ")");
    };
    PhiBounds out;
    if (!model.is_cluster()) {
        const auto& mark = model.mark();
        // int_0^inf (Z - H) ds = M mean_F (multiplicative) or M^2/2 (capped).
        auto deficit_norm = [&](double r) {
            if (sh.kind() == ShotShape::Kind::multiplicative)
                return std::pow(mark.abs_moment(r), 1.0 / r) * sh.F().mean();
            return std::pow(mark.abs_moment(2 * r), 1.0 / r) / 2;
        };
        if (theta < 0) return {0.0, -theta * deficit_norm(1.0)};
        out.upper = 0.0;
        bool any = false;
        for (double q : qs) {
            if (!admissible(q)) continue;
            const double mgf = z.mgf(q * theta);
            if (!std::isfinite(mgf)) continue;
            const double qp = q / (q - 1);
            out.lower = std::max(out.lower, -theta * std::pow(mgf, 1.0 / q) * deficit_norm(qp));
            any = true;
        }
        if (!any) throw fail();
        return out;
    }
    const auto& law = model.cluster_law();
    const double p1 = law.offspring.prob(1);
    const double eb = law.lag.mean();
    const double gw = p1 * eb * std::exp(theta) * (1.0 - z.mgf(theta));
    auto znorm = [&](double r) { return std::pow(z.abs_moment(r), 1.0 / r); };
    auto bnorm = [&](double r) { return std::pow(law.lag.abs_moment(r), 1.0 / r); };
    if (theta < 0) {
        out.lower = gw;
        for (double q : qs) {
            if (!(q > 1)) continue;
            const double qp = q / (q - 1);
            out.upper = std::min(out.upper, -theta * bnorm(q) * znorm(q) * znorm(qp));
        }
        return out;
    }
    out.upper = gw;
    bool any = false;
    const double q1 = 2.0, q2 = 2.0;
    for (double q : qs) {
        if (!admissible(q)) continue;
        const double mgf = z.mgf(q * theta);
        if (!std::isfinite(mgf)) continue;
        const double qp = q / (q - 1);
        out.lower = std::max(out.lower, -theta * std::pow(mgf, 1.0 / q) * bnorm(qp * q1) * znorm(qp * q1) *
                                            znorm(qp * q2));
        any = true;
    }
    if (!any) throw fail();
    return out;
}

// Bounds for cluster counts in terms of the cluster length L, from a sample of
// simulated lengths (an estimate, not a certificate).
inline PhiBounds phi_bounds_cluster_length(const ShotModel& model, double theta, const std::vector<double>& lengths,
                                           double q = 2.0) {
    if (!model.is_cluster()) throw DomainError("phi_bounds_cluster_length: cluster-count models only");
    if (lengths.empty()) throw DomainError("phi_bounds_cluster_length: empty length sample");
    if (theta == 0) return {0.0, 0.0};
    auto lnorm = [&](double r) {
        double s = 0.0;
        for (double l : lengths) s += std::pow(l, r);
        return std::pow(s / static_cast<double>(lengths.size()), 1.0 / r);
    };
    const ZModel& z = model.z();
    auto znorm = [&](double r) { return std::pow(z.abs_moment(r), 1.0 / r); };
    const double qp = q / (q - 1);
    if (theta < 0) return {0.0, -theta * lnorm(q) * znorm(qp)};
    if (q * theta > z.edge())
        throw DomainError("phi_bounds_cluster_length: q must lie in (1, " + std::to_string(z.edge() / theta) + ")");
    return {-theta * std::pow(z.mgf(q * theta), 1.0 / q) * lnorm(qp * 2.0) * znorm(qp * 2.0), 0.0};
}

namespace detail {

inline void attach_bounds(const ShotModel& model, double theta, PhiValue& v) {
    try {
        auto b = phi_bounds(model, theta);
        v.lower_bound = b.lower;
        v.upper_bound = b.upper;
    } catch (const DomainError&) {
    }
}

inline void assert_within_bounds(const PhiValue& v) {
    const double slack = v.abs_error + 1e-12 * std::max(1.0, std::abs(v.value));
    if (v.value < v.lower_bound - slack || v.value > v.upper_bound + slack)
        throw NumericError("phi value " + std::to_string(v.value) + " violates the bounds [" +
                               std::to_string(v.lower_bound) + ", " + std::to_string(v.upper_bound) + "]",
                           v.value);
}

} // namespace detail

// phi(theta) by quadrature with a certified truncation horizon (mark-driven
// shapes) or by the deterministic cluster routes. The result is checked
// against phi_bounds.
inline PhiValue phi_quadrature(const ShotModel& model, double theta, double tol = 1e-9,
                               std::optional<double> horizon = std::nullopt) {
    detail::check_theta(model, theta);
    PhiValue v;
    if (model.is_cluster()) {
        if (!detail::cluster_deterministic(model)) {
            v = phi_nested_mc(model, theta);
        } else {
            v.value = detail::cluster_phi(model, theta, tol);
            v.abs_error = tol;
            v.method = PhiMethod::quadrature;
        }
    } else {
        v = detail::phi_quadrature_order(model, theta, 0, tol, horizon);
    }
    detail::attach_bounds(model, theta, v);
    if (v.method != PhiMethod::nested_mc) detail::assert_within_bounds(v);
    return v;
}

// Closed forms: capped shapes, multiplicative exponential marks with uniform,
// exponential or Pareto(2) F, step F, constant shapes. Other pairs fall through
// to quadrature, visible in `method`.
inline PhiValue phi_closed_form(const ShotModel& model, double theta) {
    detail::check_theta(model, theta);
    if (auto e = detail::phi_exact(model, theta, 0)) {
        PhiValue v;
        v.value = *e;
        v.abs_error = 1e-14 * std::max(1.0, std::abs(*e));
        v.method = PhiMethod::closed_form;
        detail::attach_bounds(model, theta, v);
        return v;
    }
    return phi_quadrature(model, theta);
}

// phi^{(n)}(theta) = int_0^inf (E[H^n e^{theta H}] - E[Z^n e^{theta Z}]) ds.
inline PhiValue phi_derivative_value(const ShotModel& model, double theta, int n, double tol = 1e-9) {
    if (n < 0) throw DomainError("phi_derivative: negative order");
    if (n == 0) return phi_closed_form(model, theta);
    detail::check_theta(model, theta);
    if (auto e = detail::phi_exact(model, theta, n)) return {*e, 1e-14 * std::max(1.0, std::abs(*e)), -numeric::inf,
                                                             numeric::inf, PhiMethod::closed_form};
    if (model.is_cluster()) {
        if (!detail::cluster_deterministic(model)) return phi_nested_mc(model, theta, n);
        auto d = detail::cluster_phi_derivatives(model, theta, n, tol);
        return {d[static_cast<std::size_t>(n)], tol, -numeric::inf, numeric::inf, PhiMethod::quadrature};
    }
    return detail::phi_quadrature_order(model, theta, n, tol, std::nullopt);
}

inline double phi_derivative(const ShotModel& model, double theta, int n, double tol = 1e-9) {
    return phi_derivative_value(model, theta, n, tol).value;
}

// phi^{(n)}(theta) for n = 0..nmax.
inline std::vector<double> phi_derivatives(const ShotModel& model, double theta, int nmax, double tol = 1e-9) {
    std::vector<double> out;
    if (model.is_cluster() && detail::cluster_deterministic(model) && nmax > 0) {
        out = detail::cluster_phi_derivatives(model, theta, nmax, tol);
        out[0] = detail::cluster_phi(model, theta, tol);
        return out;
    }
    for (int n = 0; n <= nmax; ++n) out.push_back(phi_derivative(model, theta, n, tol));
    return out;
}

} // namespace shotnoise
