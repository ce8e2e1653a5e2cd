#pragma once

#include <cmath>
#include <map>
#include <string>

#include "shotnoise/tilt/model.hpp"

namespace shotnoise {

struct TiltSolution {
    double x = 0.0;
    double theta = 0.0;
    double mgf = 1.0; // E[e^{theta Z}]
    double m1 = 0.0;  // E[Z e^{theta Z}]
    double m2 = 0.0;  // E[Z^2 e^{theta Z}]
    std::map<int, double> higher; // n -> E[Z^n e^{theta Z}], n >= 3
    double rate = 0.0;            // x theta - lambda (mgf - 1)

    double moment(int n) const {
        if (n == 0) return mgf;
        if (n == 1) return m1;
        if (n == 2) return m2;
        auto it = higher.find(n);
        if (it == higher.end()) throw DomainError("tilted moment of order " + std::to_string(n) + " not populated");
        return it->second;
    }
};

// Fills mgf, m1, m2 and E[Z^n e^{theta Z}] for 3 <= n <= nmax.
inline void populate_moments(const ZModel& model, TiltSolution& s, int nmax) {
    auto ms = model.tilted_moments(std::max(nmax, 2), s.theta);
    s.mgf = ms[0];
    s.m1 = ms[1];
    s.m2 = ms[2];
    for (int n = 3; n <= nmax; ++n) s.higher[n] = ms[n];
    s.rate = s.x * s.theta - model.lambda() * (s.mgf - 1.0);
}

// Upper end of the admissible slope interval, lambda E[Z e^{aZ}].
inline double admissible_upper(const ZModel& model) {
    const double a = model.edge();
    if (!std::isfinite(a)) return numeric::inf;
    double m1 = model.tilted_moment(1, a);
    return std::isfinite(m1) ? model.lambda() * m1 : numeric::inf;
}

// theta_x with lambda E[Z e^{theta Z}] = x.
inline TiltSolution solve_tilt(const ZModel& model, double x, int nmax = 8) {
    const double lambda = model.lambda();
    const double upper = admissible_upper(model);
    if (!(x > 0) || !(x < upper))
        throw DomainError("solve_tilt: x = " + std::to_string(x) + " outside the admissible interval (0, " +
                          std::to_string(upper) + ")");
    TiltSolution s;
    s.x = x;
    const double mean = lambda * model.mean();
    auto rdr = [&](double th) {
        auto ms = model.tilted_moments(2, th);
        return std::pair{lambda * ms[1] - x, lambda * ms[2]};
    };
    const double tol = 1e-12 * std::max(1.0, x);
    if (std::abs(x - mean) <= 1e-15 * mean) {
        s.theta = 0.0;
    } else if (x < mean) {
        double lo = -1.0;
        while (rdr(lo).first >= 0) lo *= 2;
        s.theta = numeric::newton_bracketed(rdr, lo, 0.0, 0.5 * lo, tol);
    } else {
        const double a = model.edge();
        double hi = 1.0;
        if (std::isfinite(a)) {
            hi = a;
        } else {
            while (rdr(hi).first <= 0) hi *= 2;
        }
        s.theta = numeric::newton_bracketed(rdr, 0.0, hi, std::min(0.5 * hi, 0.5), tol);
    }
    populate_moments(model, s, nmax);
    return s;
}

// Closed-form roots rho_x of lambda rho / (1 - rho G'(rho)/G(rho)) = x for
// binomial, geometric and Poisson offspring; generic laws use solve_tilt.
inline TiltSolution cluster_tilt_closed_form(const ZModel& model, double x, int nmax = 8) {
    const auto& law = model.cluster_law().offspring;
    const double lambda = model.lambda();
    const double upper = admissible_upper(model);
    if (!(x > 0) || !(x < upper))
        throw DomainError("cluster_tilt_closed_form: x = " + std::to_string(x) +
                          " outside the admissible interval (0, " + std::to_string(upper) + ")");
    double rho = 0.0;
    switch (law.kind()) {
    case OffspringLaw::Kind::poisson: rho = x / (lambda + law.mu() * x); break;
    case OffspringLaw::Kind::binomial: {
        const double p = law.p();
        const double m = law.m();
        const double b = lambda * (1 - p) + (m - 1) * p * x;
        rho = (-b + std::sqrt(b * b + 4 * x * p * (1 - p) * lambda)) / (2 * lambda * p);
        break;
    }
    case OffspringLaw::Kind::geometric: {
        const double q = 1 - law.p();
        const double b = 2 * q * x + lambda;
        rho = (b - std::sqrt(b * b - 4 * lambda * x * q)) / (2 * lambda * q);
        break;
    }
    case OffspringLaw::Kind::table: return solve_tilt(model, x, nmax);
    }
    TiltSolution s;
    s.x = x;
    s.theta = std::log(rho / law.pgf(rho));
    // The closed-form root must be the minimal fixed point at theta_x.
    double check = cluster_mgf(law, s.theta, model.critical());
    if (std::abs(check - rho) > 1e-8 * rho)
        throw NumericError("closed-form root disagrees with the minimal fixed point", check - rho);
    populate_moments(model, s, nmax);
    s.mgf = rho;
    s.rate = s.x * s.theta - lambda * (s.mgf - 1.0);
    return s;
}

// Positive root w of lambda (E[e^{wZ}] - 1) = c w.
inline double lundberg_root(const ZModel& model, double c) {
    const double lambda = model.lambda();
    const double mean = lambda * model.mean();
    if (!(c > mean))
        throw DomainError("lundberg_root: net-profit condition c > lambda E[Z] fails (c = " + std::to_string(c) +
                          ", lambda E[Z] = " + std::to_string(mean) + ")");
    auto k = [&](double w) { return lambda * (model.mgf(w) - 1.0) - c * w; };
    // k is convex with k(0) = 0 and minimum at theta_c.
    const double w_min = solve_tilt(model, c, 2).theta;
    const double a = model.edge();
    double hi = 2 * w_min;
    if (std::isfinite(a)) {
        hi = w_min;
        for (int j = 1; j <= 80; ++j) {
            double cand = a - (a - w_min) * std::pow(0.5, j);
            double v = k(cand);
            if (!std::isfinite(v) || v > 0) {
                hi = cand;
                break;
            }
        }
        if (hi == w_min) {
            double at_edge = k(a);
            if (std::isfinite(at_edge) && at_edge <= 0)
                throw DomainError("lundberg_root: lambda(E[e^{wZ}]-1) < c w on the whole mgf domain (0, " +
                                  std::to_string(a) + ")");
            hi = a;
        }
    } else {
        while (k(hi) <= 0) hi *= 2;
    }
    auto rdr = [&](double w) { return std::pair{k(w), lambda * model.tilted_moment(1, w) - c}; };
    double w = numeric::newton_bracketed(rdr, w_min, hi, hi, 1e-14 * std::max(1.0, c));
    if (!(lambda * model.tilted_moment(1, w) - c > 0))
        throw NumericError("lundberg_root: lambda E[Z e^{wZ}] - c is not positive at the root", w);
    return w;
}

} // namespace shotnoise
