#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "shotnoise/asymptotics/combinatorics.hpp"
#include "shotnoise/phi/phi.hpp"
#include "shotnoise/tilt/solve.hpp"

namespace shotnoise {

// psi^{(n)}(theta) for psi = exp(lambda phi), n = 0..order; phi[n] = phi^{(n)}(theta).
inline std::vector<double> psi_derivatives(const std::vector<double>& phi, double lambda, int order) {
    if (order < 0) throw DomainError("psi_derivatives: order must be nonnegative");
    if (static_cast<int>(phi.size()) < order + 1)
        throw ArityError("psi_derivatives: need phi derivatives of order 0.." + std::to_string(order));
    const double psi = std::exp(lambda * phi[0]);
    std::vector<double> out{psi};
    if (order == 0) return out;
    std::vector<double> outer(order), inner(phi.begin() + 1, phi.begin() + 1 + order);
    for (int i = 1; i <= order; ++i) outer[i - 1] = std::pow(lambda, i) * psi;
    for (int n = 1; n <= order; ++n) out.push_back(faa_di_bruno(outer, inner, n));
    return out;
}

namespace detail {

struct WeightedPartition {
    std::vector<int> m;
    int parts = 0;      // M = sum_j m_j
    double denom = 1.0; // prod_j m_j! (j!)^{m_j}
};

inline const std::vector<WeightedPartition>& weighted_partitions(int n) {
    static const std::vector<std::vector<WeightedPartition>> table = [] {
        std::vector<std::vector<WeightedPartition>> t;
        for (int k = 0; k <= 24; ++k) {
            std::vector<WeightedPartition> row;
            for (const auto& tuple : partitions(k).tuples) {
                WeightedPartition w{tuple, 0, 1.0};
                for (std::size_t j = 0; j < tuple.size(); ++j) {
                    w.parts += tuple[j];
                    w.denom *= numeric::factorial(tuple[j]) *
                               std::pow(numeric::factorial(static_cast<int>(j) + 1), tuple[j]);
                }
                row.push_back(std::move(w));
            }
            t.push_back(std::move(row));
        }
        return t;
    }();
    if (n < 0 || n > 24) throw DomainError("partition table covers n in [0, 24]");
    return table[static_cast<std::size_t>(n)];
}

// (-1)^k / (lambda E2)^k sum_{S_l} (-1)^M prod r_j^{m_j} (2(k+M)-1)!! / prod m_j! (j!)^{m_j}.
inline double lattice_inner(int l, int k, const std::vector<double>& r, double lambda_e2) {
    double s = 0.0;
    for (const auto& w : weighted_partitions(l)) {
        double prod = 1.0;
        for (std::size_t j = 0; j < w.m.size(); ++j) prod *= std::pow(r[j + 1], w.m[j]);
        s += (w.parts % 2 ? -1.0 : 1.0) * prod * numeric::double_factorial_odd(k + w.parts) / w.denom;
    }
    return (k % 2 ? -1.0 : 1.0) * s / std::pow(lambda_e2, k);
}

// r_j = E[Z^{j+2} e^{theta Z}] / ((j+1)(j+2) E[Z^2 e^{theta Z}]), j = 1..jmax (index 0 unused).
inline std::vector<double> lattice_ratios(const TiltSolution& tilt, int jmax) {
    std::vector<double> r(static_cast<std::size_t>(jmax) + 1, 0.0);
    for (int j = 1; j <= jmax; ++j) r[j] = tilt.moment(j + 2) / ((j + 1.0) * (j + 2.0) * tilt.m2);
    return r;
}

inline void check_lattice_inputs(const TiltSolution& tilt, const std::vector<double>& psi, int k) {
    if (k < 1) throw DomainError("lattice coefficients: k must be positive");
    if (2 * k > 22) throw DomainError("lattice coefficients: k must be at most 11");
    if (static_cast<int>(psi.size()) < 2 * k + 1)
        throw ArityError("lattice coefficients: need psi derivatives of order 0.." + std::to_string(2 * k));
    (void)tilt.moment(2 * k + 2);
}

} // namespace detail

inline double lattice_a(const TiltSolution& tilt, const std::vector<double>& psi, double lambda, int k) {
    detail::check_lattice_inputs(tilt, psi, k);
    const auto r = detail::lattice_ratios(tilt, 2 * k);
    const double le2 = lambda * tilt.m2;
    double a = 0.0;
    for (int l = 0; l <= 2 * k; ++l)
        a += psi[2 * k - l] / numeric::factorial(2 * k - l) * detail::lattice_inner(l, k, r, le2);
    return a;
}

inline double lattice_b(const TiltSolution& tilt, const std::vector<double>& psi, double lambda, int k) {
    detail::check_lattice_inputs(tilt, psi, k);
    if (tilt.theta == 0.0) throw DomainError("lattice b_k: theta_x = 0 makes 1/(1 - e^{-theta}) singular");
    const auto r = detail::lattice_ratios(tilt, 2 * k);
    const double le2 = lambda * tilt.m2;
    const double g = -std::expm1(-tilt.theta);
    std::vector<double> inner(2 * k + 1);
    for (int l = 0; l <= 2 * k; ++l) inner[l] = detail::lattice_inner(l, k, r, le2);
    double total = 0.0;
    for (int n = 0; n <= 2 * k; ++n) {
        double tail = 0.0;
        for (int l = 0; l <= 2 * k - n; ++l) tail += psi[2 * k - n - l] / numeric::factorial(2 * k - n - l) * inner[l];
        double geo = 0.0;
        for (const auto& w : detail::weighted_partitions(n))
            geo += std::exp(-w.parts * tilt.theta) * numeric::factorial(w.parts) * std::pow(g, -w.parts - 1) / w.denom;
        total += (n % 2 ? -1.0 : 1.0) * geo * tail;
    }
    return g * total;
}

inline std::pair<double, double> lattice_coeffs(const TiltSolution& tilt, const std::vector<double>& psi,
                                                double lambda, int k) {
    return {lattice_a(tilt, psi, lambda, k), lattice_b(tilt, psi, lambda, k)};
}

enum class SharpKind { nonlattice_tail, lattice_point, lattice_tail };

inline std::string to_string(SharpKind k) {
    switch (k) {
    case SharpKind::nonlattice_tail: return "nonlattice-tail";
    case SharpKind::lattice_point: return "lattice-point";
    case SharpKind::lattice_tail: return "lattice-tail";
    }
    return "";
}

struct SharpDeviationEstimate {
    SharpKind kind = SharpKind::nonlattice_tail;
    double x = 0.0;
    double t = 0.0;
    int sigma = 1;
    double theta = 0.0;
    double rate = 0.0;
    double phi = 0.0;
    double leading = 0.0;
    std::vector<double> corrections; // a_k or b_k, k = 1..sigma-1
    double value = 0.0;
};

// Sharp deviation estimate of P(S_t >= tx) or P(S_t = tx).
inline SharpDeviationEstimate sharp_deviation(const ShotModel& model, SharpKind kind, double x, double t,
                                              int sigma = 1, double phi_tol = 1e-10) {
    const ZModel& z = model.z();
    if (!(t > 0)) throw DomainError("sharp deviations: t must be positive");
    if (sigma < 1) throw DomainError("sharp deviations: sigma must be at least 1");
    const bool lattice = kind != SharpKind::nonlattice_tail;
    if (lattice != model.lattice())
        throw DomainError(std::string("sharp deviations: ") + to_string(kind) + " requested for a " +
                          (model.lattice() ? "lattice" : "non-lattice") + " model");
    if (!lattice && sigma > 1) throw DomainError("sharp deviations: no correction terms in the non-lattice case");
    const double lambda = z.lambda();
    const double mean = lambda * z.mean();
    const double upper = admissible_upper(z);
    const double lo = kind == SharpKind::lattice_point ? 0.0 : mean;
    if (!(x > lo) || !(x < upper))
        throw DomainError("sharp deviations: x = " + std::to_string(x) + " outside (" + std::to_string(lo) + ", " +
                          std::to_string(upper) + ")");
    if (lattice) {
        const double tx = t * x;
        if (std::abs(tx - std::round(tx)) > 1e-9 * std::max(1.0, tx))
            throw DomainError("sharp deviations: lattice case needs t x integer, got " + std::to_string(tx));
    }
    const int order = 2 * (sigma - 1);
    TiltSolution tilt = z.is_cluster() ? cluster_tilt_closed_form(z, x, order + 2) : solve_tilt(z, x, order + 2);

    SharpDeviationEstimate est;
    est.kind = kind;
    est.x = x;
    est.t = t;
    est.sigma = sigma;
    est.theta = tilt.theta;
    est.rate = tilt.rate;
    std::vector<double> phis =
        order == 0 ? std::vector<double>{phi_closed_form(model, tilt.theta).value}
                   : phi_derivatives(model, tilt.theta, order, phi_tol);
    est.phi = phis[0];
    const auto psi = psi_derivatives(phis, lambda, order);

    double base = std::exp(-t * tilt.rate) / std::sqrt(2.0 * lambda * numeric::pi * t * tilt.m2);
    if (kind == SharpKind::nonlattice_tail) base /= tilt.theta;
    if (kind == SharpKind::lattice_tail) base /= -std::expm1(-tilt.theta);
    est.leading = base * psi[0];
    double bracket = psi[0];
    for (int k = 1; k < sigma; ++k) {
        double c = kind == SharpKind::lattice_point ? lattice_a(tilt, psi, lambda, k) : lattice_b(tilt, psi, lambda, k);
        est.corrections.push_back(c);
        bracket += c / std::pow(t, k);
    }
    est.value = sigma == 1 ? est.leading : base * bracket;
    if (!std::isfinite(est.value)) throw NumericError("sharp deviations: non-finite estimate", est.value);
    return est;
}

// P(S_t >= tx): non-lattice or lattice tail form according to the model.
inline SharpDeviationEstimate sharp_tail(const ShotModel& model, double x, double t, int sigma = 1) {
    return sharp_deviation(model, model.lattice() ? SharpKind::lattice_tail : SharpKind::nonlattice_tail, x, t,
                           sigma);
}

// P(S_t = tx) for lattice models.
inline SharpDeviationEstimate sharp_point(const ShotModel& model, double x, double t, int sigma = 1) {
    return sharp_deviation(model, SharpKind::lattice_point, x, t, sigma);
}

// O(1)-accurate asymptotes of E[S_t] and Var[S_t].
inline std::pair<double, double> mean_variance_asymptote(const ShotModel& model, double t) {
    const ZModel& z = model.z();
    return {z.lambda() * z.moment(1) * t, z.lambda() * z.moment(2) * t};
}

} // namespace shotnoise
