#pragma once

#include <cmath>
#include <vector>

#include "shotnoise/asymptotics/combinatorics.hpp"
#include "shotnoise/dist/critical.hpp"
#include "shotnoise/dist/offspring.hpp"
#include "shotnoise/sim/cluster_law.hpp"

namespace shotnoise {

// E[e^{theta Z}] for the total progeny: minimal fixed point of rho = e^theta G(rho).
// theta = b_c is accepted (boundary value); theta > b_c is a domain error.
inline double cluster_mgf(const OffspringLaw& offspring, double theta, const CriticalExponents& crit) {
    if (theta > crit.b_c)
        throw DomainError("cluster_mgf: theta = " + std::to_string(theta) + " exceeds b_c = " +
                          std::to_string(crit.b_c));
    auto rho = minimal_fixed_point(offspring, theta);
    if (!rho) throw DomainError("cluster_mgf: no fixed point of rho = e^theta G(rho) at theta = " +
                                std::to_string(theta));
    return *rho;
}

inline double cluster_mgf(const ClusterLaw& law, double theta) {
    return cluster_mgf(law.offspring, theta, law.critical());
}

// E[Z^n e^{theta Z}] for n = 0..nmax, by differentiating rho(theta) = e^theta G(rho(theta)).
// The highest-order term of d^n/dtheta^n G(rho) is G'(rho) rho^{(n)}; it is moved
// to the left-hand side, leaving rho^{(n)} (1 - e^theta G'(rho)) = e^theta (...).
inline std::vector<double> cluster_tilted_moments(const OffspringLaw& offspring, double theta, int nmax,
                                                  const CriticalExponents& crit) {
    std::vector<double> m(static_cast<std::size_t>(nmax) + 1, 0.0);
    const double rho = cluster_mgf(offspring, theta, crit);
    m[0] = rho;
    if (nmax == 0) return m;
    const double et = std::exp(theta);
    std::vector<double> outer(static_cast<std::size_t>(nmax));
    for (int i = 1; i <= nmax; ++i) outer[i - 1] = offspring.pgf(rho, i);
    const double denom = 1.0 - et * outer[0];
    for (int n = 1; n <= nmax; ++n) {
        if (!(denom > 0)) {
            for (int k = n; k <= nmax; ++k) m[k] = numeric::inf;
            break;
        }
        std::vector<double> inner(m.begin() + 1, m.begin() + n + 1);
        double acc = offspring.pgf(rho); // k = 0 term, C(n,0) G(rho)
        for (int k = 1; k < n; ++k) acc += numeric::binomial(n, k) * faa_di_bruno(outer, inner, k);
        inner[n - 1] = 0.0;
        acc += faa_di_bruno(outer, inner, n);
        m[n] = et * acc / denom;
    }
    return m;
}

// E[Z^n] by the recursive composition sum over factorial moments of P.
inline double cluster_moments(const OffspringLaw& offspring, int n) {
    if (n < 1 || n > 12) throw DomainError("cluster_moments: n must lie in [1, 12]");
    std::vector<double> fm(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 1; i <= n; ++i) fm[i] = offspring.factorial_moment(i);
    std::vector<double> ez(static_cast<std::size_t>(n) + 1, 0.0);
    ez[0] = 1.0;
    for (int r = 1; r <= n; ++r) {
        // E[Z^r] appears on the right only through k = r, i = 1 with weight E[P].
        double rhs = 1.0;
        for (int k = 1; k <= r; ++k) {
            double sum_i = 0.0;
            for (int i = 1; i <= k; ++i) {
                double comp = 0.0;
                for_each_composition(k, i, [&](const std::vector<int>& ms) {
                    double prod = 1.0;
                    for (int mj : ms) prod *= (mj == r ? 0.0 : ez[mj]) / numeric::factorial(mj);
                    comp += prod;
                });
                sum_i += fm[i] / numeric::factorial(i) * comp;
            }
            rhs += numeric::factorial(k) * numeric::binomial(r, k) * sum_i;
        }
        ez[r] = rhs / (1.0 - fm[1]);
    }
    return ez[n];
}

inline double cluster_moments(const ClusterLaw& law, int n) { return cluster_moments(law.offspring, n); }

} // namespace shotnoise
