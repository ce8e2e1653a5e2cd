#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "shotnoise/dist/stable.hpp"
#include "shotnoise/phi/shape.hpp"
#include "shotnoise/rng.hpp"
#include "shotnoise/sim/cluster.hpp"

namespace shotnoise {

struct PathSample {
    double t = 0.0;
    double value = 0.0; // S_t
    std::uint64_t seed = 0;
    long n_ancestors = 0;
    bool truncated = false;
};

// Number of points of a cluster rooted at 0 born in [0, s]. Points born after
// s are not expanded: their descendants are born after s as well.
inline long cluster_count_until(const ClusterLaw& law, double s, Stream& rng, bool& truncated) {
    if (s < 0) return 0;
    std::vector<double> current{0.0}, next;
    long count = 1;
    int generation = 0;
    while (!current.empty()) {
        if (++generation > law.caps.max_generations) {
            truncated = true;
            break;
        }
        next.clear();
        for (double parent : current) {
            const int k = law.offspring.sample(rng);
            for (int j = 0; j < k; ++j) {
                const double b = parent + law.lag.sample(rng);
                if (b <= s) next.push_back(b);
            }
        }
        count += static_cast<long>(next.size());
        if (count > law.caps.max_points) {
            truncated = true;
            break;
        }
        current.swap(next);
    }
    return count;
}

// S_t = sum_n H(t - T_n, M_n): Poisson(lambda t) ancestors, uniform on (0, t].
inline PathSample simulate_path(const ShotModel& model, double t, Stream& rng) {
    if (!(t > 0)) throw DomainError("simulate_path: t must be positive");
    PathSample out;
    out.t = t;
    out.seed = rng.key();
    const double lambda = model.lambda();
    out.n_ancestors = std::poisson_distribution<long>(lambda * t)(rng);
    const ShotShape& shape = model.shape();
    double s = 0.0;
    if (model.is_cluster()) {
        const ClusterLaw& law = model.cluster_law();
        long total = 0;
        for (long i = 0; i < out.n_ancestors; ++i) {
            const double age = t * (1.0 - rng.uniform());
            total += cluster_count_until(law, age, rng, out.truncated);
        }
        s = static_cast<double>(total);
    } else {
        const MarkLaw& mark = model.mark();
        for (long i = 0; i < out.n_ancestors; ++i) {
            const double age = t * (1.0 - rng.uniform());
            s += shape.value(age, mark.sample(rng));
        }
    }
    out.value = s;
    return out;
}

// S_t / t^{1/alpha} for stable marks and H(t, m) = m F(t).
inline double simulate_stable_path(const StableParams& params, const DistributionFunction& F, double lambda, double t,
                                   Stream& rng) {
    if (!(t > 0)) throw DomainError("simulate_stable_path: t must be positive");
    if (!(lambda > 0)) throw DomainError("simulate_stable_path: lambda must be positive");
    params.validate();
    const long n = std::poisson_distribution<long>(lambda * t)(rng);
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
        const double age = t * (1.0 - rng.uniform());
        s += stable_sample(params, rng) * F.cdf(age);
    }
    return s / std::pow(t, 1.0 / params.alpha);
}

} // namespace shotnoise
