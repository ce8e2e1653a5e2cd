#pragma once

#include <algorithm>
#include <vector>

#include "shotnoise/rng.hpp"
#include "shotnoise/sim/cluster_law.hpp"

namespace shotnoise {

struct ClusterRealization {
    std::vector<std::vector<double>> generations; // birth times, sorted within each generation
    long total_points = 0;
    double length = 0.0;
    bool truncated = false;

    // All birth times in increasing order.
    std::vector<double> birth_times() const {
        std::vector<double> all;
        all.reserve(static_cast<std::size_t>(total_points));
        for (const auto& g : generations) all.insert(all.end(), g.begin(), g.end());
        std::sort(all.begin(), all.end());
        return all;
    }
};

// Breadth-first Galton-Watson cluster rooted at time 0: every point of
// generation g has an independent offspring count, and each child is born
// one lag draw after its parent.
template <class Rng>
ClusterRealization simulate_cluster(const ClusterLaw& law, Rng& rng) {
    ClusterRealization c;
    c.generations.push_back({0.0});
    c.total_points = 1;
    while (!c.generations.back().empty()) {
        if (static_cast<int>(c.generations.size()) > law.caps.max_generations) {
            c.truncated = true;
            break;
        }
        std::vector<double> next;
        for (double parent : c.generations.back()) {
            const int k = law.offspring.sample(rng);
            for (int j = 0; j < k; ++j) next.push_back(parent + law.lag.sample(rng));
        }
        c.total_points += static_cast<long>(next.size());
        std::sort(next.begin(), next.end());
        if (!next.empty()) c.length = std::max(c.length, next.back());
        const bool over = c.total_points > law.caps.max_points;
        c.generations.push_back(std::move(next));
        if (over) {
            c.truncated = true;
            break;
        }
    }
    if (c.generations.back().empty()) c.generations.pop_back();
    return c;
}

// Number of points of the cluster born in [0, s].
inline long count_by(const std::vector<double>& sorted_births, double s) {
    return static_cast<long>(std::upper_bound(sorted_births.begin(), sorted_births.end(), s) - sorted_births.begin());
}

} // namespace shotnoise
