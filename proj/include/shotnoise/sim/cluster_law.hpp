#pragma once

#include "shotnoise/dist/critical.hpp"
#include "shotnoise/dist/mark.hpp"
#include "shotnoise/dist/offspring.hpp"

namespace shotnoise {

struct ClusterCaps {
    int max_generations = 200;
    long max_points = 1000000;
};

// Galton-Watson cluster: offspring law of P_{1,1} and lag law of B_{1,1,1}.
struct ClusterLaw {
    OffspringLaw offspring;
    MarkLaw lag;
    ClusterCaps caps{};

    ClusterLaw(OffspringLaw o, MarkLaw l, ClusterCaps c = {}) : offspring(std::move(o)), lag(std::move(l)), caps(c) {
        if (offspring.mean() >= 1.0) throw DomainError("cluster law: offspring must be subcritical");
        if (lag.is_discrete()) {
            for (double v : lag.values())
                if (v < 0) throw DomainError("cluster law: lags must be nonnegative");
        }
    }

    CriticalExponents critical() const { return critical_exponents(offspring); }
};

} // namespace shotnoise
