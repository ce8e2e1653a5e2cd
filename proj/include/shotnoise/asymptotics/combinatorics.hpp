#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shotnoise/errors.hpp"
#include "shotnoise/numeric.hpp"

namespace shotnoise {

// All tuples (m_1, ..., m_n) of nonnegative integers with sum_j j m_j = n.
struct PartitionSet {
    int n = 0;
    std::vector<std::vector<int>> tuples;
};

inline PartitionSet partitions(int n) {
    if (n < 0 || n > 24) throw DomainError("partitions: n must lie in [0, 24]");
    PartitionSet out{n, {}};
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int j, int rem) {
        if (j == 0) {
            if (rem == 0) out.tuples.push_back(cur);
            return;
        }
        for (int m = rem / j; m >= 0; --m) {
            cur[j - 1] = m;
            rec(j - 1, rem - j * m);
        }
        cur[j - 1] = 0;
    };
    rec(n, n);
    return out;
}

// Visits every composition (m_1, ..., m_i) of k into i positive parts.
template <class Visit>
void for_each_composition(int k, int i, Visit&& visit) {
    std::vector<int> parts(static_cast<std::size_t>(i), 0);
    std::function<void(int, int)> rec = [&](int pos, int rem) {
        if (pos == i - 1) {
            parts[pos] = rem;
            visit(parts);
            return;
        }
        for (int m = 1; m <= rem - (i - 1 - pos); ++m) {
            parts[pos] = m;
            rec(pos + 1, rem - m);
        }
    };
    if (i >= 1 && k >= i) rec(0, k);
}

// (g o h)^{(j)}(x) = j! sum_i g^{(i)}(h(x))/i! sum_{m_1+..+m_i=j} prod h^{(m_l)}(x)/m_l!.
// outer[i-1] = g^{(i)}(h(x)), inner[m-1] = h^{(m)}(x).
inline double faa_di_bruno(const std::vector<double>& outer, const std::vector<double>& inner, int j) {
    if (j < 1) throw ArityError("faa_di_bruno: j must be positive");
    if (static_cast<int>(outer.size()) < j || static_cast<int>(inner.size()) < j)
        throw ArityError("faa_di_bruno: need " + std::to_string(j) + " outer and inner derivatives, got " +
                         std::to_string(outer.size()) + " and " + std::to_string(inner.size()));
    double total = 0.0;
    for (int i = 1; i <= j; ++i) {
        double s = 0.0;
        for_each_composition(j, i, [&](const std::vector<int>& m) {
            double prod = 1.0;
            for (int ml : m) prod *= inner[ml - 1] / numeric::factorial(ml);
            s += prod;
        });
        total += outer[i - 1] / numeric::factorial(i) * s;
    }
    return numeric::factorial(j) * total;
}

} // namespace shotnoise
