#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "shotnoise/errors.hpp"

namespace shotnoise {

namespace detail {

inline void check_sample(const std::vector<double>& sorted) {
    if (sorted.empty()) throw DomainError("kolmogorov_distance: empty sample");
    if (!std::is_sorted(sorted.begin(), sorted.end()))
        throw DomainError("kolmogorov_distance: sample must be sorted");
}

} // namespace detail

namespace detail {

// Distinct sample values v_k with lo_k = #{x < v_k} and hi_k = #{x <= v_k}.
struct TieGroups {
    std::vector<double> values;
    std::vector<std::size_t> lo, hi;
};

inline TieGroups tie_groups(const std::vector<double>& sorted) {
    TieGroups g;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        g.values.push_back(sorted[i]);
        g.lo.push_back(i);
        g.hi.push_back(j);
        i = j;
    }
    return g;
}

inline double left_point(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }

} // namespace detail

// sup_x |F_n(x) - F(x)|, attained at a jump of F_n: at each distinct sample
// value v, max(|#{x <= v}/n - F(v)|, |#{x < v}/n - F(v-)|). For continuous F
// and distinct points this is max_i max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|).
// F(v-) is evaluated one ulp below v, which also handles atoms of F.
template <class Cdf>
double kolmogorov_distance(const std::vector<double>& sorted, Cdf&& cdf) {
    detail::check_sample(sorted);
    const auto g = detail::tie_groups(sorted);
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t k = 0; k < g.values.size(); ++k) {
        const double F = cdf(g.values[k]), Fl = cdf(detail::left_point(g.values[k]));
        d = std::max({d, std::abs(g.hi[k] / n - F), std::abs(g.lo[k] / n - Fl)});
    }
    return d;
}

// Same value for a nondecreasing cdf, evaluating it only where needed: between
// evaluated values v_a < v_b both F and F- lie in [F(v_a), F(v_b-)], and blocks
// whose bound cannot beat the running maximum are skipped.
template <class Cdf>
double kolmogorov_distance_monotone(const std::vector<double>& sorted, Cdf&& cdf, std::size_t stride = 64) {
    detail::check_sample(sorted);
    const auto g = detail::tie_groups(sorted);
    const std::size_t m = g.values.size();
    const double n = static_cast<double>(sorted.size());
    std::vector<double> F(m, -1.0), Fl(m, -1.0);
    double d = 0.0;
    auto eval = [&](std::size_t k) {
        if (F[k] < 0) {
            F[k] = std::clamp(cdf(g.values[k]), 0.0, 1.0);
            Fl[k] = std::clamp(cdf(detail::left_point(g.values[k])), 0.0, 1.0);
            d = std::max({d, std::abs(g.hi[k] / n - F[k]), std::abs(g.lo[k] / n - Fl[k])});
        }
    };
    stride = std::max<std::size_t>(stride, 1);
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t k = 0; k < m; k += stride) eval(k);
    eval(m - 1);
    for (std::size_t k = 0; k + 1 < m; k += stride) stack.emplace_back(k, std::min(k + stride, m - 1));
    while (!stack.empty()) {
        auto [a, b] = stack.back();
        stack.pop_back();
        if (b <= a + 1) continue;
        // For a < k < b: hi_k/n - F_k <= lo_b/n - F_a and Fl_k - lo_k/n <= Fl_b - hi_a/n.
        const double bound = std::max(g.lo[b] / n - F[a], Fl[b] - g.hi[a] / n);
        if (bound <= d) continue;
        const std::size_t mid = a + (b - a) / 2;
        eval(mid);
        stack.emplace_back(a, mid);
        stack.emplace_back(mid, b);
    }
    return d;
}

// Expected Kolmogorov statistic under the null, ~0.8687/sqrt(n), and its standard deviation ~0.2603/sqrt(n).
inline double ks_noise_floor(long n) { return 0.8687 / std::sqrt(static_cast<double>(n)); }
inline double ks_noise_sd(long n) { return 0.2603 / std::sqrt(static_cast<double>(n)); }

// Asymptotic critical value of sqrt(n) D at level 0.01.
inline constexpr double ks_critical_01 = 1.6276;

} // namespace shotnoise
