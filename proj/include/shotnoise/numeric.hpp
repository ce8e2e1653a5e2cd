#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "shotnoise/errors.hpp"

namespace shotnoise::numeric {

inline constexpr double inf = std::numeric_limits<double>::infinity();
inline constexpr double pi = std::numbers::pi;

struct Integral {
    double value = 0.0;
    double error = 0.0;
};

// Globally adaptive Gauss-Kronrod (7/15) with an absolute tolerance.
// Throws NumericError if the panel budget runs out before `abs_tol` is met.
template <class F>
Integral integrate(F&& f, double a, double b, double abs_tol, int max_panels = 2000) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    if (a == b) return {};
    struct Panel {
        double a, b, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    auto eval = [&](double lo, double hi) {
        double err = 0.0;
        double v = GK::integrate(f, lo, hi, 0, 0.0, &err);
        return Panel{lo, hi, v, err};
    };
    std::priority_queue<Panel> heap;
    Panel first = eval(a, b);
    heap.push(first);
    double total = first.value;
    double total_err = first.error;
    int panels = 1;
    while (total_err > abs_tol && panels < max_panels) {
        Panel worst = heap.top();
        heap.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        Panel l = eval(worst.a, mid);
        Panel r = eval(mid, worst.b);
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++panels;
    }
    // Re-sum to avoid drift from the running updates.
    double s = 0.0, e = 0.0;
    while (!heap.empty()) {
        s += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    if (!std::isfinite(s)) throw NumericError("quadrature produced a non-finite value", e);
    if (e > abs_tol) throw NumericError("quadrature did not reach tolerance", e);
    return {s, e};
}

// Integral over consecutive breakpoints; the kinks of piecewise integrands go there.
template <class F>
Integral integrate_pieces(F&& f, const std::vector<double>& cuts, double abs_tol) {
    Integral out;
    if (cuts.size() < 2) return out;
    const double share = abs_tol / static_cast<double>(cuts.size() - 1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        Integral p = integrate(f, cuts[i], cuts[i + 1], share);
        out.value += p.value;
        out.error += p.error;
    }
    return out;
}

// tanh-sinh for integrands with endpoint singularities.
template <class F>
Integral integrate_endpoint_singular(F&& f, double a, double b, double rel_tol) {
    static thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
    double err = 0.0, l1 = 0.0;
    double v = ts.integrate(f, a, b, rel_tol, &err, &l1);
    if (!std::isfinite(v)) throw NumericError("tanh-sinh produced a non-finite value", err);
    return {v, err * std::max(1.0, l1)};
}

// Solves r(x) = 0 for r increasing in x on [lo, hi], with r(lo) < 0 < r(hi).
// `rdr(x)` returns {r(x), r'(x)}. Newton steps that leave the bracket are
// replaced by bisection.
template <class RDR>
double newton_bracketed(RDR&& rdr, double lo, double hi, double x0, double resid_tol,
                        int max_iter = 200) {
    double x = std::clamp(x0, lo, hi);
    double last = inf;
    for (int it = 0; it < max_iter; ++it) {
        auto [r, dr] = rdr(x);
        if (!std::isfinite(r)) {
            hi = x;
            x = 0.5 * (lo + hi);
            continue;
        }
        last = r;
        if (std::abs(r) <= resid_tol) return x;
        if (r < 0) lo = x; else hi = x;
        double next = (dr > 0 && std::isfinite(dr)) ? x - r / dr : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
            return next;
        x = next;
    }
    throw NumericError("bracketed Newton did not converge", last);
}

// Bisection for a predicate that is true on (lo, root) and false on (root, hi).
template <class P>
double bisect_boundary(P&& inside, double lo, double hi, double tol) {
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (inside(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

inline double factorial(int n) {
    static const auto table = [] {
        std::vector<double> t(171, 1.0);
        for (int i = 1; i < 171; ++i) t[i] = t[i - 1] * i;
        return t;
    }();
    if (n < 0) return 0.0;
    if (n > 170) return inf;
    return table[n];
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

// log((2n-1)!!), with (-1)!! = 1.
inline double log_double_factorial_odd(int n) {
    if (n <= 0) return 0.0;
    return std::lgamma(2.0 * n + 1.0) - n * std::log(2.0) - std::lgamma(n + 1.0);
}

// (2n-1)!!, exact products up to n=10 and log-space beyond.
inline double double_factorial_odd(int n) {
    if (n <= 10) {
        double r = 1.0;
        for (int k = 1; k <= n; ++k) r *= 2.0 * k - 1.0;
        return r;
    }
    return std::exp(log_double_factorial_odd(n));
}

inline double gaussian_tail(double y) { return 0.5 * std::erfc(y / std::numbers::sqrt2); }

// Derivatives f^(k)(x0), k = 0..kmax, from a Chebyshev interpolant on
// [x0 - delta, x0 + delta] through `points` nodes.
template <class F>
std::vector<double> chebyshev_derivatives(F&& f, double x0, double delta, int kmax, int points = 25) {
    const int n = points - 1;
    std::vector<double> vals(points);
    for (int k = 0; k <= n; ++k) vals[k] = f(x0 + delta * std::cos(pi * k / n));
    std::vector<double> c(points, 0.0);
    for (int j = 0; j <= n; ++j) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
            double w = (k == 0 || k == n) ? 0.5 : 1.0;
            s += w * vals[k] * std::cos(pi * j * k / n);
        }
        c[j] = 2.0 * s / n;
    }
    c[0] *= 0.5;
    c[n] *= 0.5;
    std::vector<double> out;
    std::vector<double> cur = c;
    double scale = 1.0;
    for (int d = 0; d <= kmax; ++d) {
        // Evaluate sum cur[j] T_j(0): T_j(0) = cos(j pi / 2).
        double v = 0.0;
        for (std::size_t j = 0; j < cur.size(); j += 2) v += cur[j] * ((j / 2) % 2 == 0 ? 1.0 : -1.0);
        out.push_back(v * scale);
        // Derivative coefficients of a Chebyshev series.
        const int m = static_cast<int>(cur.size()) - 1;
        std::vector<double> der(std::max(m, 1), 0.0);
        if (m >= 1) {
            std::vector<double> b(m + 2, 0.0);
            for (int j = m - 1; j >= 0; --j) b[j] = b[j + 2] + 2.0 * (j + 1) * cur[j + 1];
            for (int j = 0; j < m; ++j) der[j] = b[j];
            der[0] *= 0.5;
        }
        cur = der;
        scale /= delta;
    }
    return out;
}

// Weighted least-squares slope and intercept of y on x.
inline std::pair<double, double> weighted_fit(const std::vector<double>& x, const std::vector<double>& y,
                                              const std::vector<double>& w) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    double den = sw * sxx - sx * sx;
    if (!(std::abs(den) > 0)) throw NumericError("degenerate regression", den);
    double slope = (sw * sxy - sx * sy) / den;
    return {slope, (sy - slope * sx) / sw};
}

} // namespace shotnoise::numeric
