#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "shotnoise/asymptotics/combinatorics.hpp"
#include "shotnoise/phi/shape.hpp"
#include "shotnoise/tilt/solve.hpp"

namespace shotnoise {

// y(t) = c t^gamma.
struct YSchedule {
    double c = 1.0;
    double gamma = 0.0;
    double operator()(double t) const { return c * std::pow(t, gamma); }
};

enum class FluctuationRegime { clt, extended, expansion };

inline std::string to_string(FluctuationRegime r) {
    switch (r) {
    case FluctuationRegime::clt: return "clt";
    case FluctuationRegime::extended: return "extended";
    case FluctuationRegime::expansion: return "expansion";
    }
    return "";
}

struct FluctuationEstimate {
    YSchedule schedule;
    FluctuationRegime regime = FluctuationRegime::clt;
    int order = 0; // m for the expansion regime
    double t = 0.0;
    double y = 0.0;
    double v = 0.0; // extended regime: lambda E[Z] + y sqrt(lambda E[Z^2] / t)
    double value = 0.0;
};

// theta^{(j)} at x = lambda E[Z] for j = 1..count (index 0 holds theta = 0).
inline std::vector<double> theta_derivatives(const ZModel& z, int count) {
    if (count < 1) throw DomainError("theta_derivatives: count must be positive");
    const double lambda = z.lambda();
    const double e2 = z.moment(2);
    // g(x) = 1/(lambda h(x)), h(x) = E[Z^2 e^{xZ}], h^{(k)}(0) = E[Z^{k+2}].
    std::vector<double> g(static_cast<std::size_t>(count), 0.0);
    if (count > 1) {
        std::vector<double> outer, inner;
        for (int i = 1; i < count; ++i) {
            outer.push_back((i % 2 ? -1.0 : 1.0) * numeric::factorial(i) / (lambda * std::pow(e2, i + 1)));
            inner.push_back(z.moment(i + 2));
        }
        for (int i = 1; i < count; ++i) g[i] = faa_di_bruno(outer, inner, i);
    }
    std::vector<double> th{0.0, 1.0 / (lambda * e2)};
    for (int j = 1; j + 1 <= count; ++j) {
        std::vector<double> outer(g.begin() + 1, g.begin() + 1 + j), inner(th.begin() + 1, th.begin() + 1 + j);
        th.push_back(faa_di_bruno(outer, inner, j));
    }
    return th;
}

inline void check_schedule(const YSchedule& s, FluctuationRegime regime, int m, double t) {
    if (!(s.c > 0)) throw DomainError("fluctuation: schedule constant c must be positive");
    switch (regime) {
    case FluctuationRegime::clt:
        if (!(s.gamma < 1.0 / 6.0)) throw DomainError("fluctuation: clt regime needs y(t) = o(t^{1/6}), gamma < 1/6");
        if (s.gamma < 0) throw DomainError("fluctuation: gamma must be nonnegative");
        break;
    case FluctuationRegime::extended:
        if (!(s.gamma > 0 && s.gamma < 0.5))
            throw DomainError("fluctuation: extended regime needs y -> inf and y(t) = o(t^{1/2}), 0 < gamma < 1/2");
        break;
    case FluctuationRegime::expansion:
        if (m < 3) throw DomainError("fluctuation: expansion regime needs m >= 3");
        if (!(s.gamma > 0 && s.gamma < 0.5 - 1.0 / m))
            throw DomainError("fluctuation: expansion regime needs 0 < gamma < 1/2 - 1/m = " +
                              std::to_string(0.5 - 1.0 / m));
        break;
    }
    if (s(t) > std::sqrt(t)) throw DomainError("fluctuation: y(t) exceeds t^{1/2} at t = " + std::to_string(t));
}

// P((S_t - lambda E[Z] t)/sqrt(lambda E[Z^2] t) > y(t)).
inline FluctuationEstimate fluctuation(const ShotModel& model, const YSchedule& schedule, FluctuationRegime regime,
                                       double t, int m = 3) {
    if (!(t > 0)) throw DomainError("fluctuation: t must be positive");
    check_schedule(schedule, regime, m, t);
    const ZModel& z = model.z();
    const double lambda = z.lambda();
    const double e2 = z.moment(2);
    FluctuationEstimate out;
    out.schedule = schedule;
    out.regime = regime;
    out.order = regime == FluctuationRegime::expansion ? m : 0;
    out.t = t;
    out.y = schedule(t);
    const double y = out.y;
    switch (regime) {
    case FluctuationRegime::clt: out.value = numeric::gaussian_tail(y); break;
    case FluctuationRegime::extended: {
        out.v = lambda * z.mean() + y * std::sqrt(lambda * e2 / t);
        auto tilt = solve_tilt(z, out.v, 2);
        out.value = std::exp(-t * tilt.rate) / (y * std::sqrt(2 * numeric::pi));
        break;
    }
    case FluctuationRegime::expansion: {
        const auto th = theta_derivatives(z, m - 1);
        double s = 0.0;
        for (int j = 1; j <= m - 2; ++j)
            s += std::pow(lambda * e2, (j + 2) / 2.0) * th[j + 1] / numeric::factorial(j + 2) *
                 std::pow(y / std::sqrt(t), j);
        out.value = std::exp(-0.5 * y * y * (1 + 2 * s)) / (y * std::sqrt(2 * numeric::pi));
        break;
    }
    }
    if (!std::isfinite(out.value)) throw NumericError("fluctuation: non-finite estimate", out.value);
    return out;
}

} // namespace shotnoise
