#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "shotnoise/phi/phi.hpp"
#include "shotnoise/tilt/solve.hpp"

using namespace shotnoise;

namespace {

ShotModel teletraffic(double lambda = 1.0, double a = 1.0) { return ShotModel::capped(lambda, MarkLaw::exponential(a)); }

ShotModel uniform_insurance(double lambda = 1.0, double a = 1.0) {
    return ShotModel::multiplicative(lambda, MarkLaw::exponential(a), DistributionFunction::uniform(1.0));
}

ShotModel poisson_cluster(double mu, MarkLaw lag) {
    return ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::poisson(mu), std::move(lag)));
}

// phi for exponential lags by RK4 on v' = beta (e^theta G(v) - v), acc' = e^theta G(v) - rho.
double rk4_cluster_phi(const OffspringLaw& law, double beta, double theta, double rho) {
    const double et = std::exp(theta);
    auto f = [&](double v) { return et * law.pgf(v); };
    double v = 1.0, acc = 0.0;
    const double h = 2e-3;
    for (int i = 0; i < 500000; ++i) {
        double k1 = beta * (f(v) - v), l1 = f(v) - rho;
        double v2 = v + 0.5 * h * k1;
        double k2 = beta * (f(v2) - v2), l2 = f(v2) - rho;
        double v3 = v + 0.5 * h * k2;
        double k3 = beta * (f(v3) - v3), l3 = f(v3) - rho;
        double v4 = v + h * k3;
        double k4 = beta * (f(v4) - v4), l4 = f(v4) - rho;
        v += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
        acc += h * (l1 + 2 * l2 + 2 * l3 + l4) / 6;
        if (std::abs(f(v) - rho) < 1e-16) break;
    }
    return acc;
}

} // namespace

TEST(PhiClosedForm, TeletrafficDisplay) {
    auto model = teletraffic();
    for (double x : {1.5, 2.0, 4.0, 8.0}) {
        auto tilt = solve_tilt(model.z(), x);
        double expect = std::sqrt(x) - x;
        EXPECT_NEAR(phi_closed_form(model, tilt.theta).value, expect, 1e-10);
        auto q = phi_quadrature(model, tilt.theta, 1e-8);
        EXPECT_NEAR(q.value, expect, 1e-8) << x;
        EXPECT_LE(q.abs_error, 1e-8);
    }
    EXPECT_NEAR(phi_closed_form(model, 0.5).value, -2.0, 1e-14);
}

TEST(PhiClosedForm, UniformInsuranceDisplay) {
    for (double lambda : {1.0, 2.0}) {
        const double a = 1.5;
        auto model = uniform_insurance(lambda, a);
        for (double x : {0.5, 2.0, 4.0, 9.0}) {
            auto tilt = solve_tilt(model.z(), x);
            const double r = std::sqrt(a * x / lambda);
            double Phi = -(std::sqrt(lambda * x / a) / std::pow(std::sqrt(a * x) - std::sqrt(lambda), 2)) * std::log(r) +
                         1 / (a - std::sqrt(lambda * a / x));
            double expect = -a * (r - 1) * Phi;
            auto v = phi_closed_form(model, tilt.theta);
            EXPECT_EQ(v.method, PhiMethod::closed_form);
            EXPECT_NEAR(v.value, expect, 1e-12 * std::max(1.0, std::abs(expect))) << x;
            EXPECT_NEAR(phi_quadrature(model, tilt.theta, 1e-9).value, expect, 1e-9) << x;
        }
    }
}

TEST(PhiClosedForm, OtherDistributionFunctions) {
    for (auto F : {DistributionFunction::exponential(0.7), DistributionFunction::pareto(2.0),
                   DistributionFunction::uniform(3.0)}) {
        auto model = ShotModel::multiplicative(1.0, MarkLaw::exponential(2.0), F);
        for (double th : {-1.5, -0.2, 0.3, 1.2}) {
            auto c = phi_closed_form(model, th);
            auto q = phi_quadrature(model, th, 1e-9);
            EXPECT_EQ(c.method, PhiMethod::closed_form);
            EXPECT_NEAR(c.value, q.value, 2e-9) << F.name() << " " << th;
        }
    }
}

TEST(PhiClosedForm, StepShapeIsExact) {
    auto model = ShotModel::multiplicative(1.0, MarkLaw::deterministic(1.0), DistributionFunction::step(2.5));
    for (double th : {-1.0, 0.4, 2.0}) EXPECT_NEAR(phi_closed_form(model, th).value, 2.5 * (1 - std::exp(th)), 1e-13);
}

TEST(PhiClosedForm, TrivialCases) {
    auto constant = ShotModel::constant(1.0, MarkLaw::exponential(1.0));
    auto one = ShotModel::multiplicative(1.0, MarkLaw::exponential(1.0), DistributionFunction::one());
    for (double th : {-2.0, 0.3, 0.9}) {
        EXPECT_EQ(phi_closed_form(constant, th).value, 0.0);
        EXPECT_EQ(phi_closed_form(one, th).value, 0.0);
        for (int n = 0; n <= 4; ++n) EXPECT_EQ(phi_derivative(constant, th, n), 0.0);
    }
    EXPECT_EQ(phi_quadrature(teletraffic(), 0.0).value, 0.0);
    EXPECT_EQ(phi_quadrature(uniform_insurance(), 0.0).value, 0.0);
}

TEST(PhiClosedForm, UnsupportedPairFallsThrough) {
    auto model = ShotModel::multiplicative(1.0, MarkLaw::table({1, 3}, {0.5, 0.5}), DistributionFunction::uniform());
    EXPECT_EQ(phi_closed_form(model, 0.2).method, PhiMethod::quadrature);
}

TEST(PhiQuadrature, TableMarksMatchDirectExpectation) {
    // phi = sum_i p_i int_0^b (e^{theta v_i s/b} - e^{theta v_i}) ds for uniform F on (0, b).
    auto mark = MarkLaw::table({1.0, 2.0, 4.0}, {0.5, 0.3, 0.2});
    auto model = ShotModel::multiplicative(1.0, mark, DistributionFunction::uniform(2.0));
    for (double th : {-0.7, 0.4}) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            double v = mark.values()[i];
            expect += mark.probs()[i] * (2.0 * std::expm1(th * v) / (th * v) - 2.0 * std::exp(th * v));
        }
        EXPECT_NEAR(phi_quadrature(model, th, 1e-10).value, expect, 1e-10);
    }
    auto capped = ShotModel::capped(1.0, mark);
    for (double th : {-0.7, 0.4})
        EXPECT_NEAR(phi_quadrature(capped, th, 1e-10).value, phi_closed_form(capped, th).value, 1e-10);
}

TEST(PhiQuadrature, SignAndHolderBounds) {
    for (const auto& model : {teletraffic(), uniform_insurance(), uniform_insurance(2.0, 0.5)}) {
        const double edge = model.z().edge();
        for (double f : {-3.0, -1.0, -0.1, 0.1, 0.3, 0.45}) {
            const double th = f * edge;
            auto v = phi_quadrature(model, th, 1e-9);
            auto b = phi_bounds(model, th);
            if (th < 0) {
                EXPECT_GE(v.value, -v.abs_error);
                EXPECT_EQ(b.lower, 0.0);
            } else {
                EXPECT_LE(v.value, v.abs_error);
                EXPECT_EQ(b.upper, 0.0);
            }
            EXPECT_GE(v.value, b.lower - v.abs_error);
            EXPECT_LE(v.value, b.upper + v.abs_error);
        }
    }
}

TEST(PhiQuadrature, InfiniteMeanShapeNeedsHorizon) {
    auto model = ShotModel::multiplicative(1.0, MarkLaw::exponential(1.0), DistributionFunction::pareto(1.0));
    EXPECT_THROW(phi_quadrature(model, 0.3), DomainError);
}

TEST(PhiBounds, ZeroTiltCollapses) {
    auto b = phi_bounds(teletraffic(), 0.0);
    EXPECT_EQ(b.lower, 0.0);
    EXPECT_EQ(b.upper, 0.0);
}

TEST(PhiBounds, NoAdmissibleExponentListsInterval) {
    auto model = poisson_cluster(0.3, MarkLaw::exponential(1.0));
    const double bc = model.z().critical().b_c;
    try {
        phi_bounds(model, 0.8 * bc, {2.0, 3.0});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("(1, 1.25"), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW(phi_bounds(model, 0.8 * bc, {1.2}));
}

TEST(PhiDerivative, FiniteDifferenceOracle) {
    for (const auto& model : {teletraffic(), uniform_insurance()}) {
        for (double th : {-0.4, 0.0, 0.3}) {
            const double h = 1e-4;
            double fd = (phi_quadrature(model, th + h, 1e-12).value - phi_quadrature(model, th - h, 1e-12).value) /
                        (2 * h);
            double d1 = phi_derivative(model, th, 1, 1e-11);
            EXPECT_NEAR(d1, fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(PhiDerivative, QuadratureMatchesClosedFormCapped) {
    // Closed form for the capped exponential pair against the generic quadrature route.
    auto model = teletraffic(1.0, 2.0);
    for (double th : {-0.5, 0.7})
        for (int n = 1; n <= 4; ++n) {
            auto q = detail::phi_quadrature_order(model, th, n, 1e-10, std::nullopt);
            EXPECT_NEAR(q.value, phi_derivative(model, th, n), 1e-9 * std::max(1.0, std::abs(q.value))) << n;
        }
}

TEST(PhiDerivative, OrderZeroIsPhi) {
    auto model = uniform_insurance();
    EXPECT_EQ(phi_derivative(model, 0.4, 0), phi_closed_form(model, 0.4).value);
}

TEST(ClusterPhi, ExponentialLagMatchesTimeIntegration) {
    for (double mu : {0.3, 0.5}) {
        auto model = poisson_cluster(mu, MarkLaw::exponential(1.3));
        const auto& crit = model.z().critical();
        for (double th : {-0.8, -0.2, 0.3 * crit.b_c, 0.7 * crit.b_c}) {
            double rho = model.z().mgf(th);
            double oracle = rk4_cluster_phi(model.cluster_law().offspring, 1.3, th, rho);
            EXPECT_NEAR(phi_quadrature(model, th, 1e-11).value, oracle, 1e-8 * std::max(1.0, std::abs(oracle)));
        }
    }
}

TEST(ClusterPhi, DeterministicRoutesMatchNestedMonteCarlo) {
    std::vector<ShotModel> models{poisson_cluster(0.3, MarkLaw::exponential(1.0)),
                                  poisson_cluster(0.5, MarkLaw::deterministic(0.7)),
                                  poisson_cluster(0.4, MarkLaw::table({0.5, 1.0, 2.5}, {0.2, 0.5, 0.3})),
                                  ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::geometric(0.75),
                                                                     MarkLaw::table({0.0, 1.0}, {0.3, 0.7})))};
    for (const auto& m : models) {
        for (double th : {-0.5, 0.2 * m.z().critical().b_c}) {
            auto det = phi_quadrature(m, th, 1e-10);
            auto mc = phi_nested_mc(m, th, 0, {200000, 7});
            EXPECT_EQ(mc.method, PhiMethod::nested_mc);
            EXPECT_NEAR(det.value, mc.value, 4.5 * mc.abs_error) << th;
        }
    }
}

TEST(ClusterPhi, DerivativesMatchNestedMonteCarlo) {
    auto m = poisson_cluster(0.3, MarkLaw::exponential(1.0));
    const double th = 0.1;
    auto d = phi_derivatives(m, th, 3);
    for (int n = 1; n <= 3; ++n) {
        auto mc = phi_nested_mc(m, th, n, {200000, 9});
        EXPECT_NEAR(d[n], mc.value, 4.5 * mc.abs_error) << n;
    }
    // And the Chebyshev derivative against a finite difference of the deterministic route.
    const double h = 1e-4;
    double fd = (phi_quadrature(m, th + h, 1e-13).value - phi_quadrature(m, th - h, 1e-13).value) / (2 * h);
    EXPECT_NEAR(d[1], fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(ClusterPhi, LengthBoundsPoisson) {
    auto m = poisson_cluster(0.3, MarkLaw::exponential(1.0));
    std::vector<double> lengths;
    for (int i = 0; i < 100000; ++i) {
        Stream rng(3, i);
        lengths.push_back(simulate_cluster(m.cluster_law(), rng).length);
    }
    for (double x : {0.5, 1.0, 1.3}) {
        auto tilt = solve_tilt(m.z(), x);
        ASSERT_LT(tilt.theta, 0.0);
        auto v = phi_quadrature(m, tilt.theta, 1e-10);
        auto b = phi_bounds_cluster_length(m, tilt.theta, lengths, 2.0);
        EXPECT_EQ(b.lower, 0.0);
        EXPECT_GE(v.value, 0.0);
        EXPECT_LE(v.value, b.upper);
    }
}

TEST(ClusterPhi, GaltonWatsonBounds) {
    auto m = ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::binomial(2, 0.3), MarkLaw::exponential(2.0)));
    const auto& law = m.cluster_law();
    for (double th : {-1.0, -0.3, 0.2 * m.z().critical().b_c, 0.45 * m.z().critical().b_c}) {
        auto v = phi_quadrature(m, th, 1e-10);
        auto b = phi_bounds(m, th);
        double gw = law.offspring.prob(1) * law.lag.mean() * std::exp(th) * (1 - m.z().mgf(th));
        if (th < 0) EXPECT_DOUBLE_EQ(b.lower, gw);
        else EXPECT_DOUBLE_EQ(b.upper, gw);
        EXPECT_GE(v.value, b.lower);
        EXPECT_LE(v.value, b.upper);
    }
}

TEST(ClusterPhi, NestedMcErrorScaling) {
    auto m = poisson_cluster(0.3, MarkLaw::exponential(1.0));
    double ratio_sum = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        auto a = phi_nested_mc(m, 0.2, 0, {2000, 100u + rep});
        auto b = phi_nested_mc(m, 0.2, 0, {4000, 200u + rep});
        ratio_sum += a.abs_error / b.abs_error;
    }
    double ratio = ratio_sum / 20;
    EXPECT_GE(ratio, 1.2);
    EXPECT_LE(ratio, 3.0);
}
