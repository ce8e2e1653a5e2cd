#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "shotnoise/asymptotics/deviations.hpp"
#include "shotnoise/ruin/ruin.hpp"

using namespace shotnoise;

namespace {

ShotModel exp_claims(double lambda = 1.0, double a = 1.0) {
    return ShotModel::multiplicative(lambda, MarkLaw::exponential(a), DistributionFunction::uniform(1.0));
}

ShotModel cl_model(double lambda = 1.0, double a = 1.0) { return ShotModel::constant(lambda, MarkLaw::exponential(a)); }

// Exact infinite-horizon ruin probability of the compound Poisson model with exp(a) claims.
double psi_cl_exact(double lambda, double a, double c, double u) {
    return lambda / (a * c) * std::exp(-(a - lambda / c) * u);
}

RuinOptions opts(long n, RuinMethod m, std::vector<std::uint64_t> seeds = {1, 2}) {
    RuinOptions o;
    o.n_paths = n;
    o.method = m;
    o.seeds = std::move(seeds);
    return o;
}

} // namespace

TEST(ClConstant, ExponentialClaims) {
    const ZModel z = ZModel::direct(1.0, MarkLaw::exponential(1.0));
    EXPECT_NEAR(cl_integral(z, 0.5), 4.0, 1e-9);
    EXPECT_NEAR(cl_constant(z, 2.0), 0.5, 1e-10);
    // Classical constant lambda / (a c) for exp(a) claims.
    const ZModel z2 = ZModel::direct(1.5, MarkLaw::exponential(2.0));
    EXPECT_NEAR(cl_constant(z2, 3.0), 1.5 / (2.0 * 3.0), 1e-10);
}

TEST(ClConstant, MatchesTiltedMomentIdentity) {
    // int_0^inf x e^{wx} P(Z>x) dx = E[Z e^{wZ}]/w - (E[e^{wZ}] - 1)/w^2.
    const std::vector<ZModel> models{
        ZModel::direct(1.0, MarkLaw::table({0.5, 1.0, 3.0}, {0.5, 0.3, 0.2})),
        ZModel::direct(2.0, MarkLaw::exponential(3.0)),
        ZModel::cluster(1.0, ClusterLaw(OffspringLaw::poisson(0.3), MarkLaw::exponential(1.0))),
        ZModel::cluster(0.5, ClusterLaw(OffspringLaw::geometric(0.75), MarkLaw::exponential(1.0))),
    };
    for (const auto& z : models) {
        const double c = 2.0 * z.lambda() * z.mean();
        const double w = lundberg_root(z, c);
        const double identity = z.tilted_moment(1, w) / w - (z.mgf(w) - 1) / (w * w);
        EXPECT_NEAR(cl_integral(z, w), identity, 1e-8 * identity);
    }
}

TEST(ClConstant, UnitClaims) {
    const ZModel z = ZModel::direct(1.0, MarkLaw::deterministic(1.0));
    const double c = 1.5;
    const double w = lundberg_root(z, c);
    EXPECT_NEAR(std::expm1(w), c * w, 1e-12);
    const double J = (std::exp(w) * (w - 1) + 1) / (w * w);
    EXPECT_NEAR(cl_integral(z, w), J, 1e-10 * J);
    EXPECT_NEAR(cl_constant(z, c), 1.0 / (w / (c - 1.0) * J), 1e-9);
}

TEST(ClConstant, Guards) {
    const ZModel z = ZModel::direct(1.0, MarkLaw::exponential(1.0));
    EXPECT_THROW(cl_constant(z, 2.0, 0.0), DomainError);
    EXPECT_THROW(cl_constant(z, 2.0, 1e-300), DomainError);
    EXPECT_THROW(cl_constant(z, 0.9), DomainError);       // net profit
    EXPECT_THROW(cl_integral(z, 1.0), DomainError);       // at the mgf edge
    EXPECT_THROW(cl_integral(z, 1.5), DomainError);
}

TEST(RuinBounds, ExponentialClaimsScenario) {
    const auto b = ruin_bounds(exp_claims(), 2.0);
    EXPECT_EQ(b.branch, "i");
    EXPECT_NEAR(b.w, 0.5, 1e-12);
    EXPECT_NEAR(b.d, 0.5, 1e-10); // (E[Z e^{wZ}] - c)^{-1} = (4 - 2)^{-1}
    EXPECT_GT(b.d, 0.0);
    EXPECT_NEAR(b.cl, 0.5, 1e-10);
    for (double u = 5; u <= 60; u += 5) {
        EXPECT_GT(b.lower(u), 0.0);
        EXPECT_LT(b.lower(u), b.upper(u)) << u;
    }
    EXPECT_LT(b.crossover(), 5.0);
    EXPECT_LT(b.lower(1000) / b.upper(1000), 0.1 * b.lower(10) / b.upper(10) + 1e-15);
    EXPECT_NEAR(b.lower(400) / b.upper(400) * 2, b.lower(100) / b.upper(100), 1e-12);
}

TEST(RuinBounds, LowerBoundIsSharpTailAtScaledTime) {
    for (const auto& m : {exp_claims(), exp_claims(2.0, 1.5), ShotModel::capped(1.0, MarkLaw::exponential(1.0))}) {
        const double c = 2.0 * m.lambda() * m.z().mean();
        const auto b = ruin_bounds(m, c);
        for (double u : {5.0, 20.0}) {
            const auto s = sharp_deviation(m, SharpKind::nonlattice_tail, b.x, u * b.d);
            EXPECT_NEAR(b.lower(u), s.value, 1e-7 * s.value);
        }
    }
}

TEST(RuinBounds, LatticeBranch) {
    const ShotModel m = ShotModel::constant(1.0, MarkLaw::deterministic(1.0));
    const auto b = ruin_bounds(m, 1.5);
    EXPECT_EQ(b.branch, "ii");
    const double nonlattice =
        std::exp(b.phi_w) / (b.w * std::sqrt(2 * numeric::pi * b.d * b.tilted_m2));
    EXPECT_NEAR(b.lower_coef, nonlattice / (1 - std::exp(-b.w)), 1e-12 * b.lower_coef);
    EXPECT_EQ(b.phi_w, 0.0);
}

TEST(RuinBounds, Preconditions) {
    EXPECT_THROW(ruin_bounds(exp_claims(), 1.0), DomainError);
    EXPECT_THROW(ruin_bounds(exp_claims(), 0.5), DomainError);
}

TEST(RuinMc, ZeroCapitalIsCertainRuin) {
    const auto r = ruin_mc(exp_claims(), 2.0, {0.0, 1.0}, opts(1000, RuinMethod::crude));
    EXPECT_EQ(r.estimates[0].psi_hat, 1.0);
    EXPECT_EQ(r.estimates[0].stderr_, 0.0);
    EXPECT_LT(r.estimates[1].psi_hat, 1.0);
}

TEST(RuinMc, Preconditions) {
    EXPECT_THROW(ruin_mc(exp_claims(), 2.0, {}, opts(10, RuinMethod::crude)), DomainError);
    EXPECT_THROW(ruin_mc(exp_claims(), 2.0, {3.0, 1.0}, opts(10, RuinMethod::crude)), DomainError);
    EXPECT_THROW(ruin_mc(exp_claims(), 2.0, {-1.0}, opts(10, RuinMethod::crude)), DomainError);
    EXPECT_THROW(ruin_mc(exp_claims(), 2.0, {1.0}, opts(0, RuinMethod::crude)), DomainError);
    EXPECT_THROW(ruin_mc(exp_claims(), 0.8, {1.0}, opts(10, RuinMethod::crude)), DomainError);
}

TEST(RuinMc, CramerLundbergExactBothMethods) {
    const std::vector<double> u{1.0, 3.0, 6.0};
    for (auto method : {RuinMethod::crude, RuinMethod::tilted}) {
        auto o = opts(100000, method);
        o.horizon_factor = 20;
        const auto r = ruin_mc(cl_model(), 2.0, u, o);
        for (const auto& e : r.estimates) {
            const double exact = psi_cl_exact(1.0, 1.0, 2.0, e.u);
            EXPECT_NEAR(e.psi_hat, exact, 4 * e.stderr_ + 1e-4 * exact) << to_string(method) << " u=" << e.u;
        }
    }
}

TEST(RuinMc, TiltedCramerLundbergLargeCapital) {
    auto o = opts(50000, RuinMethod::tilted);
    o.horizon_factor = 20;
    const auto r = ruin_mc(cl_model(1.5, 2.0), 3.0, {10.0, 20.0, 40.0}, o);
    for (const auto& e : r.estimates) {
        const double exact = psi_cl_exact(1.5, 2.0, 3.0, e.u);
        EXPECT_NEAR(e.psi_hat, exact, 4 * e.stderr_) << e.u;
        EXPECT_LT(e.stderr_, 0.02 * exact);
    }
}

TEST(RuinMc, CrudeAndTiltedAgree) {
    const std::vector<ShotModel> models{
        exp_claims(),
        ShotModel::capped(1.0, MarkLaw::exponential(1.0)),
        ShotModel::multiplicative(1.0, MarkLaw::table({0.5, 2.0}, {0.6, 0.4}), DistributionFunction::step(0.7)),
        ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::poisson(0.3), MarkLaw::exponential(1.0))),
        ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::binomial(2, 0.2), MarkLaw::exponential(2.0))),
    };
    for (const auto& m : models) {
        const double c = 1.6 * m.lambda() * m.z().mean();
        const std::vector<double> u{2.0, 5.0};
        const auto crude = ruin_mc(m, c, u, opts(60000, RuinMethod::crude, {3}));
        const auto tilt = ruin_mc(m, c, u, opts(20000, RuinMethod::tilted, {4}));
        EXPECT_EQ(crude.flagged, 0);
        for (std::size_t j = 0; j < u.size(); ++j) {
            const auto& a = crude.estimates[j];
            const auto& b = tilt.estimates[j];
            const double se = std::hypot(a.stderr_, b.stderr_);
            EXPECT_NEAR(a.psi_hat, b.psi_hat, 4 * se) << m.shape().name() << " u=" << u[j];
        }
    }
}

TEST(RuinMc, GridShapeAgreesAcrossMethods) {
    const ShotModel m = ShotModel::multiplicative(1.0, MarkLaw::exponential(1.0), DistributionFunction::exponential(2.0));
    const auto crude = ruin_mc(m, 2.0, {2.0, 4.0}, opts(20000, RuinMethod::crude, {5}));
    const auto tilt = ruin_mc(m, 2.0, {2.0, 4.0}, opts(10000, RuinMethod::tilted, {6}));
    EXPECT_NEAR(crude.gap_bound, 0.01, 1e-15);
    for (std::size_t j = 0; j < 2; ++j) {
        const double se = std::hypot(crude.estimates[j].stderr_, tilt.estimates[j].stderr_);
        EXPECT_NEAR(crude.estimates[j].psi_hat, tilt.estimates[j].psi_hat, 4 * se);
    }
    EXPECT_EQ(ruin_mc(exp_claims(), 2.0, {1.0}, opts(10, RuinMethod::crude)).gap_bound, 0.0);
}

TEST(RuinMc, DelayedClaimsRuinLessThanCramerLundberg) {
    // Same streams: the delayed total never exceeds the immediate one path by path.
    const std::vector<double> u{1.0, 2.0, 4.0, 8.0};
    const auto ibnr = ruin_mc(exp_claims(), 2.0, u, opts(50000, RuinMethod::crude, {9}));
    const auto cl = ruin_mc(cl_model(), 2.0, u, opts(50000, RuinMethod::crude, {9}));
    for (std::size_t j = 0; j < u.size(); ++j) {
        EXPECT_LE(ibnr.estimates[j].hits, cl.estimates[j].hits);
        const double se = std::hypot(ibnr.estimates[j].stderr_, cl.estimates[j].stderr_);
        EXPECT_LE(ibnr.estimates[j].psi_hat, cl.estimates[j].psi_hat + 3 * se);
    }
}

TEST(RuinMc, LundbergSlopeAndSandwich) {
    const ShotModel m = exp_claims();
    const auto b = ruin_bounds(m, 2.0);
    const std::vector<double> u{10, 15, 20, 25, 30};
    const auto r = ruin_mc(m, 2.0, u, opts(20000, RuinMethod::tilted, {12}));
    std::vector<double> x, y, w;
    for (const auto& e : r.estimates) {
        ASSERT_GT(e.psi_hat, 0.0);
        x.push_back(e.u);
        y.push_back(std::log(e.psi_hat));
        w.push_back(std::pow(e.psi_hat / e.stderr_, 2));
        EXPECT_LE(b.lower(e.u), e.psi_hat + 3 * e.stderr_) << e.u;
        EXPECT_LE(e.psi_hat - 3 * e.stderr_, 1.2 * b.upper(e.u)) << e.u;
        EXPECT_LE(e.bias_estimate, 0.5 * 1.96 * e.stderr_);
    }
    const double slope = numeric::weighted_fit(x, y, w).first;
    EXPECT_NEAR(slope, -b.w, 0.1);
}

TEST(RuinMc, ShortHorizonIsWidened) {
    // At u = 1 the horizon 4 u d = 2 leaves a truncation bias far above the CI.
    const auto r = ruin_mc(exp_claims(), 2.0, {1.0, 8.0}, opts(20000, RuinMethod::crude, {31}));
    EXPECT_EQ(r.retries, 1);
    const double d = r.d;
    EXPECT_GT(r.estimates[0].horizon, 2 * 4 * 1.0 * d);
    for (const auto& e : r.estimates) EXPECT_LE(e.bias_estimate, 0.5 * 1.96 * e.stderr_) << e.u;
}

TEST(RuinMc, DeterministicAcrossThreads) {
    auto a = opts(9000, RuinMethod::tilted, {21, 22});
    auto b = a;
    b.threads = 3;
    const auto ra = ruin_mc(exp_claims(), 2.0, {3.0, 6.0}, a);
    const auto rb = ruin_mc(exp_claims(), 2.0, {3.0, 6.0}, b);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(ra.estimates[j].psi_hat, rb.estimates[j].psi_hat);
        EXPECT_EQ(ra.estimates[j].stderr_, rb.estimates[j].stderr_);
    }
}

TEST(RuinMc, TiltedModelMoments) {
    // Tilted intensity lambda E[e^{wZ}] and tilted mean E[Z e^{wZ}]/E[e^{wZ}].
    const ShotModel m = ShotModel::cluster(1.0, ClusterLaw(OffspringLaw::geometric(0.7), MarkLaw::exponential(1.0)));
    const double w = lundberg_root(m.z(), 2.0 * m.z().mean());
    const ShotModel t = lundberg_tilted_model(m, w);
    EXPECT_NEAR(t.lambda(), m.z().mgf(w), 1e-12);
    EXPECT_NEAR(t.z().mean(), m.z().tilted_moment(1, w) / m.z().mgf(w), 1e-8);
}
