#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <string>

#include "shotnoise/dist/distribution_function.hpp"
#include "shotnoise/dist/mark.hpp"
#include "shotnoise/sim/cluster_law.hpp"
#include "shotnoise/tilt/model.hpp"

namespace shotnoise {

// Shot shape H(t, m). For every kind Z = sup_t H(t, M) is the mark itself,
// except for the cluster count where Z is the total progeny.
class ShotShape {
public:
    enum class Kind { multiplicative, capped, cluster_count, constant };

    // H(t, m) = m F(t).
    static ShotShape multiplicative(DistributionFunction F) { return ShotShape(Kind::multiplicative, F); }
    // H(t, m) = min(t, m).
    static ShotShape capped() { return ShotShape(Kind::capped, DistributionFunction::one()); }
    // H(t, nu) = nu([0, t]) for a cluster point process nu.
    static ShotShape cluster_count() { return ShotShape(Kind::cluster_count, DistributionFunction::one()); }
    // H(t, m) = m.
    static ShotShape constant() { return ShotShape(Kind::constant, DistributionFunction::one()); }

    Kind kind() const { return kind_; }
    const DistributionFunction& F() const { return F_; }

    // H(t, m) for the mark-driven kinds.
    double value(double t, double m) const {
        if (t < 0) return 0.0;
        switch (kind_) {
        case Kind::multiplicative: return m * F_.cdf(t);
        case Kind::capped: return std::min(t, m);
        case Kind::constant: return m;
        case Kind::cluster_count: break;
        }
        throw DomainError("cluster-count shapes are evaluated on cluster realizations");
    }

    // H(., m) nondecreasing in t.
    bool nondecreasing() const { return true; }

    std::string name() const {
        switch (kind_) {
        case Kind::multiplicative: return "multiplicative";
        case Kind::capped: return "capped";
        case Kind::cluster_count: return "cluster_count";
        case Kind::constant: return "constant";
        }
        return "";
    }

private:
    ShotShape(Kind k, DistributionFunction F) : kind_(k), F_(F) {}
    Kind kind_;
    DistributionFunction F_;
};

// Intensity, shot shape and mark (or cluster) law: the full shot noise model.
class ShotModel {
public:
    static ShotModel multiplicative(double lambda, MarkLaw mark, DistributionFunction F) {
        return ShotModel(ShotShape::multiplicative(F), ZModel::direct(lambda, std::move(mark)));
    }
    static ShotModel capped(double lambda, MarkLaw mark) {
        return ShotModel(ShotShape::capped(), ZModel::direct(lambda, std::move(mark)));
    }
    static ShotModel constant(double lambda, MarkLaw mark) {
        return ShotModel(ShotShape::constant(), ZModel::direct(lambda, std::move(mark)));
    }
    static ShotModel cluster(double lambda, ClusterLaw law) {
        return ShotModel(ShotShape::cluster_count(), ZModel::cluster(lambda, std::move(law)));
    }

    const ShotShape& shape() const { return shape_; }
    const ZModel& z() const { return z_; }
    double lambda() const { return z_.lambda(); }
    bool is_cluster() const { return z_.is_cluster(); }
    const MarkLaw& mark() const { return z_.mark(); }
    const ClusterLaw& cluster_law() const { return z_.cluster_law(); }

    // Integer-valued shots: cluster counts, or integer marks with an integer-valued shape.
    bool lattice() const {
        if (is_cluster()) return true;
        if (!mark().is_lattice()) return false;
        switch (shape_.kind()) {
        case ShotShape::Kind::constant: return true;
        case ShotShape::Kind::multiplicative:
            return shape_.F().kind() == DistributionFunction::Kind::step ||
                   shape_.F().kind() == DistributionFunction::Kind::one;
        default: return false;
        }
    }

private:
    ShotModel(ShotShape s, ZModel z) : shape_(std::move(s)), z_(std::move(z)) {}
    ShotShape shape_;
    ZModel z_;
};

} // namespace shotnoise
