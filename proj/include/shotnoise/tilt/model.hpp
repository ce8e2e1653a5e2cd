#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shotnoise/dist/mark.hpp"
#include "shotnoise/dist/progeny.hpp"
#include "shotnoise/sim/cluster_law.hpp"
#include "shotnoise/tilt/cluster.hpp"

namespace shotnoise {

// Law of Z = sup_t H(t, M) together with the intensity lambda.
class ZModel {
public:
    enum class Kind { direct_mark, cluster, bounded_shape };

    // Z distributed as the mark M.
    static ZModel direct(double lambda, MarkLaw mark) { return ZModel(Kind::direct_mark, lambda, std::move(mark)); }

    // Z given directly as the law of the supremum of a bounded shape.
    static ZModel bounded(double lambda, MarkLaw sup_law) {
        return ZModel(Kind::bounded_shape, lambda, std::move(sup_law));
    }

    // Z = total progeny of a Galton-Watson cluster.
    static ZModel cluster(double lambda, ClusterLaw law) {
        ZModel z(lambda);
        z.kind_ = Kind::cluster;
        z.crit_ = law.critical();
        z.progeny_ = std::make_shared<ProgenyLaw>(law.offspring, 400);
        z.cluster_ = std::make_shared<ClusterLaw>(std::move(law));
        return z;
    }

    Kind kind() const { return kind_; }
    bool is_cluster() const { return kind_ == Kind::cluster; }
    double lambda() const { return lambda_; }
    const MarkLaw& mark() const {
        if (!mark_) throw DomainError("Z model has no mark law");
        return *mark_;
    }
    const ClusterLaw& cluster_law() const {
        if (!cluster_) throw DomainError("Z model is not a cluster model");
        return *cluster_;
    }
    const CriticalExponents& critical() const { return crit_; }
    const ProgenyLaw& progeny() const { return *progeny_; }

    // a = sup{theta : E[e^{theta Z}] < inf}; b_c for cluster models.
    double edge() const { return is_cluster() ? crit_.b_c : mark_->edge(); }

    bool lattice() const { return is_cluster() || mark_->is_lattice(); }

    double tilted_moment(int n, double theta) const {
        if (is_cluster()) {
            if (theta > crit_.b_c) return numeric::inf;
            return cluster_tilted_moments(cluster_->offspring, theta, n, crit_)[n];
        }
        return mark_->tilted_moment(n, theta);
    }

    std::vector<double> tilted_moments(int nmax, double theta) const {
        if (is_cluster()) return cluster_tilted_moments(cluster_->offspring, theta, nmax, crit_);
        std::vector<double> out;
        for (int n = 0; n <= nmax; ++n) out.push_back(mark_->tilted_moment(n, theta));
        return out;
    }

    double mgf(double theta) const { return tilted_moment(0, theta); }
    double moment(int n) const { return is_cluster() ? cluster_moments(cluster_->offspring, n) : mark_->moment(n); }
    double mean() const { return moment(1); }

    // E[Z^r] for real r >= 0; cluster models sum the progeny pmf series.
    double abs_moment(double r) const {
        if (!is_cluster()) return mark_->abs_moment(r);
        double s = 0.0, mass = 0.0;
        for (int k = 1; k < 1000000; ++k) {
            double p = progeny_->pmf(k);
            s += p * std::pow(k, r);
            mass += p;
            if (k > 20 && p * std::pow(k, r + 1) < 1e-17 * s && mass > 1 - 1e-12) break;
        }
        return s;
    }

    bool mark_discrete_or_cluster() const { return is_cluster() || mark_->is_discrete(); }
    double progeny_log_pmf(int k) const { return is_cluster() ? progeny_->log_pmf(k) : -numeric::inf; }

    // P(Z > x).
    double survival(double x) const {
        if (!is_cluster()) return mark_->survival(x);
        if (x < 1) return 1.0;
        double s = 0.0;
        const int kmax = static_cast<int>(std::floor(x));
        for (int k = 1; k <= kmax; ++k) s += progeny_->pmf(k);
        if (s < 0.5) return std::max(0.0, 1.0 - s);
        // Deep tail: sum it directly instead of cancelling against 1.
        double tail = 0.0;
        for (int k = kmax + 1; k < kmax + 1000000; ++k) {
            const double p = progeny_->pmf(k);
            tail += p;
            if (k > kmax + 20 && p < 1e-17 * tail) break;
            if (tail == 0.0 && k > kmax + 1000) break;
        }
        return tail;
    }

    // Support points and probabilities for discrete Z, truncated at mass 1 - tail_tol.
    std::vector<std::pair<double, double>> discrete_support(double tail_tol = 1e-15) const {
        std::vector<std::pair<double, double>> out;
        if (is_cluster()) {
            double mass = 0.0;
            for (int k = 1; mass < 1.0 - tail_tol && k < 100000; ++k) {
                double p = progeny_->pmf(k);
                out.emplace_back(k, p);
                mass += p;
                if (k > progeny_->cache_size() && p < 1e-300) break;
            }
            return out;
        }
        if (!mark_->is_discrete()) return out;
        for (std::size_t i = 0; i < mark_->values().size(); ++i) out.emplace_back(mark_->values()[i], mark_->probs()[i]);
        return out;
    }

private:
    explicit ZModel(double lambda) : lambda_(lambda) {
        if (!(lambda > 0)) throw DomainError("intensity lambda must be positive");
    }
    ZModel(Kind k, double lambda, MarkLaw m) : ZModel(lambda) {
        kind_ = k;
        mark_ = std::make_shared<MarkLaw>(std::move(m));
    }

    Kind kind_ = Kind::direct_mark;
    double lambda_ = 1.0;
    std::shared_ptr<const MarkLaw> mark_;
    std::shared_ptr<const ClusterLaw> cluster_;
    std::shared_ptr<const ProgenyLaw> progeny_;
    CriticalExponents crit_{numeric::inf, numeric::inf};
};

} // namespace shotnoise
