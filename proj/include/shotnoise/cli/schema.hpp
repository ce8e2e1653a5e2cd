#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shotnoise/asymptotics/fluctuations.hpp"
#include "shotnoise/dist/distribution_function.hpp"
#include "shotnoise/dist/mark.hpp"
#include "shotnoise/dist/offspring.hpp"
#include "shotnoise/dist/stable.hpp"
#include "shotnoise/errors.hpp"
#include "shotnoise/phi/shape.hpp"
#include "shotnoise/ruin/ruin.hpp"
#include "shotnoise/sim/cluster_law.hpp"

namespace shotnoise::cli {

using nlohmann::json;

// RFC 6901 reference token.
inline std::string pointer_token(const std::string& key) {
    std::string out;
    for (char ch : key) {
        if (ch == '~') out += "~0";
        else if (ch == '/') out += "~1";
        else out += ch;
    }
    return out;
}

// A JSON value together with its pointer, for schema errors that name the location.
class Node {
public:
    Node(const json& j, std::string ptr) : j_(&j), ptr_(std::move(ptr)) {}

    const json& value() const { return *j_; }
    const std::string& pointer() const { return ptr_; }

    [[noreturn]] void fail(const std::string& what) const { throw SchemaError(ptr_, what); }

    Node object() const {
        if (!j_->is_object()) fail("expected an object");
        return *this;
    }

    // Rejects keys outside the allowed set.
    const Node& only(std::initializer_list<const char*> keys) const {
        object();
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw SchemaError(ptr_ + "/" + pointer_token(it.key()), "unknown key");
        }
        return *this;
    }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        object();
        if (!j_->contains(key)) throw SchemaError(ptr_ + "/" + pointer_token(key), "required key missing");
        return Node(j_->at(key), ptr_ + "/" + pointer_token(key));
    }

    std::optional<Node> get(const std::string& key) const {
        object();
        if (!j_->contains(key)) return std::nullopt;
        return Node(j_->at(key), ptr_ + "/" + pointer_token(key));
    }

    double number() const {
        if (!j_->is_number()) fail("expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }

    long integer() const {
        if (j_->is_number_integer()) return j_->get<long>();
        if (j_->is_number_float()) {
            const double v = j_->get<double>();
            if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long>(v);
        }
        fail("expected an integer");
    }

    std::uint64_t unsigned_integer() const {
        if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
        const long v = integer();
        if (v < 0) fail("expected a nonnegative integer");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean() const {
        if (!j_->is_boolean()) fail("expected a boolean");
        return j_->get<bool>();
    }

    std::string string() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }

    std::string choice(std::initializer_list<const char*> options) const {
        const std::string s = string();
        std::string list;
        for (const char* o : options) {
            if (s == o) return s;
            list += list.empty() ? o : std::string(", ") + o;
        }
        fail("expected one of " + list);
    }

    std::vector<Node> items() const {
        if (!j_->is_array()) fail("expected an array");
        std::vector<Node> out;
        for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], ptr_ + "/" + std::to_string(i));
        return out;
    }

    std::vector<double> numbers() const {
        std::vector<double> out;
        for (const auto& n : items()) out.push_back(n.number());
        if (out.empty()) fail("expected a nonempty array");
        return out;
    }

    // A number or an array of numbers.
    std::vector<double> number_list() const {
        if (j_->is_number()) return {number()};
        return numbers();
    }

private:
    const json* j_;
    std::string ptr_;
};

// Law constructors raise DomainError for out-of-range values; the schema layer
// only checks structure and types.

inline MarkLaw parse_mark(const Node& n) {
    const std::string kind = n.at("kind").choice({"exponential", "deterministic", "table"});
    if (kind == "exponential") {
        n.only({"kind", "a"});
        return MarkLaw::exponential(n.at("a").number());
    }
    if (kind == "deterministic") {
        n.only({"kind", "value"});
        return MarkLaw::deterministic(n.at("value").number());
    }
    n.only({"kind", "values", "probs"});
    return MarkLaw::table(n.at("values").numbers(), n.at("probs").numbers());
}

inline OffspringLaw parse_offspring(const Node& n) {
    const std::string kind = n.at("kind").choice({"poisson", "binomial", "geometric", "table"});
    if (kind == "poisson") {
        n.only({"kind", "mu"});
        return OffspringLaw::poisson(n.at("mu").number());
    }
    if (kind == "binomial") {
        n.only({"kind", "m", "p"});
        return OffspringLaw::binomial(static_cast<int>(n.at("m").integer()), n.at("p").number());
    }
    if (kind == "geometric") {
        n.only({"kind", "p"});
        return OffspringLaw::geometric(n.at("p").number());
    }
    n.only({"kind", "pmf"});
    return OffspringLaw::table(n.at("pmf").numbers());
}

inline DistributionFunction parse_F(const Node& n) {
    const std::string kind = n.at("kind").choice({"one", "uniform", "exponential", "step", "pareto"});
    if (kind == "one") {
        n.only({"kind"});
        return DistributionFunction::one();
    }
    if (kind == "uniform") {
        n.only({"kind", "b"});
        auto b = n.get("b");
        return DistributionFunction::uniform(b ? b->number() : 1.0);
    }
    if (kind == "exponential") {
        n.only({"kind", "rate"});
        return DistributionFunction::exponential(n.at("rate").number());
    }
    if (kind == "step") {
        n.only({"kind", "d"});
        return DistributionFunction::step(n.at("d").number());
    }
    n.only({"kind", "k"});
    auto k = n.get("k");
    return DistributionFunction::pareto(k ? k->number() : 1.0);
}

inline StableParams parse_stable(const Node& n) {
    n.only({"c", "alpha", "beta"});
    auto c = n.get("c");
    auto beta = n.get("beta");
    return StableParams(c ? c->number() : 1.0, n.at("alpha").number(), beta ? beta->number() : 0.0);
}

inline ClusterCaps parse_caps(const Node& n) {
    n.only({"max_generations", "max_points"});
    ClusterCaps caps;
    if (auto g = n.get("max_generations")) caps.max_generations = static_cast<int>(g->integer());
    if (auto p = n.get("max_points")) caps.max_points = p->integer();
    return caps;
}

// {"lambda", "shape": multiplicative|capped|constant|cluster, "mark", "F"} or
// {"lambda", "shape": "cluster", "offspring", "lag", "caps"}.
inline ShotModel parse_model(const Node& n) {
    const std::string shape = n.at("shape").choice({"multiplicative", "capped", "constant", "cluster"});
    const double lambda = n.at("lambda").number();
    if (shape == "cluster") {
        n.only({"lambda", "shape", "offspring", "lag", "caps"});
        auto caps = n.get("caps");
        return ShotModel::cluster(lambda, ClusterLaw(parse_offspring(n.at("offspring")), parse_mark(n.at("lag")),
                                                     caps ? parse_caps(*caps) : ClusterCaps{}));
    }
    if (shape == "multiplicative") {
        n.only({"lambda", "shape", "mark", "F"});
        return ShotModel::multiplicative(lambda, parse_mark(n.at("mark")), parse_F(n.at("F")));
    }
    n.only({"lambda", "shape", "mark"});
    const MarkLaw mark = parse_mark(n.at("mark"));
    return shape == "capped" ? ShotModel::capped(lambda, mark) : ShotModel::constant(lambda, mark);
}

inline json to_json(const MarkLaw& m) {
    switch (m.kind()) {
    case MarkLaw::Kind::exponential: return {{"kind", "exponential"}, {"a", m.rate()}};
    case MarkLaw::Kind::deterministic: return {{"kind", "deterministic"}, {"value", m.values().at(0)}};
    case MarkLaw::Kind::table: return {{"kind", "table"}, {"values", m.values()}, {"probs", m.probs()}};
    case MarkLaw::Kind::user: break;
    }
    throw DomainError("user-supplied mark laws have no JSON form");
}

inline json to_json(const OffspringLaw& o) {
    switch (o.kind()) {
    case OffspringLaw::Kind::poisson: return {{"kind", "poisson"}, {"mu", o.mu()}};
    case OffspringLaw::Kind::binomial: return {{"kind", "binomial"}, {"m", o.m()}, {"p", o.p()}};
    case OffspringLaw::Kind::geometric: return {{"kind", "geometric"}, {"p", o.p()}};
    case OffspringLaw::Kind::table: return {{"kind", "table"}, {"pmf", o.pmf_table()}};
    }
    return {};
}

inline json to_json(const DistributionFunction& F) {
    switch (F.kind()) {
    case DistributionFunction::Kind::one: return {{"kind", "one"}};
    case DistributionFunction::Kind::uniform: return {{"kind", "uniform"}, {"b", F.param()}};
    case DistributionFunction::Kind::exponential: return {{"kind", "exponential"}, {"rate", F.param()}};
    case DistributionFunction::Kind::step: return {{"kind", "step"}, {"d", F.param()}};
    case DistributionFunction::Kind::pareto: return {{"kind", "pareto"}, {"k", F.param()}};
    }
    return {};
}

inline json to_json(const StableParams& p) { return {{"c", p.c}, {"alpha", p.alpha}, {"beta", p.beta}}; }

inline json to_json(const ShotModel& m) {
    json j{{"lambda", m.lambda()}};
    if (m.is_cluster()) {
        const ClusterLaw& law = m.cluster_law();
        j["shape"] = "cluster";
        j["offspring"] = to_json(law.offspring);
        j["lag"] = to_json(law.lag);
        j["caps"] = {{"max_generations", law.caps.max_generations}, {"max_points", law.caps.max_points}};
        return j;
    }
    j["shape"] = m.shape().name();
    j["mark"] = to_json(m.mark());
    if (m.shape().kind() == ShotShape::Kind::multiplicative) j["F"] = to_json(m.shape().F());
    return j;
}

enum class Experiment { tail, point_mass, fluctuate, ruin, stable_rate, simulate };

inline std::string to_string(Experiment e) {
    switch (e) {
    case Experiment::tail: return "tail";
    case Experiment::point_mass: return "point-mass";
    case Experiment::fluctuate: return "fluctuate";
    case Experiment::ruin: return "ruin";
    case Experiment::stable_rate: return "stable-rate";
    case Experiment::simulate: return "simulate";
    }
    return "";
}

struct StableModel {
    StableParams params;
    DistributionFunction F = DistributionFunction::one();
    double lambda = 1.0;
};

struct TailParams {
    double x = 0.0;
    std::vector<double> t;
    int sigma = 1;
};

struct PointMassParams {
    double t = 0.0;
    std::vector<double> x;
    std::vector<int> sigma{1};
};

struct FluctuateParams {
    FluctuationRegime regime = FluctuationRegime::clt;
    YSchedule schedule;
    int m = 3;
    std::vector<double> t;
};

struct RuinParams {
    double c = 0.0;
    std::vector<double> u;
    RuinMethod method = RuinMethod::tilted;
    double horizon_factor = 4.0;
    double grid_step = 0.0;
};

struct StableRateParams {
    std::vector<double> t;
    bool record = false;
    bool check_preconditions = true;
};

struct SimulateParams {
    std::vector<double> t;
    bool record = true;
};

struct Scenario {
    Experiment experiment = Experiment::tail;
    std::optional<ShotModel> model;
    std::optional<StableModel> stable;
    long n_paths = 100000;
    std::vector<std::uint64_t> seeds{1};
    unsigned threads = 1;
    std::string output;
    TailParams tail;
    PointMassParams point_mass;
    FluctuateParams fluctuate;
    RuinParams ruin;
    StableRateParams stable_rate;
    SimulateParams simulate;
};

// Validates the whole scenario before anything runs. Structure and type
// errors raise SchemaError with the failing pointer; value-range errors from
// the law constructors raise DomainError.
inline Scenario parse_scenario(const json& doc) {
    const Node root(doc, "");
    root.only({"experiment", "model", "params", "n_paths", "seeds", "threads", "output"});
    Scenario s;
    const std::string e =
        root.at("experiment").choice({"tail", "point-mass", "fluctuate", "ruin", "stable-rate", "simulate"});
    if (auto n = root.get("n_paths")) s.n_paths = n->integer();
    if (auto n = root.get("seeds")) {
        s.seeds.clear();
        for (const auto& item : n->items()) s.seeds.push_back(item.unsigned_integer());
        if (s.seeds.empty()) n->fail("expected a nonempty array");
    }
    if (auto n = root.get("threads")) {
        const long t = n->integer();
        if (t < 1) n->fail("expected a positive integer");
        s.threads = static_cast<unsigned>(t);
    }
    if (auto n = root.get("output")) s.output = n->string();
    const Node params = root.at("params").object();
    const Node model = root.at("model").object();

    if (e == "stable-rate") {
        s.experiment = Experiment::stable_rate;
        model.only({"lambda", "stable", "F"});
        StableModel sm;
        sm.lambda = model.at("lambda").number();
        sm.params = parse_stable(model.at("stable"));
        sm.F = parse_F(model.at("F"));
        s.stable = sm;
        params.only({"t", "record", "check_preconditions"});
        s.stable_rate.t = params.at("t").numbers();
        if (auto r = params.get("record")) s.stable_rate.record = r->boolean();
        if (auto c = params.get("check_preconditions")) s.stable_rate.check_preconditions = c->boolean();
        return s;
    }
    s.model = parse_model(model);
    if (e == "tail") {
        s.experiment = Experiment::tail;
        params.only({"x", "t", "sigma"});
        s.tail.x = params.at("x").number();
        s.tail.t = params.at("t").number_list();
        if (auto n = params.get("sigma")) s.tail.sigma = static_cast<int>(n->integer());
    } else if (e == "point-mass") {
        s.experiment = Experiment::point_mass;
        params.only({"t", "x", "sigma"});
        s.point_mass.t = params.at("t").number();
        s.point_mass.x = params.at("x").number_list();
        if (auto n = params.get("sigma")) {
            s.point_mass.sigma.clear();
            if (n->value().is_array())
                for (const auto& item : n->items()) s.point_mass.sigma.push_back(static_cast<int>(item.integer()));
            else
                s.point_mass.sigma.push_back(static_cast<int>(n->integer()));
            if (s.point_mass.sigma.empty()) n->fail("expected a nonempty array");
        }
    } else if (e == "fluctuate") {
        s.experiment = Experiment::fluctuate;
        params.only({"regime", "schedule", "m", "t"});
        const std::string r = params.at("regime").choice({"clt", "extended", "expansion"});
        s.fluctuate.regime = r == "clt"        ? FluctuationRegime::clt
                             : r == "extended" ? FluctuationRegime::extended
                                               : FluctuationRegime::expansion;
        const Node sched = params.at("schedule");
        sched.only({"c", "gamma"});
        if (auto c = sched.get("c")) s.fluctuate.schedule.c = c->number();
        s.fluctuate.schedule.gamma = sched.at("gamma").number();
        if (auto m = params.get("m")) s.fluctuate.m = static_cast<int>(m->integer());
        s.fluctuate.t = params.at("t").number_list();
    } else if (e == "ruin") {
        s.experiment = Experiment::ruin;
        params.only({"c", "u", "method", "horizon_factor", "grid_step"});
        s.ruin.c = params.at("c").number();
        s.ruin.u = params.at("u").number_list();
        if (auto m = params.get("method"))
            s.ruin.method = m->choice({"crude", "tilted"}) == "crude" ? RuinMethod::crude : RuinMethod::tilted;
        if (auto h = params.get("horizon_factor")) s.ruin.horizon_factor = h->number();
        if (auto g = params.get("grid_step")) s.ruin.grid_step = g->number();
    } else {
        s.experiment = Experiment::simulate;
        params.only({"t", "record"});
        s.simulate.t = params.at("t").number_list();
        if (auto r = params.get("record")) s.simulate.record = r->boolean();
    }
    return s;
}

// Scenario with every default filled in.
inline json resolved_json(const Scenario& s) {
    json j;
    j["experiment"] = to_string(s.experiment);
    j["n_paths"] = s.n_paths;
    j["seeds"] = s.seeds;
    j["threads"] = s.threads;
    if (!s.output.empty()) j["output"] = s.output;
    json p;
    switch (s.experiment) {
    case Experiment::tail: p = {{"x", s.tail.x}, {"t", s.tail.t}, {"sigma", s.tail.sigma}}; break;
    case Experiment::point_mass:
        p = {{"t", s.point_mass.t}, {"x", s.point_mass.x}, {"sigma", s.point_mass.sigma}};
        break;
    case Experiment::fluctuate:
        p = {{"regime", to_string(s.fluctuate.regime)},
             {"schedule", {{"c", s.fluctuate.schedule.c}, {"gamma", s.fluctuate.schedule.gamma}}},
             {"m", s.fluctuate.m},
             {"t", s.fluctuate.t}};
        break;
    case Experiment::ruin:
        p = {{"c", s.ruin.c},
             {"u", s.ruin.u},
             {"method", to_string(s.ruin.method)},
             {"horizon_factor", s.ruin.horizon_factor},
             {"grid_step", s.ruin.grid_step}};
        break;
    case Experiment::stable_rate:
        p = {{"t", s.stable_rate.t},
             {"record", s.stable_rate.record},
             {"check_preconditions", s.stable_rate.check_preconditions}};
        break;
    case Experiment::simulate: p = {{"t", s.simulate.t}, {"record", s.simulate.record}}; break;
    }
    j["params"] = p;
    if (s.stable)
        j["model"] = {{"lambda", s.stable->lambda}, {"stable", to_json(s.stable->params)}, {"F", to_json(s.stable->F)}};
    else
        j["model"] = to_json(*s.model);
    return j;
}

} // namespace shotnoise::cli
