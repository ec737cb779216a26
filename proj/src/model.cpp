#include "cmdpm/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace cmdpm {

LayeredStateSpace::LayeredStateSpace(std::vector<std::vector<std::string>> layers) : layers_(std::move(layers)) {
    if (layers_.size() < 2) throw InvalidArgument("horizon must be at least 2");
    offsets_.push_back(0);
    for (std::size_t t = 0; t < layers_.size(); ++t) {
        if (layers_[t].empty()) throw InvalidArgument("layer " + std::to_string(t) + " is empty");
        for (std::size_t k = 0; k < layers_[t].size(); ++k) {
            const auto& name = layers_[t][k];
            if (!index_.emplace(name, offsets_.back() + static_cast<Index>(k)).second)
                throw InvalidArgument("duplicate state name '" + name + "'");
        }
        offsets_.push_back(offsets_.back() + static_cast<Index>(layers_[t].size()));
    }
}

int LayeredStateSpace::layer_of(StateId s) const {
    if (s < 0 || s >= num_states()) throw InvalidArgument("unknown state id " + std::to_string(s));
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), s);
    return static_cast<int>(it - offsets_.begin()) - 1;
}

const std::string& LayeredStateSpace::name(StateId s) const {
    const int t = layer_of(s);
    return layers_[t][static_cast<std::size_t>(s - offsets_[t])];
}

std::optional<StateId> LayeredStateSpace::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double ActionPolytope::violation(const Eigen::Ref<const Vector>& a) const {
    if (a.size() != dimension()) return std::numeric_limits<double>::infinity();
    double worst = std::max(-a.minCoeff(), std::abs(a.sum() - 1.0));
    if (H.rows() > 0) worst = std::max(worst, (H * a - h).maxCoeff());
    return worst;
}

ActionPolytope box_polytope(const Vector& base, double epsilon) {
    if (!(epsilon >= 0)) throw InvalidArgument("box_polytope: epsilon must be nonnegative");
    if (base.size() == 0 || base.minCoeff() < -kNormalizationTolerance ||
        std::abs(base.sum() - 1.0) > kNormalizationTolerance)
        throw InvalidArgument("box_polytope: base is not a probability vector");
    const Index n = base.size();
    ActionPolytope p;
    p.base = base;
    p.box_epsilon = epsilon;
    p.H = Matrix::Zero(2 * n, n);
    p.h.resize(2 * n);
    for (Index k = 0; k < n; ++k) {
        p.H(k, k) = 1;
        p.h[k] = base[k] + epsilon;
        p.H(n + k, k) = -1;
        p.h[n + k] = -std::max(base[k] - epsilon, 0.0);
    }
    return p;
}

Shape reward_shape(const RewardSpec& spec) {
    if (std::holds_alternative<AffineReward>(spec)) return Shape::affine;
    if (std::holds_alternative<WeightedL1Reward>(spec)) return Shape::concave;
    return std::get<QuadraticReward>(spec).curvature == Curvature::concave ? Shape::concave : Shape::convex;
}

Index reward_dimension(const RewardSpec& spec) {
    return std::visit(
        [](const auto& r) -> Index {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, AffineReward>) return r.coefficients.size();
            else return r.center.size();
        },
        spec);
}

const char* reward_type_name(const RewardSpec& spec) {
    switch (spec.index()) {
    case 0: return "affine";
    case 1: return "weighted_l1";
    default: return "quadratic";
    }
}

RandomizedPolicy as_randomized(const Policy& policy) {
    if (const auto* r = std::get_if<RandomizedPolicy>(&policy)) return *r;
    RandomizedPolicy out;
    for (const Vector& a : std::get<DeterministicPolicy>(policy).actions) out.mixtures.push_back({MixtureAtom{1.0, a}});
    return out;
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) out << "; ";
        if (violations[i].state) out << "state " << *violations[i].state << ": ";
        out << violations[i].message;
    }
    return out.str();
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

void check_distribution(std::vector<Violation>& out, std::optional<StateId> s, const std::string& what,
                        const Vector& v) {
    if (!v.allFinite()) {
        out.push_back({s, what + " has non-finite entries", std::numeric_limits<double>::infinity()});
        return;
    }
    if (v.size() && v.minCoeff() < -kNormalizationTolerance)
        out.push_back({s, what + " has a negative entry " + fmt(v.minCoeff()), -v.minCoeff()});
    if (std::abs(v.sum() - 1.0) > kNormalizationTolerance)
        out.push_back({s, what + " sums to " + fmt(v.sum()), std::abs(v.sum() - 1.0)});
}

} // namespace

ValidationReport validate(const CmdpInstance& instance) {
    ValidationReport report;
    auto& out = report.violations;
    const auto& states = instance.states;
    if (states.horizon() < 2) {
        out.push_back({std::nullopt, "horizon must be at least 2", 0});
        return report;
    }
    const Index decisions = states.num_decision_states();
    if (static_cast<Index>(instance.polytopes.size()) != decisions)
        out.push_back({std::nullopt, "expected one polytope per decision state", 0});
    if (static_cast<Index>(instance.rewards.size()) != decisions)
        out.push_back({std::nullopt, "expected one reward per decision state", 0});

    if (instance.alpha.size() != states.layer_size(0))
        out.push_back({std::nullopt, "alpha length differs from the first layer size", 0});
    else
        check_distribution(out, std::nullopt, "alpha", instance.alpha);

    const Index np = std::min<Index>(decisions, static_cast<Index>(instance.polytopes.size()));
    for (StateId s = 0; s < np; ++s) {
        const ActionPolytope& p = instance.polytopes[s];
        const Index n = states.next_size(s);
        if (p.base.size() != n || p.H.cols() != n || p.H.rows() != p.h.size()) {
            out.push_back({s, "polytope dimensions do not match the next layer", 0});
            continue;
        }
        if (!p.H.allFinite() || !p.h.allFinite()) {
            out.push_back({s, "polytope has non-finite entries", 0});
            continue;
        }
        check_distribution(out, s, "base b(s)", p.base);
        if (p.H.rows() > 0) {
            const double excess = (p.H * p.base - p.h).maxCoeff();
            if (excess > kNormalizationTolerance)
                out.push_back({s, "base b(s) ∉ 𝒜(s): H b exceeds h by " + fmt(excess), excess});
        }
    }
    const Index nr = std::min<Index>(decisions, static_cast<Index>(instance.rewards.size()));
    for (StateId s = 0; s < nr; ++s) {
        const RewardSpec& r = instance.rewards[s];
        if (reward_dimension(r) != states.next_size(s)) {
            out.push_back({s, "reward vector length differs from the next layer size", 0});
            continue;
        }
        if (const auto* l1 = std::get_if<WeightedL1Reward>(&r)) {
            if (l1->weights.size() != l1->center.size())
                out.push_back({s, "L1 weights and center differ in length", 0});
            else if (l1->weights.size() && l1->weights.minCoeff() < 0)
                out.push_back({s, "L1 weights must be nonnegative", -l1->weights.minCoeff()});
        } else if (const auto* q = std::get_if<QuadraticReward>(&r)) {
            if (q->weights.size() && q->weights.size() != q->center.size())
                out.push_back({s, "quadratic weights and center differ in length", 0});
            else if (q->weights.size() && q->weights.minCoeff() < 0)
                out.push_back({s, "quadratic weights must be nonnegative", -q->weights.minCoeff()});
        }
    }
    for (std::size_t i = 0; i < instance.constraints.size(); ++i) {
        const auto& c = instance.constraints[i];
        const std::string label = "constraint " + (c.name.empty() ? std::to_string(i) : c.name);
        if (c.states.empty()) out.push_back({std::nullopt, label + " has no member states", 0});
        for (StateId s : c.states)
            if (s < 0 || s >= states.num_states())
                out.push_back({std::nullopt, label + " references unknown state " + std::to_string(s), 0});
        if (!(c.bound >= 0)) out.push_back({std::nullopt, label + " has a negative bound", -c.bound});
    }
    return report;
}

ValidationReport validate_policy(const CmdpInstance& instance, const Policy& policy) {
    ValidationReport report;
    auto& out = report.violations;
    const Index decisions = instance.num_decision_states();
    const RandomizedPolicy mixed = as_randomized(policy);
    if (static_cast<Index>(mixed.mixtures.size()) != decisions) {
        out.push_back({std::nullopt,
                       "policy covers " + std::to_string(mixed.mixtures.size()) + " states, expected " +
                           std::to_string(decisions),
                       0});
        return report;
    }
    for (StateId s = 0; s < decisions; ++s) {
        const auto& atoms = mixed.mixtures[s];
        const Index n = instance.states.next_size(s);
        if (atoms.empty()) {
            out.push_back({s, "no action for state " + instance.states.name(s), 0});
            continue;
        }
        double total = 0;
        for (const MixtureAtom& atom : atoms) {
            total += atom.weight;
            if (atom.weight < 0) out.push_back({s, "negative mixture weight", -atom.weight});
            if (atom.action.size() != n) {
                out.push_back({s,
                               "action for state " + instance.states.name(s) + " has dimension " +
                                   std::to_string(atom.action.size()) + ", expected " + std::to_string(n),
                               0});
                continue;
            }
            const double v = instance.polytopes[s].violation(atom.action);
            if (v > kFeasibilityTolerance) out.push_back({s, "action outside 𝒜(s) by " + fmt(v), v});
        }
        if (std::abs(total - 1.0) > 1e-10) out.push_back({s, "mixture weights sum to " + fmt(total), total - 1.0});
    }
    return report;
}

void require_valid(const CmdpInstance& instance) {
    const ValidationReport report = validate(instance);
    if (!report.ok()) throw InvalidArgument("invalid instance: " + report.summary());
}

} // namespace cmdpm
