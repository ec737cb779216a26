#pragma once

// Finite-horizon constrained MDP whose actions pick the next-state
// distribution from a polytope around a base distribution.

#include "cmdpm/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace cmdpm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using StateId = Eigen::Index;

inline constexpr double kFeasibilityTolerance = 1e-8;
inline constexpr double kNormalizationTolerance = 1e-9;

/// States grouped by time step. Ids are assigned layer-major, so the
/// decision (non-terminal) states are exactly ids [0, num_decision_states()).
class LayeredStateSpace {
public:
    LayeredStateSpace() = default;
    explicit LayeredStateSpace(std::vector<std::vector<std::string>> layers);

    int horizon() const { return static_cast<int>(layers_.size()); }
    Index num_states() const { return offsets_.empty() ? 0 : offsets_.back(); }
    Index num_decision_states() const { return horizon() < 2 ? 0 : offsets_[horizon() - 1]; }
    Index layer_size(int t) const { return offsets_[t + 1] - offsets_[t]; }
    Index layer_begin(int t) const { return offsets_[t]; }
    StateId id(int t, Index k) const { return offsets_[t] + k; }
    int layer_of(StateId s) const;
    Index index_in_layer(StateId s) const { return s - offsets_[layer_of(s)]; }
    bool is_terminal(StateId s) const { return s >= num_decision_states(); }
    /// Size of the layer that follows the state's layer.
    Index next_size(StateId s) const { return layer_size(layer_of(s) + 1); }
    const std::string& name(StateId s) const;
    std::optional<StateId> find(std::string_view name) const;
    const std::vector<std::vector<std::string>>& layers() const { return layers_; }

private:
    std::vector<std::vector<std::string>> layers_;
    std::vector<Index> offsets_;
    std::unordered_map<std::string, StateId> index_;
};

/// {a in simplex : H a <= h}. `box_epsilon` is set when the polytope came
/// from box_polytope and lets the serializer write the compact form.
struct ActionPolytope {
    Vector base;
    Matrix H;
    Vector h;
    std::optional<double> box_epsilon;

    Index dimension() const { return base.size(); }

    /// Largest violation of the simplex and H rows; <= 0 means inside.
    double violation(const Eigen::Ref<const Vector>& a) const;
    bool contains(const Eigen::Ref<const Vector>& a, double tol = kFeasibilityTolerance) const {
        return violation(a) <= tol;
    }
};

/// ||a - b||_inf <= epsilon intersected with the simplex: rows a_k <= b_k + eps
/// and -a_k <= -max(b_k - eps, 0).
ActionPolytope box_polytope(const Vector& base, double epsilon);

struct AffineReward {
    Vector coefficients;
    double offset = 0;
};

/// -sum_k w_k |a_k - center_k|
struct WeightedL1Reward {
    Vector center;
    Vector weights;
};

enum class Curvature { concave, convex };

/// concave: -sum_k w_k (a_k - center_k)^2, convex: the same with a plus
/// sign. Empty weights mean all ones.
struct QuadraticReward {
    Vector center;
    Curvature curvature = Curvature::concave;
    Vector weights;

    template <typename Derived> double weighted_square(const Eigen::MatrixBase<Derived>& deviation) const {
        if (weights.size() == 0) return deviation.squaredNorm();
        return weights.dot(deviation.cwiseAbs2());
    }
    double weight(Index k) const { return weights.size() == 0 ? 1.0 : weights[k]; }
};

using RewardSpec = std::variant<AffineReward, WeightedL1Reward, QuadraticReward>;

enum class Shape { affine, concave, convex };

Shape reward_shape(const RewardSpec& spec);
Index reward_dimension(const RewardSpec& spec);
const char* reward_type_name(const RewardSpec& spec);

/// r(s, a) for an action on the simplex.
template <typename Derived> double evaluate_reward(const RewardSpec& spec, const Eigen::MatrixBase<Derived>& a) {
    struct Visitor {
        const Eigen::MatrixBase<Derived>& a;
        double operator()(const AffineReward& r) const { return r.coefficients.dot(a) + r.offset; }
        double operator()(const WeightedL1Reward& r) const {
            return -r.weights.dot((a - r.center).cwiseAbs());
        }
        double operator()(const QuadraticReward& r) const {
            const double sq = r.weighted_square(a - r.center);
            return r.curvature == Curvature::concave ? -sq : sq;
        }
    };
    return std::visit(Visitor{a}, spec);
}

struct QualityConstraint {
    std::vector<StateId> states;
    double bound = 0;
    std::string name;
};

struct CmdpInstance {
    LayeredStateSpace states;
    std::vector<ActionPolytope> polytopes; ///< one per decision state
    std::vector<RewardSpec> rewards;       ///< one per decision state
    Vector alpha;                          ///< over the first layer
    std::vector<QualityConstraint> constraints;

    Index num_decision_states() const { return states.num_decision_states(); }
};

struct MixtureAtom {
    double weight = 0;
    Vector action;
};

struct DeterministicPolicy {
    std::vector<Vector> actions; ///< one per decision state
};

struct RandomizedPolicy {
    std::vector<std::vector<MixtureAtom>> mixtures; ///< one per decision state
};

using Policy = std::variant<DeterministicPolicy, RandomizedPolicy>;

RandomizedPolicy as_randomized(const Policy& policy);

struct Violation {
    std::optional<StateId> state;
    std::string message;
    double magnitude = 0;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Checks every structural invariant of the instance. Never throws.
ValidationReport validate(const CmdpInstance& instance);

/// Checks that the policy has the right shape and stays inside each A(s).
ValidationReport validate_policy(const CmdpInstance& instance, const Policy& policy);

/// Throws InvalidArgument carrying the report summary when validation fails.
void require_valid(const CmdpInstance& instance);

} // namespace cmdpm
