#pragma once

// Positively homogeneous lifts of rewards and polytope rows:
// f_bar(a) = (1'a) f(a / 1'a), with f_bar(0) = 0.

#include "cmdpm/model.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace cmdpm {

class ExtendedReward {
public:
    explicit ExtendedReward(RewardSpec spec) : spec_(std::move(spec)) {}

    template <typename Derived> double operator()(const Eigen::MatrixBase<Derived>& a) const {
        const double mass = a.sum();
        struct Visitor {
            const Eigen::MatrixBase<Derived>& a;
            double mass;
            double operator()(const AffineReward& r) const { return r.coefficients.dot(a) + mass * r.offset; }
            double operator()(const WeightedL1Reward& r) const {
                return -r.weights.dot((a - mass * r.center).cwiseAbs());
            }
            double operator()(const QuadraticReward& r) const {
                if (mass <= 0) return 0;
                const double sq = r.weighted_square(a - mass * r.center) / mass;
                return r.curvature == Curvature::concave ? -sq : sq;
            }
        };
        return std::visit(Visitor{a, mass}, spec_);
    }

    const RewardSpec& spec() const { return spec_; }
    Shape shape() const { return reward_shape(spec_); }
    Index dimension() const { return reward_dimension(spec_); }

private:
    RewardSpec spec_;
};

inline ExtendedReward extend_reward(const RewardSpec& spec) { return ExtendedReward(spec); }

/// H_j a - h_j (1'a) <= 0
struct ExtendedConstraintRow {
    Eigen::RowVectorXd coefficients;
    double offset = 0;

    template <typename Derived> double operator()(const Eigen::MatrixBase<Derived>& a) const {
        return coefficients.dot(a.transpose()) - offset * a.sum();
    }
};

std::vector<ExtendedConstraintRow> extend_polytope(const ActionPolytope& polytope);

struct ShapeCheck {
    bool holds = true;
    std::optional<std::pair<Vector, Vector>> witness;
};

/// Midpoint test on random pairs in [0,1]^dim \ {0}. `expected` picks the
/// direction: concave checks f((x+y)/2) >= (f(x)+f(y))/2 - 1e-9, convex the
/// reverse, affine both.
ShapeCheck check_midpoint(const ExtendedReward& ext, Shape expected, Index dim, int samples,
                          std::uint64_t seed = 1);

inline ShapeCheck check_concavity(const ExtendedReward& ext, Index dim, int samples, std::uint64_t seed = 1) {
    return check_midpoint(ext, Shape::concave, dim, samples, seed);
}

} // namespace cmdpm
