#pragma once

// Extreme points of action polytopes and the finite-action CMDP built on them.

#include "cmdpm/lp.hpp"
#include "cmdpm/model.hpp"
#include "cmdpm/occupancy.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <vector>

namespace cmdpm {

enum class VertexMethod {
    exhaustive, ///< every choice of n-1 active rows, solved and filtered
    box,        ///< axis-aligned rows only: at most one coordinate off its bounds
    automatic,  ///< box when every H row is an axis bound, exhaustive otherwise
};

struct VertexOptions {
    VertexMethod method = VertexMethod::exhaustive;
    Index max_dimension = 25; ///< exhaustive enumeration refuses larger polytopes
    double dedup_tolerance = 1e-7;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Vertices of {a in simplex : H a <= h}, one per column. Throws
/// InvalidArgument for an empty polytope or when the exhaustive method is
/// asked for more than max_dimension coordinates, TimeoutError past the deadline.
Matrix enumerate_vertices(const ActionPolytope& polytope, const VertexOptions& options = {});

/// True when every H row constrains a single coordinate.
bool is_axis_aligned(const ActionPolytope& polytope);

/// Per-state vertex matrices. States with identical polytopes share one matrix.
struct VertexSet {
    std::vector<std::shared_ptr<const Matrix>> per_state;
    double dedup_tolerance = 1e-7;

    const Matrix& operator[](StateId s) const { return *per_state[s]; }
    Index total() const;
};

VertexSet enumerate_all(const CmdpInstance& instance, const VertexOptions& options = {});

struct FiniteActionSet {
    std::shared_ptr<const Matrix> transitions; ///< one column per action, each in the simplex
    Vector rewards;

    Index size() const { return rewards.size(); }
};

struct FiniteCmdp {
    LayeredStateSpace states;
    Vector alpha;
    std::vector<QualityConstraint> constraints;
    std::vector<FiniteActionSet> actions; ///< per decision state
    std::vector<Vector> base;             ///< b(s), used as the action of unreachable states
};

FiniteCmdp build_finite_cmdp(const CmdpInstance& instance, const VertexSet& vertices);

struct FiniteSolution {
    double objective = 0;
    RandomizedPolicy policy;
    Vector d;
    std::vector<Vector> weights; ///< u(s, i) per decision state and action
    Vector constraint_mass;
    LpStats stats;
};

/// Occupancy LP over u(s, i) >= 0. Unreachable states get b(s) written as
/// a mixture of their actions. Throws InfeasibleError with the certificate.
FiniteSolution solve_finite(const FiniteCmdp& fc, const LpOptions& options = {});

/// Each state's mixture collapsed to its mean action.
DeterministicPolicy mix_to_point(const RandomizedPolicy& policy);

/// A basic solution of  sum_i l_i v_i = a, sum l = 1, l >= 0. Throws
/// InfeasibleError when a lies outside the convex hull of the columns.
std::vector<MixtureAtom> point_to_mix(const Vector& a, const Matrix& vertices);

} // namespace cmdpm
