#pragma once

// Occupancy-measure program over u(s, s') and d(s):
//
//   maximize   sum_s r_bar(s, u(s, .))
//   subject to d(s) = alpha(s)                 first layer
//              d(s) = sum_s' u(s, s')          decision states
//              d(s') = sum_s u(s, s')          every later layer
//              sum_{s in Q_i} d(s) <= q_i
//              H_s u(s, .) - h_s d(s) <= 0

#include "cmdpm/lp.hpp"
#include "cmdpm/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmdpm {

struct OccupancyOptions {
    /// Enables the tangent-cut approximation of concave quadratic rewards
    /// with this many cuts per coordinate. The result is an upper bound on
    /// the true optimum and the solution is flagged approximate.
    std::optional<int> quadratic_cuts;
    LpOptions lp;
};

inline constexpr int kDefaultQuadraticCuts = 16;

/// Column positions inside the built LP. u variables are laid out state by
/// state (layer-major), then one d per state, then auxiliaries.
struct OccupancyLayout {
    std::vector<Index> u_begin; ///< per decision state; next_size(s) consecutive columns
    Index d_begin = 0;
    Index num_u = 0;
    Index num_aux = 0;

    Index u(StateId s, Index k) const { return u_begin[s] + k; }
    Index d(StateId s) const { return d_begin + s; }
};

struct OccupancyProgram {
    LpProblem lp;
    OccupancyLayout layout;
    bool approximate = false;
};

struct LpStats {
    Index variables = 0;
    Index equalities = 0;
    Index inequalities = 0;
    long iterations = 0;
};

struct OccupancySolution {
    std::vector<Vector> u; ///< per decision state, over the next layer
    Vector d;              ///< per state
    double objective = 0;
    Vector constraint_mass; ///< sum of d over each Q_i
    bool approximate = false;
    std::vector<std::string> warnings;
    LpStats stats;
};

/// Throws InvalidArgument for invalid instances and for quadratic rewards
/// that the LP cannot represent (convex always; concave unless cuts are on).
OccupancyProgram build_occupancy_lp(const CmdpInstance& instance, const OccupancyOptions& options = {});

/// Throws InfeasibleError (with the Farkas certificate) when the quality
/// constraints cannot be met.
OccupancySolution solve_occupancy(const CmdpInstance& instance, const OccupancyOptions& options = {});

/// Lexicographic variant: among optima of the instance's own objective,
/// maximizes the secondary rewards. Used to make tie-breaking explicit.
OccupancySolution solve_occupancy_lexicographic(const CmdpInstance& instance,
                                                const std::vector<RewardSpec>& secondary,
                                                const OccupancyOptions& options = {});

/// pi(s) = u(s, .) / d(s) where d(s) > 1e-9, otherwise b(s). A ratio that
/// drifts outside A(s) by round-off is pulled back along the segment to b(s).
DeterministicPolicy extract_policy(const OccupancySolution& solution, const CmdpInstance& instance);

/// sum over Q_i of d, one entry per quality constraint.
Vector constraint_masses(const CmdpInstance& instance, const Vector& d);

} // namespace cmdpm
