#pragma once

// Policy evaluation by forward recursion and by Monte Carlo simulation.

#include "cmdpm/model.hpp"

#include <cstdint>

namespace cmdpm {

struct EvaluationReport {
    Vector d;               ///< visitation probability per state
    double return_value = 0;
    Vector constraint_mass; ///< sum of d over each Q_i
    Vector slack;           ///< q_i - mass
    bool feasible = true;
    // simulation only
    double return_stderr = 0;
    long trajectories = 0;
    std::uint64_t seed = 0;
};

/// Exact d and return. Randomized policies earn the mixture expectation of
/// the reward, not the reward of the mean action. Throws InvalidArgument if
/// the policy does not fit the instance.
EvaluationReport evaluate_exact(const CmdpInstance& instance, const Policy& policy);

/// Empirical d and return from sampled trajectories. Trajectory i draws from
/// CounterRng(seed, i) and batches are reduced in a fixed order, so a given
/// seed yields a bit-identical report regardless of thread scheduling.
EvaluationReport simulate(const CmdpInstance& instance, const Policy& policy, long trajectories, std::uint64_t seed,
                          unsigned threads = 0);

} // namespace cmdpm
