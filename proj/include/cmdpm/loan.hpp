#pragma once

// Synthetic loan-delinquency instances, the month-by-month greedy baseline
// and the timing harness.

#include "cmdpm/model.hpp"
#include "cmdpm/solve.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cmdpm {

enum class LoanReward {
    l1,                ///< -||a - b||_1
    quadratic_convex,  ///< +||a - b||_2^2
    affine_surrogate,  ///< -w'(a - b), w_j = 1 - (j-1)/(n-1)
};

const char* to_string(LoanReward kind);
std::optional<LoanReward> parse_loan_reward(std::string_view name);

/// Delinquency levels 1..n, level n is default. From level k:
///   worsening  p_up(k) = c log(1+k) / log(1+n), c = 0.9 log(1+n) / log(n)
///              a default_jump share goes straight to n, the rest to k+1
///   staying    stay for k > 1, the residual for k = 1
///   improving  the remainder, uniform over levels 1..k-1
/// Default is absorbing and cannot be modulated.
struct LoanConfig {
    int n_states = 8;
    int horizon = 6;
    double epsilon = 0.4;
    double q_default = 0.04;
    LoanReward reward = LoanReward::l1;
    double stay = 0.1;
    double default_jump = 0.03;
    std::uint64_t seed = 0; ///< recorded for manifests; generation itself is deterministic
};

/// Base transition row of level k (1-based). Throws InvalidArgument naming
/// the level when the parameters do not give a probability vector.
Vector loan_base_row(int k, const LoanConfig& config);

CmdpInstance generate_loan_instance(const LoanConfig& config);

struct GreedyResult {
    bool feasible = false;
    double objective = 0; ///< true evaluated return of the committed policy
    DeterministicPolicy policy;
    int failed_period = -1; ///< first period whose LP was infeasible
    std::vector<std::string> warnings;
};

/// Period by period: optimize period t's modulation with earlier periods
/// committed and later periods frozen at b, then commit it.
GreedyResult greedy_baseline(const CmdpInstance& instance, const LpOptions& options = {});

struct BenchmarkRecord {
    std::string method;
    int n_states = 0;
    int horizon = 0;
    double epsilon = 0;
    double q = 0;
    double objective = 0;
    double wall_ms = 0;
    std::string status;
    Index vertices_total = 0;
    bool feasible = false;
};

struct BenchmarkConfig {
    std::vector<int> states;
    std::vector<Method> methods;
    LoanConfig base;
    double timeout_seconds = 300;
    SolveOptions solve{std::nullopt, VertexMethod::exhaustive, 1000, std::nullopt};
};

using RecordSink = std::function<void(const BenchmarkRecord&)>;

/// One record per (n, method), in that order. Timeouts and solver errors
/// are recorded in the status column.
std::vector<BenchmarkRecord> run_benchmark(const BenchmarkConfig& config, const RecordSink& sink = {});

/// The same instance solved for each quality bound.
std::vector<BenchmarkRecord> run_q_sweep(const BenchmarkConfig& config, std::span<const double> bounds,
                                         const RecordSink& sink = {});

inline constexpr const char* kBenchmarkCsvHeader =
    "method,n_states,horizon,epsilon,q,objective,wall_ms,status,vertices_total";

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const BenchmarkRecord& record);

} // namespace cmdpm
