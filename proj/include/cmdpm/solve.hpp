#pragma once

// One entry point over every solution method, used by the CLI and the
// benchmark harness.

#include "cmdpm/model.hpp"
#include "cmdpm/occupancy.hpp"
#include "cmdpm/vertices.hpp"

#include <chrono>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmdpm {

enum class Method { convex, extreme, envelope, greedy, naive_linear };

const char* to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

struct SolveOptions {
    std::optional<int> quadratic_cuts;
    VertexMethod extreme_vertices = VertexMethod::exhaustive;
    Index max_dimension = 25;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

enum class SolveStatus { optimal, infeasible, timeout };

const char* to_string(SolveStatus status);

struct SolveResult {
    SolveStatus status = SolveStatus::optimal;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::optional<Policy> policy;
    Vector d;
    Vector constraint_mass;
    Index vertices_total = 0;
    LpStats stats;
    std::string message;
    std::vector<std::string> warnings;
    std::vector<double> certificate;
};

/// Runs one method. Infeasibility and timeouts come back as statuses;
/// malformed input and method/reward mismatches throw InvalidArgument.
SolveResult solve(const CmdpInstance& instance, Method method, const SolveOptions& options = {});

} // namespace cmdpm
