#pragma once

// JSON and CSV formats for problems, policies, solutions, evaluation
// reports, vertex sets and run manifests. The problem schema is documented
// in README.md; unknown fields are rejected everywhere.

#include "cmdpm/evaluator.hpp"
#include "cmdpm/model.hpp"
#include "cmdpm/solve.hpp"
#include "cmdpm/vertices.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cmdpm {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// Throws InvalidArgument naming the offending field path.
CmdpInstance problem_from_json(const Json& doc);
/// Box polytopes are written in their compact epsilon form, so generated
/// instances round-trip exactly.
Json problem_to_json(const CmdpInstance& instance);

Policy policy_from_json(const Json& doc, const CmdpInstance& instance);
Json policy_to_json(const Policy& policy, const CmdpInstance& instance);

Json solution_to_json(const SolveResult& result, Method method, const CmdpInstance& instance);

/// `simulated` may be null.
Json report_to_json(const EvaluationReport& exact, const EvaluationReport* simulated, const CmdpInstance& instance);

Json vertices_to_json(const VertexSet& vertices, const CmdpInstance& instance);

/// Columns: state,layer,d
void write_d_csv(std::ostream& out, const Vector& d, const LayeredStateSpace& states);

struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    double wall_ms = 0;
    std::vector<std::string> outputs;
};

Json manifest_to_json(const RunManifest& manifest);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);

inline CmdpInstance read_problem(const std::filesystem::path& path) { return problem_from_json(read_json(path)); }

} // namespace cmdpm
