// Command-line front end: solve, generate, evaluate, benchmark, vertices.

#include "cmdpm/envelope.hpp"
#include "cmdpm/evaluator.hpp"
#include "cmdpm/io.hpp"
#include "cmdpm/loan.hpp"
#include "cmdpm/solve.hpp"
#include "cmdpm/vertices.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace cmdpm;
using Clock = std::chrono::steady_clock;

enum Exit : int { kOk = 0, kError = 1, kInfeasible = 2, kTimeout = 3 };

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Records the command line and input contents, then writes <out>.manifest.json.
class ManifestWriter {
public:
    ManifestWriter(std::string command, std::vector<std::string> arguments)
        : start_(Clock::now()) {
        m_.command = std::move(command);
        m_.arguments = std::move(arguments);
        for (const auto& a : m_.arguments) hashed_ += a + '\0';
    }

    void add_input(const std::string& path) { hashed_ += slurp(path) + '\0'; }
    void set_seed(std::uint64_t seed) { m_.seed = seed; }
    void add_output(const std::string& path) { m_.outputs.push_back(path); }

    void write(const std::string& primary_output) {
        m_.config_hash = fnv1a_hex(hashed_);
        m_.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
        write_json(primary_output + ".manifest.json", manifest_to_json(m_));
    }

private:
    RunManifest m_;
    std::string hashed_;
    Clock::time_point start_;
};

std::optional<double> default_timeout() {
    const char* env = std::getenv("CMDPM_TIMEOUT_SECONDS");
    if (!env || !*env) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (*end != '\0' || !(v > 0)) throw InvalidArgument("CMDPM_TIMEOUT_SECONDS must be a positive number");
    return v;
}

Clock::time_point deadline_after(double seconds) {
    return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

/// "5..30", "5..30:5" or "4,6,8".
std::vector<int> parse_states(const std::string& spec) {
    std::vector<int> out;
    const auto dots = spec.find("..");
    if (dots == std::string::npos) {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    } else {
        const int lo = std::stoi(spec.substr(0, dots));
        std::string rest = spec.substr(dots + 2);
        int step = 1;
        if (const auto colon = rest.find(':'); colon != std::string::npos) {
            step = std::stoi(rest.substr(colon + 1));
            rest = rest.substr(0, colon);
        }
        const int hi = std::stoi(rest);
        if (step <= 0 || hi < lo) throw InvalidArgument("bad state range '" + spec + "'");
        for (int n = lo; n <= hi; n += step) out.push_back(n);
    }
    if (out.empty()) throw InvalidArgument("empty state range '" + spec + "'");
    return out;
}

/// "lo:hi:step", endpoints included.
std::vector<double> parse_sweep(const std::string& spec) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || hi < lo)
        throw InvalidArgument("bad q-sweep '" + spec + "', expected lo:hi:step");
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

std::vector<Method> parse_methods(const std::string& spec) {
    std::vector<Method> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto m = parse_method(item);
        if (!m) throw InvalidArgument("unknown method '" + item + "'");
        out.push_back(*m);
    }
    return out;
}

VertexMethod parse_vertex_method(const std::string& name) {
    if (name == "exhaustive") return VertexMethod::exhaustive;
    if (name == "box") return VertexMethod::box;
    if (name == "auto") return VertexMethod::automatic;
    throw InvalidArgument("unknown vertex method '" + name + "'");
}

const std::map<std::string, std::string> kMethodNames{{"convex", "convex"},
                                                      {"extreme", "extreme"},
                                                      {"envelope", "envelope"},
                                                      {"greedy", "greedy"},
                                                      {"naive-linear", "naive-linear"}};
const std::map<std::string, std::string> kRewardNames{{"l1", "l1"}, {"quad", "quad"}, {"affine", "affine"}};
const std::map<std::string, std::string> kVertexNames{{"exhaustive", "exhaustive"}, {"box", "box"}, {"auto", "auto"}};

struct SolveArgs {
    std::string problem, method = "convex", out, d_csv, mps;
    std::string vertices = "exhaustive";
    std::optional<int> cuts;
    std::optional<double> timeout;
    Index max_dimension = 25;
};

int run_solve(const SolveArgs& a, const std::vector<std::string>& argv) {
    ManifestWriter manifest("solve", argv);
    manifest.add_input(a.problem);
    const CmdpInstance instance = read_problem(a.problem);
    const Method method = *parse_method(a.method);
    SolveOptions opt;
    opt.quadratic_cuts = a.cuts;
    opt.extreme_vertices = parse_vertex_method(a.vertices);
    opt.max_dimension = a.max_dimension;
    if (const auto t = a.timeout ? a.timeout : default_timeout()) opt.deadline = deadline_after(*t);

    if (!a.mps.empty()) {
        OccupancyOptions occ;
        occ.quadratic_cuts = a.cuts;
        export_mps(build_occupancy_lp(instance, occ).lp, a.mps);
        manifest.add_output(a.mps);
    }
    const SolveResult r = solve(instance, method, opt);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';

    if (!a.out.empty()) {
        write_json(a.out, solution_to_json(r, method, instance));
        manifest.add_output(a.out);
    }
    if (!a.d_csv.empty() && r.d.size()) {
        std::ofstream csv(a.d_csv);
        write_d_csv(csv, r.d, instance.states);
        manifest.add_output(a.d_csv);
    }
    if (!a.out.empty()) manifest.write(a.out);

    switch (r.status) {
    case SolveStatus::optimal:
        std::cout << "optimal objective " << std::setprecision(12) << r.objective << '\n';
        return kOk;
    case SolveStatus::infeasible: {
        std::cout << "infeasible: " << r.message << '\n';
        if (!r.certificate.empty()) {
            double largest = 0;
            for (double y : r.certificate) largest = std::max(largest, std::abs(y));
            std::cout << "certificate: Farkas multipliers over " << r.certificate.size() << " rows, max |y| "
                      << largest << '\n';
        }
        return kInfeasible;
    }
    case SolveStatus::timeout:
        std::cout << "timeout: " << r.message << '\n';
        return kTimeout;
    }
    return kError;
}

struct GenerateArgs {
    LoanConfig cfg;
    std::string reward = "l1", out;
};

int run_generate(GenerateArgs a, const std::vector<std::string>& argv) {
    ManifestWriter manifest("generate loan", argv);
    manifest.set_seed(a.cfg.seed);
    a.cfg.reward = *parse_loan_reward(a.reward);
    const CmdpInstance instance = generate_loan_instance(a.cfg);
    write_json(a.out, problem_to_json(instance));
    manifest.add_output(a.out);
    manifest.write(a.out);
    std::cout << "wrote " << a.out << " (" << instance.states.num_states() << " states)\n";
    return kOk;
}

struct EvaluateArgs {
    std::string problem, policy, out, d_csv;
    long simulate = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
    ManifestWriter manifest("evaluate", argv);
    manifest.add_input(a.problem);
    manifest.add_input(a.policy);
    manifest.set_seed(a.seed);
    const CmdpInstance instance = read_problem(a.problem);
    Json doc = read_json(a.policy);
    // a solution file carries its policy under "policy"
    if (doc.is_object() && doc.contains("method") && doc.contains("policy")) doc = doc["policy"];
    const Policy policy = policy_from_json(doc, instance);

    const EvaluationReport exact = evaluate_exact(instance, policy);
    std::optional<EvaluationReport> sim;
    if (a.simulate > 0) sim = simulate(instance, policy, a.simulate, a.seed, a.threads);

    std::cout << "exact return " << std::setprecision(12) << exact.return_value
              << (exact.feasible ? "" : " (violates a quality constraint)") << '\n';
    if (sim)
        std::cout << "simulated return " << sim->return_value << " +/- " << sim->return_stderr << " ("
                  << sim->trajectories << " trajectories, seed " << sim->seed << ")\n";
    if (!a.out.empty()) {
        write_json(a.out, report_to_json(exact, sim ? &*sim : nullptr, instance));
        manifest.add_output(a.out);
    }
    if (!a.d_csv.empty()) {
        std::ofstream csv(a.d_csv);
        write_d_csv(csv, exact.d, instance.states);
        manifest.add_output(a.d_csv);
    }
    if (!a.out.empty()) manifest.write(a.out);
    return kOk;
}

struct BenchmarkArgs {
    std::string states = "5..30:5", methods = "extreme,convex", sweep, out, reward = "affine";
    std::string vertices = "exhaustive";
    LoanConfig base;
    std::optional<double> timeout;
};

int run_benchmark_cmd(BenchmarkArgs a, const std::vector<std::string>& argv) {
    ManifestWriter manifest("benchmark", argv);
    BenchmarkConfig cfg;
    cfg.states = parse_states(a.states);
    cfg.methods = parse_methods(a.methods);
    a.base.reward = *parse_loan_reward(a.reward);
    cfg.base = a.base;
    cfg.solve.extreme_vertices = parse_vertex_method(a.vertices);
    if (const auto t = a.timeout ? a.timeout : default_timeout()) cfg.timeout_seconds = *t;

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw InvalidArgument("cannot write " + a.out);
    }
    std::ostream& csv = a.out.empty() ? std::cout : file;
    write_csv_header(csv);
    const auto sink = [&](const BenchmarkRecord& r) {
        write_csv_row(csv, r);
        csv.flush();
        if (!a.out.empty())
            std::cerr << r.method << " n=" << r.n_states << " q=" << r.q << ": " << r.status << " " << r.wall_ms
                      << " ms\n";
    };
    if (a.sweep.empty()) {
        run_benchmark(cfg, sink);
    } else {
        if (cfg.states.size() != 1) throw InvalidArgument("--q-sweep needs a single --states value");
        cfg.base.n_states = cfg.states.front();
        const std::vector<double> bounds = parse_sweep(a.sweep);
        run_q_sweep(cfg, bounds, sink);
    }
    if (!a.out.empty()) {
        manifest.add_output(a.out);
        manifest.write(a.out);
    }
    return kOk;
}

struct VerticesArgs {
    std::string problem, out, method = "auto";
    Index max_dimension = 25;
};

int run_vertices(const VerticesArgs& a, const std::vector<std::string>& argv) {
    ManifestWriter manifest("vertices export", argv);
    manifest.add_input(a.problem);
    const CmdpInstance instance = read_problem(a.problem);
    VertexOptions opt;
    opt.method = parse_vertex_method(a.method);
    opt.max_dimension = a.max_dimension;
    const VertexSet vs = enumerate_all(instance, opt);
    write_json(a.out, vertices_to_json(vs, instance));
    manifest.add_output(a.out);
    manifest.write(a.out);
    std::cout << vs.total() << " vertices\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-horizon constrained MDPs with probability modulation"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    const std::vector<std::string> args(argv + 1, argv + argc);

    SolveArgs sa;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a problem file");
    solve_cmd->add_option("problem", sa.problem, "Problem JSON")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--method", sa.method, "Solution method")
        ->transform(CLI::CheckedTransformer(kMethodNames));
    solve_cmd->add_option("--out", sa.out, "Solution JSON (a manifest is written next to it)");
    solve_cmd->add_option("--d-csv", sa.d_csv, "Per-state visitation as CSV");
    solve_cmd->add_option("--export-lp", sa.mps, "Write the occupancy LP in MPS format");
    solve_cmd->add_option("--quadratic-cuts", sa.cuts, "Tangent cuts per coordinate for concave quadratics")
        ->check(CLI::Range(2, 100000));
    solve_cmd->add_option("--vertices", sa.vertices, "Vertex enumeration for --method extreme")
        ->transform(CLI::CheckedTransformer(kVertexNames));
    solve_cmd->add_option("--max-dimension", sa.max_dimension, "Largest polytope for exhaustive enumeration");
    solve_cmd->add_option("--timeout", sa.timeout, "Seconds (default: $CMDPM_TIMEOUT_SECONDS)")
        ->check(CLI::PositiveNumber);

    GenerateArgs ga;
    auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic instance");
    gen_cmd->require_subcommand(1);
    auto* loan_cmd = gen_cmd->add_subcommand("loan", "Loan-delinquency instance");
    loan_cmd->add_option("--states", ga.cfg.n_states, "Delinquency levels")->check(CLI::Range(3, 100000));
    loan_cmd->add_option("--horizon", ga.cfg.horizon, "Periods")->check(CLI::Range(2, 100000));
    loan_cmd->add_option("--epsilon", ga.cfg.epsilon, "Modulation budget per coordinate");
    loan_cmd->add_option("--qbound", ga.cfg.q_default, "Bound on terminal default mass");
    loan_cmd->add_option("--reward", ga.reward, "l1, quad or affine")->transform(CLI::CheckedTransformer(kRewardNames));
    loan_cmd->add_option("--stay", ga.cfg.stay, "Stay probability for levels above 1");
    loan_cmd->add_option("--default-jump", ga.cfg.default_jump, "Share of worsening mass that jumps to default");
    loan_cmd->add_option("--seed", ga.cfg.seed, "Recorded in the manifest");
    loan_cmd->add_option("--out", ga.out, "Problem JSON")->required();

    EvaluateArgs ea;
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a policy");
    eval_cmd->add_option("problem", ea.problem, "Problem JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("policy", ea.policy, "Policy or solution JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--simulate", ea.simulate, "Monte Carlo trajectories")->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--seed", ea.seed, "64-bit simulation seed");
    eval_cmd->add_option("--threads", ea.threads, "Simulation workers (0 = hardware)");
    eval_cmd->add_option("--out", ea.out, "Report JSON");
    eval_cmd->add_option("--d-csv", ea.d_csv, "Exact per-state visitation as CSV");

    BenchmarkArgs ba;
    auto* bench_cmd = app.add_subcommand("benchmark", "Time methods on loan instances");
    bench_cmd->add_option("--states", ba.states, "a..b, a..b:step or a,b,c");
    bench_cmd->add_option("--methods", ba.methods, "Comma-separated methods");
    bench_cmd->add_option("--q-sweep", ba.sweep, "lo:hi:step over the default bound (single --states value)");
    bench_cmd->add_option("--reward", ba.reward, "l1, quad or affine")->transform(CLI::CheckedTransformer(kRewardNames));
    bench_cmd->add_option("--horizon", ba.base.horizon, "Periods");
    bench_cmd->add_option("--epsilon", ba.base.epsilon, "Modulation budget");
    bench_cmd->add_option("--qbound", ba.base.q_default, "Default bound when not sweeping");
    bench_cmd->add_option("--vertices", ba.vertices, "Vertex enumeration for the extreme method")
        ->transform(CLI::CheckedTransformer(kVertexNames));
    bench_cmd->add_option("--timeout", ba.timeout, "Per-cell seconds (default 300 or $CMDPM_TIMEOUT_SECONDS)")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", ba.out, "CSV file (stdout when omitted)");

    VerticesArgs va;
    auto* vert_cmd = app.add_subcommand("vertices", "Vertex sets");
    vert_cmd->require_subcommand(1);
    auto* export_cmd = vert_cmd->add_subcommand("export", "Write every state's vertices as JSON");
    export_cmd->add_option("problem", va.problem, "Problem JSON")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--out", va.out, "Vertex JSON")->required();
    export_cmd->add_option("--method", va.method, "exhaustive, box or auto")
        ->transform(CLI::CheckedTransformer(kVertexNames));
    export_cmd->add_option("--max-dimension", va.max_dimension, "Largest polytope for exhaustive enumeration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kError;
    }

    try {
        if (*solve_cmd) return run_solve(sa, args);
        if (*loan_cmd) return run_generate(ga, args);
        if (*eval_cmd) return run_evaluate(ea, args);
        if (*bench_cmd) return run_benchmark_cmd(ba, args);
        if (*export_cmd) return run_vertices(va, args);
    } catch (const TimeoutError& e) {
        std::cerr << "timeout: " << e.what() << '\n';
        return kTimeout;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
