#include "cmdpm/loan.hpp"

#include "cmdpm/evaluator.hpp"
#include "cmdpm/occupancy.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace cmdpm {

const char* to_string(LoanReward kind) {
    switch (kind) {
    case LoanReward::l1: return "l1";
    case LoanReward::quadratic_convex: return "quad";
    case LoanReward::affine_surrogate: return "affine";
    }
    return "?";
}

std::optional<LoanReward> parse_loan_reward(std::string_view name) {
    for (LoanReward k : {LoanReward::l1, LoanReward::quadratic_convex, LoanReward::affine_surrogate})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

Vector loan_base_row(int k, const LoanConfig& cfg) {
    const int n = cfg.n_states;
    if (n < 3) throw InvalidArgument("loan generator: n_states must be at least 3");
    if (k < 1 || k > n) throw InvalidArgument("loan generator: level " + std::to_string(k) + " out of range");
    Vector row = Vector::Zero(n);
    if (k == n) {
        row[n - 1] = 1;
        return row;
    }
    const double c = 0.9 * std::log(1.0 + n) / std::log(static_cast<double>(n));
    const double up = c * std::log(1.0 + k) / std::log(1.0 + n);
    const double stay = k == 1 ? 1 - up : cfg.stay;
    double improve = 1 - up - stay;
    if (std::abs(improve) < 1e-12) improve = 0;
    if (up < 0 || stay < 0 || improve < 0 || (k == 1 && improve != 0))
        throw InvalidArgument("loan generator: level " + std::to_string(k) + " has no valid transition row (up " +
                              std::to_string(up) + ", stay " + std::to_string(stay) + ")");
    row[k - 1] += stay;
    row[n - 1] += cfg.default_jump * up;
    row[k] += (1 - cfg.default_jump) * up;
    for (int j = 1; j < k; ++j) row[j - 1] += improve / (k - 1);
    return row;
}

CmdpInstance generate_loan_instance(const LoanConfig& cfg) {
    if (cfg.horizon < 2) throw InvalidArgument("loan generator: horizon must be at least 2");
    if (!(cfg.epsilon >= 0)) throw InvalidArgument("loan generator: epsilon must be nonnegative");
    if (!(cfg.q_default >= 0)) throw InvalidArgument("loan generator: q_default must be nonnegative");
    if (!(cfg.default_jump >= 0 && cfg.default_jump <= 1))
        throw InvalidArgument("loan generator: default_jump must lie in [0, 1]");
    const int n = cfg.n_states;
    std::vector<Vector> rows;
    for (int k = 1; k <= n; ++k) rows.push_back(loan_base_row(k, cfg));

    std::vector<std::vector<std::string>> layers(static_cast<std::size_t>(cfg.horizon));
    for (int t = 0; t < cfg.horizon; ++t)
        for (int k = 1; k <= n; ++k) layers[t].push_back("t" + std::to_string(t + 1) + "_L" + std::to_string(k));

    CmdpInstance in;
    in.states = LayeredStateSpace(std::move(layers));
    Vector w(n);
    for (int j = 0; j < n; ++j) w[j] = 1.0 - static_cast<double>(j) / (n - 1);
    for (StateId s = 0; s < in.states.num_decision_states(); ++s) {
        const auto k = static_cast<int>(in.states.index_in_layer(s)) + 1;
        const Vector& b = rows[k - 1];
        in.polytopes.push_back(box_polytope(b, k == n ? 0.0 : cfg.epsilon));
        switch (cfg.reward) {
        case LoanReward::l1: in.rewards.emplace_back(WeightedL1Reward{b, Vector::Ones(n)}); break;
        case LoanReward::quadratic_convex: in.rewards.emplace_back(QuadraticReward{b, Curvature::convex, {}}); break;
        case LoanReward::affine_surrogate: in.rewards.emplace_back(AffineReward{-w, w.dot(b)}); break;
        }
    }
    in.alpha = Vector::Unit(n, 0);
    in.constraints.push_back({{in.states.id(cfg.horizon - 1, n - 1)}, cfg.q_default, "default"});
    return in;
}

GreedyResult greedy_baseline(const CmdpInstance& instance, const LpOptions& options) {
    require_valid(instance);
    const auto& S = instance.states;
    const Index decisions = S.num_decision_states();
    GreedyResult out;
    std::vector<Vector> committed;
    for (StateId s = 0; s < decisions; ++s) committed.push_back(instance.polytopes[s].base);

    OccupancyOptions opt;
    opt.lp = options;
    for (int t = 0; t + 1 < S.horizon(); ++t) {
        CmdpInstance period = instance;
        for (StateId s = 0; s < decisions; ++s)
            if (S.layer_of(s) != t) period.polytopes[s] = box_polytope(committed[s], 0.0);
        OccupancySolution sol;
        try {
            sol = solve_occupancy(period, opt);
        } catch (const InfeasibleError&) {
            out.failed_period = t;
            return out;
        }
        out.warnings.insert(out.warnings.end(), sol.warnings.begin(), sol.warnings.end());
        const DeterministicPolicy step = extract_policy(sol, period);
        for (Index k = 0; k < S.layer_size(t); ++k) committed[S.id(t, k)] = step.actions[S.id(t, k)];
    }
    out.policy.actions = std::move(committed);
    const EvaluationReport report = evaluate_exact(instance, out.policy);
    out.objective = report.return_value;
    out.feasible = report.feasible;
    if (!out.feasible) out.failed_period = S.horizon() - 2;
    return out;
}

namespace {

BenchmarkRecord run_cell(const CmdpInstance& instance, const LoanConfig& cfg, Method method,
                         const BenchmarkConfig& config) {
    BenchmarkRecord rec;
    rec.method = to_string(method);
    rec.n_states = cfg.n_states;
    rec.horizon = cfg.horizon;
    rec.epsilon = cfg.epsilon;
    rec.q = cfg.q_default;
    rec.objective = std::numeric_limits<double>::quiet_NaN();
    SolveOptions opt = config.solve;
    const auto start = std::chrono::steady_clock::now();
    opt.deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                               std::chrono::duration<double>(config.timeout_seconds));
    try {
        const SolveResult r = solve(instance, method, opt);
        rec.status = to_string(r.status);
        rec.objective = r.objective;
        rec.vertices_total = r.vertices_total;
        rec.feasible = r.status == SolveStatus::optimal;
    } catch (const Error&) {
        rec.status = "error";
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

} // namespace

std::vector<BenchmarkRecord> run_benchmark(const BenchmarkConfig& config, const RecordSink& sink) {
    std::vector<BenchmarkRecord> records;
    for (int n : config.states) {
        LoanConfig cfg = config.base;
        cfg.n_states = n;
        const CmdpInstance instance = generate_loan_instance(cfg);
        for (Method m : config.methods) {
            records.push_back(run_cell(instance, cfg, m, config));
            if (sink) sink(records.back());
        }
    }
    return records;
}

std::vector<BenchmarkRecord> run_q_sweep(const BenchmarkConfig& config, std::span<const double> bounds,
                                         const RecordSink& sink) {
    std::vector<BenchmarkRecord> records;
    for (double q : bounds) {
        LoanConfig cfg = config.base;
        cfg.q_default = q;
        const CmdpInstance instance = generate_loan_instance(cfg);
        for (Method m : config.methods) {
            records.push_back(run_cell(instance, cfg, m, config));
            if (sink) sink(records.back());
        }
    }
    return records;
}

void write_csv_header(std::ostream& out) { out << kBenchmarkCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const BenchmarkRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.10g,%.10g,%.12g,%.3f,%s,%lld\n", r.method.c_str(), r.n_states, r.horizon,
                  r.epsilon, r.q, r.objective, r.wall_ms, r.status.c_str(), static_cast<long long>(r.vertices_total));
    out << buf;
}

} // namespace cmdpm
