#include "cmdpm/solve.hpp"

#include "cmdpm/envelope.hpp"
#include "cmdpm/evaluator.hpp"
#include "cmdpm/loan.hpp"

namespace cmdpm {

const char* to_string(Method method) {
    switch (method) {
    case Method::convex: return "convex";
    case Method::extreme: return "extreme";
    case Method::envelope: return "envelope";
    case Method::greedy: return "greedy";
    case Method::naive_linear: return "naive-linear";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : {Method::convex, Method::extreme, Method::envelope, Method::greedy, Method::naive_linear})
        if (name == to_string(m)) return m;
    return std::nullopt;
}

const char* to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::timeout: return "timeout";
    }
    return "?";
}

namespace {

void set_policy(SolveResult& out, const CmdpInstance& instance, Policy policy) {
    const EvaluationReport report = evaluate_exact(instance, policy);
    out.d = report.d;
    out.constraint_mass = report.constraint_mass;
    out.policy = std::move(policy);
}

SolveResult dispatch(const CmdpInstance& instance, Method method, const SolveOptions& options) {
    SolveResult out;
    LpOptions lp;
    lp.deadline = options.deadline;
    switch (method) {
    case Method::convex: {
        OccupancyOptions opt{options.quadratic_cuts, lp};
        const OccupancySolution sol = solve_occupancy(instance, opt);
        out.objective = sol.objective;
        out.policy = extract_policy(sol, instance);
        out.d = sol.d;
        out.constraint_mass = sol.constraint_mass;
        out.stats = sol.stats;
        out.warnings = sol.warnings;
        return out;
    }
    case Method::extreme: {
        const VertexOptions vopt{options.extreme_vertices, options.max_dimension, 1e-7, options.deadline};
        const VertexSet vertices = enumerate_all(instance, vopt);
        const FiniteSolution sol = solve_finite(build_finite_cmdp(instance, vertices), lp);
        out.objective = sol.objective;
        out.policy = sol.policy;
        out.d = sol.d;
        out.constraint_mass = sol.constraint_mass;
        out.vertices_total = vertices.total();
        out.stats = sol.stats;
        for (const RewardSpec& r : instance.rewards)
            if (reward_shape(r) != Shape::affine) {
                out.warnings.push_back("non-affine rewards: the vertex restriction is not guaranteed optimal");
                break;
            }
        return out;
    }
    case Method::envelope: {
        EnvelopeOptions opt;
        opt.vertices = {VertexMethod::automatic, options.max_dimension, 1e-7, options.deadline};
        opt.lp = lp;
        const EnvelopeSolution sol = solve_with_envelope(instance, opt);
        out.objective = sol.objective;
        out.policy = sol.policy;
        out.d = sol.d;
        out.constraint_mass = sol.constraint_mass;
        out.vertices_total = sol.vertices_total;
        out.stats = sol.stats;
        return out;
    }
    case Method::greedy: {
        const GreedyResult g = greedy_baseline(instance, lp);
        out.warnings = g.warnings;
        if (!g.feasible) {
            out.status = SolveStatus::infeasible;
            out.message = "greedy baseline failed: period " + std::to_string(g.failed_period + 1) +
                          " cannot meet the quality constraints";
            return out;
        }
        out.objective = g.objective;
        set_policy(out, instance, g.policy);
        return out;
    }
    case Method::naive_linear: {
        const NaiveResult n = naive_linear_baseline(instance, lp);
        out.objective = n.true_return;
        set_policy(out, instance, n.policy);
        return out;
    }
    }
    throw InvalidArgument("unknown method");
}

} // namespace

SolveResult solve(const CmdpInstance& instance, Method method, const SolveOptions& options) {
    try {
        return dispatch(instance, method, options);
    } catch (const InfeasibleError& e) {
        SolveResult out;
        out.status = SolveStatus::infeasible;
        out.message = e.what();
        out.certificate = e.certificate();
        return out;
    } catch (const TimeoutError& e) {
        SolveResult out;
        out.status = SolveStatus::timeout;
        out.message = e.what();
        return out;
    }
}

} // namespace cmdpm
