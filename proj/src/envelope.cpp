#include "cmdpm/envelope.hpp"

#include "cmdpm/evaluator.hpp"

namespace cmdpm {

EnvelopeModel build_envelope_model(const CmdpInstance& instance, const VertexSet& vertices) {
    const FiniteCmdp fc = build_finite_cmdp(instance, vertices);
    EnvelopeModel model;
    for (const FiniteActionSet& set : fc.actions) {
        model.generators.push_back(set.transitions);
        model.values.push_back(set.rewards);
    }
    return model;
}

EnvelopeValue envelope_value(const Matrix& generators, const Vector& values, const Vector& x) {
    if (generators.rows() != x.size() || generators.cols() != values.size() || generators.cols() == 0)
        throw InvalidArgument("envelope_value: dimension mismatch");
    LpBuilder b;
    for (Index i = 0; i < generators.cols(); ++i) b.add_variable({}, values[i]);
    std::vector<LpTerm<double>> row;
    for (Index k = 0; k < x.size(); ++k) {
        row.clear();
        for (Index i = 0; i < generators.cols(); ++i)
            if (generators(k, i) != 0) row.push_back({i, generators(k, i)});
        b.add_equality(row, x[k]);
    }
    row.clear();
    for (Index i = 0; i < generators.cols(); ++i) row.push_back({i, 1});
    b.add_equality(row, 1);
    const LpSolution sol = solve_lp(b.build());
    if (sol.status != LpStatus::optimal)
        throw InfeasibleError("envelope_value: point lies outside the convex hull of the generators");
    EnvelopeValue out{sol.objective, {}};
    for (Index i = 0; i < generators.cols(); ++i)
        if (sol.x[i] > 1e-12) out.weights.push_back({sol.x[i], generators.col(i)});
    return out;
}

EnvelopeSolution solve_with_envelope(const CmdpInstance& instance, const EnvelopeOptions& options) {
    require_valid(instance);
    for (StateId s = 0; s < instance.num_decision_states(); ++s)
        if (reward_shape(instance.rewards[s]) == Shape::concave)
            throw InvalidArgument("state " + instance.states.name(s) +
                                  ": the vertex envelope is exact only for convex or affine rewards");
    const VertexSet vertices = enumerate_all(instance, options.vertices);
    const FiniteSolution fs = solve_finite(build_finite_cmdp(instance, vertices), options.lp);
    return {fs.objective, fs.policy, fs.d, fs.constraint_mass, vertices.total(), fs.stats};
}

NaiveResult naive_linear_baseline(const CmdpInstance& instance, const LpOptions& options) {
    require_valid(instance);
    CmdpInstance linear = instance;
    std::vector<RewardSpec> modulation;
    for (StateId s = 0; s < instance.num_decision_states(); ++s) {
        const Vector& b = instance.polytopes[s].base;
        RewardSpec& r = linear.rewards[s];
        if (const auto* q = std::get_if<QuadraticReward>(&r)) {
            const double sign = q->curvature == Curvature::concave ? -1.0 : 1.0;
            Vector grad = 2 * sign * (b - q->center);
            if (q->weights.size()) grad = grad.cwiseProduct(q->weights);
            const double value = sign * q->weighted_square(b - q->center);
            r = AffineReward{grad, value - grad.dot(b)};
        } else if (std::holds_alternative<WeightedL1Reward>(r)) {
            throw InvalidArgument("naive_linear_baseline: needs quadratic or affine rewards");
        }
        modulation.push_back(WeightedL1Reward{b, Vector::Ones(b.size())});
    }
    OccupancyOptions opt;
    opt.lp = options;
    const OccupancySolution sol = solve_occupancy_lexicographic(linear, modulation, opt);
    NaiveResult out;
    out.linearized_objective = sol.objective;
    out.policy = extract_policy(sol, instance);
    out.true_return = evaluate_exact(instance, out.policy).return_value;
    return out;
}

} // namespace cmdpm
