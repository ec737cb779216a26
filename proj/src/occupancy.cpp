#include "cmdpm/occupancy.hpp"

#include "cmdpm/extended.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmdpm {

namespace {

using Term = LpTerm<double>;

std::string label(const CmdpInstance& in, StateId s) { return in.states.name(s); }

/// Rows that only restate a_k >= 0 (single negative coefficient, zero rhs)
/// or are empty and slack add nothing once u >= 0.
bool redundant_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double rhs) {
    Index nonzeros = 0;
    double coef = 0;
    for (Index k = 0; k < row.size(); ++k)
        if (row[k] != 0) {
            ++nonzeros;
            coef = row[k];
        }
    if (nonzeros == 0) return rhs >= 0;
    return nonzeros == 1 && coef < 0 && rhs == 0;
}

class Assembler {
public:
    explicit Assembler(const CmdpInstance& in) : in_(in) {}

    /// u, d variables plus the flow, quality and polytope rows.
    void add_core() {
        const auto& S = in_.states;
        const Index decisions = S.num_decision_states();
        layout_.u_begin.resize(static_cast<std::size_t>(decisions));
        for (StateId s = 0; s < decisions; ++s) {
            layout_.u_begin[s] = b_.num_variables();
            const int t = S.layer_of(s);
            for (Index k = 0; k < S.next_size(s); ++k)
                b_.add_variable("u(" + label(in_, s) + "," + label(in_, S.id(t + 1, k)) + ")");
        }
        layout_.num_u = b_.num_variables();
        layout_.d_begin = b_.num_variables();
        for (StateId s = 0; s < S.num_states(); ++s) b_.add_variable("d(" + label(in_, s) + ")");

        for (Index k = 0; k < S.layer_size(0); ++k) b_.add_equality({{layout_.d(k), 1}}, in_.alpha[k]);
        std::vector<Term> row;
        for (StateId s = 0; s < decisions; ++s) {
            row.assign({{layout_.d(s), 1}});
            for (Index k = 0; k < S.next_size(s); ++k) row.push_back({layout_.u(s, k), -1});
            b_.add_equality(row, 0);
        }
        for (int t = 1; t < S.horizon(); ++t)
            for (Index k = 0; k < S.layer_size(t); ++k) {
                row.assign({{layout_.d(S.id(t, k)), 1}});
                for (Index j = 0; j < S.layer_size(t - 1); ++j) row.push_back({layout_.u(S.id(t - 1, j), k), -1});
                b_.add_equality(row, 0);
            }
        for (const QualityConstraint& c : in_.constraints) {
            row.clear();
            for (StateId s : c.states) row.push_back({layout_.d(s), 1});
            b_.add_inequality(row, c.bound);
        }
        for (StateId s = 0; s < decisions; ++s) {
            const ActionPolytope& p = in_.polytopes[s];
            for (const ExtendedConstraintRow& r : extend_polytope(p)) {
                if (redundant_row(r.coefficients, r.offset)) continue;
                row.clear();
                for (Index k = 0; k < p.dimension(); ++k)
                    if (r.coefficients[k] != 0) row.push_back({layout_.u(s, k), r.coefficients[k]});
                row.push_back({layout_.d(s), -r.offset});
                b_.add_inequality(row, 0);
            }
        }
    }

    /// Linear objective terms equal to sum_s r_bar(s, u(s, .)); adds the
    /// auxiliary columns and rows that piecewise terms need.
    std::vector<Term> objective_terms(const std::vector<RewardSpec>& rewards, const OccupancyOptions& opt) {
        std::vector<Term> terms;
        const auto& S = in_.states;
        for (StateId s = 0; s < S.num_decision_states(); ++s) {
            const Index n = S.next_size(s);
            const RewardSpec& spec = rewards[s];
            if (const auto* r = std::get_if<AffineReward>(&spec)) {
                for (Index k = 0; k < n; ++k) terms.push_back({layout_.u(s, k), r->coefficients[k]});
                terms.push_back({layout_.d(s), r->offset});
            } else if (const auto* r = std::get_if<WeightedL1Reward>(&spec)) {
                // z_k >= |u_k - center_k d|
                for (Index k = 0; k < n; ++k) {
                    const Index z = add_aux("z(" + label(in_, s) + "," + std::to_string(k) + ")", 0);
                    const double c = r->center[k];
                    b_.add_inequality({{layout_.u(s, k), 1}, {layout_.d(s), -c}, {z, -1}}, 0);
                    b_.add_inequality({{layout_.u(s, k), -1}, {layout_.d(s), c}, {z, -1}}, 0);
                    terms.push_back({z, -r->weights[k]});
                }
            } else {
                const auto& q = std::get<QuadraticReward>(spec);
                if (q.curvature == Curvature::convex)
                    throw InvalidArgument("state " + label(in_, s) +
                                          ": convex quadratic reward is not concave; solve it with the envelope method");
                if (!opt.quadratic_cuts)
                    throw InvalidArgument(
                        "state " + label(in_, s) +
                        ": concave quadratic reward is not LP-representable; enable the tangent-cut "
                        "approximation (quadratic_cuts / --quadratic-cuts)");
                const int cuts = *opt.quadratic_cuts;
                if (cuts < 2) throw InvalidArgument("quadratic_cuts must be at least 2");
                approximate_ = true;
                // t_k <= -d (u_k/d - c_k)^2, cut at deviation y: t_k <= d y^2 - 2 y (u_k - c_k d)
                for (Index k = 0; k < n; ++k) {
                    const Index tk = add_aux("t(" + label(in_, s) + "," + std::to_string(k) + ")", -kInf);
                    const double c = q.center[k];
                    for (int j = 0; j < cuts; ++j) {
                        const double y = -c + static_cast<double>(j) / (cuts - 1);
                        b_.add_inequality({{tk, 1}, {layout_.u(s, k), 2 * y}, {layout_.d(s), -(y * y + 2 * y * c)}},
                                          0);
                    }
                    terms.push_back({tk, q.weight(k)});
                }
            }
        }
        return terms;
    }

    void set_objective(const std::vector<Term>& terms) {
        for (Index j = 0; j < b_.num_variables(); ++j) b_.set_objective(j, 0);
        for (const Term& t : terms) b_.add_objective(t.var, t.coef);
    }

    LpBuilder& builder() { return b_; }
    const OccupancyLayout& layout() const { return layout_; }
    bool approximate() const { return approximate_; }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    Index add_aux(std::string name, double lower) {
        ++layout_.num_aux;
        return b_.add_variable(std::move(name), 0, lower);
    }

    const CmdpInstance& in_;
    LpBuilder b_;
    OccupancyLayout layout_;
    bool approximate_ = false;
};

LpSolution checked_solve(const LpProblem& lp, const LpOptions& opt) {
    LpSolution sol = solve_lp(lp, opt);
    switch (sol.status) {
    case LpStatus::optimal: return sol;
    case LpStatus::infeasible:
        throw InfeasibleError("quality constraints unsatisfiable",
                              std::vector<double>(sol.certificate.data(), sol.certificate.data() + sol.certificate.size()));
    case LpStatus::unbounded: throw Error("internal error: occupancy program is unbounded");
    case LpStatus::limit_exceeded: break;
    }
    throw Error("LP iteration limit exceeded");
}

OccupancySolution unpack(const CmdpInstance& in, const OccupancyLayout& layout, const LpProblem& lp,
                         const LpSolution& sol, bool approximate) {
    OccupancySolution out;
    const auto& S = in.states;
    out.u.reserve(static_cast<std::size_t>(S.num_decision_states()));
    for (StateId s = 0; s < S.num_decision_states(); ++s)
        out.u.push_back(sol.x.segment(layout.u_begin[s], S.next_size(s)).cwiseMax(0.0));
    out.d = sol.x.segment(layout.d_begin, S.num_states()).cwiseMax(0.0);
    out.objective = sol.objective;
    out.constraint_mass = constraint_masses(in, out.d);
    out.approximate = approximate;
    if (approximate)
        out.warnings.push_back("concave quadratic rewards replaced by tangent cuts; the objective is an upper "
                               "bound and the policy may be suboptimal");
    out.stats = {lp.num_variables(), lp.num_equalities(), lp.num_inequalities(), sol.iterations};
    return out;
}

} // namespace

Vector constraint_masses(const CmdpInstance& instance, const Vector& d) {
    Vector mass = Vector::Zero(static_cast<Index>(instance.constraints.size()));
    for (std::size_t i = 0; i < instance.constraints.size(); ++i)
        for (StateId s : instance.constraints[i].states) mass[static_cast<Index>(i)] += d[s];
    return mass;
}

OccupancyProgram build_occupancy_lp(const CmdpInstance& instance, const OccupancyOptions& options) {
    require_valid(instance);
    Assembler a(instance);
    a.add_core();
    a.set_objective(a.objective_terms(instance.rewards, options));
    return {a.builder().build(), a.layout(), a.approximate()};
}

OccupancySolution solve_occupancy(const CmdpInstance& instance, const OccupancyOptions& options) {
    const OccupancyProgram program = build_occupancy_lp(instance, options);
    const LpSolution sol = checked_solve(program.lp, options.lp);
    return unpack(instance, program.layout, program.lp, sol, program.approximate);
}

OccupancySolution solve_occupancy_lexicographic(const CmdpInstance& instance, const std::vector<RewardSpec>& secondary,
                                                const OccupancyOptions& options) {
    require_valid(instance);
    if (static_cast<Index>(secondary.size()) != instance.num_decision_states())
        throw InvalidArgument("secondary rewards: expected one per decision state");
    Assembler a(instance);
    a.add_core();
    const std::vector<Term> primary = a.objective_terms(instance.rewards, options);
    a.set_objective(primary);
    const LpProblem first = a.builder().build();
    const LpSolution best = checked_solve(first, options.lp);

    std::vector<Term> floor;
    for (const Term& t : primary) floor.push_back({t.var, -t.coef});
    const double slack = 1e-8 * std::max(1.0, std::abs(best.objective));
    a.builder().add_inequality(floor, -(best.objective - slack));
    a.set_objective(a.objective_terms(secondary, options));
    const LpProblem second = a.builder().build();
    const LpSolution sol = checked_solve(second, options.lp);

    OccupancySolution out = unpack(instance, a.layout(), second, sol, a.approximate());
    out.objective = first.objective.dot(sol.x.head(first.num_variables()));
    out.stats.iterations += best.iterations;
    return out;
}

DeterministicPolicy extract_policy(const OccupancySolution& solution, const CmdpInstance& instance) {
    DeterministicPolicy policy;
    const Index decisions = instance.num_decision_states();
    policy.actions.reserve(static_cast<std::size_t>(decisions));
    for (StateId s = 0; s < decisions; ++s) {
        const ActionPolytope& p = instance.polytopes[s];
        const double d = solution.d[s];
        if (d <= 1e-9) {
            policy.actions.push_back(p.base);
            continue;
        }
        Vector a = solution.u[s].cwiseMax(0.0);
        a /= a.sum();
        if (p.H.rows() > 0) {
            const Vector ha = p.H * a, hb = p.H * p.base;
            double theta = 0;
            for (Index j = 0; j < p.H.rows(); ++j)
                if (ha[j] > p.h[j] + 1e-12 && ha[j] - hb[j] > 0)
                    theta = std::max(theta, (ha[j] - p.h[j]) / (ha[j] - hb[j]));
            if (theta > 0) a = (1 - std::min(theta, 1.0)) * a + std::min(theta, 1.0) * p.base;
        }
        policy.actions.push_back(std::move(a));
    }
    return policy;
}

} // namespace cmdpm
