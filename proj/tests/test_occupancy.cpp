#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cmdpm/evaluator.hpp"
#include "cmdpm/loan.hpp"
#include "cmdpm/occupancy.hpp"
#include "support.hpp"

#include <random>

using namespace cmdpm;
using test::two_outcome_instance;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

const Vector kHalf = Vector::Constant(2, 0.5);

/// Best -||a - b||_1 over a2 in [0.1, 0.9] with a2 <= bound, step 1e-4.
std::optional<std::pair<double, double>> grid_oracle(double bound) {
    std::optional<std::pair<double, double>> best;
    for (int i = 0; i <= 8000; ++i) {
        const double a2 = 0.1 + i * 1e-4;
        if (a2 > bound + 1e-12) continue;
        const double v = -(std::abs(1 - a2 - 0.5) + std::abs(a2 - 0.5));
        if (!best || v > best->first) best = {v, a2};
    }
    return best;
}

void check_occupancy_invariants(const CmdpInstance& in, const OccupancySolution& sol) {
    const auto& S = in.states;
    for (Index k = 0; k < S.layer_size(0); ++k) CHECK(std::abs(sol.d[k] - in.alpha[k]) <= 1e-9);
    for (int t = 0; t < S.horizon(); ++t) CHECK(std::abs(sol.d.segment(S.layer_begin(t), S.layer_size(t)).sum() - 1) <= 1e-9);
    Vector inflow = Vector::Zero(S.num_states());
    for (StateId s = 0; s < S.num_decision_states(); ++s) {
        CHECK(std::abs(sol.u[s].sum() - sol.d[s]) <= 1e-9);
        CHECK(sol.u[s].minCoeff() >= -1e-9);
        const Index next = S.layer_begin(S.layer_of(s) + 1);
        inflow.segment(next, S.next_size(s)) += sol.u[s];
    }
    for (StateId s = S.layer_size(0); s < S.num_states(); ++s) CHECK(std::abs(inflow[s] - sol.d[s]) <= 1e-9);
    for (std::size_t i = 0; i < in.constraints.size(); ++i)
        CHECK(sol.constraint_mass[static_cast<Index>(i)] <= in.constraints[i].bound + 1e-8);
}

void check_round_trip(const CmdpInstance& in, const OccupancySolution& sol) {
    const DeterministicPolicy pi = extract_policy(sol, in);
    REQUIRE(validate_policy(in, pi).ok());
    const EvaluationReport r = evaluate_exact(in, pi);
    CHECK(std::abs(r.return_value - sol.objective) <= 1e-7);
    CHECK((r.d - sol.d).cwiseAbs().maxCoeff() <= 1e-7);
    if (r.constraint_mass.size()) CHECK((r.constraint_mass - sol.constraint_mass).cwiseAbs().maxCoeff() <= 1e-7);
}

/// Unconstrained affine optimum: backward induction over each polytope's
/// vertices (a linear function peaks at a vertex).
double backward_induction(const CmdpInstance& in) {
    const auto& S = in.states;
    Vector V = Vector::Zero(S.num_states());
    for (StateId s = S.num_decision_states() - 1; s >= 0; --s) {
        const auto& p = in.polytopes[s];
        const Index next = S.layer_begin(S.layer_of(s) + 1);
        double best = -std::numeric_limits<double>::infinity();
        for (const Vector& a : test::oracle::vertices_by_bases(p.H, p.h, p.dimension()))
            best = std::max(best, test::oracle::reward(in.rewards[s], a) + a.dot(V.segment(next, a.size())));
        V[s] = best;
    }
    return in.alpha.dot(V.head(S.layer_size(0)));
}

} // namespace

TEST_CASE("program size for the two-outcome instance") {
    const auto in = two_outcome_instance(0.4, 0.2, test::l1_around(kHalf));
    const OccupancyProgram prog = build_occupancy_lp(in);
    CHECK(prog.layout.num_u == 2);
    CHECK(prog.layout.num_aux == 2);
    CHECK(prog.lp.num_variables() - prog.layout.num_u - prog.layout.num_aux == 3);
    CHECK_FALSE(prog.approximate);
}

TEST_CASE("a zero-width box pins u to d times b") {
    const auto in = two_outcome_instance(0.0, std::nullopt, AffineReward{vec({1, 0}), 0});
    const OccupancySolution sol = solve_occupancy(in);
    CHECK(sol.u[0][0] == doctest::Approx(0.5));
    CHECK(sol.u[0][1] == doctest::Approx(0.5));
}

TEST_CASE("instances with the base outside the polytope are rejected") {
    auto in = two_outcome_instance(0.4, 0.2, test::l1_around(kHalf));
    in.polytopes[0].base = vec({0.05, 0.95});
    CHECK_THROWS_AS(build_occupancy_lp(in), InvalidArgument);
}

TEST_CASE("binding quality bound against the grid oracle") {
    const auto oracle = grid_oracle(0.2);
    REQUIRE(oracle);
    const auto in = two_outcome_instance(0.4, 0.2, test::l1_around(kHalf));
    const OccupancySolution sol = solve_occupancy(in);
    CHECK(std::abs(sol.objective - oracle->first) <= 1e-8);
    CHECK(sol.objective == doctest::Approx(-0.6).epsilon(1e-12));
    const DeterministicPolicy pi = extract_policy(sol, in);
    CHECK(pi.actions[0][0] == doctest::Approx(0.8));
    CHECK(pi.actions[0][1] == doctest::Approx(oracle->second));
    check_occupancy_invariants(in, sol);
    check_round_trip(in, sol);
}

TEST_CASE("slack bound keeps the base action") {
    const auto in = two_outcome_instance(0.4, 0.5, test::l1_around(kHalf));
    const OccupancySolution sol = solve_occupancy(in);
    CHECK(std::abs(sol.objective) <= 1e-12);
    const DeterministicPolicy pi = extract_policy(sol, in);
    CHECK((pi.actions[0] - kHalf).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("a bound the box cannot reach is infeasible") {
    const auto in = two_outcome_instance(0.4, 0.05, test::l1_around(kHalf));
    CHECK_THROWS_AS(solve_occupancy(in), InfeasibleError);
    try {
        solve_occupancy(in);
    } catch (const InfeasibleError& e) {
        CHECK_FALSE(e.certificate().empty());
    }
}

TEST_CASE("policy extraction") {
    const auto in = two_outcome_instance(0.4, 0.2, test::l1_around(kHalf));
    OccupancySolution sol;
    sol.d = vec({1, 0.8, 0.2});
    sol.u = {vec({0.8, 0.2})};
    CHECK((extract_policy(sol, in).actions[0] - vec({0.8, 0.2})).norm() <= 1e-12);
    sol.d[0] = 0.5;
    sol.u = {vec({0.4, 0.1})};
    CHECK((extract_policy(sol, in).actions[0] - vec({0.8, 0.2})).norm() <= 1e-12);
    sol.d[0] = 0;
    sol.u = {vec({0, 0})};
    CHECK((extract_policy(sol, in).actions[0] - kHalf).norm() == 0.0);
}

TEST_CASE("random instances: invariants, round trip and monotonicity") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        auto r = test::random_affine_instance(rng, 6, 4, 1e12);
        CmdpInstance& in = r.instance;
        // alternate affine and L1 rewards
        if (trial % 2)
            for (StateId s = 0; s < in.num_decision_states(); ++s)
                in.rewards[s] = test::l1_around(in.polytopes[s].base);
        const OccupancySolution sol = solve_occupancy(in);
        check_occupancy_invariants(in, sol);
        check_round_trip(in, sol);
        if (!in.constraints.empty()) {
            double last = sol.objective;
            for (double extra : {0.01, 0.05, 0.2, 1.0}) {
                CmdpInstance looser = in;
                looser.constraints[0].bound += extra;
                const double v = solve_occupancy(looser).objective;
                CHECK(v >= last - 1e-9);
                last = v;
            }
        }
    }
}

TEST_CASE("unconstrained affine optimum equals backward induction") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        auto r = test::random_affine_instance(rng, 5, 4, 1e12);
        r.instance.constraints.clear();
        const OccupancySolution sol = solve_occupancy(r.instance);
        CHECK(sol.objective == doctest::Approx(backward_induction(r.instance)).epsilon(1e-9));
    }
}

TEST_CASE("loan instance round trip") {
    for (LoanReward kind : {LoanReward::l1, LoanReward::affine_surrogate}) {
        LoanConfig cfg;
        cfg.n_states = 6;
        cfg.reward = kind;
        const CmdpInstance in = generate_loan_instance(cfg);
        const OccupancySolution sol = solve_occupancy(in);
        check_occupancy_invariants(in, sol);
        check_round_trip(in, sol);
    }
}

TEST_CASE("quadratic rewards on the LP path") {
    auto in = two_outcome_instance(0.4, 0.2, QuadraticReward{kHalf, Curvature::convex, {}});
    try {
        build_occupancy_lp(in);
        FAIL("convex quadratic accepted");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("envelope") != std::string::npos);
    }
    in.rewards[0] = QuadraticReward{kHalf, Curvature::concave, {}};
    CHECK_THROWS_AS(build_occupancy_lp(in), InvalidArgument);

    // true optimum: a = (0.8, 0.2), reward -(0.09 + 0.09)
    for (int cuts : {3, 8, 16, 64}) {
        OccupancyOptions opt;
        opt.quadratic_cuts = cuts;
        const OccupancySolution sol = solve_occupancy(in, opt);
        CHECK(sol.approximate);
        CHECK_FALSE(sol.warnings.empty());
        const double truth = evaluate_exact(in, extract_policy(sol, in)).return_value;
        CHECK(sol.objective >= truth - 1e-9);
        CHECK(truth <= -0.18 + 1e-9);
        // tangents spaced by 1/(K-1) overshoot a parabola by at most a
        // quarter spacing squared, per coordinate
        const double spacing = 1.0 / (cuts - 1);
        const double gap = sol.objective - (-0.18);
        CHECK(gap >= -1e-9);
        CHECK(gap <= 2 * 0.25 * spacing * spacing + 1e-9);
    }
}

TEST_CASE("lexicographic tie-break prefers the secondary objective") {
    // zero primary reward: every feasible action is optimal
    const auto in = two_outcome_instance(0.4, 0.5, AffineReward{Vector::Zero(2), 0});
    const OccupancySolution sol = solve_occupancy_lexicographic(in, {test::l1_around(kHalf)});
    CHECK(std::abs(sol.objective) <= 1e-12);
    CHECK((extract_policy(sol, in).actions[0] - kHalf).cwiseAbs().maxCoeff() <= 1e-9);
}
