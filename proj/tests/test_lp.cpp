#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cmdpm/lp.hpp"
#include "support.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace cmdpm;

namespace {

Eigen::MatrixXd dense(const LpProblem::SparseMatrix& m) { return Eigen::MatrixXd(m); }

void check_kkt(const LpProblem& p, const LpSolution& s, double tol = 1e-7) {
    REQUIRE(s.status == LpStatus::optimal);
    const Eigen::MatrixXd Ae = dense(p.eq_matrix), Ai = dense(p.in_matrix);
    if (Ae.rows()) CHECK((Ae * s.x - p.eq_rhs).cwiseAbs().maxCoeff() <= tol);
    if (Ai.rows()) CHECK((Ai * s.x - p.in_rhs).maxCoeff() <= tol);
    CHECK((s.x - p.lower).minCoeff() >= -tol);
    if (Ai.rows()) {
        CHECK(s.in_duals.minCoeff() >= -tol);
        CHECK(std::abs(s.in_duals.dot(p.in_rhs - Ai * s.x)) <= tol);
    }
    CHECK(s.objective == doctest::Approx(p.objective.dot(s.x)).epsilon(1e-9));
    CHECK(std::abs(s.dual_objective - s.objective) <= 1e-7 * std::max(1.0, std::abs(s.objective)));
}

/// Brute force over all vertices of {x >= 0, A x <= b} for tiny dense LPs.
std::optional<double> brute_force_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const Index n = c.size(), m = A.rows();
    Eigen::MatrixXd rows(m + n, n);
    Eigen::VectorXd rhs(m + n);
    rows << A, -Eigen::MatrixXd::Identity(n, n);
    rhs << b, Eigen::VectorXd::Zero(n);
    std::optional<double> best;
    std::vector<Index> pick(static_cast<std::size_t>(n));
    std::function<void(Index, Index)> rec = [&](Index start, Index depth) {
        if (depth == n) {
            Eigen::MatrixXd S(n, n);
            Eigen::VectorXd r(n);
            for (Index i = 0; i < n; ++i) {
                S.row(i) = rows.row(pick[i]);
                r[i] = rhs[pick[i]];
            }
            const auto x = test::oracle::gauss(S, r);
            if (!x) return;
            if ((rows * *x - rhs).maxCoeff() > 1e-9) return;
            const double v = c.dot(*x);
            if (!best || v > *best) best = v;
            return;
        }
        for (Index i = start; i < m + n; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

} // namespace

TEST_CASE("single bounded variable") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    b.add_inequality({{x, 1}}, 3);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.x[0] == doctest::Approx(3));
    CHECK(s.objective == doctest::Approx(3));
    check_kkt(p, s);
}

TEST_CASE("degenerate objective over an equality") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    const auto y = b.add_variable("y", 1);
    b.add_equality({{x, 1}, {y, 1}}, 1);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(1));
    check_kkt(p, s);
}

TEST_CASE("infeasible bound comes with a Farkas certificate") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    b.add_inequality({{x, 1}}, -1);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::infeasible);
    // y >= 0 on x <= -1 proves it: y * x <= -y with x >= 0 is impossible
    REQUIRE(s.certificate.size() == 1);
    CHECK(s.certificate[0] > 0);
}

TEST_CASE("Farkas certificate on a mixed system") {
    // x + y = 1, x - y >= 2 (written -x + y <= -2), y >= 0.5 (written -y <= -0.5)
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    const auto y = b.add_variable("y", 0);
    b.add_equality({{x, 1}, {y, 1}}, 1);
    b.add_inequality({{x, -1}, {y, 1}}, -2);
    b.add_inequality({{y, -1}}, -0.5);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::infeasible);
    const Index me = p.num_equalities(), mi = p.num_inequalities();
    REQUIRE(s.certificate.size() == me + mi);
    const Eigen::VectorXd ye = s.certificate.head(me), yi = s.certificate.segment(me, mi);
    CHECK(yi.minCoeff() >= -1e-12);
    const Eigen::VectorXd combo = dense(p.eq_matrix).transpose() * ye + dense(p.in_matrix).transpose() * yi;
    CHECK(combo.minCoeff() >= -1e-9);
    CHECK(p.eq_rhs.dot(ye) + p.in_rhs.dot(yi) < -1e-9);
}

TEST_CASE("unbounded problem returns a ray") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    const auto y = b.add_variable("y", 0);
    b.add_inequality({{x, -1}, {y, 1}}, 1);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::unbounded);
    REQUIRE(s.certificate.size() == 2);
    CHECK(p.objective.dot(s.certificate) > 0);
    CHECK((dense(p.in_matrix) * s.certificate).maxCoeff() <= 1e-12);
    CHECK(s.certificate.minCoeff() >= -1e-12);
}

TEST_CASE("Beale's cycling example terminates at the optimum") {
    LpBuilder b;
    const auto x4 = b.add_variable("x4", 0.75);
    const auto x5 = b.add_variable("x5", -20);
    const auto x6 = b.add_variable("x6", 0.5);
    const auto x7 = b.add_variable("x7", -6);
    b.add_inequality({{x4, 0.25}, {x5, -8}, {x6, -1}, {x7, 9}}, 0);
    b.add_inequality({{x4, 0.5}, {x5, -12}, {x6, -0.5}, {x7, 3}}, 0);
    b.add_inequality({{x6, 1}}, 1);
    const LpProblem p = b.build();
    for (int limit : {0, 1, 50}) {
        LpOptions opt;
        opt.degenerate_limit = limit; // 0 switches to Bland at the first degenerate pivot
        const LpSolution s = solve_lp(p, opt);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(1.25).epsilon(1e-12));
        check_kkt(p, s);
    }
}

TEST_CASE("free and upper-bounded variables") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1, -LpBuilder::inf, 2);
    const auto y = b.add_variable("y", -1, -3, 5);
    b.add_inequality({{x, 1}, {y, 1}}, 0);
    const LpProblem p = b.build();
    const LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.x[x] == doctest::Approx(2));
    CHECK(s.x[y] == doctest::Approx(-3));
    CHECK(s.objective == doctest::Approx(5));
}

TEST_CASE("random small LPs agree with vertex brute force") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 2 + trial % 3, m = 2 + trial % 4;
        Eigen::MatrixXd A(m, n);
        Eigen::VectorXd rhs(m), c(n);
        for (Index i = 0; i < m; ++i) {
            for (Index j = 0; j < n; ++j) A(i, j) = u(rng);
            rhs[i] = u(rng) + 0.3;
        }
        // one row bounds the sum so most draws are bounded
        A.row(0).setOnes();
        rhs[0] = 1 + std::abs(rhs[0]);
        for (Index j = 0; j < n; ++j) c[j] = u(rng);
        LpBuilder b;
        for (Index j = 0; j < n; ++j) b.add_variable({}, c[j]);
        for (Index i = 0; i < m; ++i) {
            std::vector<LpTerm<double>> terms;
            for (Index j = 0; j < n; ++j) terms.push_back({j, A(i, j)});
            b.add_inequality(terms, rhs[i]);
        }
        const LpProblem p = b.build();
        const LpSolution s = solve_lp(p);
        const auto oracle = brute_force_max(A, rhs, c);
        if (!oracle) {
            CHECK(s.status == LpStatus::infeasible);
            continue;
        }
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(*oracle).epsilon(1e-9));
        check_kkt(p, s);
        ++checked;
    }
    CHECK(checked > 200);
}

TEST_CASE("scaling the objective scales the value and keeps the vertex") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    LpBuilder b;
    for (int j = 0; j < 6; ++j) b.add_variable({}, u(rng) - 0.3);
    for (int i = 0; i < 4; ++i) {
        std::vector<LpTerm<double>> terms;
        for (int j = 0; j < 6; ++j) terms.push_back({j, u(rng)});
        b.add_inequality(terms, 1 + u(rng));
    }
    const LpProblem p = b.build();
    const LpSolution base = solve_lp(p);
    REQUIRE(base.status == LpStatus::optimal);
    for (double gamma : {0.001, 0.5, 7.0, 1e4}) {
        LpProblem q = p;
        q.objective *= gamma;
        const LpSolution s = solve_lp(q);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(gamma * base.objective).epsilon(1e-9));
        CHECK((s.x - base.x).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("malformed problems are rejected") {
    LpProblem empty;
    CHECK_THROWS_AS(solve_lp(empty), InvalidArgument);
    CHECK_THROWS_AS(to_mps(empty), InvalidArgument);
    LpBuilder b;
    b.add_variable("x", std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(solve_lp(b.build()), InvalidArgument);
}

TEST_CASE("MPS export of x <= 3") {
    LpBuilder b;
    const auto x = b.add_variable("x", 1);
    b.add_inequality({{x, 1}}, 3);
    const std::string mps = to_mps(b.build());
    std::istringstream in(mps);
    std::string line, section;
    int rows = 0, rhs = 0;
    std::set<std::string> columns;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '*') continue;
        if (line[0] != ' ') {
            section = line.substr(0, line.find(' '));
            continue;
        }
        if (section == "ROWS" && line.find(" N ") == std::string::npos) ++rows;
        if (section == "COLUMNS") columns.insert(line.substr(4, 8));
        if (section == "RHS") ++rhs;
    }
    CHECK(rows == 1);
    CHECK(columns.size() == 1);
    CHECK(rhs == 1);
    CHECK(mps.find("ENDATA") != std::string::npos);
    CHECK(to_mps(b.build()) == mps);
}

TEST_CASE("singleton-aware basis factor matches a dense solve") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Index m = 3 + trial % 9;
        // a structural block, then one unit column per row as slacks would give
        Matrix dense = Matrix::Zero(m, 2 * m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < m; ++i)
                if (u(rng) > 0.2 || i == j) dense(i, j) = u(rng) + (i == j ? 3.0 : 0.0);
        for (Eigen::Index i = 0; i < m; ++i) dense(i, m + i) = (i % 2 ? -1.0 : 1.0);
        // a singleton structural column competing for a row
        dense.col(0).setZero();
        dense(0, 0) = 2.5;
        const Eigen::SparseMatrix<double> a = dense.sparseView();

        std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
        for (Eigen::Index p = 0; p < m; ++p)
            basis[p] = (rng() % 2 == 0) ? p : m + ((p + trial) % m);
        std::sort(basis.begin(), basis.end());
        basis.erase(std::unique(basis.begin(), basis.end()), basis.end());
        for (Eigen::Index j = 0; static_cast<Eigen::Index>(basis.size()) < m; ++j)
            if (std::find(basis.begin(), basis.end(), j) == basis.end()) basis.push_back(j);
        Matrix b(m, m);
        for (Eigen::Index p = 0; p < m; ++p) b.col(p) = dense.col(basis[p]);
        if (std::abs(b.determinant()) < 1e-6) continue;

        detail::BasisFactor<double> factor;
        factor.factorize(a, basis);
        Vector v(m);
        for (Eigen::Index i = 0; i < m; ++i) v[i] = u(rng);
        const Vector x = factor.solve(v);
        const Vector y = factor.solve_transposed(v);
        CHECK((b * x - v).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((b.transpose() * y - v).cwiseAbs().maxCoeff() <= 1e-10);
    }
}
