#pragma once

// Embedded linear-program engine: a two-phase revised simplex over sparse
// storage with a sparse LU basis factor and product-form eta updates.
//
// Problems are stated as
//
//     maximize    c'x
//     subject to  A_eq x  = b_eq
//                 A_in x <= b_in
//                 lower <= x <= upper
//
// and solved after an internal transformation to  A x = b, x >= 0, b >= 0.

#include "cmdpm/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cmdpm {

enum class LpStatus { optimal, infeasible, unbounded, limit_exceeded };

inline const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::limit_exceeded: return "limit_exceeded";
    }
    return "unknown";
}

template <typename Scalar> struct LpTerm {
    Eigen::Index var;
    Scalar coef;
};

template <typename Scalar> struct BasicLpProblem {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

    Vector objective; ///< maximized
    SparseMatrix eq_matrix;
    Vector eq_rhs;
    SparseMatrix in_matrix;
    Vector in_rhs;
    Vector lower; ///< may be -inf
    Vector upper; ///< +inf when unbounded above
    std::vector<std::string> names;

    Eigen::Index num_variables() const { return objective.size(); }
    Eigen::Index num_equalities() const { return eq_rhs.size(); }
    Eigen::Index num_inequalities() const { return in_rhs.size(); }

    /// Throws InvalidArgument on inconsistent dimensions or non-finite data.
    void check() const {
        const Eigen::Index n = num_variables();
        if (n == 0) throw InvalidArgument("invalid problem: no variables");
        if (eq_matrix.rows() != eq_rhs.size() || eq_matrix.cols() != n)
            throw InvalidArgument("invalid problem: equality block dimension mismatch");
        if (in_matrix.rows() != in_rhs.size() || in_matrix.cols() != n)
            throw InvalidArgument("invalid problem: inequality block dimension mismatch");
        if (lower.size() != n || upper.size() != n)
            throw InvalidArgument("invalid problem: bound vector dimension mismatch");
        if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n)
            throw InvalidArgument("invalid problem: name table dimension mismatch");
        auto finite = [](const auto& v) { return v.allFinite(); };
        if (!finite(objective) || !finite(eq_rhs) || !finite(in_rhs))
            throw InvalidArgument("invalid problem: non-finite coefficient");
        for (Eigen::Index k = 0; k < eq_matrix.nonZeros(); ++k)
            if (!std::isfinite(eq_matrix.valuePtr()[k]))
                throw InvalidArgument("invalid problem: non-finite coefficient");
        for (Eigen::Index k = 0; k < in_matrix.nonZeros(); ++k)
            if (!std::isfinite(in_matrix.valuePtr()[k]))
                throw InvalidArgument("invalid problem: non-finite coefficient");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == std::numeric_limits<Scalar>::infinity() ||
                upper[j] == -std::numeric_limits<Scalar>::infinity())
                throw InvalidArgument("invalid problem: bad bounds on variable " + std::to_string(j));
        }
    }
};

/// Incremental construction of a BasicLpProblem from row terms.
template <typename Scalar> class BasicLpBuilder {
public:
    using Term = LpTerm<Scalar>;
    static constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

    Eigen::Index add_variable(std::string name = {}, Scalar objective = 0, Scalar lower = 0, Scalar upper = inf) {
        objective_.push_back(objective);
        lower_.push_back(lower);
        upper_.push_back(upper);
        names_.push_back(std::move(name));
        return static_cast<Eigen::Index>(objective_.size()) - 1;
    }

    void set_objective(Eigen::Index var, Scalar c) { objective_.at(var) = c; }
    void add_objective(Eigen::Index var, Scalar c) { objective_.at(var) += c; }

    Eigen::Index add_equality(std::span<const Term> terms, Scalar rhs) {
        return add_row(eq_, eq_rhs_, terms, rhs);
    }
    Eigen::Index add_equality(std::initializer_list<Term> terms, Scalar rhs) {
        return add_equality(std::span<const Term>(terms.begin(), terms.size()), rhs);
    }
    Eigen::Index add_inequality(std::span<const Term> terms, Scalar rhs) {
        return add_row(in_, in_rhs_, terms, rhs);
    }
    Eigen::Index add_inequality(std::initializer_list<Term> terms, Scalar rhs) {
        return add_inequality(std::span<const Term>(terms.begin(), terms.size()), rhs);
    }

    Eigen::Index num_variables() const { return static_cast<Eigen::Index>(objective_.size()); }
    Eigen::Index num_equalities() const { return static_cast<Eigen::Index>(eq_rhs_.size()); }
    Eigen::Index num_inequalities() const { return static_cast<Eigen::Index>(in_rhs_.size()); }

    BasicLpProblem<Scalar> build() const {
        using Vector = typename BasicLpProblem<Scalar>::Vector;
        BasicLpProblem<Scalar> p;
        const Eigen::Index n = num_variables();
        p.objective = Eigen::Map<const Vector>(objective_.data(), n);
        p.lower = Eigen::Map<const Vector>(lower_.data(), n);
        p.upper = Eigen::Map<const Vector>(upper_.data(), n);
        p.eq_rhs = Eigen::Map<const Vector>(eq_rhs_.data(), num_equalities());
        p.in_rhs = Eigen::Map<const Vector>(in_rhs_.data(), num_inequalities());
        p.eq_matrix.resize(num_equalities(), n);
        p.eq_matrix.setFromTriplets(eq_.begin(), eq_.end());
        p.in_matrix.resize(num_inequalities(), n);
        p.in_matrix.setFromTriplets(in_.begin(), in_.end());
        p.names = names_;
        return p;
    }

private:
    Eigen::Index add_row(std::vector<Eigen::Triplet<Scalar>>& block, std::vector<Scalar>& rhs,
                         std::span<const Term> terms, Scalar value) {
        const auto row = static_cast<Eigen::Index>(rhs.size());
        for (const Term& t : terms) {
            if (t.var < 0 || t.var >= num_variables())
                throw InvalidArgument("invalid problem: row references unknown variable");
            if (t.coef != Scalar(0)) block.emplace_back(static_cast<int>(row), static_cast<int>(t.var), t.coef);
        }
        rhs.push_back(value);
        return row;
    }

    std::vector<Scalar> objective_, lower_, upper_;
    std::vector<std::string> names_;
    std::vector<Eigen::Triplet<Scalar>> eq_, in_;
    std::vector<Scalar> eq_rhs_, in_rhs_;
};

template <typename Scalar> struct BasicLpSolution {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    LpStatus status = LpStatus::limit_exceeded;
    Vector x;
    Scalar objective = 0;
    Vector eq_duals;      ///< free sign
    Vector in_duals;      ///< >= 0 at optimality (maximization)
    Vector upper_duals;   ///< >= 0, one per variable (0 when no finite upper bound)
    Vector reduced_costs; ///< c - A'y - upper_duals
    Scalar dual_objective = 0;
    Scalar primal_residual = 0;
    Scalar complementarity_residual = 0;
    /// Infeasible: Farkas multipliers [eq rows; in rows; one per variable with
    /// both bounds finite]. The in and bound parts are >= 0, A'y >= 0 over the
    /// bound-shifted variables and b'y < 0.
    /// Unbounded: a primal ray r over the variables with c'r > 0.
    Vector certificate;
    long iterations = 0;
    long phase_one_iterations = 0;
};

struct LpOptions {
    long max_iterations = 1'000'000;
    double pivot_tolerance = 1e-9;
    double feasibility_tolerance = 1e-8;
    double optimality_tolerance = 1e-9;
    int refactor_interval = 50;
    int degenerate_limit = 5000;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

using LpProblem = BasicLpProblem<double>;
using LpBuilder = BasicLpBuilder<double>;
using LpSolution = BasicLpSolution<double>;

namespace detail {

/// LU of a simplex basis that exploits its singleton columns. A basic
/// column with one nonzero (every slack and artificial) claims its row, so
/// after a permutation B = [D A_sk; 0 K] with D diagonal, and only the
/// kernel K of the remaining columns and rows needs a sparse LU. On
/// occupancy LPs K is a small fraction of B.
template <typename Scalar> class BasisFactor {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;
    using Index = Eigen::Index;

    void factorize(const SparseMatrix& a, const std::vector<Index>& basis) {
        const Index m = a.rows();
        singletons_.clear();
        kernel_columns_.clear();
        kernel_rows_.clear();
        kernel_index_.assign(static_cast<std::size_t>(m), 0);
        for (Index p = 0; p < m; ++p) {
            const Index j = basis[p];
            const Index nnz = a.outerIndexPtr()[j + 1] - a.outerIndexPtr()[j];
            typename SparseMatrix::InnerIterator it(a, j);
            if (nnz == 1 && it.value() != Scalar(0) && kernel_index_[it.row()] == 0) {
                kernel_index_[it.row()] = -1;
                singletons_.push_back({p, it.row(), it.value()});
            } else {
                kernel_columns_.push_back(p);
            }
        }
        for (Index i = 0; i < m; ++i)
            if (kernel_index_[i] == 0) {
                kernel_index_[i] = static_cast<Index>(kernel_rows_.size());
                kernel_rows_.push_back(i);
            }
        const auto k = static_cast<Index>(kernel_columns_.size());
        if (k != static_cast<Index>(kernel_rows_.size())) throw NumericalError("simplex basis is numerically singular");
        columns_.resize(m, k);
        if (k == 0) return;
        std::vector<Eigen::Triplet<Scalar>> all, triplets;
        for (Index c = 0; c < k; ++c)
            for (typename SparseMatrix::InnerIterator it(a, basis[kernel_columns_[c]]); it; ++it) {
                all.emplace_back(static_cast<int>(it.row()), static_cast<int>(c), it.value());
                if (kernel_index_[it.row()] >= 0)
                    triplets.emplace_back(static_cast<int>(kernel_index_[it.row()]), static_cast<int>(c), it.value());
            }
        columns_.setFromTriplets(all.begin(), all.end());
        SparseMatrix kernel(k, k);
        kernel.setFromTriplets(triplets.begin(), triplets.end());
        kernel.makeCompressed();
        lu_.analyzePattern(kernel);
        lu_.factorize(kernel);
        if (lu_.info() != Eigen::Success) throw NumericalError("simplex basis is numerically singular");
    }

    /// x with B x = v, indexed by basis position.
    Vector solve(const Vector& v) const {
        const auto k = static_cast<Index>(kernel_rows_.size());
        Vector x(v.size());
        Vector w = v;
        if (k > 0) {
            Vector vk(k);
            for (Index r = 0; r < k; ++r) vk[r] = v[kernel_rows_[r]];
            const Vector xk = lu_solve(vk);
            for (Index c = 0; c < k; ++c) {
                const Index p = kernel_columns_[c];
                x[p] = xk[c];
                if (xk[c] == Scalar(0)) continue;
                for (typename SparseMatrix::InnerIterator it(columns_, c); it; ++it) w[it.row()] -= it.value() * xk[c];
            }
        }
        for (const Singleton& s : singletons_) x[s.position] = w[s.row] / s.value;
        return x;
    }

    /// y with B' y = c, where c is indexed by basis position.
    Vector solve_transposed(const Vector& c) const {
        const auto k = static_cast<Index>(kernel_rows_.size());
        Vector y(c.size());
        for (const Singleton& s : singletons_) y[s.row] = c[s.position] / s.value;
        if (k == 0) return y;
        Vector rhs(k);
        for (Index q = 0; q < k; ++q) {
            Scalar t = c[kernel_columns_[q]];
            for (typename SparseMatrix::InnerIterator it(columns_, q); it; ++it)
                if (kernel_index_[it.row()] < 0) t -= it.value() * y[it.row()];
            rhs[q] = t;
        }
        const Vector yk = lu_solve_transposed(rhs);
        for (Index r = 0; r < k; ++r) y[kernel_rows_[r]] = yk[r];
        return y;
    }

private:
    struct Singleton {
        Index position;
        Index row;
        Scalar value;
    };

    // Eigen applies the LU permutations in place by cycle following; plain
    // gathers are cheaper.
    Vector lu_solve(const Vector& v) const {
        const auto& pr = lu_.rowsPermutation().indices();
        const auto& pc = lu_.colsPermutation().indices();
        Vector x(v.size());
        for (Index i = 0; i < v.size(); ++i) x[pr[i]] = v[i];
        lu_.matrixL().solveInPlace(x);
        lu_.matrixU().solveInPlace(x);
        Vector w(v.size());
        for (Index i = 0; i < v.size(); ++i) w[i] = x[pc[i]];
        return w;
    }

    Vector lu_solve_transposed(const Vector& v) const {
        const auto& pr = lu_.rowsPermutation().indices();
        const auto& pc = lu_.colsPermutation().indices();
        Vector x(v.size());
        for (Index i = 0; i < v.size(); ++i) x[pc[i]] = v[i];
        lu_.matrixU().template solveTransposedInPlace<false>(x);
        lu_.matrixL().template solveTransposedInPlace<false>(x);
        Vector w(v.size());
        for (Index i = 0; i < v.size(); ++i) w[i] = x[pr[i]];
        return w;
    }

    std::vector<Singleton> singletons_;
    std::vector<Index> kernel_columns_; ///< basis positions
    std::vector<Index> kernel_rows_;
    std::vector<Index> kernel_index_; ///< row -> kernel row, -1 when claimed
    SparseMatrix columns_;            ///< the kernel columns over all rows
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

template <typename Scalar> class RevisedSimplex {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;
    using Index = Eigen::Index;

    enum class Kind : unsigned char { structural, slack, artificial };
    enum class Outcome { optimal, unbounded, limit };

    RevisedSimplex(SparseMatrix a, Vector b, std::vector<Kind> kinds, std::vector<Index> basis, const LpOptions& opt)
        : a_(std::move(a)), b_(std::move(b)), kind_(std::move(kinds)), basis_(std::move(basis)), opt_(opt) {
        a_.makeCompressed();
        position_.assign(static_cast<std::size_t>(a_.cols()), -1);
        locked_.assign(static_cast<std::size_t>(a_.cols()), 0);
        for (Index i = 0; i < rows(); ++i) position_[basis_[i]] = i;
        refactor();
    }

    Index rows() const { return a_.rows(); }
    Index cols() const { return a_.cols(); }
    long iterations() const { return iterations_; }

    /// Locked artificial columns are held at zero: any pivot that touches
    /// their row drives them out with a degenerate step.
    void lock(Index j) { locked_[static_cast<std::size_t>(j)] = 1; }

    Outcome run(const Vector& cost) {
        int degenerate = 0;
        bool bland = false;
        bool fresh = false;
        while (true) {
            if (iterations_ >= opt_.max_iterations) return Outcome::limit;
            if (opt_.deadline && (iterations_ & 31) == 0 && std::chrono::steady_clock::now() > *opt_.deadline)
                throw TimeoutError("LP solve exceeded its deadline");
            if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) refactor();

            const Vector y = duals(cost);
            const auto [entering, entering_dj] = price(cost, y, bland);
            if (entering < 0) {
                // confirm optimality on a fresh factorization
                if (fresh || etas_.empty()) return Outcome::optimal;
                refactor();
                fresh = true;
                continue;
            }
            fresh = false;

            const Vector alpha = ftran(column(entering));
            const Index leaving = ratio_test(alpha, bland);
            if (leaving < 0) {
                // a ray from a stale eta file may be noise; confirm it fresh
                if (!etas_.empty()) {
                    refactor();
                    continue;
                }
                ray_entering_ = entering;
                ray_alpha_ = alpha;
                return Outcome::unbounded;
            }
            // a locked artificial sits at zero and leaves with a degenerate step
            const Scalar theta = locked_[basis_[leaving]]
                                     ? Scalar(0)
                                     : std::max(xb_[leaving], Scalar(0)) / alpha[leaving];
            pivot(leaving, entering, alpha, theta);
            ++iterations_;

            if (theta * entering_dj <= Scalar(1e-12)) {
                if (++degenerate >= opt_.degenerate_limit) bland = true;
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    /// Chooses the entering column. Dantzig pricing runs over rotating
    /// partial windows so a pass touches only a slice of the columns; Bland
    /// mode takes the lowest eligible index.
    std::pair<Index, Scalar> price(const Vector& cost, const Vector& y, bool bland) {
        const auto reduced = [&](Index j) {
            Scalar dj = cost[j];
            for (typename SparseMatrix::InnerIterator it(a_, j); it; ++it) dj -= it.value() * y[it.row()];
            return dj;
        };
        const auto eligible = [&](Index j) { return position_[j] < 0 && kind_[j] != Kind::artificial; };
        const Index n = cols();
        if (bland) {
            for (Index j = 0; j < n; ++j)
                if (eligible(j)) {
                    const Scalar dj = reduced(j);
                    if (dj > opt_.optimality_tolerance) return {j, dj};
                }
            return {-1, 0};
        }
        const Index window = std::max<Index>(4096, n / 8);
        Index entering = -1;
        Scalar best = opt_.optimality_tolerance;
        Index j = price_start_ < n ? price_start_ : 0;
        for (Index scanned = 0; scanned < n && entering < 0;) {
            const Index stop = std::min(n, scanned + window);
            for (; scanned < stop; ++scanned) {
                if (eligible(j)) {
                    const Scalar dj = reduced(j);
                    if (dj > best) {
                        best = dj;
                        entering = j;
                    }
                }
                if (++j == n) j = 0;
            }
        }
        price_start_ = j;
        return {entering, entering < 0 ? Scalar(0) : best};
    }

    Vector duals(const Vector& cost) const {
        Vector cb(rows());
        for (Index i = 0; i < rows(); ++i) cb[i] = cost[basis_[i]];
        return btran(std::move(cb));
    }

    Vector primal() const {
        Vector x = Vector::Zero(cols());
        for (Index i = 0; i < rows(); ++i) x[basis_[i]] = xb_[i];
        return x;
    }

    Vector ray() const {
        Vector r = Vector::Zero(cols());
        r[ray_entering_] = 1;
        for (Index i = 0; i < rows(); ++i) r[basis_[i]] = -ray_alpha_[i];
        return r;
    }

    const SparseMatrix& matrix() const { return a_; }

    void refactor() {
        factor_.factorize(a_, basis_);
        etas_.clear();
        xb_ = factor_.solve(b_);
    }

private:
    struct Eta {
        Index row;
        Scalar pivot;
        std::vector<std::pair<Index, Scalar>> entries;
    };

    Vector column(Index j) const {
        Vector v = Vector::Zero(rows());
        for (typename SparseMatrix::InnerIterator it(a_, j); it; ++it) v[it.row()] = it.value();
        return v;
    }

    Vector ftran(const Vector& v) const {
        Vector w = factor_.solve(v);
        for (const Eta& e : etas_) {
            const Scalar xr = w[e.row];
            if (xr == Scalar(0)) continue;
            w[e.row] = xr * e.pivot;
            for (const auto& [i, coef] : e.entries) w[i] += coef * xr;
        }
        return w;
    }

    Vector btran(Vector v) const {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            Scalar s = it->pivot * v[it->row];
            for (const auto& [i, coef] : it->entries) s += coef * v[i];
            v[it->row] = s;
        }
        return factor_.solve_transposed(v);
    }

    Index ratio_test(const Vector& alpha, bool bland) const {
        const Scalar ptol = opt_.pivot_tolerance;
        Index locked = -1;
        Scalar largest = ptol;
        for (Index i = 0; i < rows(); ++i)
            if (locked_[basis_[i]] && std::abs(alpha[i]) > largest) {
                largest = std::abs(alpha[i]);
                locked = i;
            }
        if (locked >= 0) return locked;
        constexpr Scalar infinity = std::numeric_limits<Scalar>::infinity();
        // Harris two-pass: the bound relaxed by the feasibility tolerance,
        // then a choice among the rows that reach it
        Scalar relaxed = infinity;
        for (Index i = 0; i < rows(); ++i)
            if (alpha[i] > ptol)
                relaxed = std::min(relaxed, (std::max(xb_[i], Scalar(0)) + opt_.feasibility_tolerance) / alpha[i]);
        if (relaxed == infinity) return -1;
        Index leaving = -1;
        Scalar best = 0;
        for (Index i = 0; i < rows(); ++i) {
            if (alpha[i] <= ptol) continue;
            if (std::max(xb_[i], Scalar(0)) / alpha[i] <= relaxed && alpha[i] > best) {
                best = alpha[i];
                leaving = i;
            }
        }
        if (!bland) return leaving;
        // Bland: lowest variable index among candidates whose pivot is not
        // tiny next to the largest one
        const Scalar floor = std::max(ptol, best * Scalar(1e-3));
        for (Index i = 0; i < rows(); ++i) {
            if (alpha[i] < floor || std::max(xb_[i], Scalar(0)) / alpha[i] > relaxed) continue;
            if (basis_[i] < basis_[leaving]) leaving = i;
        }
        return leaving;
    }

    void pivot(Index leaving, Index entering, const Vector& alpha, Scalar theta) {
        Eta eta{leaving, Scalar(1) / alpha[leaving], {}};
        for (Index i = 0; i < rows(); ++i) {
            if (i == leaving || alpha[i] == Scalar(0)) continue;
            eta.entries.emplace_back(i, -alpha[i] / alpha[leaving]);
            xb_[i] -= theta * alpha[i];
        }
        xb_[leaving] = theta;
        position_[basis_[leaving]] = -1;
        basis_[leaving] = entering;
        position_[entering] = leaving;
        etas_.push_back(std::move(eta));
    }

    SparseMatrix a_;
    Vector b_;
    std::vector<Kind> kind_;
    std::vector<Index> basis_;
    std::vector<Index> position_;
    std::vector<char> locked_;
    LpOptions opt_;
    Vector xb_;
    BasisFactor<Scalar> factor_;
    std::vector<Eta> etas_;
    long iterations_ = 0;
    Index price_start_ = 0;
    Index ray_entering_ = -1;
    Vector ray_alpha_;
};

} // namespace detail

/// Solves a linear program. Throws InvalidArgument for malformed problems,
/// TimeoutError when the deadline passes and NumericalError if the solver
/// breaks down (including a violated strong-duality check at optimality).
template <typename Scalar>
BasicLpSolution<Scalar> solve_lp(const BasicLpProblem<Scalar>& problem, const LpOptions& opt = {}) {
    using Index = Eigen::Index;
    using Vector = typename BasicLpProblem<Scalar>::Vector;
    using SparseMatrix = typename BasicLpProblem<Scalar>::SparseMatrix;
    using Simplex = detail::RevisedSimplex<Scalar>;
    using Kind = typename Simplex::Kind;

    problem.check();
    const Index n = problem.num_variables();
    const Index m_eq = problem.num_equalities();
    const Index m_in = problem.num_inequalities();

    // Variable map: x_j = offset_j + sign_j * x'_pos - x'_neg, with x' >= 0.
    struct ColumnMap {
        Index pos = -1;
        Index neg = -1;
        Scalar sign = 1;
        Scalar offset = 0;
        bool bound_row = false;
    };
    std::vector<ColumnMap> map(static_cast<std::size_t>(n));
    Index structural = 0;
    Index bound_rows = 0;
    for (Index j = 0; j < n; ++j) {
        ColumnMap& c = map[j];
        const Scalar l = problem.lower[j], u = problem.upper[j];
        if (std::isfinite(l)) {
            c.pos = structural++;
            c.offset = l;
            if (std::isfinite(u)) {
                c.bound_row = true;
                ++bound_rows;
            }
        } else if (std::isfinite(u)) {
            c.pos = structural++;
            c.sign = -1;
            c.offset = u;
        } else {
            c.pos = structural++;
            c.neg = structural++;
        }
    }

    Vector offset(n);
    for (Index j = 0; j < n; ++j) offset[j] = map[j].offset;
    const Index m = m_eq + m_in + bound_rows;
    Vector rhs(m);
    rhs.head(m_eq) = problem.eq_rhs - problem.eq_matrix * offset;
    rhs.segment(m_eq, m_in) = problem.in_rhs - problem.in_matrix * offset;
    std::vector<Index> bound_var;
    for (Index j = 0, r = m_eq + m_in; j < n; ++j)
        if (map[j].bound_row) {
            rhs[r++] = problem.upper[j] - problem.lower[j];
            bound_var.push_back(j);
        }
    Vector sigma = Vector::Ones(m);
    for (Index i = 0; i < m; ++i)
        if (rhs[i] < 0) sigma[i] = -1;

    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(problem.eq_matrix.nonZeros() + problem.in_matrix.nonZeros() + 3 * m));
    auto add_block = [&](const SparseMatrix& block, Index row_offset) {
        for (Index j = 0; j < block.outerSize(); ++j)
            for (typename SparseMatrix::InnerIterator it(block, j); it; ++it) {
                const Index r = row_offset + it.row();
                triplets.emplace_back(static_cast<int>(r), static_cast<int>(map[j].pos),
                                      sigma[r] * map[j].sign * it.value());
                if (map[j].neg >= 0)
                    triplets.emplace_back(static_cast<int>(r), static_cast<int>(map[j].neg), -sigma[r] * it.value());
            }
    };
    add_block(problem.eq_matrix, 0);
    add_block(problem.in_matrix, m_eq);
    for (std::size_t k = 0; k < bound_var.size(); ++k) {
        const Index r = m_eq + m_in + static_cast<Index>(k);
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(map[bound_var[k]].pos), sigma[r]);
    }

    std::vector<Kind> kinds(static_cast<std::size_t>(structural), Kind::structural);
    std::vector<Index> basis(static_cast<std::size_t>(m), -1);
    Index col = structural;
    for (Index r = m_eq; r < m; ++r) {
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(col), sigma[r]);
        kinds.push_back(Kind::slack);
        if (sigma[r] > 0) basis[r] = col;
        ++col;
    }
    bool any_artificial = false;
    std::vector<std::pair<Index, Index>> artificial_row;
    for (Index r = 0; r < m; ++r) {
        if (basis[r] >= 0) continue;
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(col), Scalar(1));
        kinds.push_back(Kind::artificial);
        artificial_row.emplace_back(col, r);
        basis[r] = col++;
        any_artificial = true;
    }
    const Index total = col;
    SparseMatrix a(m, total);
    a.setFromTriplets(triplets.begin(), triplets.end());
    const Vector b = sigma.cwiseProduct(rhs);

    Vector cost = Vector::Zero(total);
    for (Index j = 0; j < n; ++j) {
        cost[map[j].pos] = map[j].sign * problem.objective[j];
        if (map[j].neg >= 0) cost[map[j].neg] = -problem.objective[j];
    }
    const Scalar objective_offset = problem.objective.dot(offset);

    BasicLpSolution<Scalar> sol;
    auto to_original = [&](const Vector& internal, bool with_offset) {
        Vector x(n);
        for (Index j = 0; j < n; ++j) {
            x[j] = (with_offset ? map[j].offset : Scalar(0)) + map[j].sign * internal[map[j].pos];
            if (map[j].neg >= 0) x[j] -= internal[map[j].neg];
        }
        return x;
    };

    if (m == 0) {
        for (Index j = 0; j < total; ++j)
            if (cost[j] > opt.optimality_tolerance) {
                Vector r = Vector::Zero(total);
                r[j] = 1;
                sol.status = LpStatus::unbounded;
                sol.certificate = to_original(r, false);
                return sol;
            }
        sol.status = LpStatus::optimal;
        sol.x = to_original(Vector::Zero(total), true);
        sol.objective = problem.objective.dot(sol.x);
        sol.dual_objective = objective_offset;
        sol.eq_duals = Vector::Zero(0);
        sol.in_duals = Vector::Zero(0);
        sol.upper_duals = Vector::Zero(n);
        sol.reduced_costs = problem.objective;
        return sol;
    }

    Simplex simplex(std::move(a), b, kinds, std::move(basis), opt);

    if (any_artificial) {
        Vector phase_one = Vector::Zero(total);
        for (const auto& [j, r] : artificial_row) phase_one[j] = -1;
        const auto outcome = simplex.run(phase_one);
        sol.phase_one_iterations = simplex.iterations();
        if (outcome == Simplex::Outcome::limit) {
            sol.status = LpStatus::limit_exceeded;
            sol.iterations = simplex.iterations();
            return sol;
        }
        const Vector x1 = simplex.primal();
        Scalar infeasibility = 0;
        for (Index j = 0; j < total; ++j)
            if (kinds[j] == Kind::artificial) infeasibility += std::max(x1[j], Scalar(0));
        const Scalar scale = 1 + (b.size() ? b.cwiseAbs().maxCoeff() : Scalar(0));
        if (infeasibility > opt.feasibility_tolerance * scale) {
            const Vector y = simplex.duals(phase_one);
            sol.status = LpStatus::infeasible;
            sol.certificate = sigma.cwiseProduct(y);
            sol.iterations = simplex.iterations();
            return sol;
        }
    }

    for (const auto& [j, r] : artificial_row) simplex.lock(j);
    const auto outcome = simplex.run(cost);
    sol.iterations = simplex.iterations();
    if (outcome == Simplex::Outcome::limit) {
        sol.status = LpStatus::limit_exceeded;
        return sol;
    }
    if (outcome == Simplex::Outcome::unbounded) {
        sol.status = LpStatus::unbounded;
        sol.certificate = to_original(simplex.ray(), false);
        return sol;
    }

    Vector xi = simplex.primal();
    for (Index j = 0; j < total; ++j)
        if (xi[j] < 0 && xi[j] > -opt.feasibility_tolerance) xi[j] = 0;
    const Vector y = simplex.duals(cost);
    const Vector reduced = cost - simplex.matrix().transpose() * y;

    sol.status = LpStatus::optimal;
    sol.x = to_original(xi, true);
    sol.objective = problem.objective.dot(sol.x);
    const Vector y_orig = sigma.cwiseProduct(y);
    sol.eq_duals = y_orig.head(m_eq);
    sol.in_duals = y_orig.segment(m_eq, m_in);
    sol.upper_duals = Vector::Zero(n);
    for (std::size_t k = 0; k < bound_var.size(); ++k)
        sol.upper_duals[bound_var[k]] = y_orig[m_eq + m_in + static_cast<Index>(k)];
    sol.reduced_costs = problem.objective - problem.eq_matrix.transpose() * sol.eq_duals -
                        problem.in_matrix.transpose() * sol.in_duals - sol.upper_duals;
    sol.dual_objective = objective_offset + b.dot(y);

    Scalar residual = 0;
    if (m_eq) residual = (problem.eq_matrix * sol.x - problem.eq_rhs).cwiseAbs().maxCoeff();
    if (m_in) residual = std::max(residual, (problem.in_matrix * sol.x - problem.in_rhs).maxCoeff());
    for (Index j = 0; j < n; ++j)
        residual = std::max({residual, problem.lower[j] - sol.x[j], sol.x[j] - problem.upper[j]});
    sol.primal_residual = std::max(residual, Scalar(0));
    Scalar comp = 0;
    for (Index j = 0; j < total; ++j) comp = std::max(comp, std::abs(xi[j] * reduced[j]));
    sol.complementarity_residual = comp;

    const Scalar gap = std::abs(sol.objective - sol.dual_objective);
    if (gap > Scalar(1e-7) * std::max(Scalar(1), std::abs(sol.objective)))
        throw NumericalError("LP duality gap " + std::to_string(static_cast<double>(gap)) + " at optimality");
    return sol;
}

/// Writes the problem in fixed-format MPS. The objective is negated (MPS
/// minimizes); a comment line in the file records this. Throws Error with
/// the path on I/O failure.
void export_mps(const LpProblem& problem, const std::string& path);

/// The fixed-format MPS document as a string; export_mps writes exactly this.
std::string to_mps(const LpProblem& problem, const std::string& name = "CMDPM");

} // namespace cmdpm
