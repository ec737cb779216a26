#include "cmdpm/vertices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cmdpm {

namespace {

constexpr double kVertexFeasibility = 1e-9;

void check_deadline(const VertexOptions& opt) {
    if (opt.deadline && std::chrono::steady_clock::now() > *opt.deadline)
        throw TimeoutError("vertex enumeration exceeded its deadline");
}

/// Inequality rows G a <= g: the H rows plus a_k >= 0, normalized by their
/// largest coefficient with exact duplicates removed.
struct RowPool {
    Matrix G;
    Vector g;
};

RowPool active_rows(const ActionPolytope& p) {
    const Index n = p.dimension();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    const auto add = [&](Eigen::RowVectorXd row, double value) {
        const double scale = row.cwiseAbs().maxCoeff();
        if (scale == 0) {
            if (value < -kVertexFeasibility) throw InvalidArgument("empty polytope: row 0 <= " + std::to_string(value));
            return;
        }
        row /= scale;
        value /= scale;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if ((rows[i] - row).cwiseAbs().maxCoeff() <= 1e-12) {
                rhs[i] = std::min(rhs[i], value);
                return;
            }
        rows.push_back(std::move(row));
        rhs.push_back(value);
    };
    for (Index k = 0; k < n; ++k) add(-Eigen::RowVectorXd::Unit(n, k), 0.0);
    for (Index j = 0; j < p.H.rows(); ++j) add(p.H.row(j), p.h[j]);
    RowPool pool{Matrix(static_cast<Index>(rows.size()), n), Vector(static_cast<Index>(rows.size()))};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        pool.G.row(static_cast<Index>(i)) = rows[i];
        pool.g[static_cast<Index>(i)] = rhs[i];
    }
    return pool;
}

void snap(Vector& v) {
    for (Index k = 0; k < v.size(); ++k)
        if (std::abs(v[k]) < 1e-13) v[k] = 0;
}

Matrix exhaustive(const ActionPolytope& p, const VertexOptions& opt) {
    const Index n = p.dimension();
    if (n > opt.max_dimension)
        throw InvalidArgument("polytope dimension " + std::to_string(n) + " exceeds the vertex enumeration limit " +
                              std::to_string(opt.max_dimension) + "; use occupancy_lp (the convex method) instead");
    const RowPool pool = active_rows(p);
    const Index m = pool.G.rows();
    const Index pick = n - 1;
    std::vector<Vector> kept;
    const auto keep = [&](Vector v) {
        for (const Vector& w : kept)
            if ((w - v).cwiseAbs().maxCoeff() <= opt.dedup_tolerance) return;
        kept.push_back(std::move(v));
    };
    const auto feasible = [&](const Vector& a) {
        return (pool.G * a - pool.g).maxCoeff() <= kVertexFeasibility &&
               std::abs(a.sum() - 1.0) <= kVertexFeasibility;
    };

    if (pick == 0) {
        const Vector one = Vector::Ones(1);
        if (feasible(one)) keep(one);
    } else if (pick <= m) {
        std::vector<Index> choice(static_cast<std::size_t>(pick));
        std::iota(choice.begin(), choice.end(), Index(0));
        Matrix M(n, n);
        Vector rhs(n);
        M.row(0).setOnes();
        rhs[0] = 1;
        Eigen::FullPivLU<Matrix> lu(n, n);
        lu.setThreshold(1e-10);
        for (long count = 0;; ++count) {
            if ((count & 4095) == 0) check_deadline(opt);
            for (Index r = 0; r < pick; ++r) {
                M.row(r + 1) = pool.G.row(choice[r]);
                rhs[r + 1] = pool.g[choice[r]];
            }
            lu.compute(M);
            if (lu.isInvertible()) {
                Vector a = lu.solve(rhs);
                if (feasible(a)) {
                    snap(a);
                    keep(std::move(a));
                }
            }
            // next combination in lexicographic order
            Index i = pick - 1;
            while (i >= 0 && choice[i] == m - pick + i) --i;
            if (i < 0) break;
            ++choice[i];
            for (Index j = i + 1; j < pick; ++j) choice[j] = choice[j - 1] + 1;
        }
    }
    if (kept.empty()) throw InvalidArgument("empty polytope: no vertex found");
    Matrix out(n, static_cast<Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) out.col(static_cast<Index>(i)) = kept[i];
    return out;
}

/// Every vertex of {lo <= a <= hi, 1'a = 1} has all coordinates at a bound
/// except at most one, so a pruned depth-first search over bound choices
/// reaches each vertex exactly once.
Matrix box_vertices(const ActionPolytope& p, const VertexOptions& opt) {
    const Index n = p.dimension();
    Vector lo = Vector::Zero(n), hi = Vector::Ones(n);
    for (Index j = 0; j < p.H.rows(); ++j)
        for (Index k = 0; k < n; ++k) {
            const double c = p.H(j, k);
            if (c > 0) hi[k] = std::min(hi[k], p.h[j] / c);
            else if (c < 0) lo[k] = std::max(lo[k], p.h[j] / c);
        }
    const double tol = opt.dedup_tolerance;
    for (Index k = 0; k < n; ++k) {
        if (lo[k] > hi[k] + kVertexFeasibility) throw InvalidArgument("empty polytope: crossed bounds");
        if (hi[k] - lo[k] <= tol) hi[k] = lo[k] = std::clamp(lo[k], 0.0, 1.0);
    }
    Vector suffix_lo = Vector::Zero(n + 1), suffix_hi = Vector::Zero(n + 1);
    for (Index k = n - 1; k >= 0; --k) {
        suffix_lo[k] = suffix_lo[k + 1] + lo[k];
        suffix_hi[k] = suffix_hi[k + 1] + hi[k];
    }
    constexpr double sum_tol = 1e-12;
    std::vector<Vector> found;
    Vector a(n);
    long visits = 0;
    const auto dfs = [&](auto&& self, Index i, double sum, Index free, double free_lo, double free_hi) -> void {
        if ((++visits & 65535) == 0) check_deadline(opt);
        if (sum + free_lo + suffix_lo[i] > 1 + sum_tol || sum + free_hi + suffix_hi[i] < 1 - sum_tol) return;
        if (i == n) {
            if (free < 0) {
                if (std::abs(sum - 1) <= sum_tol) found.push_back(a);
            } else {
                const double v = 1 - sum;
                if (v > lo[free] + tol && v < hi[free] - tol) {
                    found.push_back(a);
                    found.back()[free] = v;
                }
            }
            return;
        }
        a[i] = lo[i];
        self(self, i + 1, sum + lo[i], free, free_lo, free_hi);
        if (hi[i] > lo[i]) {
            a[i] = hi[i];
            self(self, i + 1, sum + hi[i], free, free_lo, free_hi);
            if (free < 0) {
                a[i] = 0;
                self(self, i + 1, sum, i, lo[i], hi[i]);
            }
        }
    };
    dfs(dfs, 0, 0.0, -1, 0.0, 0.0);
    if (found.empty()) throw InvalidArgument("empty polytope: no vertex found");
    Matrix out(n, static_cast<Index>(found.size()));
    for (std::size_t i = 0; i < found.size(); ++i) out.col(static_cast<Index>(i)) = found[i];
    return out;
}

} // namespace

bool is_axis_aligned(const ActionPolytope& polytope) {
    for (Index j = 0; j < polytope.H.rows(); ++j) {
        const Index nonzeros = (polytope.H.row(j).array() != 0).count();
        if (nonzeros > 1 || (nonzeros == 0 && polytope.h[j] < 0)) return false;
    }
    return true;
}

Matrix enumerate_vertices(const ActionPolytope& polytope, const VertexOptions& options) {
    if (polytope.dimension() == 0) throw InvalidArgument("empty polytope: zero dimension");
    switch (options.method) {
    case VertexMethod::exhaustive: return exhaustive(polytope, options);
    case VertexMethod::box:
        if (!is_axis_aligned(polytope)) throw InvalidArgument("box vertex enumeration needs axis-aligned rows");
        return box_vertices(polytope, options);
    case VertexMethod::automatic:
        return is_axis_aligned(polytope) ? box_vertices(polytope, options) : exhaustive(polytope, options);
    }
    throw InvalidArgument("unknown vertex method");
}

Index VertexSet::total() const {
    Index total = 0;
    for (const auto& m : per_state) total += m->cols();
    return total;
}

VertexSet enumerate_all(const CmdpInstance& instance, const VertexOptions& options) {
    require_valid(instance);
    VertexSet set;
    set.dedup_tolerance = options.dedup_tolerance;
    std::map<std::vector<double>, std::shared_ptr<const Matrix>> cache;
    for (const ActionPolytope& p : instance.polytopes) {
        std::vector<double> key{static_cast<double>(p.dimension())};
        key.insert(key.end(), p.H.data(), p.H.data() + p.H.size());
        key.insert(key.end(), p.h.data(), p.h.data() + p.h.size());
        auto [it, inserted] = cache.try_emplace(std::move(key));
        if (inserted) it->second = std::make_shared<const Matrix>(enumerate_vertices(p, options));
        set.per_state.push_back(it->second);
    }
    return set;
}

FiniteCmdp build_finite_cmdp(const CmdpInstance& instance, const VertexSet& vertices) {
    require_valid(instance);
    if (static_cast<Index>(vertices.per_state.size()) != instance.num_decision_states())
        throw InvalidArgument("vertex set does not cover every decision state");
    FiniteCmdp fc{instance.states, instance.alpha, instance.constraints, {}, {}};
    for (StateId s = 0; s < instance.num_decision_states(); ++s) {
        const auto& V = vertices.per_state[s];
        Vector rewards(V->cols());
        for (Index i = 0; i < V->cols(); ++i) rewards[i] = evaluate_reward(instance.rewards[s], V->col(i));
        fc.actions.push_back({V, std::move(rewards)});
        fc.base.push_back(instance.polytopes[s].base);
    }
    return fc;
}

FiniteSolution solve_finite(const FiniteCmdp& fc, const LpOptions& options) {
    const auto& S = fc.states;
    const Index decisions = S.num_decision_states();
    if (static_cast<Index>(fc.actions.size()) != decisions)
        throw InvalidArgument("finite CMDP needs one action set per decision state");

    LpBuilder b;
    std::vector<Index> begin(static_cast<std::size_t>(decisions));
    for (StateId s = 0; s < decisions; ++s) {
        begin[s] = b.num_variables();
        for (Index i = 0; i < fc.actions[s].size(); ++i) b.add_variable({}, fc.actions[s].rewards[i]);
    }
    const Index d0 = b.num_variables();
    for (StateId s = 0; s < S.num_states(); ++s) b.add_variable("d(" + S.name(s) + ")");

    for (Index k = 0; k < S.layer_size(0); ++k) b.add_equality({{d0 + k, 1}}, fc.alpha[k]);
    std::vector<LpTerm<double>> row;
    for (StateId s = 0; s < decisions; ++s) {
        row.assign({{d0 + s, 1}});
        for (Index i = 0; i < fc.actions[s].size(); ++i) row.push_back({begin[s] + i, -1});
        b.add_equality(row, 0);
    }
    for (int t = 1; t < S.horizon(); ++t) {
        std::vector<std::vector<LpTerm<double>>> inflow(static_cast<std::size_t>(S.layer_size(t)));
        for (Index k = 0; k < S.layer_size(t); ++k) inflow[k].push_back({d0 + S.id(t, k), 1});
        for (Index j = 0; j < S.layer_size(t - 1); ++j) {
            const StateId s = S.id(t - 1, j);
            const Matrix& V = *fc.actions[s].transitions;
            for (Index i = 0; i < V.cols(); ++i)
                for (Index k = 0; k < V.rows(); ++k)
                    if (V(k, i) != 0) inflow[k].push_back({begin[s] + i, -V(k, i)});
        }
        for (auto& terms : inflow) {
            b.add_equality(terms, 0);
            std::vector<LpTerm<double>>().swap(terms);
        }
    }
    for (const QualityConstraint& c : fc.constraints) {
        row.clear();
        for (StateId s : c.states) row.push_back({d0 + s, 1});
        b.add_inequality(row, c.bound);
    }
    const LpProblem lp = b.build();
    const LpSolution sol = solve_lp(lp, options);
    if (sol.status == LpStatus::infeasible)
        throw InfeasibleError("quality constraints unsatisfiable",
                              std::vector<double>(sol.certificate.data(), sol.certificate.data() + sol.certificate.size()));
    if (sol.status == LpStatus::unbounded) throw Error("internal error: finite occupancy program is unbounded");
    if (sol.status != LpStatus::optimal) throw Error("LP iteration limit exceeded");

    FiniteSolution out;
    out.objective = sol.objective;
    out.d = sol.x.segment(d0, S.num_states()).cwiseMax(0.0);
    out.constraint_mass = Vector::Zero(static_cast<Index>(fc.constraints.size()));
    for (std::size_t i = 0; i < fc.constraints.size(); ++i)
        for (StateId s : fc.constraints[i].states) out.constraint_mass[static_cast<Index>(i)] += out.d[s];
    out.stats = {lp.num_variables(), lp.num_equalities(), lp.num_inequalities(), sol.iterations};

    std::map<const Matrix*, std::vector<std::pair<Vector, std::vector<MixtureAtom>>>> fallback;
    for (StateId s = 0; s < decisions; ++s) {
        const Matrix& V = *fc.actions[s].transitions;
        Vector u = sol.x.segment(begin[s], V.cols()).cwiseMax(0.0);
        std::vector<MixtureAtom> atoms;
        const double mass = u.sum();
        if (out.d[s] > 1e-9 && mass > 0) {
            for (Index i = 0; i < V.cols(); ++i)
                if (u[i] > 0) atoms.push_back({u[i] / mass, V.col(i)});
        } else {
            auto& cached = fallback[&V];
            const auto hit = std::find_if(cached.begin(), cached.end(),
                                          [&](const auto& entry) { return entry.first == fc.base[s]; });
            if (hit != cached.end()) {
                atoms = hit->second;
            } else {
                atoms = point_to_mix(fc.base[s], V);
                cached.emplace_back(fc.base[s], atoms);
            }
        }
        out.policy.mixtures.push_back(std::move(atoms));
        out.weights.push_back(std::move(u));
    }
    return out;
}

DeterministicPolicy mix_to_point(const RandomizedPolicy& policy) {
    DeterministicPolicy out;
    for (const auto& atoms : policy.mixtures) {
        if (atoms.empty()) throw InvalidArgument("mix_to_point: empty mixture");
        Vector a = Vector::Zero(atoms.front().action.size());
        for (const MixtureAtom& atom : atoms) a += atom.weight * atom.action;
        out.actions.push_back(std::move(a));
    }
    return out;
}

std::vector<MixtureAtom> point_to_mix(const Vector& a, const Matrix& vertices) {
    if (vertices.rows() != a.size() || vertices.cols() == 0)
        throw InvalidArgument("point_to_mix: vertex dimension mismatch");
    LpBuilder b;
    for (Index i = 0; i < vertices.cols(); ++i) b.add_variable();
    std::vector<LpTerm<double>> row;
    for (Index k = 0; k < a.size(); ++k) {
        row.clear();
        for (Index i = 0; i < vertices.cols(); ++i)
            if (vertices(k, i) != 0) row.push_back({i, vertices(k, i)});
        b.add_equality(row, a[k]);
    }
    row.clear();
    for (Index i = 0; i < vertices.cols(); ++i) row.push_back({i, 1});
    b.add_equality(row, 1);
    const LpSolution sol = solve_lp(b.build());
    if (sol.status != LpStatus::optimal)
        throw InfeasibleError("decomposition infeasible: action lies outside the convex hull of the vertices");

    std::vector<MixtureAtom> atoms;
    double total = 0;
    for (Index i = 0; i < vertices.cols(); ++i)
        if (sol.x[i] > 1e-12) {
            atoms.push_back({sol.x[i], vertices.col(i)});
            total += sol.x[i];
        }
    Vector mean = Vector::Zero(a.size());
    for (MixtureAtom& atom : atoms) {
        atom.weight /= total;
        mean += atom.weight * atom.action;
    }
    if ((mean - a).cwiseAbs().maxCoeff() > 1e-8) throw NumericalError("point_to_mix: decomposition residual too large");
    return atoms;
}

} // namespace cmdpm
