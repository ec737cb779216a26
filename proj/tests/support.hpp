#pragma once

// Fixtures and independent oracles shared by the test binaries. Nothing in
// the oracle namespace calls into the library's solvers or evaluators.

#include "cmdpm/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace cmdpm::test {

/// One start state s, two terminal states t1, t2; b = (0.5, 0.5); the
/// constraint d(t2) <= bound.
inline CmdpInstance two_outcome_instance(double epsilon, std::optional<double> bound, RewardSpec reward) {
    CmdpInstance in;
    in.states = LayeredStateSpace({{"s"}, {"t1", "t2"}});
    Vector b(2);
    b << 0.5, 0.5;
    in.polytopes.push_back(box_polytope(b, epsilon));
    in.rewards.push_back(std::move(reward));
    in.alpha = Vector::Ones(1);
    if (bound) in.constraints.push_back({{2}, *bound, "t2"});
    return in;
}

inline RewardSpec l1_around(const Vector& b) { return WeightedL1Reward{b, Vector::Ones(b.size())}; }

/// One decision state on the full simplex with r(a) = a2^2.
inline CmdpInstance square_reward_instance(std::optional<double> bound) {
    CmdpInstance in;
    in.states = LayeredStateSpace({{"s"}, {"t1", "t2"}});
    ActionPolytope p;
    p.base = Vector::Constant(2, 0.5);
    p.H = Matrix(0, 2);
    p.h = Vector(0);
    in.polytopes.push_back(p);
    Vector w(2);
    w << 0, 1;
    in.rewards.push_back(QuadraticReward{Vector::Zero(2), Curvature::convex, w});
    in.alpha = Vector::Ones(1);
    if (bound) in.constraints.push_back({{2}, *bound, "t2"});
    return in;
}

namespace oracle {

/// Reward written out coordinate by coordinate.
inline double reward(const RewardSpec& spec, const Vector& a) {
    double v = 0;
    if (const auto* r = std::get_if<AffineReward>(&spec)) {
        v = r->offset;
        for (Index k = 0; k < a.size(); ++k) v += r->coefficients[k] * a[k];
    } else if (const auto* r = std::get_if<WeightedL1Reward>(&spec)) {
        for (Index k = 0; k < a.size(); ++k) v -= r->weights[k] * std::fabs(a[k] - r->center[k]);
    } else {
        const auto& q = std::get<QuadraticReward>(spec);
        for (Index k = 0; k < a.size(); ++k) {
            const double w = q.weights.size() ? q.weights[k] : 1.0;
            v += w * (a[k] - q.center[k]) * (a[k] - q.center[k]);
        }
        if (q.curvature == Curvature::concave) v = -v;
    }
    return v;
}

struct Outcome {
    std::vector<double> d;
    double value = 0;
    std::vector<double> mass;
};

/// Forward recursion for a deterministic action per decision state.
inline Outcome forward(const CmdpInstance& in, const std::vector<Vector>& actions) {
    const auto& S = in.states;
    Outcome out;
    out.d.assign(static_cast<std::size_t>(S.num_states()), 0.0);
    for (Index k = 0; k < S.layer_size(0); ++k) out.d[k] = in.alpha[k];
    for (int t = 0; t + 1 < S.horizon(); ++t) {
        for (Index k = 0; k < S.layer_size(t); ++k) {
            const StateId s = S.id(t, k);
            const double ds = out.d[s];
            out.value += ds * reward(in.rewards[s], actions[s]);
            for (Index j = 0; j < S.layer_size(t + 1); ++j) out.d[S.id(t + 1, j)] += ds * actions[s][j];
        }
    }
    for (const auto& c : in.constraints) {
        double m = 0;
        for (StateId s : c.states) m += out.d[s];
        out.mass.push_back(m);
    }
    return out;
}

/// Solves the square system by Gaussian elimination with partial pivoting.
inline std::optional<Vector> gauss(Matrix A, Vector b) {
    const Index n = A.rows();
    for (Index c = 0; c < n; ++c) {
        Index p = c;
        for (Index r = c + 1; r < n; ++r)
            if (std::fabs(A(r, c)) > std::fabs(A(p, c))) p = r;
        if (std::fabs(A(p, c)) < 1e-10) return std::nullopt;
        A.row(c).swap(A.row(p));
        std::swap(b[c], b[p]);
        for (Index r = c + 1; r < n; ++r) {
            const double f = A(r, c) / A(c, c);
            for (Index k = c; k < n; ++k) A(r, k) -= f * A(c, k);
            b[r] -= f * b[c];
        }
    }
    Vector x(n);
    for (Index r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (Index k = r + 1; k < n; ++k) s -= A(r, k) * x[k];
        x[r] = s / A(r, r);
    }
    return x;
}

/// Vertices of {a >= 0, 1'a = 1, H a <= h}: every choice of n-1 tight rows
/// among -a_k <= 0 and H, together with the sum row.
inline std::vector<Vector> vertices_by_bases(const Matrix& H, const Vector& h, Index n) {
    Matrix rows(n + H.rows(), n);
    Vector rhs(n + H.rows());
    rows.topRows(n) = -Matrix::Identity(n, n);
    rhs.head(n).setZero();
    rows.bottomRows(H.rows()) = H;
    rhs.tail(H.rows()) = h;
    const Index m = rows.rows();
    std::vector<Vector> found;
    std::vector<Index> pick(static_cast<std::size_t>(n - 1));
    std::function<void(Index, Index)> choose = [&](Index start, Index depth) {
        if (depth == n - 1) {
            Matrix A(n, n);
            Vector b(n);
            A.row(0).setOnes();
            b[0] = 1;
            for (Index i = 0; i < n - 1; ++i) {
                A.row(i + 1) = rows.row(pick[i]);
                b[i + 1] = rhs[pick[i]];
            }
            const auto x = gauss(A, b);
            if (!x) return;
            for (Index r = 0; r < m; ++r)
                if (rows.row(r).dot(*x) > rhs[r] + 1e-9) return;
            for (const Vector& v : found)
                if ((v - *x).cwiseAbs().maxCoeff() < 1e-7) return;
            found.push_back(*x);
            return;
        }
        for (Index r = start; r < m; ++r) {
            pick[depth] = r;
            choose(r + 1, depth + 1);
        }
    };
    if (n == 1) {
        Vector one = Vector::Ones(1);
        if ((H * one - h).maxCoeff() <= 1e-9 || H.rows() == 0) found.push_back(one);
        return found;
    }
    choose(0, 0);
    return found;
}

/// max sum l_i value_i  s.t.  sum l_i mass_i <= bound, l in the simplex.
/// With one constraint a basic optimum uses at most two policies.
inline std::optional<double> best_mixture(const std::vector<double>& value, const std::vector<double>& mass,
                                          double bound) {
    std::optional<double> best;
    const auto offer = [&](double v) {
        if (!best || v > *best) best = v;
    };
    const std::size_t N = value.size();
    for (std::size_t i = 0; i < N; ++i)
        if (mass[i] <= bound + 1e-12) offer(value[i]);
    for (std::size_t i = 0; i < N; ++i) {
        if (mass[i] > bound) continue;
        for (std::size_t j = 0; j < N; ++j) {
            if (mass[j] <= bound) continue;
            const double l = (bound - mass[j]) / (mass[i] - mass[j]); // weight on i, tight mix
            offer(l * value[i] + (1 - l) * value[j]);
        }
    }
    return best;
}

/// Every deterministic policy over the given per-state action lists.
inline void for_each_policy(const std::vector<std::vector<Vector>>& choices,
                            const std::function<void(const std::vector<Vector>&)>& visit) {
    std::vector<Vector> current(choices.size());
    std::function<void(std::size_t)> rec = [&](std::size_t s) {
        if (s == choices.size()) return visit(current);
        for (const Vector& a : choices[s]) {
            current[s] = a;
            rec(s + 1);
        }
    };
    rec(0);
}

} // namespace oracle

/// Two periods of a good/default chain: g0 -> {g1, d1} -> {g2, d2}, base
/// (0.5, 0.5) with width 0.4 at g0 and g1, d1 absorbing, L1 rewards and
/// d(d2) <= bound. Meeting a tight bound is cheap late (only g1's share of
/// mass pays) and expensive early, which a period-by-period method that
/// freezes later periods at the base cannot see.
inline CmdpInstance greedy_trap_instance(double bound) {
    CmdpInstance in;
    in.states = LayeredStateSpace({{"g0"}, {"g1", "d1"}, {"g2", "d2"}});
    const Vector b = Vector::Constant(2, 0.5);
    in.polytopes = {box_polytope(b, 0.4), box_polytope(b, 0.4), box_polytope(Vector::Unit(2, 1), 0.0)};
    in.rewards = {l1_around(b), l1_around(b), l1_around(Vector::Unit(2, 1))};
    in.alpha = Vector::Ones(1);
    in.constraints.push_back({{4}, bound, "d2"});
    return in;
}

namespace oracle {

/// Best feasible return of greedy_trap_instance over a grid of default
/// probabilities x at g0 and y at g1.
inline std::optional<double> greedy_trap_grid(const CmdpInstance& in, int steps) {
    std::optional<double> best;
    Vector ax(2), ay(2);
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const double x = 0.1 + 0.8 * i / steps, y = 0.1 + 0.8 * j / steps;
            ax << 1 - x, x;
            ay << 1 - y, y;
            const Outcome o = forward(in, {ax, ay, Vector::Unit(2, 1)});
            if (o.mass[0] > in.constraints[0].bound + 1e-12) continue;
            if (!best || o.value > *best) best = o.value;
        }
    return best;
}

} // namespace oracle

/// Random affine-reward instance with box polytopes, at most one quality
/// constraint, and small enough that the deterministic vertex policies can
/// be enumerated (at most `max_policies`).
struct RandomAffine {
    CmdpInstance instance;
    std::vector<std::vector<Vector>> vertices; ///< from the basis oracle
    double policy_count = 0;
};

inline Vector random_distribution(std::mt19937_64& rng, Index n) {
    std::exponential_distribution<double> e(1.0);
    Vector v(n);
    for (Index k = 0; k < n; ++k) v[k] = e(rng) + 1e-3;
    return v / v.sum();
}

inline RandomAffine random_affine_instance(std::mt19937_64& rng, int max_width = 8, int max_horizon = 4,
                                           double max_policies = 3000) {
    std::uniform_int_distribution<int> horizon_d(2, max_horizon);
    std::uniform_real_distribution<double> unit(0, 1), coef(-1, 1);
    for (;;) {
        const int T = horizon_d(rng);
        std::vector<std::vector<std::string>> layers(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) {
            // decision layers stay narrow so the policy count is enumerable
            const int hi = t + 1 < T ? std::min(max_width, 3) : max_width;
            const int w = std::uniform_int_distribution<int>(t == 0 ? 1 : 2, std::max(2, hi))(rng);
            for (int k = 0; k < w; ++k) layers[t].push_back("s" + std::to_string(t) + "_" + std::to_string(k));
        }
        RandomAffine out;
        CmdpInstance& in = out.instance;
        in.states = LayeredStateSpace(layers);
        const auto& S = in.states;
        in.alpha = random_distribution(rng, S.layer_size(0));
        double count = 1;
        for (StateId s = 0; s < S.num_decision_states(); ++s) {
            const Index n = S.next_size(s);
            const double eps = 0.05 + 0.35 * unit(rng);
            in.polytopes.push_back(box_polytope(random_distribution(rng, n), eps));
            Vector e(n);
            for (Index k = 0; k < n; ++k) e[k] = coef(rng);
            in.rewards.push_back(AffineReward{e, coef(rng)});
            const auto& p = in.polytopes.back();
            out.vertices.push_back(oracle::vertices_by_bases(p.H, p.h, n));
            count *= static_cast<double>(out.vertices.back().size());
        }
        if (count > max_policies) continue;
        out.policy_count = count;

        // a constraint on one random terminal state, bound between the
        // smallest reachable mass and the base policy's mass
        if (unit(rng) < 0.8) {
            const StateId target = S.id(T - 1, std::uniform_int_distribution<Index>(0, S.layer_size(T - 1) - 1)(rng));
            in.constraints.push_back({{target}, 0.0, "q"});
            // smallest reachable mass, by backward induction over vertices
            Vector m = Vector::Zero(S.num_states());
            m[target] = 1;
            for (StateId s = S.num_decision_states() - 1; s >= 0; --s) {
                const Index next = S.layer_begin(S.layer_of(s) + 1);
                double best = std::numeric_limits<double>::infinity();
                for (const Vector& a : out.vertices[s]) best = std::min(best, a.dot(m.segment(next, a.size())));
                m[s] = best;
            }
            const double lo = in.alpha.dot(m.head(S.layer_size(0)));
            std::vector<Vector> base;
            for (const auto& p : in.polytopes) base.push_back(p.base);
            const double at_base = oracle::forward(in, base).mass[0];
            in.constraints[0].bound = lo + unit(rng) * std::max(0.0, at_base - lo);
        }
        return out;
    }
}

/// Best return over mixtures of deterministic vertex policies.
inline std::optional<double> mixture_oracle(const RandomAffine& r) {
    std::vector<double> value, mass;
    oracle::for_each_policy(r.vertices, [&](const std::vector<Vector>& a) {
        const auto o = oracle::forward(r.instance, a);
        value.push_back(o.value);
        mass.push_back(o.mass.empty() ? 0.0 : o.mass[0]);
    });
    const double bound = r.instance.constraints.empty() ? 1.0 : r.instance.constraints[0].bound;
    return oracle::best_mixture(value, mass, bound);
}

} // namespace cmdpm::test
