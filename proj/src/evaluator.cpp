#include "cmdpm/evaluator.hpp"

#include "cmdpm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace cmdpm {

namespace {

void check_shape(const CmdpInstance& instance, const RandomizedPolicy& policy) {
    const Index decisions = instance.num_decision_states();
    if (static_cast<Index>(policy.mixtures.size()) != decisions)
        throw InvalidArgument("policy covers " + std::to_string(policy.mixtures.size()) + " states, expected " +
                              std::to_string(decisions));
    for (StateId s = 0; s < decisions; ++s) {
        const auto& atoms = policy.mixtures[s];
        if (atoms.empty()) throw InvalidArgument("no action for state " + instance.states.name(s));
        double total = 0;
        for (const MixtureAtom& atom : atoms) {
            if (atom.action.size() != instance.states.next_size(s))
                throw InvalidArgument("action for state " + instance.states.name(s) + " has the wrong dimension");
            if (atom.weight < 0) throw InvalidArgument("negative mixture weight at state " + instance.states.name(s));
            total += atom.weight;
        }
        if (std::abs(total - 1) > 1e-10)
            throw InvalidArgument("mixture weights at state " + instance.states.name(s) + " do not sum to 1");
    }
}

void finish(const CmdpInstance& instance, EvaluationReport& report) {
    const Index m = static_cast<Index>(instance.constraints.size());
    report.constraint_mass = Vector::Zero(m);
    report.slack = Vector::Zero(m);
    report.feasible = true;
    for (Index i = 0; i < m; ++i) {
        const auto& c = instance.constraints[static_cast<std::size_t>(i)];
        for (StateId s : c.states) report.constraint_mass[i] += report.d[s];
        report.slack[i] = c.bound - report.constraint_mass[i];
        if (report.slack[i] < -kFeasibilityTolerance) report.feasible = false;
    }
}

/// Index of the first cumulative weight above u * total.
Index sample(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return std::min<Index>(static_cast<Index>(it - cdf.begin()), static_cast<Index>(cdf.size()) - 1);
}

std::vector<double> cumulative(const Eigen::Ref<const Vector>& p) {
    std::vector<double> cdf(static_cast<std::size_t>(p.size()));
    double acc = 0;
    for (Index k = 0; k < p.size(); ++k) cdf[k] = acc += std::max(p[k], 0.0);
    return cdf;
}

struct Batch {
    std::vector<long> visits;
    double sum = 0;
    double sum_sq = 0;
};

} // namespace

EvaluationReport evaluate_exact(const CmdpInstance& instance, const Policy& policy) {
    const RandomizedPolicy mixed = as_randomized(policy);
    check_shape(instance, mixed);
    const auto& S = instance.states;
    EvaluationReport report;
    report.d = Vector::Zero(S.num_states());
    report.d.head(S.layer_size(0)) = instance.alpha;
    double ret = 0;
    for (StateId s = 0; s < S.num_decision_states(); ++s) {
        const double mass = report.d[s];
        if (mass == 0) continue;
        const Index next = S.layer_begin(S.layer_of(s) + 1);
        for (const MixtureAtom& atom : mixed.mixtures[s]) {
            report.d.segment(next, atom.action.size()) += (mass * atom.weight) * atom.action;
            ret += mass * atom.weight * evaluate_reward(instance.rewards[s], atom.action);
        }
    }
    report.return_value = ret;
    finish(instance, report);
    return report;
}

EvaluationReport simulate(const CmdpInstance& instance, const Policy& policy, long trajectories, std::uint64_t seed,
                          unsigned threads) {
    if (trajectories < 1) throw InvalidArgument("simulate: trajectories must be at least 1");
    const RandomizedPolicy mixed = as_randomized(policy);
    check_shape(instance, mixed);
    const auto& S = instance.states;
    const Index decisions = S.num_decision_states();

    struct StateTable {
        std::vector<double> atom_cdf;
        std::vector<std::vector<double>> next_cdf;
        std::vector<double> reward;
        Index next_begin = 0;
    };
    std::vector<StateTable> table(static_cast<std::size_t>(decisions));
    for (StateId s = 0; s < decisions; ++s) {
        StateTable& t = table[s];
        Vector weights(static_cast<Index>(mixed.mixtures[s].size()));
        for (const MixtureAtom& atom : mixed.mixtures[s]) {
            weights[static_cast<Index>(t.reward.size())] = atom.weight;
            t.next_cdf.push_back(cumulative(atom.action));
            t.reward.push_back(evaluate_reward(instance.rewards[s], atom.action));
        }
        t.atom_cdf = cumulative(weights);
        t.next_begin = S.layer_begin(S.layer_of(s) + 1);
    }
    const std::vector<double> start = cumulative(instance.alpha);

    constexpr long kBatches = 64;
    const long batches = std::min(trajectories, kBatches);
    std::vector<Batch> results(static_cast<std::size_t>(batches));
    const auto run_batch = [&](long b) {
        Batch& out = results[static_cast<std::size_t>(b)];
        out.visits.assign(static_cast<std::size_t>(S.num_states()), 0);
        const long first = trajectories * b / batches, last = trajectories * (b + 1) / batches;
        for (long i = first; i < last; ++i) {
            CounterRng rng(seed, static_cast<std::uint64_t>(i));
            StateId s = sample(start, rng.uniform());
            double ret = 0;
            while (true) {
                ++out.visits[s];
                if (s >= decisions) break;
                const StateTable& t = table[s];
                const Index atom = sample(t.atom_cdf, rng.uniform());
                ret += t.reward[atom];
                s = t.next_begin + sample(t.next_cdf[atom], rng.uniform());
            }
            out.sum += ret;
            out.sum_sq += ret * ret;
        }
    };

    const unsigned workers =
        std::max(1u, std::min<unsigned>(threads ? threads : std::thread::hardware_concurrency(), batches));
    if (workers == 1) {
        for (long b = 0; b < batches; ++b) run_batch(b);
    } else {
        std::atomic<long> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (long b; (b = next.fetch_add(1)) < batches;) run_batch(b);
            });
    }

    std::vector<long> visits(static_cast<std::size_t>(S.num_states()), 0);
    double sum = 0, sum_sq = 0;
    for (const Batch& b : results) {
        for (std::size_t k = 0; k < visits.size(); ++k) visits[k] += b.visits[k];
        sum += b.sum;
        sum_sq += b.sum_sq;
    }
    EvaluationReport report;
    const double n = static_cast<double>(trajectories);
    report.d.resize(S.num_states());
    for (StateId s = 0; s < S.num_states(); ++s) report.d[s] = static_cast<double>(visits[s]) / n;
    report.return_value = sum / n;
    const double variance = trajectories > 1 ? std::max(0.0, (sum_sq - n * report.return_value * report.return_value) / (n - 1)) : 0.0;
    report.return_stderr = std::sqrt(variance / n);
    report.trajectories = trajectories;
    report.seed = seed;
    finish(instance, report);
    return report;
}

} // namespace cmdpm
