#pragma once

// Concave envelopes of convex rewards over polytopes, generated by the
// reward values at the vertices, and the CMDP solved against them.

#include "cmdpm/model.hpp"
#include "cmdpm/occupancy.hpp"
#include "cmdpm/vertices.hpp"

#include <memory>
#include <vector>

namespace cmdpm {

struct EnvelopeModel {
    std::vector<std::shared_ptr<const Matrix>> generators; ///< per decision state, one column per vertex
    std::vector<Vector> values;                            ///< r(s, a_i) per generator
};

EnvelopeModel build_envelope_model(const CmdpInstance& instance, const VertexSet& vertices);

struct EnvelopeValue {
    double value = 0;
    std::vector<MixtureAtom> weights;
};

/// max sum l_i v_i  s.t.  sum l_i g_i = x, sum l_i = 1, l >= 0.
/// Throws InfeasibleError when x lies outside the hull of the generators.
EnvelopeValue envelope_value(const Matrix& generators, const Vector& values, const Vector& x);

inline EnvelopeValue envelope_value(const EnvelopeModel& model, StateId s, const Vector& a) {
    return envelope_value(*model.generators[s], model.values[s], a);
}

struct EnvelopeOptions {
    VertexOptions vertices{VertexMethod::automatic, 25, 1e-7, std::nullopt};
    LpOptions lp;
};

struct EnvelopeSolution {
    double objective = 0;
    RandomizedPolicy policy;
    Vector d;
    Vector constraint_mass;
    Index vertices_total = 0;
    LpStats stats;
};

/// Optimal randomized vertex policy for convex or affine rewards. Throws
/// InvalidArgument for concave non-affine rewards and InfeasibleError when
/// the quality constraints cannot be met.
EnvelopeSolution solve_with_envelope(const CmdpInstance& instance, const EnvelopeOptions& options = {});

struct NaiveResult {
    double true_return = 0;       ///< the extracted policy evaluated under the real rewards
    double linearized_objective = 0;
    DeterministicPolicy policy;
};

/// Replaces each quadratic reward by its tangent plane at b(s), solves the
/// resulting LP and scores the policy under the true reward. Among optima of
/// the linear problem it picks the one with the least L1 modulation from b.
NaiveResult naive_linear_baseline(const CmdpInstance& instance, const LpOptions& options = {});

} // namespace cmdpm
