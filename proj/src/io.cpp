#include "cmdpm/io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <ostream>

namespace cmdpm {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw InvalidArgument(path + ": " + message);
}

void require_object(const Json& j, const std::string& path, std::initializer_list<std::string_view> required,
                    std::initializer_list<std::string_view> optional = {}) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto k : required) known = known || key == k;
        for (auto k : optional) known = known || key == k;
        if (!known) fail(path, "unknown field '" + key + "'");
    }
    for (auto k : required)
        if (!j.contains(k)) fail(path, "missing field '" + std::string(k) + "'");
}

std::string child(const std::string& path, std::string_view key) { return path + "." + std::string(key); }
std::string child(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
}

std::string text(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Vector vector_of(const Json& j, const std::string& path, std::optional<Index> size = std::nullopt) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    if (size && static_cast<Index>(j.size()) != *size)
        fail(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(j.size()));
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number(j[i], child(path, i));
    return v;
}

Matrix matrix_of(const Json& j, const std::string& path, Index cols) {
    if (!j.is_array()) fail(path, "expected an array of rows");
    Matrix m(static_cast<Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) m.row(static_cast<Index>(i)) = vector_of(j[i], child(path, i), cols);
    return m;
}

Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

StateId state_named(const LayeredStateSpace& S, const Json& j, const std::string& path) {
    const std::string name = text(j, path);
    const auto id = S.find(name);
    if (!id) fail(path, "unknown state '" + name + "'");
    return *id;
}

RewardSpec reward_of(const Json& j, const std::string& path, Index n) {
    require_object(j, path, {"type", "params"});
    const std::string type = text(j["type"], child(path, "type"));
    const Json& p = j["params"];
    const std::string pp = child(path, "params");
    if (type == "affine") {
        require_object(p, pp, {"coefficients"}, {"offset"});
        AffineReward r{vector_of(p["coefficients"], child(pp, "coefficients"), n), 0};
        if (p.contains("offset")) r.offset = number(p["offset"], child(pp, "offset"));
        return r;
    }
    if (type == "weighted_l1") {
        require_object(p, pp, {"center", "weights"});
        return WeightedL1Reward{vector_of(p["center"], child(pp, "center"), n),
                                vector_of(p["weights"], child(pp, "weights"), n)};
    }
    if (type == "quadratic") {
        require_object(p, pp, {"center", "curvature"}, {"weights"});
        QuadraticReward r{vector_of(p["center"], child(pp, "center"), n), Curvature::concave, {}};
        const std::string curv = text(p["curvature"], child(pp, "curvature"));
        if (curv == "convex") r.curvature = Curvature::convex;
        else if (curv != "concave") fail(child(pp, "curvature"), "expected 'concave' or 'convex'");
        if (p.contains("weights")) r.weights = vector_of(p["weights"], child(pp, "weights"), n);
        return r;
    }
    fail(child(path, "type"), "unknown reward type '" + type + "' (affine, weighted_l1, quadratic)");
}

Json reward_json(const RewardSpec& spec) {
    Json params;
    if (const auto* r = std::get_if<AffineReward>(&spec)) {
        params["coefficients"] = to_json(r->coefficients);
        params["offset"] = r->offset;
    } else if (const auto* r = std::get_if<WeightedL1Reward>(&spec)) {
        params["center"] = to_json(r->center);
        params["weights"] = to_json(r->weights);
    } else {
        const auto& q = std::get<QuadraticReward>(spec);
        params["center"] = to_json(q.center);
        params["curvature"] = q.curvature == Curvature::concave ? "concave" : "convex";
        if (q.weights.size()) params["weights"] = to_json(q.weights);
    }
    return Json{{"type", reward_type_name(spec)}, {"params", params}};
}

Json constraint_report(const CmdpInstance& instance, const Vector& mass) {
    Json out = Json::array();
    for (std::size_t i = 0; i < instance.constraints.size(); ++i) {
        const auto& c = instance.constraints[i];
        const double m = mass.size() > static_cast<Index>(i) ? mass[static_cast<Index>(i)] : std::nan("");
        out.push_back({{"name", c.name.empty() ? "c" + std::to_string(i) : c.name},
                       {"bound", c.bound},
                       {"mass", m},
                       {"slack", c.bound - m}});
    }
    return out;
}

Json d_json(const Vector& d, const LayeredStateSpace& S) {
    Json out = Json::object();
    for (StateId s = 0; s < d.size(); ++s) out[S.name(s)] = d[s];
    return out;
}

Json evaluation_json(const EvaluationReport& r, const CmdpInstance& instance) {
    Json out{{"return", r.return_value},
             {"feasible", r.feasible},
             {"d", d_json(r.d, instance.states)},
             {"constraints", constraint_report(instance, r.constraint_mass)}};
    return out;
}

} // namespace

CmdpInstance problem_from_json(const Json& doc) {
    const std::string root = "problem";
    require_object(doc, root, {"horizon", "layers", "alpha", "states"}, {"constraints"});
    if (!doc["horizon"].is_number_integer()) fail(child(root, "horizon"), "expected an integer");
    const auto horizon = doc["horizon"].get<long long>();
    const Json& jl = doc["layers"];
    if (!jl.is_array()) fail(child(root, "layers"), "expected an array of layers");
    if (static_cast<long long>(jl.size()) != horizon)
        fail(child(root, "layers"), "horizon is " + std::to_string(horizon) + " but " + std::to_string(jl.size()) +
                                        " layers are listed");
    std::vector<std::vector<std::string>> layers;
    for (std::size_t t = 0; t < jl.size(); ++t) {
        const std::string lp = child(child(root, "layers"), t);
        if (!jl[t].is_array()) fail(lp, "expected an array of state names");
        auto& layer = layers.emplace_back();
        for (std::size_t k = 0; k < jl[t].size(); ++k) layer.push_back(text(jl[t][k], child(lp, k)));
    }

    CmdpInstance in;
    try {
        in.states = LayeredStateSpace(std::move(layers));
    } catch (const InvalidArgument& e) {
        fail(child(root, "layers"), e.what());
    }
    const LayeredStateSpace& S = in.states;
    in.alpha = vector_of(doc["alpha"], child(root, "alpha"), S.layer_size(0));

    const Json& js = doc["states"];
    const std::string sp = child(root, "states");
    if (!js.is_object()) fail(sp, "expected an object keyed by state name");
    std::vector<const Json*> entries(static_cast<std::size_t>(S.num_decision_states()), nullptr);
    for (const auto& [name, value] : js.items()) {
        const auto id = S.find(name);
        if (!id) fail(sp, "unknown state '" + name + "'");
        if (S.is_terminal(*id)) fail(child(sp, name), "terminal states take no action set or reward");
        entries[static_cast<std::size_t>(*id)] = &value;
    }
    for (StateId s = 0; s < S.num_decision_states(); ++s) {
        const std::string path = child(sp, S.name(s));
        if (!entries[s]) fail(sp, "missing entry for decision state '" + S.name(s) + "'");
        const Json& e = *entries[s];
        require_object(e, path, {"base", "reward"}, {"epsilon", "H", "h"});
        const Index n = S.next_size(s);
        const Vector base = vector_of(e["base"], child(path, "base"), n);
        const bool box = e.contains("epsilon");
        const bool rows = e.contains("H") || e.contains("h");
        if (box && rows) fail(path, "give either 'epsilon' or 'H'/'h', not both");
        ActionPolytope p;
        if (box) {
            try {
                p = box_polytope(base, number(e["epsilon"], child(path, "epsilon")));
            } catch (const InvalidArgument& err) {
                fail(path, err.what());
            }
        } else if (rows) {
            if (!e.contains("H") || !e.contains("h")) fail(path, "'H' and 'h' must be given together");
            p.base = base;
            p.H = matrix_of(e["H"], child(path, "H"), n);
            p.h = vector_of(e["h"], child(path, "h"), p.H.rows());
        } else {
            p.base = base;
            p.H = Matrix(0, n);
            p.h = Vector(0);
        }
        in.polytopes.push_back(std::move(p));
        in.rewards.push_back(reward_of(e["reward"], child(path, "reward"), n));
    }

    if (doc.contains("constraints")) {
        const Json& jc = doc["constraints"];
        const std::string cp = child(root, "constraints");
        if (!jc.is_array()) fail(cp, "expected an array");
        for (std::size_t i = 0; i < jc.size(); ++i) {
            const std::string path = child(cp, i);
            require_object(jc[i], path, {"states", "bound"}, {"name"});
            QualityConstraint c;
            const Json& members = jc[i]["states"];
            if (!members.is_array()) fail(child(path, "states"), "expected an array of state names");
            for (std::size_t k = 0; k < members.size(); ++k)
                c.states.push_back(state_named(S, members[k], child(child(path, "states"), k)));
            c.bound = number(jc[i]["bound"], child(path, "bound"));
            if (jc[i].contains("name")) c.name = text(jc[i]["name"], child(path, "name"));
            in.constraints.push_back(std::move(c));
        }
    }
    require_valid(in);
    return in;
}

Json problem_to_json(const CmdpInstance& instance) {
    const LayeredStateSpace& S = instance.states;
    Json doc;
    doc["horizon"] = S.horizon();
    doc["layers"] = S.layers();
    doc["alpha"] = to_json(instance.alpha);
    Json states = Json::object();
    for (StateId s = 0; s < S.num_decision_states(); ++s) {
        const ActionPolytope& p = instance.polytopes[s];
        Json e;
        e["base"] = to_json(p.base);
        if (p.box_epsilon) {
            e["epsilon"] = *p.box_epsilon;
        } else if (p.H.rows() > 0) {
            Json H = Json::array();
            for (Index r = 0; r < p.H.rows(); ++r) H.push_back(to_json(p.H.row(r).transpose()));
            e["H"] = H;
            e["h"] = to_json(p.h);
        }
        e["reward"] = reward_json(instance.rewards[s]);
        states[S.name(s)] = e;
    }
    doc["states"] = states;
    Json cons = Json::array();
    for (const auto& c : instance.constraints) {
        Json jc;
        Json names = Json::array();
        for (StateId s : c.states) names.push_back(S.name(s));
        jc["states"] = names;
        jc["bound"] = c.bound;
        if (!c.name.empty()) jc["name"] = c.name;
        cons.push_back(jc);
    }
    doc["constraints"] = cons;
    return doc;
}

Policy policy_from_json(const Json& doc, const CmdpInstance& instance) {
    const std::string root = "policy";
    require_object(doc, root, {"kind", "states"});
    const std::string kind = text(doc["kind"], child(root, "kind"));
    if (kind != "deterministic" && kind != "randomized")
        fail(child(root, "kind"), "expected 'deterministic' or 'randomized'");
    const LayeredStateSpace& S = instance.states;
    const Json& js = doc["states"];
    const std::string sp = child(root, "states");
    if (!js.is_object()) fail(sp, "expected an object keyed by state name");
    std::vector<const Json*> entries(static_cast<std::size_t>(S.num_decision_states()), nullptr);
    for (const auto& [name, value] : js.items()) {
        const auto id = S.find(name);
        if (!id) fail(sp, "unknown state '" + name + "'");
        if (S.is_terminal(*id)) fail(child(sp, name), "terminal states take no action");
        entries[static_cast<std::size_t>(*id)] = &value;
    }
    for (StateId s = 0; s < S.num_decision_states(); ++s)
        if (!entries[s]) fail(sp, "missing action for state '" + S.name(s) + "'");

    Policy policy;
    if (kind == "deterministic") {
        DeterministicPolicy p;
        for (StateId s = 0; s < S.num_decision_states(); ++s)
            p.actions.push_back(vector_of(*entries[s], child(sp, S.name(s)), S.next_size(s)));
        policy = std::move(p);
    } else {
        RandomizedPolicy p;
        for (StateId s = 0; s < S.num_decision_states(); ++s) {
            const std::string path = child(sp, S.name(s));
            const Json& atoms = *entries[s];
            if (!atoms.is_array() || atoms.empty()) fail(path, "expected a nonempty array of {weight, action}");
            auto& mix = p.mixtures.emplace_back();
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                const std::string ap = child(path, i);
                require_object(atoms[i], ap, {"weight", "action"});
                mix.push_back({number(atoms[i]["weight"], child(ap, "weight")),
                               vector_of(atoms[i]["action"], child(ap, "action"), S.next_size(s))});
            }
        }
        policy = std::move(p);
    }
    const ValidationReport report = validate_policy(instance, policy);
    if (!report.ok()) throw InvalidArgument("policy does not fit the problem: " + report.summary());
    return policy;
}

Json policy_to_json(const Policy& policy, const CmdpInstance& instance) {
    const LayeredStateSpace& S = instance.states;
    Json states = Json::object();
    if (const auto* p = std::get_if<DeterministicPolicy>(&policy)) {
        for (StateId s = 0; s < static_cast<StateId>(p->actions.size()); ++s) states[S.name(s)] = to_json(p->actions[s]);
        return Json{{"kind", "deterministic"}, {"states", states}};
    }
    const auto& r = std::get<RandomizedPolicy>(policy);
    for (StateId s = 0; s < static_cast<StateId>(r.mixtures.size()); ++s) {
        Json atoms = Json::array();
        for (const MixtureAtom& a : r.mixtures[s]) atoms.push_back({{"weight", a.weight}, {"action", to_json(a.action)}});
        states[S.name(s)] = atoms;
    }
    return Json{{"kind", "randomized"}, {"states", states}};
}

Json solution_to_json(const SolveResult& result, Method method, const CmdpInstance& instance) {
    Json out;
    out["method"] = to_string(method);
    out["status"] = to_string(result.status);
    if (result.status == SolveStatus::optimal) out["objective"] = result.objective;
    else out["objective"] = nullptr;
    if (!result.message.empty()) out["message"] = result.message;
    out["warnings"] = result.warnings;
    if (result.policy) out["policy"] = policy_to_json(*result.policy, instance);
    if (result.d.size()) out["d"] = d_json(result.d, instance.states);
    if (result.status == SolveStatus::optimal) out["constraints"] = constraint_report(instance, result.constraint_mass);
    if (result.vertices_total) out["vertices_total"] = result.vertices_total;
    if (result.stats.variables)
        out["lp"] = {{"variables", result.stats.variables},
                     {"equalities", result.stats.equalities},
                     {"inequalities", result.stats.inequalities},
                     {"iterations", result.stats.iterations}};
    if (!result.certificate.empty()) {
        double largest = 0;
        long nonzeros = 0;
        for (double y : result.certificate) {
            largest = std::max(largest, std::abs(y));
            nonzeros += y != 0;
        }
        out["certificate"] = {{"rows", result.certificate.size()}, {"nonzeros", nonzeros}, {"max_abs", largest}};
    }
    return out;
}

Json report_to_json(const EvaluationReport& exact, const EvaluationReport* simulated, const CmdpInstance& instance) {
    Json out;
    out["exact"] = evaluation_json(exact, instance);
    if (simulated) {
        Json sim = evaluation_json(*simulated, instance);
        sim["return_stderr"] = simulated->return_stderr;
        sim["trajectories"] = simulated->trajectories;
        sim["seed"] = simulated->seed;
        sim["rng"] = "counter-splitmix64";
        out["simulated"] = sim;
    }
    return out;
}

Json vertices_to_json(const VertexSet& vertices, const CmdpInstance& instance) {
    const LayeredStateSpace& S = instance.states;
    Json states = Json::object();
    for (StateId s = 0; s < static_cast<StateId>(vertices.per_state.size()); ++s) {
        const Matrix& V = vertices[s];
        Json cols = Json::array();
        for (Index i = 0; i < V.cols(); ++i) cols.push_back(to_json(V.col(i)));
        states[S.name(s)] = cols;
    }
    return Json{{"dedup_tolerance", vertices.dedup_tolerance}, {"total", vertices.total()}, {"states", states}};
}

void write_d_csv(std::ostream& out, const Vector& d, const LayeredStateSpace& states) {
    out << "state,layer,d\n";
    char buf[64];
    for (StateId s = 0; s < d.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", d[s]);
        out << states.name(s) << ',' << states.layer_of(s) + 1 << ',' << buf << '\n';
    }
}

Json manifest_to_json(const RunManifest& m) {
    return Json{{"command", m.command},     {"arguments", m.arguments}, {"config_hash", m.config_hash},
                {"seed", m.seed},           {"tool_version", m.tool_version}, {"wall_ms", m.wall_ms},
                {"outputs", m.outputs}};
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw InvalidArgument("write failed for " + path.string());
}

} // namespace cmdpm
