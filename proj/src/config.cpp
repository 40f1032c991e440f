// SPDX-License-Identifier: Apache-2.0
#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "smp/errors.hpp"
#include "smp/problem.hpp"

namespace smp {

namespace {

using nlohmann::json;

const char* type_name(const json& v)
{
    return v.type_name();
}

// Strict view of one JSON object: unknown keys are rejected once every
// expected key has been read, and every default is recorded.
class Section {
public:
    Section(const json& obj, std::string path, std::vector<std::string>& defaults)
        : obj_(obj), path_(std::move(path)), defaults_(defaults)
    {
        if (!obj_.is_object()) throw ConfigError(where() + ": expected object, got " + type_name(obj_));
    }
    ~Section() = default;
    Section(const Section&) = delete;

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return obj_.contains(key);
    }

    const json& raw(const std::string& key)
    {
        if (!has(key)) throw ConfigError(key_path(key) + ": required key missing");
        return obj_.at(key);
    }

    Section sub(const std::string& key) { return Section(raw(key), key_path(key), defaults_); }

    double number(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(key_path(key) + ": expected number, got " + type_name(v));
        return v.get<double>();
    }
    double number(const std::string& key, double fallback)
    {
        if (!has(key)) return defaulted(key, fallback);
        return number(key);
    }

    int integer(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected integer, got " + type_name(v));
        return v.get<int>();
    }
    int integer(const std::string& key, int fallback)
    {
        if (!has(key)) return defaulted(key, fallback);
        return integer(key);
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key)) return defaulted(key, fallback);
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected boolean, got " + type_name(v));
        return v.get<bool>();
    }

    std::string text(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(key_path(key) + ": expected string, got " + type_name(v));
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback)
    {
        if (!has(key)) {
            defaults_.push_back(key_path(key) + " = " + fallback);
            return fallback;
        }
        return text(key);
    }

    template <typename Enum>
    Enum choice(const std::string& key, const std::vector<std::pair<std::string, Enum>>& options,
                const std::string& fallback)
    {
        const std::string v = text(key, fallback);
        for (const auto& [name, value] : options) {
            if (name == v) return value;
        }
        std::string allowed;
        for (const auto& o : options) allowed += (allowed.empty() ? "" : "|") + o.first;
        throw ConfigError(key_path(key) + ": expected one of " + allowed + ", got \"" + v + "\"");
    }

    NodeRef node(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
            throw ConfigError(key_path(key) + ": expected [ix, iy] integer pair");
        }
        return {v[0].get<int>(), v[1].get<int>()};
    }

    /// Throws on keys that were never read.
    void finish() const
    {
        for (const auto& [key, value] : obj_.items()) {
            (void)value;
            if (!seen_.count(key)) throw ConfigError(key_path(key) + ": unknown key");
        }
    }

private:
    template <typename T>
    T defaulted(const std::string& key, T value)
    {
        std::ostringstream s;
        s << key_path(key) << " = " << value;
        defaults_.push_back(s.str());
        return value;
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& obj_;
    std::string path_;
    std::vector<std::string>& defaults_;
    std::set<std::string> seen_;
};

PhaseConstants read_phase(Section s)
{
    PhaseConstants p;
    p.E_eq = s.number("E_eq");
    p.E_neq = s.number("E_neq");
    p.eta = s.number("eta");
    p.alpha = s.number("alpha", 0.0);
    s.finish();
    return p;
}

MaterialEndpoint read_endpoint(Section s)
{
    MaterialEndpoint m;
    m.rubbery = read_phase(s.sub("rubbery"));
    m.glassy = read_phase(s.sub("glassy"));
    m.eta_i = s.number("eta_i");
    m.T_g = s.number("T_g");
    s.finish();
    return m;
}

void read_material(Section s, PhaseParams& p)
{
    p.lo = read_endpoint(s.sub("lo"));
    p.hi = read_endpoint(s.sub("hi"));
    p.nu = s.number("nu", p.nu);
    p.penal = s.number("penal", p.penal);
    p.rho_min = s.number("rho_min", p.rho_min);
    p.T_ref = s.number("T_ref", p.T_ref);
    p.rho_dependent_phase = s.boolean("rho_dependent_phase", p.rho_dependent_phase);
    if (s.has("phase_law")) {
        Section law = s.sub("phase_law");
        p.phase_law.kind = law.choice<PhaseLaw::Kind>(
            "kind", {{"logistic", PhaseLaw::Kind::logistic}, {"constant", PhaseLaw::Kind::constant}}, "logistic");
        if (p.phase_law.kind == PhaseLaw::Kind::logistic) {
            p.phase_law.steepness = law.number("steepness", p.phase_law.steepness);
        } else {
            p.phase_law.phi_g = law.number("phi_g", p.phase_law.phi_g);
        }
        law.finish();
    } else {
        s.text("phase_law", "logistic");
    }
    s.finish();
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("material: ") + e.what());
    }
}

void read_mesh(Section s, Problem& pb)
{
    pb.nx = s.integer("nx");
    pb.ny = s.integer("ny");
    pb.lx = s.number("lx");
    pb.ly = s.number("ly");
    pb.thickness = s.number("thickness", 1.0);
    pb.bc.support.kind = s.choice<SupportSpec::Kind>(
        "support", {{"cantilever", SupportSpec::Kind::cantilever}, {"roller", SupportSpec::Kind::roller}},
        "cantilever");
    Section load = s.sub("load");
    pb.bc.load.kind =
        load.choice<LoadSpec::Kind>("kind", {{"edge", LoadSpec::Kind::edge}, {"node", LoadSpec::Kind::node}}, "edge");
    if (pb.bc.load.kind == LoadSpec::Kind::node) pb.bc.load.node = load.node("node");
    pb.bc.load.fx = load.number("fx", 0.0);
    pb.bc.load.fy = load.number("fy", 0.0);
    load.finish();
    s.finish();
}

void read_schedule(Section s, Schedule& sched)
{
    sched.T_initial = s.number("T_initial");
    const auto& steps = s.raw("steps");
    if (!steps.is_array() || steps.empty()) throw ConfigError(s.key_path("steps") + ": expected non-empty array");
    std::vector<std::string> scratch;
    for (std::size_t n = 0; n < steps.size(); ++n) {
        Section st(steps[n], s.key_path("steps") + "[" + std::to_string(n) + "]", scratch);
        ScheduleStep step;
        step.dt = st.number("dt");
        step.T = st.number("T");
        step.load_scale = st.number("load_scale", 0.0);
        step.phase = st.text("phase", "");
        const int repeat = st.integer("repeat", 1);
        if (repeat < 1) throw ConfigError(st.key_path("repeat") + ": must be >= 1");
        st.finish();
        for (int r = 0; r < repeat; ++r) sched.steps.push_back(step);
    }
    s.finish();
    try {
        sched.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
}

} // namespace

void finalize_problem(Problem& pb)
{
    pb.mesh = build_mesh(pb.nx, pb.ny, pb.lx, pb.ly, pb.bc, pb.thickness);
    const auto& o = pb.objective;
    if (o.node.ix < 0 || o.node.ix > pb.nx || o.node.iy < 0 || o.node.iy > pb.ny) {
        throw ConfigError("objective.node: [" + std::to_string(o.node.ix) + ", " + std::to_string(o.node.iy) +
                          "] is not a node of the " + std::to_string(pb.nx) + "x" + std::to_string(pb.ny) +
                          " mesh.nx/mesh.ny grid");
    }
    if (o.axis != 0 && o.axis != 1) throw ConfigError("objective.axis: expected x or y");
    pb.objective.dof = 2 * pb.mesh.node_id(o.node.ix, o.node.iy) + o.axis;
    if (pb.mesh.free_index[pb.objective.dof] < 0) {
        throw ConfigError("objective.node: dof is fixed by mesh.support");
    }
    if (o.step < 0 || o.step >= pb.schedule.size()) {
        throw ConfigError("objective.step: " + std::to_string(o.step) + " outside schedule.steps (" +
                          std::to_string(pb.schedule.size()) + " steps)");
    }
    if (pb.rho.size() != static_cast<std::size_t>(pb.mesh.num_elements())) {
        throw ConfigError("design: density field size does not match the mesh");
    }
    for (double r : pb.rho) {
        if (!(r >= pb.params.rho_min && r <= 1.0)) throw ConfigError("design.rho0: outside [material.rho_min, 1]");
    }
    if (pb.adjoint.mode == AdjointOptions::Mode::recursive && o.step > pb.adjoint.recursion_cap) {
        throw ConfigError("solver.coupling = recursive needs objective.step <= solver.recursion_cap");
    }
}

Problem parse_config_text(const std::string& text, const std::string& origin)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    Problem pb;
    auto& defaults = pb.defaults_applied;
    Section top(root, "", defaults);

    read_mesh(top.sub("mesh"), pb);
    read_material(top.sub("material"), pb.params);
    read_schedule(top.sub("schedule"), pb.schedule);

    const int ne = pb.nx * pb.ny;
    {
        const json empty = json::object();
        Section d = top.has("design") ? top.sub("design") : Section(empty, "design", defaults);
        const double rho0 = d.number("rho0", 0.5);
        pb.rho.assign(static_cast<std::size_t>(ne > 0 ? ne : 0), rho0);
        d.finish();
    }
    {
        Section o = top.sub("objective");
        pb.objective.node = o.node("node");
        pb.objective.axis = o.choice<int>("axis", {{"x", 0}, {"y", 1}}, "y");
        pb.objective.step = o.integer("step");
        o.finish();
    }
    {
        const json empty = json::object();
        Section s = top.has("solver") ? top.sub("solver") : Section(empty, "solver", defaults);
        pb.solver.linear = s.choice<SolverOptions::Linear>(
            "linear", {{"direct", SolverOptions::Linear::direct}, {"iterative", SolverOptions::Linear::iterative}},
            "direct");
        pb.solver.tol = s.number("tol", pb.solver.tol);
        pb.solver.workers = s.integer("workers", 1);
        pb.adjoint.mode = s.choice<AdjointOptions::Mode>(
            "coupling", {{"memoized", AdjointOptions::Mode::memoized}, {"recursive", AdjointOptions::Mode::recursive}},
            "memoized");
        pb.adjoint.recursion_cap = s.integer("recursion_cap", pb.adjoint.recursion_cap);
        s.finish();
        if (pb.solver.tol <= 0) throw ConfigError("solver.tol: must be > 0");
        if (pb.solver.workers < 1) throw ConfigError("solver.workers: must be >= 1");
        if (pb.adjoint.recursion_cap < 1) throw ConfigError("solver.recursion_cap: must be >= 1");
        pb.adjoint.workers = pb.solver.workers;
    }
    {
        const json empty = json::object();
        Section v = top.has("verify") ? top.sub("verify") : Section(empty, "verify", defaults);
        pb.verify.scheme = v.choice<FdScheme>("scheme", {{"central", FdScheme::central}, {"forward", FdScheme::forward}},
                                              "central");
        pb.verify.h = v.number("h", pb.verify.h);
        pb.verify.relative_step = v.boolean("relative_step", pb.verify.relative_step);
        pb.verify.near_zero = v.number("near_zero", pb.verify.near_zero);
        pb.verify.gate = v.number("gate", pb.verify.gate);
        pb.verify.precision = v.choice<FdPrecision>(
            "precision",
            {{"quad", FdPrecision::quad}, {"extended", FdPrecision::extended}, {"double", FdPrecision::binary64}},
            "quad");
        v.finish();
        if (pb.verify.h <= 0) throw ConfigError("verify.h: must be > 0");
        if (pb.verify.near_zero < 0) throw ConfigError("verify.near_zero: must be >= 0");
    }
    {
        const json empty = json::object();
        Section o = top.has("optimize") ? top.sub("optimize") : Section(empty, "optimize", defaults);
        auto& s = pb.optimize;
        s.volume_fraction = o.number("volume_fraction", s.volume_fraction);
        s.r_min = o.number("r_min", s.r_min);
        s.move = o.number("move", s.move);
        s.max_iters = o.integer("max_iters", s.max_iters);
        s.tol = o.number("tol", s.tol);
        s.seed = static_cast<unsigned>(o.integer("seed", static_cast<int>(s.seed)));
        o.finish();
        if (!(s.volume_fraction > 0 && s.volume_fraction <= 1)) {
            throw ConfigError("optimize.volume_fraction: must lie in (0, 1]");
        }
        if (s.r_min < 1) throw ConfigError("optimize.r_min: must be >= 1 element width");
        if (!(s.move > 0 && s.move <= 1)) throw ConfigError("optimize.move: must lie in (0, 1]");
        if (s.max_iters < 0) throw ConfigError("optimize.max_iters: must be >= 0");
    }
    {
        const json empty = json::object();
        Section b = top.has("bench") ? top.sub("bench") : Section(empty, "bench", defaults);
        if (b.has("steps")) {
            const auto& arr = b.raw("steps");
            if (!arr.is_array() || arr.empty()) throw ConfigError("bench.steps: expected non-empty integer array");
            pb.bench.steps.clear();
            for (const auto& v : arr) {
                if (!v.is_number_integer() || v.get<int>() < 1) {
                    throw ConfigError("bench.steps: expected positive integers");
                }
                pb.bench.steps.push_back(v.get<int>());
            }
        } else {
            defaults.push_back("bench.steps = [2, 4, 6, 8]");
        }
        pb.bench.recursive = b.boolean("recursive", pb.bench.recursive);
        pb.bench.memoized = b.boolean("memoized", pb.bench.memoized);
        pb.bench.repeats = b.integer("repeats", pb.bench.repeats);
        pb.bench.memoized_max_steps = b.integer("memoized_max_steps", pb.bench.memoized_max_steps);
        b.finish();
        if (pb.bench.repeats < 1) throw ConfigError("bench.repeats: must be >= 1");
    }
    {
        const json empty = json::object();
        Section o = top.has("output") ? top.sub("output") : Section(empty, "output", defaults);
        pb.out_dir = o.text("dir", pb.out_dir);
        o.finish();
    }
    top.finish();
    finalize_problem(pb);
    return pb;
}

Problem parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError(path + ": empty config file");
    return parse_config_text(text, path);
}

} // namespace smp
