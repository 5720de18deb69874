#include "nlw/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace nlw {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what)
{
    throw ConfigError(where + ": " + what);
}

void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!n.IsMap())
        fail(where, "expected a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            fail(where, "unknown key '" + key + "'");
    }
}

template <typename T>
T get(const YAML::Node& n, const char* key, const std::string& where)
{
    const YAML::Node v = n[key];
    if (!v)
        fail(where, std::string("missing key '") + key + "'");
    try {
        return v.as<T>();
    } catch (const YAML::Exception&) {
        fail(where + "." + key, "bad value");
    }
}

template <typename T>
T get_or(const YAML::Node& n, const char* key, T fallback, const std::string& where)
{
    return n[key] ? get<T>(n, key, where) : fallback;
}

std::vector<double> numbers(const YAML::Node& n, std::size_t count, const std::string& where)
{
    if (!n || !n.IsSequence() || (count && n.size() != count))
        fail(where, count ? "expected a list of " + std::to_string(count) + " numbers" : "expected a list of numbers");
    std::vector<double> out;
    try {
        for (const auto& x : n)
            out.push_back(x.as<double>());
    } catch (const YAML::Exception&) {
        fail(where, "bad number");
    }
    return out;
}

Vec4 vec4(const YAML::Node& n, const std::string& where)
{
    const auto v = numbers(n, 4, where);
    return Vec4(v[0], v[1], v[2], v[3]);
}

Mat4 mat4(const YAML::Node& n, const std::string& where)
{
    const auto v = numbers(n, 16, where);
    Mat4 M;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            M(i, j) = v[4 * i + j];
    return M;
}

Kernel kernel(const YAML::Node& n, const std::string& where)
{
    check_keys(n, {"kind", "params"}, where);
    const auto kind = get<std::string>(n, "kind", where);
    const YAML::Node p = n["params"] ? n["params"] : YAML::Node(YAML::NodeType::Map);
    const std::string pw = where + ".params";
    Kernel k;
    if (kind == "gaussian_of_invariant") {
        check_keys(p, {"scale", "amplitude"}, pw);
        k.kind = KernelKind::gaussian_of_invariant;
        k.scale = get_or(p, "scale", 1.0, pw);
    } else if (kind == "window_of_invariant") {
        check_keys(p, {"lower", "upper", "amplitude"}, pw);
        k.kind = KernelKind::window_of_invariant;
        k.lower = get<double>(p, "lower", pw);
        k.upper = get<double>(p, "upper", pw);
    } else if (kind == "frame_window") {
        check_keys(p, {"sigma", "amplitude"}, pw);
        k.kind = KernelKind::frame_window;
        k.frame_sigma = vec4(p["sigma"], pw + ".sigma");
    } else {
        fail(where + ".kind", "unknown kernel '" + kind + "'");
    }
    k.amplitude = get_or(p, "amplitude", 1.0, pw);
    return k;
}

HiddenPropagator propagator(const YAML::Node& n, const std::string& where)
{
    HiddenPropagator h;
    static_cast<Kernel&>(h) = kernel(n, where);
    try {
        h.validate();
    } catch (const DomainError& e) {
        fail(where, e.what());
    }
    return h;
}

FunctionalSpec functional_spec(const YAML::Node& n, const std::string& where)
{
    if (!n.IsSequence())
        fail(where, "expected a list of functional steps");
    FunctionalSpec s;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        const YAML::Node st = n[i];
        check_keys(st, {"identity", "power", "modulate", "pre_translate"}, w);
        if (st.size() != 1)
            fail(w, "a step has exactly one kind");
        if (st["identity"]) {
            s.steps.emplace_back(functional::Identity{});
        } else if (const YAML::Node p = st["power"]) {
            check_keys(p, {"p", "conj"}, w + ".power");
            functional::Power pw;
            pw.p = get<int>(p, "p", w + ".power");
            if (p["conj"]) {
                for (const auto& c : p["conj"])
                    pw.conj.push_back(c.as<bool>());
            } else {
                pw.conj.assign(pw.p, false);
            }
            s.steps.emplace_back(pw);
        } else if (const YAML::Node m = st["modulate"]) {
            check_keys(m, {"u"}, w + ".modulate");
            s.steps.emplace_back(functional::Modulate{vec4(m["u"], w + ".modulate.u")});
        } else {
            const YAML::Node t = st["pre_translate"];
            check_keys(t, {"x"}, w + ".pre_translate");
            s.steps.emplace_back(functional::PreTranslate{vec4(t["x"], w + ".pre_translate.x")});
        }
    }
    return s;
}

TestFunction gaussian_function(const YAML::Node& n, const std::string& where)
{
    if (!n.IsSequence() || n.size() == 0)
        fail(where, "expected a non-empty list of Gaussian terms");
    std::vector<GaussianTerm> terms;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        const YAML::Node t = n[i];
        check_keys(t, {"coeff_re", "coeff_im", "center", "width", "translation"}, w);
        GaussianTerm g;
        g.coeff = cplx(get_or(t, "coeff_re", 0.0, w), get_or(t, "coeff_im", 0.0, w));
        g.center = vec4(t["center"], w + ".center");
        g.width = mat4(t["width"], w + ".width");
        g.translation = t["translation"] ? vec4(t["translation"], w + ".translation") : Vec4::Zero();
        terms.push_back(g);
    }
    try {
        return TestFunction(std::move(terms));
    } catch (const DomainError& e) {
        fail(where, e.what());
    }
}

GridSpec grid_spec(const YAML::Node& n, const std::string& where)
{
    check_keys(n, {"origin", "spacing", "counts"}, where);
    GridSpec g;
    g.origin = vec4(n["origin"], where + ".origin");
    g.spacing = vec4(n["spacing"], where + ".spacing");
    const auto c = numbers(n["counts"], 4, where + ".counts");
    for (int a = 0; a < 4; ++a) {
        if (c[a] < 1 || c[a] != std::floor(c[a]))
            fail(where + ".counts", "counts must be positive integers");
        g.counts[a] = static_cast<int>(c[a]);
    }
    return g;
}

Argument grid_function(const YAML::Node& n, const std::map<std::string, GridSpec>& grids, const std::string& kind,
                       const std::string& where)
{
    auto grid_named = [&](const YAML::Node& node) -> std::optional<GridSpec> {
        if (!node["grid"])
            return std::nullopt;
        const auto name = get<std::string>(node, "grid", where);
        const auto it = grids.find(name);
        if (it == grids.end())
            fail(where + ".grid", "unknown grid '" + name + "'");
        return it->second;
    };
    try {
        if (kind == "bump") {
            check_keys(n, {"center", "radius", "amplitude", "points_per_radius", "grid", "wave"}, where);
            const Vec4 c = vec4(n["center"], where + ".center");
            const double r = get<double>(n, "radius", where);
            const GridSpec g = grid_named(n).value_or(bump_grid(c, r, get_or(n, "points_per_radius", 8, where)));
            GridFunction b = make_bump(c, r, g, get_or(n, "amplitude", 1.0, where));
            if (!n["wave"])
                return b;
            const Vec4 k = vec4(n["wave"], where + ".wave");
            std::vector<cplx> s = b.samples();
            for (int it = 0; it < g.counts[0]; ++it)
                for (int ix = 0; ix < g.counts[1]; ++ix)
                    for (int iy = 0; iy < g.counts[2]; ++iy)
                        for (int iz = 0; iz < g.counts[3]; ++iz)
                            s[g.index(it, ix, iy, iz)] *= std::polar(1.0, -minkowski_dot(k, g.point(it, ix, iy, iz)));
            return GridFunction(g, std::move(s), c, r);
        }
        if (kind == "field") {
            check_keys(n, {"grid", "center", "sigma", "amplitude"}, where);
            const auto g = grid_named(n);
            if (!g)
                fail(where, "a field needs a grid");
            const Vec4 c = vec4(n["center"], where + ".center");
            const double sigma = get<double>(n, "sigma", where), a = get_or(n, "amplitude", 1.0, where);
            return sample_function(
                *g, [&](const Vec4& x) { return cplx(a * std::exp(-0.5 * (x - c).squaredNorm() / (sigma * sigma))); },
                c, -1.0);
        }
        check_keys(n, {"grid"}, where);
        const auto g = grid_named(n);
        if (!g)
            fail(where, "a zero function needs a grid");
        return GridFunction(*g, std::vector<cplx>(g->size(), 0.0), g->origin, 0.0);
    } catch (const DomainError& e) {
        fail(where, e.what());
    }
}

QuadratureConfig quadrature(const YAML::Node& n, const std::string& where)
{
    QuadratureConfig q;
    if (!n)
        return q;
    check_keys(n, {"shell", "hidden"}, where);
    if (const YAML::Node s = n["shell"]) {
        const std::string w = where + ".shell";
        check_keys(s, {"nodes", "half_extent", "box_center", "sigmas", "lattice_pad"}, w);
        q.shell.nodes = get_or(s, "nodes", q.shell.nodes, w);
        q.shell.half_extent = get_or(s, "half_extent", q.shell.half_extent, w);
        if (s["box_center"]) {
            const auto c = numbers(s["box_center"], 3, w + ".box_center");
            q.shell.box_center = Eigen::Vector3d(c[0], c[1], c[2]);
        }
        q.shell.sigmas = get_or(s, "sigmas", q.shell.sigmas, w);
        q.shell.lattice_pad = get_or(s, "lattice_pad", q.shell.lattice_pad, w);
        if (q.shell.nodes < 3)
            fail(w + ".nodes", "need at least 3 nodes per axis");
    }
    if (const YAML::Node h = n["hidden"]) {
        const std::string w = where + ".hidden";
        check_keys(h, {"nodes", "sequence", "seed", "envelope_scale", "cutoff", "replicas", "rel_tol", "error_mode"}, w);
        q.hidden.nodes = get_or(h, "nodes", q.hidden.nodes, w);
        const auto seq = get_or<std::string>(h, "sequence", "sobol", w);
        if (seq != "sobol" && seq != "halton")
            fail(w + ".sequence", "expected sobol or halton");
        q.hidden.sequence = seq == "sobol" ? Sequence::sobol : Sequence::halton;
        q.hidden.seed = get_or<std::uint64_t>(h, "seed", q.hidden.seed, w);
        q.hidden.envelope_scale = get_or(h, "envelope_scale", q.hidden.envelope_scale, w);
        q.hidden.cutoff = get_or(h, "cutoff", q.hidden.cutoff, w);
        q.hidden.replicas = get_or(h, "replicas", q.hidden.replicas, w);
        q.hidden.rel_tol = get_or(h, "rel_tol", q.hidden.rel_tol, w);
        const auto mode = get_or<std::string>(h, "error_mode", "sequence_splitting", w);
        if (mode != "sequence_splitting" && mode != "grid_doubling")
            fail(w + ".error_mode", "expected sequence_splitting or grid_doubling");
        q.hidden.error_mode = mode == "grid_doubling" ? ErrorMode::grid_doubling : ErrorMode::sequence_splitting;
        if (q.hidden.nodes < 2 || q.hidden.replicas < 1)
            fail(w, "need at least 2 nodes and 1 replica");
    }
    return q;
}

template <typename Map>
const typename Map::mapped_type& lookup(const Map& m, const std::string& name, const char* what)
{
    const auto it = m.find(name);
    if (it == m.end())
        throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
    return it->second;
}

std::string fnv(const std::string& bytes) { return digest_bytes(bytes); }

}  // namespace

const Argument& ModelConfig::function(const std::string& n) const { return lookup(functions, n, "function"); }

const GridFunction& ModelConfig::grid_function(const std::string& n) const
{
    const auto* g = std::get_if<GridFunction>(&function(n));
    if (!g)
        throw ConfigError("function '" + n + "' is not a grid function");
    return *g;
}

const FunctionalSpec& ModelConfig::functional(const std::string& n) const
{
    return lookup(functionals, n, "functional");
}

ModelConfig parse_model(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("model file is not valid YAML: ") + e.what());
    }
    if (!root.IsMap())
        throw ConfigError("model file: expected a mapping at the top level");
    check_keys(root, {"schema_version", "name", "spectrum_guard", "quadrature", "functionals", "terms", "grids",
                      "functions", "spinors", "bivectors", "triplets", "thermal", "dirac"},
               "model");
    if (!root["schema_version"])
        throw ConfigError("model: missing key 'schema_version'");
    if (get<std::string>(root, "schema_version", "model") != kModelSchema)
        throw ConfigError(std::string("model: unsupported schema_version (expected ") + kModelSchema + ")");

    ModelConfig mc;
    mc.digest = fnv(text);
    mc.name = get_or<std::string>(root, "name", "model", "model");
    mc.model.name = mc.name;
    mc.model.spectrum_guard = get_or(root, "spectrum_guard", true, "model");
    mc.quadrature = quadrature(root["quadrature"], "quadrature");

    if (const YAML::Node fs = root["functionals"]; fs && !fs.IsMap())
        throw ConfigError("functionals: expected a mapping");
    if (const YAML::Node fs = root["functionals"])
        for (const auto& kv : fs) {
            const auto name = kv.first.as<std::string>();
            mc.functionals[name] = functional_spec(kv.second, "functionals." + name);
        }

    const YAML::Node terms = root["terms"];
    if (!terms || !terms.IsSequence() || terms.size() == 0)
        throw ConfigError("model: 'terms' must be a non-empty list");
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const std::string w = "terms[" + std::to_string(t) + "]";
        const YAML::Node tn = terms[t];
        check_keys(tn, {"weight", "factors", "hidden", "A"}, w);
        CommutatorTerm term;
        term.weight = get_or(tn, "weight", 1.0, w);
        const YAML::Node fs = tn["factors"];
        if (!fs || !fs.IsSequence() || fs.size() == 0)
            fail(w, "'factors' must be a non-empty list");
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const std::string fw = w + ".factors[" + std::to_string(i) + "]";
            check_keys(fs[i], {"mass", "derivative_degree", "derivative_coeffs", "functional"}, fw);
            FactorSpec f;
            f.mass = get_or(fs[i], "mass", 1.0, fw);
            if (fs[i]["derivative_coeffs"] && fs[i]["derivative_degree"])
                fail(fw, "give derivative_coeffs or derivative_degree, not both");
            if (fs[i]["derivative_coeffs"]) {
                f.derivative_coeffs = numbers(fs[i]["derivative_coeffs"], 0, fw + ".derivative_coeffs");
            } else if (fs[i]["derivative_degree"]) {
                const int d = get<int>(fs[i], "derivative_degree", fw);
                if (d < 0 || d % 2)
                    fail(fw + ".derivative_degree", "must be a nonnegative even integer");
                f.derivative_coeffs.assign(d / 2 + 1, 0.0);
                f.derivative_coeffs.back() = 1.0;
            }
            if (fs[i]["functional"]) {
                const YAML::Node fn = fs[i]["functional"];
                f.functional = fn.IsScalar() ? mc.functional(fn.as<std::string>())
                                             : functional_spec(fn, fw + ".functional");
            }
            term.factors.push_back(std::move(f));
        }
        if (const YAML::Node hs = tn["hidden"]) {
            if (!hs.IsSequence())
                fail(w + ".hidden", "expected a list");
            for (std::size_t j = 0; j < hs.size(); ++j)
                term.hidden.push_back(propagator(hs[j], w + ".hidden[" + std::to_string(j) + "]"));
        }
        const auto n = static_cast<Eigen::Index>(term.factors.size());
        const auto m = static_cast<Eigen::Index>(term.hidden.size());
        term.A = Eigen::MatrixXd::Zero(n, m);
        if (tn["A"]) {
            const auto a = numbers(tn["A"], static_cast<std::size_t>(n * m), w + ".A");
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < m; ++j)
                    term.A(i, j) = a[i * m + j];
        } else if (m > 0) {
            fail(w, "terms with hidden variables need A");
        }
        mc.model.terms.push_back(std::move(term));
    }
    try {
        mc.model.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }

    std::map<std::string, GridSpec> grids;
    if (const YAML::Node gs = root["grids"])
        for (const auto& kv : gs) {
            const auto name = kv.first.as<std::string>();
            grids[name] = grid_spec(kv.second, "grids." + name);
        }

    if (const YAML::Node fs = root["functions"])
        for (const auto& kv : fs) {
            const auto name = kv.first.as<std::string>();
            const std::string w = "functions." + name;
            check_keys(kv.second, {"gaussian", "bump", "field", "zero"}, w);
            if (kv.second.size() != 1)
                fail(w, "a function has exactly one kind");
            const auto kind = kv.second.begin()->first.as<std::string>();
            const YAML::Node body = kv.second.begin()->second;
            if (kind == "gaussian")
                mc.functions.emplace(name, gaussian_function(body, w + ".gaussian"));
            else
                mc.functions.emplace(name, grid_function(body, grids, kind, w + "." + kind));
            mc.function_names.push_back(name);
        }

    auto names = [&](const YAML::Node& n, std::size_t count, const std::string& w) {
        if (!n.IsSequence() || n.size() != count)
            fail(w, "expected a list of " + std::to_string(count) + " function names");
        std::vector<Argument> out;
        for (const auto& x : n) {
            const auto fname = x.as<std::string>();
            if (!mc.functions.count(fname))
                fail(w, "unknown function '" + fname + "'");
            out.push_back(mc.functions.at(fname));
        }
        return out;
    };
    if (const YAML::Node ss = root["spinors"])
        for (const auto& kv : ss) {
            const auto name = kv.first.as<std::string>();
            const auto c = names(kv.second, 4, "spinors." + name);
            mc.spinors.emplace(name, SpinorTestFunction{{c[0], c[1], c[2], c[3]}});
        }
    if (const YAML::Node bs = root["bivectors"])
        for (const auto& kv : bs) {
            const auto name = kv.first.as<std::string>();
            const auto c = names(kv.second, 6, "bivectors." + name);
            mc.bivectors.emplace(name, BivectorTestFunction{{c[0], c[1], c[2], c[3], c[4], c[5]}});
        }
    if (const YAML::Node ts = root["triplets"])
        for (const auto& kv : ts) {
            const auto name = kv.first.as<std::string>();
            const std::string w = "triplets." + name;
            check_keys(kv.second, {"spinor", "phase", "connection"}, w);
            const auto sp = get<std::string>(kv.second, "spinor", w);
            if (!mc.spinors.count(sp))
                fail(w + ".spinor", "unknown spinor '" + sp + "'");
            try {
                const auto conn = names(kv.second["connection"], 4, w + ".connection");
                GaugeTriplet T{mc.spinors.at(sp), mc.grid_function(get<std::string>(kv.second, "phase", w)),
                               {std::get<GridFunction>(conn[0]), std::get<GridFunction>(conn[1]),
                                std::get<GridFunction>(conn[2]), std::get<GridFunction>(conn[3])}};
                T.validate();
                mc.triplets.emplace(name, std::move(T));
            } catch (const std::bad_variant_access&) {
                fail(w, "triplets need grid functions");
            } catch (const DomainError& e) {
                fail(w, e.what());
            }
        }
    if (const YAML::Node th = root["thermal"]) {
        check_keys(th, {"beta", "frame", "terms", "tail_tol"}, "thermal");
        ThermalConfig t;
        t.beta = get_or(th, "beta", t.beta, "thermal");
        if (th["frame"])
            t.T = vec4(th["frame"], "thermal.frame");
        t.terms = get_or(th, "terms", t.terms, "thermal");
        t.tail_tol = get_or(th, "tail_tol", t.tail_tol, "thermal");
        try {
            t.validate();
        } catch (const DomainError& e) {
            fail("thermal", e.what());
        }
        mc.thermal = t;
    }
    if (const YAML::Node d = root["dirac"]) {
        check_keys(d, {"mass", "hidden"}, "dirac");
        DiracPreset p;
        p.mass = get_or(d, "mass", 1.0, "dirac");
        p.hidden = propagator(d["hidden"], "dirac.hidden");
        mc.dirac = p;
    }
    return mc;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ModelConfig load_model(const std::string& path) { return parse_model(read_file(path)); }

std::string emit_test_function(const TestFunction& f)
{
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginSeq;
    for (const auto& t : f.terms()) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "coeff_re" << YAML::Value << t.coeff.real();
        out << YAML::Key << "coeff_im" << YAML::Value << t.coeff.imag();
        out << YAML::Key << "center" << YAML::Value << YAML::Flow
            << std::vector<double>(t.center.data(), t.center.data() + 4);
        std::vector<double> w(16);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                w[4 * i + j] = t.width(i, j);
        out << YAML::Key << "width" << YAML::Value << YAML::Flow << w;
        out << YAML::Key << "translation" << YAML::Value << YAML::Flow
            << std::vector<double>(t.translation.data(), t.translation.data() + 4);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    return out.c_str();
}

TestFunction parse_test_function(const std::string& yaml)
{
    try {
        return gaussian_function(YAML::Load(yaml), "function");
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("function: ") + e.what());
    }
}

const json& OpsConfig::section(const std::string& command) const
{
    static const json empty = json::object();
    const auto it = doc.find(command);
    return it == doc.end() ? empty : *it;
}

OpsConfig parse_ops(const std::string& text)
{
    OpsConfig o;
    try {
        o.doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("ops file is not valid JSON: ") + e.what());
    }
    require_keys(o.doc, {"schema_version", "check", "vev", "thermal", "scan", "oracle"}, "ops");
    if (!o.doc.contains("schema_version") || o.doc["schema_version"] != kOpsSchema)
        throw ConfigError(std::string("ops: missing or unsupported schema_version (expected ") + kOpsSchema + ")");
    o.digest = fnv(text);
    return o;
}

OpsConfig load_ops(const std::string& path) { return parse_ops(read_file(path)); }

void require_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError(where + ": unknown key '" + k + "'");
}

Vec4 json_vec4(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 4)
        throw ConfigError(where + ": expected 4 numbers");
    Vec4 v;
    for (int i = 0; i < 4; ++i) {
        if (!j[i].is_number())
            throw ConfigError(where + ": expected 4 numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

namespace {

cplx json_complex(const json& j, const std::string& where)
{
    if (j.is_number())
        return j.get<double>();
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return cplx(j[0].get<double>(), j[1].get<double>());
    throw ConfigError(where + ": expected a number or [re, im]");
}

}  // namespace

OperatorExpr parse_operator(const json& j, const ModelConfig& m)
{
    require_keys(j, {"terms"}, "operator");
    if (!j.contains("terms") || !j["terms"].is_array())
        throw ConfigError("operator: 'terms' must be a list");
    OperatorExpr e;
    std::map<std::string, int> index;
    for (std::size_t t = 0; t < j["terms"].size(); ++t) {
        const std::string w = "operator.terms[" + std::to_string(t) + "]";
        const json& tj = j["terms"][t];
        require_keys(tj, {"coeff", "groups"}, w);
        Monomial mono;
        mono.coeff = tj.contains("coeff") ? json_complex(tj["coeff"], w + ".coeff") : cplx(1.0, 0.0);
        for (const auto& gj : tj.value("groups", json::array())) {
            require_keys(gj, {"normal_ordered", "letters"}, w + ".groups");
            Group g;
            g.normal_ordered = gj.value("normal_ordered", false);
            for (const auto& lj : gj.value("letters", json::array())) {
                if (!lj.is_array() || lj.size() != 2 || !lj[0].is_string() || !lj[1].is_string())
                    throw ConfigError(w + ": a letter is [kind, function]");
                const auto kind = lj[0].get<std::string>();
                const auto fn = lj[1].get<std::string>();
                Letter l;
                if (kind == "a")
                    l.kind = LetterKind::annihilate;
                else if (kind == "a+")
                    l.kind = LetterKind::create;
                else if (kind == "xi")
                    l.kind = LetterKind::xi;
                else
                    throw ConfigError(w + ": unknown letter kind '" + kind + "'");
                auto it = index.find(fn);
                if (it == index.end())
                    it = index.emplace(fn, e.add_function(m.function(fn))).first;
                l.fn = it->second;
                g.letters.push_back(l);
            }
            mono.groups.push_back(std::move(g));
        }
        e.terms.push_back(std::move(mono));
    }
    return e;
}

ZetaSpec parse_zeta(const json& j, const ModelConfig& m)
{
    const std::string form = j.value("form", "");
    if (form == "poly") {
        require_keys(j, {"form", "terms"}, "zeta");
        std::vector<ZetaPolyTerm> terms;
        for (const auto& tj : j.value("terms", json::array())) {
            require_keys(tj, {"coupling", "functionals"}, "zeta.terms");
            ZetaPolyTerm t;
            t.coupling = tj.contains("coupling") ? json_complex(tj["coupling"], "zeta.coupling") : cplx(1.0, 0.0);
            for (const auto& f : tj.value("functionals", json::array()))
                t.functionals.push_back(m.functional(f.get<std::string>()));
            terms.push_back(std::move(t));
        }
        return ZetaSpec{terms};
    }
    if (form == "hidden_pair") {
        require_keys(j, {"form", "weight", "pairs", "sigma", "seed"}, "zeta");
        const YAML::Node wn = YAML::Load(j.at("weight").dump());
        WeightFunction w;
        static_cast<Kernel&>(w) = kernel(wn, "zeta.weight");
        return ZetaSpec{make_hidden_pair(w, j.value("pairs", 8), j.value("sigma", 1.0),
                                         j.value("seed", static_cast<std::uint64_t>(20240611)))};
    }
    throw ConfigError("zeta: form must be 'poly' or 'hidden_pair'");
}

void set_tolerance(Tolerances& t, const std::string& name, double value)
{
    if (!(value > 0.0))
        throw ConfigError("tolerance '" + name + "' must be positive");
    if (name == "translation")
        t.translation = value;
    else if (name == "hermiticity")
        t.hermiticity = value;
    else if (name == "positivity")
        t.positivity = value;
    else if (name == "error_factor")
        t.error_factor = value;
    else if (name == "cluster")
        t.cluster = value;
    else if (name == "cone")
        t.cone = value;
    else
        throw ConfigError("unknown tolerance '" + name + "'");
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json to_json(const IntegralResult& r)
{
    return json{{"value", complex_json(r.value)},
                {"error", r.error_estimate},
                {"nodes", r.node_count},
                {"flags", flag_names(r.flags)}};
}

json to_json(const QuadratureConfig& q)
{
    json shell{{"nodes", q.shell.nodes},
               {"half_extent", q.shell.half_extent},
               {"sigmas", q.shell.sigmas},
               {"lattice_pad", q.shell.lattice_pad}};
    if (q.shell.box_center)
        shell["box_center"] = {(*q.shell.box_center)(0), (*q.shell.box_center)(1), (*q.shell.box_center)(2)};
    json hidden{{"nodes", q.hidden.nodes},
                {"sequence", q.hidden.sequence == Sequence::sobol ? "sobol" : "halton"},
                {"seed", q.hidden.seed},
                {"envelope_scale", q.hidden.envelope_scale},
                {"cutoff", q.hidden.cutoff},
                {"replicas", q.hidden.replicas},
                {"rel_tol", q.hidden.rel_tol},
                {"error_mode",
                 q.hidden.error_mode == ErrorMode::grid_doubling ? "grid_doubling" : "sequence_splitting"}};
    return json{{"shell", shell}, {"hidden", hidden}};
}

json to_json(const AxiomEntry& e)
{
    json j{{"name", e.name},
           {"residual", e.residual},
           {"tolerance", e.tolerance},
           {"error_budget", e.error_budget},
           {"verdict", verdict_name(e.verdict)},
           {"witnesses", e.witnesses},
           {"mode", e.mode}};
    if (!e.note.empty())
        j["note"] = e.note;
    if (e.name == "Lorentz")
        j["cutoff_sensitivity"] = e.cutoff_sensitivity;
    return j;
}

json to_json(const Tolerances& t)
{
    return json{{"translation", t.translation}, {"hermiticity", t.hermiticity}, {"positivity", t.positivity},
                {"error_factor", t.error_factor}, {"cluster", t.cluster},         {"cone", t.cone}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush())
            throw ConfigError("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

}  // namespace nlw
