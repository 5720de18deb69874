// nlw: batch front-end for the nonlinear Wightman-field library.
//
//   nlw <check|vev|thermal|scan|oracle> --model m.yaml [--ops o.json] [--out dir]
//       [--seed n] [--tol.<name> x] [--no-spectrum-guard] [--threads n]
//
// Exit status: 0 all pass, 1 a condition failed, 2 unconverged, 3 bad input.
// Reports are JSON, curves are CSV. Wall-clock data goes to <command>.timing.json
// so the reports themselves are byte-identical across reruns and thread counts.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "nlw/config.hpp"

using namespace nlw;

namespace {

struct Run {
    std::string command;
    ModelConfig model;
    OpsConfig ops;
    QuadratureConfig cfg;
    Tolerances tol;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, double>> tol_overrides;
    bool no_guard = false;

    std::string inputs_digest() const
    {
        std::ostringstream s;
        s.precision(17);
        s << command << '|' << model.digest << '|' << ops.digest << '|' << (seed ? std::to_string(*seed) : "-") << '|'
          << no_guard;
        for (const auto& [k, v] : tol_overrides)
            s << '|' << k << '=' << v;
        return digest_bytes(s.str());
    }
};

// ---- small JSON accessors ----

const json& need(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key))
        throw ConfigError(where + ": missing key '" + key + "'");
    return j.at(key);
}

std::string str(const json& j, const char* key, const std::string& where)
{
    const json& v = need(j, key, where);
    if (!v.is_string())
        throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

double num(const json& j, const char* key, double fallback, const std::string& where)
{
    if (!j.contains(key))
        return fallback;
    if (!j[key].is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return j[key].get<double>();
}

std::vector<double> nums(const json& j, const char* key, const std::string& where)
{
    const json& v = need(j, key, where);
    if (!v.is_array())
        throw ConfigError(where + "." + key + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number())
            throw ConfigError(where + "." + key + ": expected a list of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<std::string> strs(const json& j, const char* key, const std::string& where)
{
    const json& v = need(j, key, where);
    if (!v.is_array())
        throw ConfigError(where + "." + key + ": expected a list of names");
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string())
            throw ConfigError(where + "." + key + ": expected a list of names");
        out.push_back(x.get<std::string>());
    }
    return out;
}

template <typename Map>
const typename Map::mapped_type& named(const Map& m, const std::string& name, const char* what)
{
    const auto it = m.find(name);
    if (it == m.end())
        throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
    return it->second;
}

std::vector<Argument> functions(const Run& r, const std::vector<std::string>& names)
{
    std::vector<Argument> out;
    for (const auto& n : names)
        out.push_back(r.model.function(n));
    return out;
}

const TestFunction& gaussian(const Run& r, const std::string& name)
{
    const auto* f = std::get_if<TestFunction>(&r.model.function(name));
    if (!f)
        throw ConfigError("function '" + name + "' is not a Gaussian-family function");
    return *f;
}

json result_json(const std::string& name, const std::string& op, const IntegralResult& v)
{
    json j = to_json(v);
    j["name"] = name;
    j["operation"] = op;
    return j;
}

json result_json(const std::string& name, const std::string& op, const VevResult& v)
{
    return json{{"name", name},
                {"operation", op},
                {"value", complex_json(v.value)},
                {"error", v.error},
                {"nodes", v.node_count},
                {"flags", flag_names(v.flags)}};
}

json header(const Run& r)
{
    return json{{"schema_version", kReportSchema},
                {"command", r.command},
                {"model", r.model.name},
                {"model_digest", r.model.digest},
                {"ops_digest", r.ops.digest},
                {"inputs_digest", r.inputs_digest()},
                {"spectrum_guard", r.model.model.spectrum_guard},
                {"quadrature_config", to_json(r.cfg)},
                {"tolerances", to_json(r.tol)}};
}

std::string out_path(const Run& r, const std::string& file) { return (std::filesystem::path(r.out) / file).string(); }

bool unconverged(unsigned flags) { return flags & kUnconverged; }

// ---- check ----

json default_checks(const Run& r)
{
    std::vector<std::string> gauss, grids;
    for (const auto& n : r.model.function_names) {
        const Argument& a = r.model.function(n);
        if (std::holds_alternative<TestFunction>(a))
            gauss.push_back(n);
        else if (std::get<GridFunction>(a).compact())
            grids.push_back(n);
    }
    if (gauss.empty())
        throw ConfigError("check: default checks need at least one Gaussian-family function");
    const std::string f = gauss[0], g = gauss.size() > 1 ? gauss[1] : gauss[0];
    json checks = json::array();
    checks.push_back({{"kind", "positivity"}, {"functions", gauss}});
    checks.push_back({{"kind", "hermiticity"}, {"f", f}, {"g", g}});
    if (grids.size() >= 2)
        checks.push_back({{"kind", "locality"}, {"f", grids[0]}, {"g", grids[1]}});
    else
        checks.push_back({{"kind", "locality"}, {"f", f}, {"g", g}, {"eps", 1e-6}});
    checks.push_back({{"kind", "spectrum"}, {"functions", gauss}});
    checks.push_back({{"kind", "cluster"},
                      {"f", f},
                      {"g", g},
                      {"direction", {0.0, 1.0, 0.0, 0.0}},
                      {"distances", {0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0}}});
    checks.push_back({{"kind", "translation"}, {"f", f}, {"g", g}, {"x", {0.3, 0.5, -0.2, 0.1}}});
    return checks;
}

int run_check(const Run& r, json& report)
{
    const json& sec = r.ops.section("check");
    require_keys(sec, {"checks"}, "check");
    const json checks = sec.contains("checks") ? sec["checks"] : default_checks(r);
    const CommutatorModel& model = r.model.model;
    AxiomReport rep;
    rep.model_digest = r.model.digest;
    json entries = json::array();
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const json& c = checks[i];
        const std::string w = "check.checks[" + std::to_string(i) + "]";
        const std::string kind = str(c, "kind", w);
        AxiomEntry e;
        json extra = json::object();
        if (kind == "positivity") {
            require_keys(c, {"kind", "functions"}, w);
            e = check_positivity(model, functions(r, strs(c, "functions", w)), r.cfg, r.tol);
        } else if (kind == "hermiticity") {
            require_keys(c, {"kind", "f", "g"}, w);
            e = check_hermiticity(model, r.model.function(str(c, "f", w)), r.model.function(str(c, "g", w)), r.cfg,
                                  r.tol);
        } else if (kind == "locality") {
            require_keys(c, {"kind", "f", "g", "eps"}, w);
            const auto f = str(c, "f", w), g = str(c, "g", w);
            if (c.contains("eps"))
                e = check_locality(model, gaussian(r, f), gaussian(r, g), num(c, "eps", 1e-6, w), r.cfg, r.tol);
            else
                e = check_locality(model, r.model.grid_function(f), r.model.grid_function(g), r.cfg, r.tol);
        } else if (kind == "spectrum") {
            require_keys(c, {"kind", "functions"}, w);
            std::vector<MomentumResult> momenta;
            e = check_spectrum(model, functions(r, strs(c, "functions", w)), r.cfg, r.tol, &momenta);
            json ms = json::array();
            for (const auto& m : momenta)
                ms.push_back({{"p", {m.p(0), m.p(1), m.p(2), m.p(3)}},
                              {"error", {m.error(0), m.error(1), m.error(2), m.error(3)}},
                              {"cone_margin", m.cone_margin()}});
            extra["momenta"] = ms;
        } else if (kind == "cluster") {
            require_keys(c, {"kind", "f", "g", "direction", "distances", "csv"}, w);
            ClusterCurve curve;
            e = check_cluster(model, r.model.function(str(c, "f", w)), r.model.function(str(c, "g", w)),
                              json_vec4(need(c, "direction", w), w + ".direction"), nums(c, "distances", w), r.cfg,
                              r.tol, &curve);
            const std::string csv = c.contains("csv") ? str(c, "csv", w) : "cluster_" + std::to_string(i) + ".csv";
            write_atomic(out_path(r, csv), curve.csv());
            extra["csv"] = csv;
            extra["knee"] = curve.knee;
        } else if (kind == "translation") {
            require_keys(c, {"kind", "f", "g", "x"}, w);
            e = check_translation(model, r.model.function(str(c, "f", w)), r.model.function(str(c, "g", w)),
                                  json_vec4(need(c, "x", w), w + ".x"), r.cfg, r.tol);
        } else if (kind == "boost") {
            require_keys(c, {"kind", "f", "g", "axis", "rapidity"}, w);
            e = check_boost(model, gaussian(r, str(c, "f", w)), gaussian(r, str(c, "g", w)),
                            boost_matrix(static_cast<int>(num(c, "axis", 1, w)), num(c, "rapidity", 0.0, w)), r.cfg,
                            r.tol);
        } else {
            throw ConfigError(w + ": unknown check kind '" + kind + "'");
        }
        json j = to_json(e);
        j["operation"] = kind;
        j.update(extra);
        entries.push_back(j);
        rep.entries.push_back(e);
    }
    report["entries"] = entries;
    report["all_pass"] = rep.all_pass();
    return rep.exit_code();
}

// ---- vev ----

AlphaVector alpha_of(const json& j, const std::string& w)
{
    if (!j.contains("alpha"))
        return {};
    const auto a = nums(j, "alpha", w);
    if (a.size() != 3)
        throw ConfigError(w + ".alpha: expected 3 numbers");
    return {a[0], a[1], a[2]};
}

DiracPart part_of(const json& j, const std::string& w)
{
    const std::string p = j.contains("part") ? str(j, "part", w) : "plus";
    if (p == "plus")
        return DiracPart::plus;
    if (p == "minus")
        return DiracPart::minus;
    if (p == "full")
        return DiracPart::full;
    throw ConfigError(w + ".part: expected plus, minus or full");
}

double dirac_mass(const Run& r, const json& j, const std::string& w)
{
    return num(j, "mass", r.model.dirac ? r.model.dirac->mass : r.model.model.min_mass(), w);
}

json inner_product(const Run& r, const json& j, const std::string& w)
{
    const std::string name = str(j, "name", w), kind = str(j, "kind", w);
    const Vec4 u = j.contains("u") ? json_vec4(j["u"], w + ".u") : Vec4::Zero();
    if (kind == "commutator") {
        require_keys(j, {"name", "kind", "f", "g"}, w);
        return result_json(name, kind,
                           eval_commutator(r.model.model, r.model.function(str(j, "f", w)),
                                           r.model.function(str(j, "g", w)), r.cfg));
    }
    if (kind == "charged") {
        require_keys(j, {"name", "kind", "f", "g", "commutator", "mass"}, w);
        const auto fs = strs(j, "f", w), gs = strs(j, "g", w);
        if (fs.size() != 2 || gs.size() != 2)
            throw ConfigError(w + ": charged doublets have two components");
        const ChargedDoublet F{r.model.function(fs[0]), r.model.function(fs[1])};
        const ChargedDoublet G{r.model.function(gs[0]), r.model.function(gs[1])};
        const double m = num(j, "mass", r.model.model.min_mass(), w);
        const bool comm = j.value("commutator", false);
        return result_json(name, comm ? "charged_commutator" : "charged",
                           comm ? charged_commutator(F, G, m, r.cfg) : charged_ip(F, G, m, r.cfg));
    }
    if (kind == "dirac") {
        require_keys(j, {"name", "kind", "U", "V", "part", "alpha", "mass", "u"}, w);
        const AlphaVector a = alpha_of(j, w);
        if (!a.admissible())
            throw ConfigError(w + ".alpha: |alpha| must not exceed 1");
        return result_json(name, kind,
                           dirac_ip(named(r.model.spinors, str(j, "U", w), "spinor"),
                                    named(r.model.spinors, str(j, "V", w), "spinor"), part_of(j, w), a,
                                    dirac_mass(r, j, w), r.cfg, u));
    }
    if (kind == "dirac_power") {
        require_keys(j, {"name", "kind", "U", "V", "p", "statistics", "mass"}, w);
        const std::string st = j.contains("statistics") ? str(j, "statistics", w) : "fermionic";
        if (st != "fermionic" && st != "bosonic")
            throw ConfigError(w + ".statistics: expected fermionic or bosonic");
        return result_json(name, kind,
                           dirac_power_commutator(named(r.model.spinors, str(j, "U", w), "spinor"),
                                                  named(r.model.spinors, str(j, "V", w), "spinor"),
                                                  static_cast<int>(num(j, "p", 1, w)),
                                                  st == "fermionic" ? Statistics::fermionic : Statistics::bosonic,
                                                  dirac_mass(r, j, w), r.cfg));
    }
    if (kind == "dirac_preset") {
        require_keys(j, {"name", "kind", "U", "V"}, w);
        if (!r.model.dirac)
            throw ConfigError(w + ": the model has no dirac section");
        return result_json(name, kind,
                           dirac_preset_ip(named(r.model.spinors, str(j, "U", w), "spinor"),
                                           named(r.model.spinors, str(j, "V", w), "spinor"), *r.model.dirac, r.cfg));
    }
    if (kind == "su2") {
        require_keys(j, {"name", "kind", "U", "V", "generator", "theta", "alpha", "mass"}, w);
        const double res = su2_residual(named(r.model.spinors, str(j, "U", w), "spinor"),
                                        named(r.model.spinors, str(j, "V", w), "spinor"),
                                        static_cast<int>(num(j, "generator", 0, w)), num(j, "theta", 0.3, w),
                                        alpha_of(j, w), dirac_mass(r, j, w), r.cfg);
        return json{{"name", name}, {"operation", kind}, {"residual", res}};
    }
    if (kind == "em") {
        require_keys(j, {"name", "kind", "F", "G", "mass", "u"}, w);
        return result_json(name, kind,
                           em_ip(named(r.model.bivectors, str(j, "F", w), "bivector"),
                                 named(r.model.bivectors, str(j, "G", w), "bivector"), num(j, "mass", 0.0, w), r.cfg,
                                 u));
    }
    if (kind == "gauge_matter" || kind == "gauge_connection") {
        require_keys(j, {"name", "kind", "T1", "T2", "mass", "phi"}, w);
        const GaugeKind gk = kind == "gauge_matter" ? GaugeKind::matter : GaugeKind::connection;
        const GaugeTriplet& T1 = named(r.model.triplets, str(j, "T1", w), "triplet");
        const GaugeTriplet& T2 = named(r.model.triplets, str(j, "T2", w), "triplet");
        const double m = dirac_mass(r, j, w);
        const IntegralResult v = gauge_ip(T1, T2, gk, m, r.cfg);
        json out = result_json(name, kind, v);
        if (j.contains("phi")) {
            const GridFunction& phi = r.model.grid_function(str(j, "phi", w));
            const IntegralResult t = gauge_ip(gauge_transform(T1, phi), gauge_transform(T2, phi), gk, m, r.cfg);
            out["gauge_residual"] = std::abs(t.value - v.value);
        }
        return out;
    }
    throw ConfigError(w + ": unknown inner product kind '" + kind + "'");
}

int run_vev(const Run& r, json& report)
{
    const json& sec = r.ops.section("vev");
    require_keys(sec, {"words", "ladders", "zeta", "inner_products"}, "vev");
    json entries = json::array();
    unsigned flags = 0;
    for (std::size_t i = 0; i < sec.value("ladders", json::array()).size(); ++i) {
        const json& l = sec["ladders"][i];
        const std::string w = "vev.ladders[" + std::to_string(i) + "]";
        require_keys(l, {"name", "annihilate", "create"}, w);
        const VevResult v = vev_ladder(r.model.model, functions(r, strs(l, "annihilate", w)),
                                       functions(r, strs(l, "create", w)), r.cfg);
        flags |= v.flags;
        entries.push_back(result_json(str(l, "name", w), "ladder", v));
    }
    for (std::size_t i = 0; i < sec.value("words", json::array()).size(); ++i) {
        const json& wd = sec["words"][i];
        const std::string w = "vev.words[" + std::to_string(i) + "]";
        require_keys(wd, {"name", "expr"}, w);
        const VevResult v = vev_word(r.model.model, parse_operator(need(wd, "expr", w), r.model), r.cfg);
        flags |= v.flags;
        entries.push_back(result_json(str(wd, "name", w), "word", v));
    }
    for (std::size_t i = 0; i < sec.value("zeta", json::array()).size(); ++i) {
        const json& z = sec["zeta"][i];
        const std::string w = "vev.zeta[" + std::to_string(i) + "]";
        require_keys(z, {"name", "spec", "f", "g", "closed_form"}, w);
        const ZetaSpec spec = parse_zeta(need(z, "spec", w), r.model);
        const Argument& f = r.model.function(str(z, "f", w));
        const Argument& g = r.model.function(str(z, "g", w));
        const VevResult v = vev_word(r.model.model, build_zeta(spec, f).adjoint() * build_zeta(spec, g), r.cfg);
        flags |= v.flags;
        json e = result_json(str(z, "name", w), "zeta", v);
        if (z.value("closed_form", false)) {
            const auto* hp = std::get_if<ZetaHiddenPair>(&spec.form);
            if (!hp)
                throw ConfigError(w + ": closed_form needs the hidden_pair form");
            const VevResult c = zeta_pair_closed_form(r.model.model, *hp, f, g, r.cfg);
            e["closed_form"] = complex_json(c.value);
            e["closed_form_error"] = c.error;
        }
        entries.push_back(e);
    }
    for (std::size_t i = 0; i < sec.value("inner_products", json::array()).size(); ++i) {
        const json e = inner_product(r, sec["inner_products"][i], "vev.inner_products[" + std::to_string(i) + "]");
        if (e.contains("flags") && e["flags"].get<std::string>().find("unconverged") != std::string::npos)
            flags |= kUnconverged;
        entries.push_back(e);
    }
    report["entries"] = entries;
    return unconverged(flags) ? 2 : 0;
}

// ---- thermal ----

int run_thermal(const Run& r, json& report)
{
    const json& sec = r.ops.section("thermal");
    require_keys(sec, {"pairs", "betas", "terms", "frame", "closed_form", "tolerance"}, "thermal");
    ThermalConfig base = r.model.thermal.value_or(ThermalConfig{});
    base.terms = static_cast<int>(num(sec, "terms", base.terms, "thermal"));
    if (sec.contains("frame"))
        base.T = json_vec4(sec["frame"], "thermal.frame");
    const std::vector<double> betas = sec.contains("betas") ? nums(sec, "betas", "thermal")
                                                            : std::vector<double>{base.beta};
    const bool closed = sec.value("closed_form", false);
    const double tol = num(sec, "tolerance", 1e-6, "thermal");
    if (!sec.contains("pairs"))
        throw ConfigError("thermal: missing key 'pairs'");

    json entries = json::array();
    bool failed = false;
    unsigned flags = 0;
    for (const auto& p : sec["pairs"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
            throw ConfigError("thermal.pairs: each pair is [f, g]");
        const Argument& f = r.model.function(p[0].get<std::string>());
        const Argument& g = r.model.function(p[1].get<std::string>());
        const IntegralResult vac_ff = eval_commutator(r.model.model, f, f, r.cfg);
        for (double beta : betas) {
            ThermalConfig th = base;
            th.beta = beta;
            th.validate();
            const IntegralResult v = thermal_ip(r.model.model, f, g, th, r.cfg);
            const IntegralResult ff = thermal_ip(r.model.model, f, f, th, r.cfg);
            flags |= v.flags | ff.flags;
            json e = result_json(p[0].get<std::string>() + "," + p[1].get<std::string>(), "thermal_ip", v);
            e["beta"] = beta;
            e["fluctuation_ratio"] = ff.value.real() / vac_ff.value.real();
            if (closed) {
                const IntegralResult c =
                    thermal_free_closed_form(f, g, r.model.model.min_mass(), th, r.cfg);
                const double diff = std::abs(v.value - c.value);
                const double allowed = std::max(tol * std::abs(c.value), r.tol.error_factor * (v.error_estimate + c.error_estimate));
                e["closed_form"] = complex_json(c.value);
                e["closed_form_error"] = c.error_estimate;
                e["difference"] = diff;
                e["pass"] = diff <= allowed;
                failed |= diff > allowed;
            }
            entries.push_back(e);
        }
    }
    report["entries"] = entries;
    return failed ? 1 : unconverged(flags) ? 2 : 0;
}

// ---- scan ----

std::string fmt(double x)
{
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
}

struct RatioPoint {
    double resonant = 0.0, control = 0.0, ratio = 0.0, error = 0.0;
    unsigned flags = 0;
};

RatioPoint resonance_point(const Run& r, const Argument& f, const Argument& res, const Argument& ctl)
{
    const GramResult G = gram(r.model.model, {f, res, ctl}, r.cfg);
    RatioPoint p;
    p.resonant = std::abs(G.value(0, 1));
    p.control = std::abs(G.value(0, 2));
    p.ratio = p.resonant / p.control;
    const Eigen::MatrixXd e = G.error();
    p.error = p.ratio * (e(0, 1) / p.resonant + e(0, 2) / p.control);
    p.flags = G.all_flags();
    return p;
}

struct ResonanceInputs {
    Argument f, res, ctl;
    Vec4 dir;
    std::vector<double> distances;
};

ResonanceInputs resonance_inputs(const Run& r, const json& j, const std::string& w,
                                 std::initializer_list<const char*> extra = {})
{
    std::vector<std::string> keys{"f", "resonant", "control", "direction", "distances", "csv"};
    keys.insert(keys.end(), extra.begin(), extra.end());
    require_keys(j, keys, w);
    return {r.model.function(str(j, "f", w)), r.model.function(str(j, "resonant", w)),
            r.model.function(str(j, "control", w)), json_vec4(need(j, "direction", w), w + ".direction"),
            nums(j, "distances", w)};
}

int run_scan(const Run& r, json& report)
{
    const json& sec = r.ops.section("scan");
    require_keys(sec, {"cluster", "resonance", "spectrum_cone"}, "scan");
    json entries = json::array();
    unsigned flags = 0;
    bool failed = false;

    if (sec.contains("cluster")) {
        const json& c = sec["cluster"];
        require_keys(c, {"f", "g", "direction", "distances", "csv"}, "scan.cluster");
        ClusterCurve curve;
        const AxiomEntry e = check_cluster(r.model.model, r.model.function(str(c, "f", "scan.cluster")),
                                           r.model.function(str(c, "g", "scan.cluster")),
                                           json_vec4(need(c, "direction", "scan.cluster"), "scan.cluster.direction"),
                                           nums(c, "distances", "scan.cluster"), r.cfg, r.tol, &curve);
        const std::string csv = c.value("csv", "cluster.csv");
        write_atomic(out_path(r, csv), curve.csv());
        json j = to_json(e);
        j["operation"] = "cluster";
        j["csv"] = csv;
        j["knee"] = curve.knee;
        entries.push_back(j);
        failed |= e.verdict == Verdict::fail;
        if (e.verdict == Verdict::unconverged)
            flags |= kUnconverged;
    }
    if (sec.contains("resonance")) {
        const json& c = sec["resonance"];
        const ResonanceInputs in = resonance_inputs(r, c, "scan.resonance");
        std::string csv = "distance,resonant,control,ratio,ratio_error\n";
        json ratios = json::array();
        for (double d : in.distances) {
            const RatioPoint p = resonance_point(r, in.f, translate(in.res, d * in.dir), translate(in.ctl, d * in.dir));
            flags |= p.flags;
            csv += fmt(d) + "," + fmt(p.resonant) + "," + fmt(p.control) + "," + fmt(p.ratio) + "," + fmt(p.error) + "\n";
            ratios.push_back(p.ratio);
        }
        const std::string name = c.value("csv", "resonance.csv");
        write_atomic(out_path(r, name), csv);
        entries.push_back({{"operation", "resonance"}, {"csv", name}, {"distances", in.distances}, {"ratio", ratios}});
    }
    if (sec.contains("spectrum_cone")) {
        const json& c = sec["spectrum_cone"];
        require_keys(c, {"lambdas", "functions", "csv"}, "scan.spectrum_cone");
        const auto names = strs(c, "functions", "scan.spectrum_cone");
        CommutatorModel m = r.model.model;
        if (m.terms.empty() || m.terms[0].A.rows() != 2 || m.terms[0].A.cols() != 1)
            throw ConfigError("scan.spectrum_cone: the first term needs two factors and one hidden variable");
        m.spectrum_guard = false;
        std::string csv = "lambda,function,cone_margin,error\n";
        json rows = json::array();
        for (double lambda : nums(c, "lambdas", "scan.spectrum_cone")) {
            m.terms[0].A(1, 0) = lambda;
            for (const auto& n : names) {
                const MomentumResult mr = momentum_expectation(m, r.model.function(n), r.cfg);
                flags |= mr.flags;
                const double err = mr.error.norm();
                csv += fmt(lambda) + "," + n + "," + fmt(mr.cone_margin()) + "," + fmt(err) + "\n";
                rows.push_back({{"lambda", lambda}, {"function", n}, {"cone_margin", mr.cone_margin()}, {"error", err}});
            }
        }
        const std::string name = c.value("csv", "spectrum_cone.csv");
        write_atomic(out_path(r, name), csv);
        entries.push_back({{"operation", "spectrum_cone"}, {"csv", name}, {"rows", rows}});
    }
    report["entries"] = entries;
    return failed ? 1 : unconverged(flags) ? 2 : 0;
}

// ---- oracle ----
// Independent reference computations. Each avoids the engine path it is
// compared against: brute-force sums instead of Ryser or the pairing
// recursion, plain Monte Carlo instead of the trapezoid shell rule, direct
// convolution instead of the FFT, and term-by-term series instead of the
// channel pass.

cplx permanent_brute(const Eigen::MatrixXcd& M)
{
    std::vector<int> perm(M.rows());
    std::iota(perm.begin(), perm.end(), 0);
    cplx sum = 0.0;
    do {
        cplx p = 1.0;
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            p *= M(i, perm[i]);
        sum += p;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum;
}

json oracle_permanent(const json& j, std::uint64_t seed)
{
    require_keys(j, {"sizes", "seed"}, "oracle.permanent");
    std::mt19937_64 rng(j.value("seed", seed));
    std::normal_distribution<double> N;
    json out = json::array();
    for (double s : nums(j, "sizes", "oracle.permanent")) {
        const int n = static_cast<int>(s);
        if (n < 1 || n > 8)
            throw ConfigError("oracle.permanent: sizes must be 1..8");
        Eigen::MatrixXcd M(n, n);
        json rows = json::array();
        for (int a = 0; a < n; ++a) {
            json row = json::array();
            for (int b = 0; b < n; ++b) {
                const double re = N(rng), im = N(rng);
                M(a, b) = cplx(re, im);
                row.push_back({re, im});
            }
            rows.push_back(row);
        }
        out.push_back({{"matrix", rows}, {"value", complex_json(permanent_brute(M))}});
    }
    return out;
}

// Sum over every assignment of the letters to ordered pairs (i < j); a pair
// contributes <ann(L_i), cre(L_j)>, which vanishes unless L_i has an
// annihilation part and L_j a creation part.
cplx pairing_sum(const std::vector<int>& open, const std::function<cplx(int, int)>& two_point)
{
    if (open.empty())
        return 1.0;
    cplx s = 0.0;
    for (std::size_t k = 1; k < open.size(); ++k) {
        std::vector<int> rest;
        for (std::size_t q = 1; q < open.size(); ++q)
            if (q != k)
                rest.push_back(open[q]);
        const cplx c = two_point(open[0], open[k]);
        if (c != 0.0)
            s += c * pairing_sum(rest, two_point);
    }
    return s;
}

json oracle_pairing(const Run& r, const json& j)
{
    require_keys(j, {"words"}, "oracle.pairing");
    json out = json::array();
    for (std::size_t i = 0; i < need(j, "words", "oracle.pairing").size(); ++i) {
        const json& wd = j["words"][i];
        const std::string w = "oracle.pairing.words[" + std::to_string(i) + "]";
        require_keys(wd, {"name", "expr"}, w);
        const OperatorExpr e = parse_operator(need(wd, "expr", w), r.model);
        if (e.terms.size() != 1 || e.terms[0].groups.size() != 1 || e.terms[0].groups[0].normal_ordered)
            throw ConfigError(w + ": the pairing oracle takes one plain monomial");
        const auto& letters = e.terms[0].groups[0].letters;
        if (letters.size() > 8)
            throw ConfigError(w + ": at most 8 letters");
        const WickTable t = wick_table(r.model.model, e, r.cfg);
        auto two_point = [&](int a, int b) -> cplx {
            const Letter& L = letters[a];
            const Letter& R = letters[b];
            if (R.kind == LetterKind::annihilate)
                return 0.0;
            const int row = L.kind == LetterKind::annihilate ? t.ann[L.fn]
                            : L.kind == LetterKind::xi       ? t.ann_xi[L.fn]
                                                             : -1;
            if (row < 0)
                return 0.0;
            return t.value(row, t.cre[R.fn]);
        };
        std::vector<int> open(letters.size());
        std::iota(open.begin(), open.end(), 0);
        const cplx v = letters.size() % 2 ? cplx(0.0) : e.terms[0].coeff * pairing_sum(open, two_point);
        out.push_back({{"name", str(wd, "name", w)}, {"value", complex_json(v)}});
    }
    return out;
}

json oracle_mc_ip(const Run& r, const json& j, std::uint64_t seed)
{
    require_keys(j, {"pairs", "samples", "seed", "mass"}, "oracle.mc_ip");
    std::mt19937_64 rng(j.value("seed", seed));
    std::normal_distribution<double> N;
    const long samples = static_cast<long>(num(j, "samples", 200000, "oracle.mc_ip"));
    const double mass = num(j, "mass", r.model.model.min_mass(), "oracle.mc_ip");
    json out = json::array();
    for (const auto& p : need(j, "pairs", "oracle.mc_ip")) {
        const TestFunction& f = gaussian(r, p.at(0).get<std::string>());
        const TestFunction& g = gaussian(r, p.at(1).get<std::string>());
        // Gaussian importance density around the first term of f.
        const Eigen::Vector3d c = f.terms()[0].center.tail<3>();
        const double s = 1.5 * std::max(f.max_k_sigma(), g.max_k_sigma());
        const double norm = std::pow(2.0 * kPi * s * s, 1.5);
        double sr = 0.0, si = 0.0, sr2 = 0.0, si2 = 0.0;
        for (long n = 0; n < samples; ++n) {
            const Eigen::Vector3d z(N(rng), N(rng), N(rng));
            const Eigen::Vector3d q = c + s * z;
            const double w = shell_energy(q(0), q(1), q(2), mass);
            const Vec4 k(w, q(0), q(1), q(2));
            const double density = std::exp(-0.5 * z.squaredNorm()) / norm;
            const cplx v = std::conj(f.ft(k)) * g.ft(k) / (std::pow(kTwoPi, 3) * 2.0 * w * density);
            sr += v.real();
            si += v.imag();
            sr2 += v.real() * v.real();
            si2 += v.imag() * v.imag();
        }
        const double m = static_cast<double>(samples);
        const double err = std::sqrt((sr2 / m - sr * sr / (m * m) + si2 / m - si * si / (m * m)) / m);
        out.push_back({{"f", p[0]}, {"g", p[1]}, {"mass", mass}, {"value", {sr / m, si / m}}, {"error", err}});
    }
    return out;
}

json oracle_series(const Run& r, const json& j)
{
    require_keys(j, {"pairs", "betas", "frame", "terms", "tail_tol"}, "oracle.series");
    const Vec4 T = j.contains("frame") ? json_vec4(j["frame"], "oracle.series.frame") : Vec4(1, 0, 0, 0);
    const int terms = static_cast<int>(num(j, "terms", 200, "oracle.series"));
    const double tail_tol = num(j, "tail_tol", 1e-14, "oracle.series");
    const double mass = r.model.model.min_mass();
    json out = json::array();
    for (const auto& p : need(j, "pairs", "oracle.series")) {
        const TestFunction& f = gaussian(r, p.at(0).get<std::string>());
        const TestFunction& g = gaussian(r, p.at(1).get<std::string>());
        for (double beta : nums(j, "betas", "oracle.series")) {
            cplx sum = base_ip(f, g, mass, r.cfg).value;
            int used = 0;
            for (int n = 1; n <= terms; ++n) {
                const cplx t = base_ip(f, beta_translate(g, n * beta, T), mass, r.cfg).value;
                sum += 2.0 * t;
                used = n;
                if (std::abs(t) < tail_tol * std::abs(sum))
                    break;
            }
            out.push_back({{"f", p[0]}, {"g", p[1]}, {"beta", beta}, {"terms", used}, {"value", complex_json(sum)}});
        }
    }
    return out;
}

json oracle_fft_product(const Run& r, const json& j)
{
    require_keys(j, {"f", "g", "entries"}, "oracle.fft_product");
    const GridFunction& f = r.model.grid_function(str(j, "f", "oracle.fft_product"));
    const GridFunction& g = r.model.grid_function(str(j, "g", "oracle.fft_product"));
    if (!f.spec().same_geometry(g.spec()))
        throw ConfigError("oracle.fft_product: functions must share a grid");
    const GridSpec& s = f.spec();
    const auto& F = f.dft();
    const auto& G = g.dft();
    const int entries = static_cast<int>(num(j, "entries", 8, "oracle.fft_product"));
    const auto& c = s.counts;
    const double N = static_cast<double>(s.size());
    json out = json::array();
    for (int e = 0; e < entries; ++e) {
        // Index spread over the box: a deterministic stride through the spectrum.
        const std::size_t flat = (static_cast<std::size_t>(e) * 7919u) % s.size();
        std::array<int, 4> K{};
        std::size_t rem = flat;
        for (int a = 3; a >= 0; --a) {
            K[a] = static_cast<int>(rem % c[a]);
            rem /= c[a];
        }
        cplx acc = 0.0;
        for (int a0 = 0; a0 < c[0]; ++a0)
            for (int a1 = 0; a1 < c[1]; ++a1)
                for (int a2 = 0; a2 < c[2]; ++a2)
                    for (int a3 = 0; a3 < c[3]; ++a3) {
                        const int b0 = (K[0] - a0 + c[0]) % c[0], b1 = (K[1] - a1 + c[1]) % c[1];
                        const int b2 = (K[2] - a2 + c[2]) % c[2], b3 = (K[3] - a3 + c[3]) % c[3];
                        acc += F[s.index(a0, a1, a2, a3)] * G[s.index(b0, b1, b2, b3)];
                    }
        out.push_back({{"index", K}, {"value", complex_json(acc / N)}});
    }
    return out;
}

json oracle_resonance(const Run& r, const json& j)
{
    const ResonanceInputs in = resonance_inputs(r, j, "oracle.resonance", {"shell_nodes"});
    const CommutatorModel& model = r.model.model;
    if (model.terms.size() != 1 || model.terms[0].hidden.empty())
        throw ConfigError("oracle.resonance: needs a single-term hidden-variable model");
    const CommutatorTerm& term = model.terms[0];
    for (const auto& fs : term.factors)
        if (!fs.functional.steps.empty() || fs.derivative_coeffs != std::vector<double>{1.0})
            throw ConfigError("oracle.resonance: factors must be plain inner products");
    QuadratureConfig fine = r.cfg;
    fine.shell.nodes = static_cast<int>(num(j, "shell_nodes", 2 * r.cfg.shell.nodes + 1, "oracle.resonance"));
    const Eigen::Index m = term.A.cols();

    // Same hidden nodes as the scan, finer shell rule per factor.
    auto value = [&](const std::vector<Argument>& args, const Argument& g) {
        const HiddenRule rule = term_hidden_rule(model, 0, args, r.cfg);
        const IntegralResult v = hidden_integral(
            [&](const Eigen::VectorXd& u) {
                cplx prod = 1.0;
                for (Eigen::Index i = 0; i < term.A.rows(); ++i) {
                    Vec4 v4 = Vec4::Zero();
                    for (Eigen::Index a = 0; a < m; ++a)
                        v4 += term.A(i, a) * u.segment<4>(4 * a);
                    prod *= shifted_ip(args[0], g, term.factors[i].mass, v4, fine).value;
                }
                return prod;
            },
            rule, r.cfg.threads);
        return std::make_pair(term.weight * v.value, term.weight * v.error_estimate);
    };
    json ratio = json::array(), err = json::array();
    for (double d : in.distances) {
        const Argument res = translate(in.res, d * in.dir), ctl = translate(in.ctl, d * in.dir);
        const std::vector<Argument> args{in.f, res, ctl};
        const auto [vr, er] = value(args, res);
        const auto [vc, ec] = value(args, ctl);
        const double q = std::abs(vr) / std::abs(vc);
        ratio.push_back(q);
        err.push_back(q * (er / std::abs(vr) + ec / std::abs(vc)));
    }
    return json{{"distances", in.distances}, {"ratio", ratio}, {"ratio_error", err}, {"shell_nodes", fine.shell.nodes}};
}

int run_oracle(const Run& r, json& report)
{
    const json& sec = r.ops.section("oracle");
    require_keys(sec, {"permanent", "pairing", "mc_ip", "series", "fft_product", "resonance", "file"}, "oracle");
    const std::uint64_t seed = r.seed.value_or(20240611);
    json golden = json::object();
    if (sec.contains("permanent"))
        golden["permanent"] = oracle_permanent(sec["permanent"], seed);
    if (sec.contains("pairing"))
        golden["pairing"] = oracle_pairing(r, sec["pairing"]);
    if (sec.contains("mc_ip"))
        golden["mc_ip"] = oracle_mc_ip(r, sec["mc_ip"], seed);
    if (sec.contains("series"))
        golden["series"] = oracle_series(r, sec["series"]);
    if (sec.contains("fft_product"))
        golden["fft_product"] = oracle_fft_product(r, sec["fft_product"]);
    if (sec.contains("resonance"))
        golden["resonance"] = oracle_resonance(r, sec["resonance"]);
    const std::string file = sec.value("file", "golden.json");
    report["golden"] = golden;
    report["file"] = file;
    json g = header(r);
    g["golden"] = golden;
    write_atomic(out_path(r, file), dump(g));
    return 0;
}

// ---- driver ----

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void error_json(const std::string& kind, const std::string& message)
{
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

// Pull --tol.<name> <value> and --tol.<name>=<value> out of argv; CLI11 has no
// dynamic option names.
std::vector<std::pair<std::string, double>> take_tolerances(std::vector<std::string>& args)
{
    std::vector<std::pair<std::string, double>> out;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--tol.", 0) != 0) {
            rest.push_back(a);
            continue;
        }
        std::string name = a.substr(6), value;
        if (const auto eq = name.find('='); eq != std::string::npos) {
            value = name.substr(eq + 1);
            name = name.substr(0, eq);
        } else if (i + 1 < args.size()) {
            value = args[++i];
        } else {
            throw ConfigError("--tol." + name + " needs a value");
        }
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size())
                throw std::invalid_argument(value);
            out.emplace_back(name, v);
        } catch (const std::logic_error&) {
            throw ConfigError("--tol." + name + ": bad number '" + value + "'");
        }
    }
    args = std::move(rest);
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    Run r;
    std::string model_path, ops_path;
    int threads = 1;
    std::uint64_t seed = 0;

    CLI::App app{"nonlinear Wightman-field checks, expectation values and scans"};
    app.require_subcommand(1, 1);
    app.add_option("--model", model_path, "model file (YAML)")->required()->check(CLI::ExistingFile);
    app.add_option("--ops", ops_path, "operations file (JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", r.out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "global seed for hidden-variable sequences and oracles");
    app.add_flag("--no-spectrum-guard", r.no_guard, "permit models that violate the spectrum guard");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    for (const char* c : {"check", "vev", "thermal", "scan", "oracle"})
        app.add_subcommand(c)->fallthrough();
    app.fallthrough();

    try {
        r.tol_overrides = take_tolerances(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_json("usage", e.what());
        return 3;
    } catch (const ConfigError& e) {
        error_json("usage", e.what());
        return 3;
    }
    r.command = app.get_subcommands().front()->get_name();

    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    int code = 0;
    try {
        r.model = load_model(model_path);
        if (!ops_path.empty())
            r.ops = load_ops(ops_path);
        else
            r.ops.digest = digest_bytes("");
        r.cfg = r.model.quadrature;
        r.cfg.threads = threads;
        if (seed_opt->count()) {
            r.seed = seed;
            r.cfg.hidden.seed = seed;
        }
        for (const auto& [k, v] : r.tol_overrides)
            set_tolerance(r.tol, k, v);
        if (r.no_guard)
            r.model.model.spectrum_guard = false;

        json report = header(r);
        if (r.command == "check")
            code = run_check(r, report);
        else if (r.command == "vev")
            code = run_vev(r, report);
        else if (r.command == "thermal")
            code = run_thermal(r, report);
        else if (r.command == "scan")
            code = run_scan(r, report);
        else
            code = run_oracle(r, report);
        report["exit_code"] = code;
        write_atomic(out_path(r, r.command + ".json"), dump(report));
    } catch (const ConfigError& e) {
        error_json("config", e.what());
        return 3;
    } catch (const DomainError& e) {
        error_json("domain", e.what());
        return 3;
    } catch (const std::exception& e) {
        error_json("internal", e.what());
        return 3;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_atomic(out_path(r, r.command + ".timing.json"),
                     dump(json{{"started", started}, {"finished", utc_now()}, {"seconds", seconds}, {"threads", threads}}));
    } catch (const std::exception& e) {
        error_json("io", e.what());
    }
    return code;
}
