// Acceptance suite: one line per criterion, exit 0 only if every criterion passes.
//
//   acceptance --cli <nlw> --configs <dir> --golden <dir> [--work <dir>] [--only N]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "support.hpp"

namespace fs = std::filesystem;
using namespace nlw;
using nlw::testing::Gen;
using nlw::testing::rel;

namespace {

struct Context {
    std::string cli;
    std::string configs;
    std::string golden;
    std::string work;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", x);
    return b;
}

std::vector<std::string> bundled_models(const Context& c)
{
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(c.configs))
        if (e.path().extension() == ".yaml")
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

ModelConfig model_named(const Context& c, const std::string& name) { return load_model(c.configs + "/" + name + ".yaml"); }

QuadratureConfig reduced(QuadratureConfig q, int shell, int hidden)
{
    q.shell.nodes = std::min(q.shell.nodes, shell);
    q.hidden.nodes = std::min(q.hidden.nodes, hidden);
    return q;
}

int run_cli(const Context& c, const std::string& args)
{
    const std::string cmd = "\"" + c.cli + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_args(const Context& c, const std::string& command, const std::string& model, const std::string& out,
                     const std::string& extra = "")
{
    return command + " --model " + c.configs + "/" + model + ".yaml --ops " + c.configs + "/" + model +
           ".ops.json --out " + out + " " + extra;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("missing " + path);
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        std::vector<std::string> names;
        while (std::getline(ss, cell, ','))
            first ? names.push_back(cell) : row.push_back(std::stod(cell));
        if (first)
            csv.header = names;
        else
            csv.rows.push_back(row);
        first = false;
    }
    return csv;
}

/// Random model with n <= 3 factors, m <= 2 hiddens and independent column-sum-zero columns.
CommutatorModel random_model(Gen& gen)
{
    CommutatorModel m;
    for (int t = 0, terms = gen.integer(1, 2); t < terms; ++t) {
        CommutatorTerm term;
        term.weight = gen.uniform(0.2, 1.0);
        const int n = gen.integer(1, 3), h = gen.integer(0, std::min(2, n - 1));
        term.factors.assign(n, FactorSpec{});
        for (auto& f : term.factors)
            f.mass = gen.uniform(0.5, 1.5);
        for (int j = 0; j < h; ++j) {
            const int kind = gen.integer(0, 2);
            term.hidden.push_back(kind == 0   ? gaussian_of_invariant(gen.uniform(0.5, 2.0))
                                  : kind == 1 ? window_of_invariant(-gen.uniform(0.5, 2.0), gen.uniform(0.5, 2.0))
                                              : frame_window(Vec4(gen.uniform(0.5, 1.5), gen.uniform(0.5, 1.5),
                                                                  gen.uniform(0.5, 1.5), gen.uniform(0.5, 1.5))));
        }
        term.A = Eigen::MatrixXd::Zero(n, h);
        for (int j = 0; j < h; ++j) {
            const double a = gen.uniform(0.5, 1.5) * (gen.integer(0, 1) ? 1.0 : -1.0);
            term.A(j, j) = a;
            term.A(j + 1, j) = -a;
        }
        m.terms.push_back(term);
    }
    return m;
}

/// f + f*, a real test function.
Argument real_part(const Argument& f)
{
    const TestFunction& t = std::get<TestFunction>(f);
    return add(t, star(t));
}

// 1 ---------------------------------------------------------------------------

Outcome schur_positivity(const Context&)
{
    const auto t0 = std::chrono::steady_clock::now();
    Gen gen(1001);
    QuadratureConfig cfg;
    cfg.shell.nodes = 13;
    cfg.hidden.nodes = 32;
    int violations = 0, with_hidden = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const CommutatorModel m = random_model(gen);
        for (const auto& t : m.terms)
            with_hidden += !t.hidden.empty();
        std::vector<Argument> args;
        for (int i = 0, n = gen.integer(2, 6); i < n; ++i)
            args.push_back(gen.packet(gen.integer(1, 2), 1.5, 4.0));
        const GramResult G = gram(m, args, cfg);
        const Eigen::MatrixXcd H = 0.5 * (G.value + G.value.adjoint());
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(H).eigenvalues()(0);
        const double err = G.error().norm();
        if (lmin < -err)
            ++violations;
        worst = std::max(worst, -lmin / std::max(err, 1e-300));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {violations == 0 && secs <= 600.0,
            "200 models (" + std::to_string(with_hidden) + " hidden terms), hard violations " +
                std::to_string(violations) + ", worst -lambda_min/error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------

Outcome translation_invariance(const Context& c)
{
    Gen gen(1002);
    double worst = 0.0;
    int count = 0;
    for (const auto& path : bundled_models(c)) {
        const ModelConfig m = load_model(path);
        const QuadratureConfig cfg = reduced(m.quadrature, 13, 16);
        for (int t = 0; t < 100; ++t) {
            const TestFunction f = gen.packet(gen.integer(1, 2)), g = gen.packet(1);
            const AxiomEntry e = check_translation(m.model, f, g, gen.vec(2.0), cfg);
            worst = std::max(worst, e.residual);
            ++count;
        }
    }
    return {worst <= 1e-12, std::to_string(count) + " triples, worst relative residual " + fmt(worst)};
}

// 3 ---------------------------------------------------------------------------

Outcome locality(const Context& c)
{
    std::ostringstream d;
    bool ok = true;
    struct Case {
        std::string model;
        int hidden;
        double pad;
    };
    for (const Case& k : {Case{"free_scalar", 0, 0.0}, Case{"power2", 0, 0.0}, Case{"fgH", 8, 2.0}}) {
        const ModelConfig m = model_named(c, k.model);
        QuadratureConfig cfg = m.quadrature;
        if (k.hidden)
            cfg.hidden.nodes = k.hidden;
        if (k.pad > 0.0)
            cfg.shell.lattice_pad = k.pad;
        if (!m.model.hiddens_even_invariant())
            throw Error(k.model + ": hidden propagators must be even and invariant");
        const AxiomEntry e = check_locality(m.model, m.grid_function("b1"), m.grid_function("b2"), cfg);
        const bool pass = e.mode == "certified" && e.residual <= 3.0 * e.error_budget;
        ok = ok && pass;
        d << k.model << " " << fmt(e.residual) << "<=" << fmt(3.0 * e.error_budget) << "; ";
    }
    // Dirac anticommutator kernel on the same geometry.
    const ModelConfig dm = model_named(c, "dirac_preset");
    const SpinorTestFunction &U = dm.spinors.at("Ub"), &V = dm.spinors.at("Vb");
    const IntegralResult p = dirac_ip(V, U, DiracPart::plus, AlphaVector{}, dm.dirac->mass, dm.quadrature);
    const IntegralResult q = dirac_ip(V, U, DiracPart::minus, AlphaVector{}, dm.dirac->mass, dm.quadrature);
    const double r = std::abs(p.value + q.value) / std::max(std::abs(p.value), 1e-300);
    const double b = (p.error_estimate + q.error_estimate) / std::max(std::abs(p.value), 1e-300);
    ok = ok && r <= 3.0 * b;
    d << "dirac (V,U)+ + (V,U)- " << fmt(r) << "<=" << fmt(3.0 * b);
    return {ok, d.str()};
}

// 4 ---------------------------------------------------------------------------

Outcome spectrum_cone(const Context& c)
{
    Gen gen(1004);
    double worst_margin = std::numeric_limits<double>::infinity(), worst_fd = 0.0;
    int count = 0;
    for (const auto& path : bundled_models(c)) {
        const ModelConfig m = load_model(path);
        if (!m.model.column_sums_zero())
            continue;
        const QuadratureConfig cfg = reduced(m.quadrature, 13, 16);
        for (int t = 0; t < 20; ++t) {
            const TestFunction g = gen.packet(gen.integer(1, 2), 2.0, 4.0);
            const MomentumResult a = momentum_expectation(m.model, g, cfg);
            const MomentumResult f = momentum_finite_difference(m.model, g, cfg);
            worst_margin = std::min(worst_margin, a.cone_margin());
            worst_fd = std::max(worst_fd, (a.p - f.p).cwiseAbs().maxCoeff());
            ++count;
        }
    }
    return {worst_margin >= -1e-9 && worst_fd <= 1e-6, std::to_string(count) + " packets, worst cone margin " +
                                                           fmt(worst_margin) + ", worst |p - p_fd| " + fmt(worst_fd)};
}

// 5 ---------------------------------------------------------------------------

Outcome permanent_wick(const Context& c)
{
    Gen gen(1005);
    double ryser = 0.0;
    for (int n = 1; n <= 6; ++n)
        for (int t = 0; t < 10; ++t) {
            const Eigen::MatrixXcd M = gen.complex_matrix(n);
            ryser = std::max(ryser, rel(permanent(M), nlw::testing::permanent_brute(M)));
        }

    const json golden = json::parse(read_file(c.golden + "/golden_free_scalar.json"))["golden"];
    for (const auto& p : golden["permanent"]) {
        const auto& rows = p["matrix"];
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXcd M(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b)
                M(a, b) = cplx(rows[a][b][0].get<double>(), rows[a][b][1].get<double>());
        ryser = std::max(ryser, rel(permanent(M), cplx(p["value"][0].get<double>(), p["value"][1].get<double>())));
    }

    // Wick engine against the brute-force pairing enumeration.
    const ModelConfig m = model_named(c, "free_scalar");
    const OpsConfig ops = load_ops(c.configs + "/free_scalar.ops.json");
    double wick = 0.0;
    int words = 0, nonzero = 0;
    for (const auto& w : ops.section("oracle")["pairing"]["words"]) {
        const OperatorExpr e = parse_operator(w["expr"], m);
        const VevResult v = vev_word(m.model, e, m.quadrature);
        for (const auto& gw : golden["pairing"])
            if (gw["name"] == w["name"]) {
                wick = std::max(wick, rel(v.value, cplx(gw["value"][0].get<double>(), gw["value"][1].get<double>())));
                ++words;
            }
    }
    const QuadratureConfig cfg = m.quadrature;
    const std::vector<Argument> fns{m.function("f"), m.function("g"), m.function("h")};
    for (int trial = 0; trial < 40; ++trial) {
        OperatorExpr e;
        e.functions = fns;
        Monomial mono;
        mono.groups.resize(1);
        std::vector<Letter> letters;
        for (int i = 0, n = 2 * gen.integer(1, 4); i < n; ++i)
            letters.push_back(Letter{static_cast<LetterKind>(gen.integer(0, 2)), gen.integer(0, 2)});
        mono.groups[0].letters = letters;
        e.terms.push_back(mono);
        const WickTable table = wick_table(m.model, e, cfg);
        std::vector<int> open(letters.size());
        std::iota(open.begin(), open.end(), 0);
        const cplx expected = nlw::testing::pairings(
            open, [&](int i, int j) { return nlw::testing::letter_two_point(table, letters[i], letters[j]); });
        const cplx got = wick_vev(e, table).value;
        wick = std::max(wick, std::abs(got - expected) / std::max(std::abs(expected), 1e-300));
        ++words;
        nonzero += expected != cplx(0.0);
    }

    double rank1 = 0.0;
    const Argument &f = fns[0], &g = fns[1];
    const cplx x = base_ip(f, g, 1.0, cfg).value;
    cplx xn = 1.0;
    double fact = 1.0;
    for (int n = 1; n <= 6; ++n) {
        xn *= x;
        fact *= n;
        const VevResult v = vev_ladder(m.model, std::vector<Argument>(n, f), std::vector<Argument>(n, g), cfg);
        rank1 = std::max(rank1, rel(v.value, fact * xn));
    }
    return {ryser <= 1e-12 && wick <= 1e-12 && rank1 <= 1e-12,
            "Ryser " + fmt(ryser) + ", Wick " + fmt(wick) + " over " + std::to_string(words) + " words (" + std::to_string(nonzero) + " random nonzero), n! x^n " +
                fmt(rank1)};
}

// 6 ---------------------------------------------------------------------------

Outcome characteristic_identity(const Context& c)
{
    double worst = 0.0;
    std::ostringstream d;
    for (const std::string name : {"free_scalar", "power2"}) {
        const ModelConfig m = model_named(c, name);
        const QuadratureConfig cfg = reduced(m.quadrature, 25, 16);
        const Argument f = real_part(m.function("f"));
        // Vacuum: sum_n (i lambda)^n / n! <xi_f^n> through the Wick engine.
        std::vector<cplx> moments{1.0};
        OperatorExpr word = constant(1.0);
        for (int n = 1; n <= 12; ++n) {
            word = word * xi(f);
            moments.push_back(vev_word(m.model, word, cfg).value);
        }
        ThermalConfig th;
        th.beta = 1.0;
        const cplx two = thermal_vev(m.model, {star(f)}, {f}, th, cfg).value +
                         thermal_vev(m.model, {star(f)}, {f}, th, cfg, ThermalOrder::creators_first).value;
        for (double lambda : {0.1, 0.2, 0.3}) {
            cplx vac = 0.0, therm = 0.0, term = 1.0;
            for (int n = 0; n <= 12; ++n) {
                if (n > 0)
                    term *= cplx(0.0, lambda) / double(n);
                vac += term * moments[n];
                std::vector<int> open(n);
                std::iota(open.begin(), open.end(), 0);
                therm += term * nlw::testing::pairings(open, [&](int, int) { return two; });
            }
            const double rv = rel(vac, characteristic(m.model, {f}, {lambda}, cfg).value);
            const double rt = rel(therm, characteristic(m.model, {f}, {lambda}, cfg, &th).value);
            worst = std::max({worst, rv, rt});
        }
        d << name << " ok; ";
    }
    return {worst <= 1e-8, d.str() + "worst relative difference " + fmt(worst)};
}

// 7 ---------------------------------------------------------------------------

Outcome thermal_coth(const Context& c)
{
    const ModelConfig m = model_named(c, "thermal");
    const Argument& f = m.function("narrow");
    ThermalConfig th = m.thermal.value_or(ThermalConfig{});
    th.terms = 200;
    double worst = 0.0;
    for (double beta : {0.5, 1.0, 2.0}) {
        th.beta = beta;
        const cplx s = thermal_ip(m.model, f, f, th, m.quadrature).value;
        const cplx cf = thermal_free_closed_form(f, f, m.model.terms[0].factors[0].mass, th, m.quadrature).value;
        worst = std::max(worst, rel(s, cf));
    }
    // Fluctuation ratio grows as beta falls on the nonlinear models.
    bool monotone = true;
    std::ostringstream d;
    for (const std::string name : {"power2", "fgH"}) {
        const ModelConfig nm = model_named(c, name);
        const QuadratureConfig cfg = reduced(nm.quadrature, 17, 16);
        const Argument g = real_part(nm.function("f"));
        std::vector<double> ratios;
        for (double beta : {4.0, 2.0, 1.0, 0.5, 0.25}) {
            ThermalConfig t;
            t.beta = beta;
            const SeriesResult s = thermal_gram(nm.model, {g}, t, cfg);
            ratios.push_back(s.value(0, 0).real() / s.terms[0](0, 0).real());
        }
        for (std::size_t i = 1; i < ratios.size(); ++i)
            monotone = monotone && ratios[i] > ratios[i - 1];
        d << name << " ratios " << fmt(ratios.front()) << ".." << fmt(ratios.back()) << "; ";
    }
    return {worst <= 1e-6 && monotone,
            "coth relative difference " + fmt(worst) + "; " + d.str() + (monotone ? "monotone" : "NOT monotone")};
}

// 8 ---------------------------------------------------------------------------

Outcome zeta_equivalence(const Context& c)
{
    const ModelConfig m = model_named(c, "free_scalar");
    QuadratureConfig cfg;
    cfg.shell.nodes = 17;
    cfg.shell.half_extent = 4.5;
    cfg.shell.box_center = Eigen::Vector3d::Zero();
    WeightFunction w;
    w.amplitude = -0.8;
    const ZetaSpec spec{make_hidden_pair(w, 4, 0.5)};
    const Argument &f = m.function("f"), &g = m.function("g");
    double worst = 0.0;
    std::ostringstream d;
    for (const auto& [name, model] : {std::pair{"free", free_model()}, std::pair{"(f,g)^2", power_model(2)}}) {
        const VevResult word = vev_word(model, build_zeta(spec, f).adjoint() * build_zeta(spec, g), cfg);
        const VevResult closed = zeta_pair_closed_form(model, std::get<ZetaHiddenPair>(spec.form), f, g, cfg);
        const double r = rel(word.value, closed.value);
        worst = std::max(worst, r);
        d << name << " " << fmt(r) << "; ";
    }
    return {worst <= 1e-10, d.str() + "8-node symmetric u-grid"};
}

// 9 ---------------------------------------------------------------------------

Outcome gamma_identities(const Context&)
{
    const GammaAlgebra& G = GammaAlgebra::dirac();
    const double cl = G.clifford_residual();
    Gen gen(1009);
    double inv = 0.0;
    for (int t = 0; t < 100; ++t) {
        Vec4c a;
        for (int i = 0; i < 4; ++i)
            a(i) = cplx(gen.normal(), gen.normal());
        inv = std::max(inv, (G.conjugate(G.conjugate(a)) - a).cwiseAbs().maxCoeff());
    }
    const IdentityResiduals id = identity_suite(200, 9);
    QuadratureConfig cfg;
    const ShellRule rule = fit_rule({Argument(make_gaussian(Vec4(1.5, 0.5, 0.2, -0.3), Mat4::Identity()))}, 1.0,
                                    Vec4::Zero(), cfg.shell);
    bool psd = true;
    for (const AlphaVector a : {AlphaVector{1, 0, 0}, AlphaVector{0, 1, 0}, AlphaVector{0, 0, 1},
                                AlphaVector{0.6, 0.8, 0}, AlphaVector{0.48, 0.6, 0.64}})
        psd = psd && !vertex_psd_witness(a, rule).certified_negative;
    const VertexWitness out = vertex_psd_witness(AlphaVector{0.72, 0.96, 0.0}, rule);
    const bool ok = cl <= 1e-13 && inv <= 1e-13 && id.max() <= 1e-13 && psd && out.certified_negative;
    return {ok, "Clifford " + fmt(cl) + ", C involution " + fmt(inv) + ", vector " + fmt(id.vector) + ", scalar " +
                    fmt(id.scalar) + ", pseudoscalar " + fmt(id.pseudoscalar) + ", axial as stated " + fmt(id.axial) +
                    " (opposite sign " + fmt(id.axial_opposite) + "), PSD at |alpha|=1 " + (psd ? "yes" : "no") +
                    ", |alpha|=1.2 eigenvalue " + fmt(out.min_eigenvalue)};
}

// 10 --------------------------------------------------------------------------

bool monotone_beyond_knee(const Csv& csv)
{
    std::vector<double> v, e;
    for (const auto& r : csv.rows) {
        v.push_back(r[1]);
        e.push_back(r[2]);
    }
    const auto knee = std::max_element(v.begin(), v.end()) - v.begin();
    for (std::size_t i = knee + 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] + e[i] + e[i - 1])
            return false;
    return true;
}

Outcome resonance_reproducibility(const Context& c)
{
    const std::string out = c.work + "/c10";
    const int scan = run_cli(c, cli_args(c, "scan", "resonant_dipole", out));
    const int check = run_cli(c, cli_args(c, "check", "free_scalar", out + "/free"));
    if (scan < 0 || scan > 2 || check < 0 || check > 2)
        return {false, "CLI exit codes scan " + std::to_string(scan) + ", check " + std::to_string(check)};
    const Csv res = read_csv(out + "/resonance.csv");
    const json golden = json::parse(read_file(c.golden + "/golden_resonant_dipole.json"))["golden"]["resonance"];
    const auto& ratio = golden["ratio"];
    if (ratio.size() != res.rows.size())
        return {false, "golden and scan have different lengths"};
    double worst = 0.0;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const double gv = ratio[i].get<double>();
        worst = std::max(worst, std::abs(res.rows[i][3] - gv) / std::abs(gv));
    }
    const bool mono = monotone_beyond_knee(read_csv(out + "/cluster.csv")) &&
                      monotone_beyond_knee(read_csv(out + "/free/cluster.csv"));
    return {worst <= 0.02 && mono, "worst point-wise ratio deviation " + fmt(100.0 * worst) + "%, cluster tails " +
                                       (mono ? "monotone" : "NOT monotone") + " (scan exit " + std::to_string(scan) +
                                       ")"};
}

// 11 --------------------------------------------------------------------------

Outcome determinism(const Context& c)
{
    const std::vector<std::pair<std::string, std::string>> runs{
        {"check", "free_scalar"}, {"vev", "free_scalar"},   {"scan", "resonant_dipole"}, {"vev", "dirac_preset"},
        {"vev", "em"},            {"vev", "gauge_triplet"}, {"thermal", "thermal"},       {"oracle", "free_scalar"}};
    int compared = 0;
    std::vector<std::string> differ;
    for (const auto& [cmd, model] : runs) {
        const std::string base = c.work + "/c11/" + model + "_" + cmd;
        for (int threads : {1, 8})
            run_cli(c, cli_args(c, cmd, model, base + "/t" + std::to_string(threads),
                                "--threads " + std::to_string(threads)));
        for (const auto& e : fs::directory_iterator(base + "/t1")) {
            const std::string name = e.path().filename().string();
            if (name.find(".timing.") != std::string::npos)
                continue;
            const fs::path other = fs::path(base + "/t8") / name;
            if (!fs::exists(other) || read_file(e.path().string()) != read_file(other.string()))
                differ.push_back(model + "/" + name);
            ++compared;
        }
    }
    std::string d = std::to_string(compared) + " output files compared";
    for (const auto& x : differ)
        d += ", differs: " + x;
    return {differ.empty() && compared > 0, d};
}

}  // namespace

int main(int argc, char** argv)
{
    Context ctx;
    int only = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string k = argv[i], v = argv[i + 1];
        if (k == "--cli")
            ctx.cli = v;
        else if (k == "--configs")
            ctx.configs = v;
        else if (k == "--golden")
            ctx.golden = v;
        else if (k == "--work")
            ctx.work = v;
        else if (k == "--only")
            only = std::stoi(v);
        else {
            std::cerr << "unknown option " << k << "\n";
            return 3;
        }
    }
    if (ctx.cli.empty() || ctx.configs.empty() || ctx.golden.empty()) {
        std::cerr << "usage: acceptance --cli <nlw> --configs <dir> --golden <dir> [--work <dir>] [--only N]\n";
        return 3;
    }
    if (ctx.work.empty())
        ctx.work = (fs::temp_directory_path() / "nlw_acceptance").string();
    fs::remove_all(ctx.work);
    fs::create_directories(ctx.work);

    const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
        {"Schur/positivity suite", schur_positivity},
        {"translation invariance", translation_invariance},
        {"locality", locality},
        {"spectrum cone", spectrum_cone},
        {"permanent/Wick oracles", permanent_wick},
        {"characteristic-function identity", characteristic_identity},
        {"thermal coth", thermal_coth},
        {"zeta oracle equivalence", zeta_equivalence},
        {"gamma/conjugation identities", gamma_identities},
        {"resonance scan reproducibility", resonance_reproducibility},
        {"determinism across thread counts", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && only != static_cast<int>(i + 1))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
                  << " [" << fmt(secs) << " s]" << std::endl;
    }
    return failed ? 1 : 0;
}
