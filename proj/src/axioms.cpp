#include "nlw/axioms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace nlw {

std::string verdict_name(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::unconverged: return "unconverged";
    case Verdict::rejected: return "rejected";
    }
    return "unknown";
}

bool AxiomReport::all_pass() const
{
    return std::all_of(entries.begin(), entries.end(), [](const AxiomEntry& e) { return e.verdict == Verdict::pass; });
}

bool AxiomReport::any_unconverged() const
{
    return std::any_of(entries.begin(), entries.end(),
                       [](const AxiomEntry& e) { return e.verdict == Verdict::unconverged; });
}

int AxiomReport::exit_code() const
{
    for (const auto& e : entries)
        if (e.verdict == Verdict::fail)
            return 1;
    return any_unconverged() ? 2 : 0;
}

std::string digest_bytes(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

template <typename T>
void put(std::string& s, const T& x)
{
    const char* p = reinterpret_cast<const char*>(&x);
    s.append(p, sizeof x);
}

}  // namespace

std::string digest(const Argument& f)
{
    std::string s;
    if (const auto* tf = std::get_if<TestFunction>(&f)) {
        s.push_back('G');
        for (const auto& t : tf->terms()) {
            put(s, t.coeff);
            for (int i = 0; i < 4; ++i)
                put(s, t.center(i));
            for (int i = 0; i < 16; ++i)
                put(s, t.width.data()[i]);
            for (int i = 0; i < 4; ++i)
                put(s, t.translation(i));
        }
    } else {
        const auto& g = std::get<GridFunction>(f);
        s.push_back('B');
        for (int i = 0; i < 4; ++i) {
            put(s, g.spec().origin(i));
            put(s, g.spec().spacing(i));
            put(s, g.spec().counts[i]);
            put(s, g.support_center()(i));
        }
        put(s, g.support_radius());
        s.append(reinterpret_cast<const char*>(g.samples().data()), g.samples().size() * sizeof(cplx));
    }
    return digest_bytes(s);
}

namespace {

AxiomEntry make_entry(std::string name, double residual, double nominal, double budget, bool unconverged,
                      std::vector<std::string> witnesses)
{
    AxiomEntry e;
    e.name = std::move(name);
    e.residual = residual;
    e.error_budget = budget;
    e.tolerance = std::max(nominal, budget);
    e.witnesses = std::move(witnesses);
    if (unconverged)
        e.verdict = Verdict::unconverged;
    else
        e.verdict = residual <= e.tolerance ? Verdict::pass : Verdict::fail;
    return e;
}

std::vector<std::string> digests(const std::vector<Argument>& fs)
{
    std::vector<std::string> d;
    for (const auto& f : fs)
        d.push_back(digest(f));
    return d;
}

double cs_scale(const GramResult& G, Eigen::Index a, Eigen::Index b)
{
    return std::sqrt(std::abs(G.value(a, a)) * std::abs(G.value(b, b)));
}

AxiomEntry rejected(std::string name, std::string why, std::vector<std::string> witnesses)
{
    AxiomEntry e;
    e.name = std::move(name);
    e.verdict = Verdict::rejected;
    e.note = std::move(why);
    e.witnesses = std::move(witnesses);
    return e;
}

bool moves_support(const CommutatorModel& model)
{
    for (const auto& t : model.terms)
        for (const auto& f : t.factors)
            if (f.functional.moves_support())
                return true;
    return false;
}

}  // namespace

AxiomEntry check_positivity(const CommutatorModel& model, const std::vector<Argument>& fs, const QuadratureConfig& cfg,
                            const Tolerances& tol)
{
    if (fs.size() < 2 || fs.size() > 8)
        throw DomainError("positivity check takes 2 to 8 test functions");
    const GramResult G = gram(model, fs, cfg);
    const Eigen::MatrixXcd H = 0.5 * (G.value + G.value.adjoint());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    const double scale = norm > 0.0 ? norm : 1.0;
    // Weyl: eigenvalues move by at most the Frobenius norm of the entry errors.
    const double budget = G.error().norm() / scale;
    AxiomEntry e = make_entry("Pos", std::max(0.0, -lmin / scale), tol.positivity, budget,
                              G.all_flags() & kUnconverged, digests(fs));
    std::ostringstream n;
    n << "lambda_min=" << lmin << " lambda_max=" << es.eigenvalues().maxCoeff();
    e.note = n.str();
    return e;
}

AxiomEntry check_hermiticity(const CommutatorModel& model, const Argument& f, const Argument& g,
                             const QuadratureConfig& cfg, const Tolerances& tol)
{
    const GramResult G = gram(model, {f, g}, cfg);
    const double scale = std::max(cs_scale(G, 0, 1), 1e-300);
    const double residual = std::abs(std::conj(G.value(0, 1)) - G.value(1, 0)) / scale;
    const double budget = (G.error()(0, 1) + G.error()(1, 0)) / scale;
    return make_entry("H", residual, tol.hermiticity, budget, G.all_flags() & kUnconverged, digests({f, g}));
}

namespace {

AxiomEntry locality_entry(const CommutatorModel& model, const Argument& f, const Argument& g,
                          const QuadratureConfig& cfg, const Tolerances& tol, double extra)
{
    // Joint context {f*, g*, f, g}: <<f*, g>> = (0, 3), <<g*, f>> = (1, 2).
    const GramResult G = gram(model, {star(f), star(g), f, g}, cfg);
    const cplx a = G.value(0, 3), b = G.value(1, 2);
    const double floor = 1e-12 * std::max(cs_scale(G, 0, 3), cs_scale(G, 1, 2));
    const double scale = std::max({std::abs(a), floor, 1e-300});
    const double budget = (G.error()(0, 3) + G.error()(1, 2)) / scale;
    AxiomEntry e = make_entry("Loc", std::abs(a - b) / scale, 0.0, 0.0, G.all_flags() & kUnconverged,
                              digests({f, g}));
    e.error_budget = budget;
    e.tolerance = tol.error_factor * budget + extra / scale;
    if (e.verdict != Verdict::unconverged)
        e.verdict = e.residual <= e.tolerance ? Verdict::pass : Verdict::fail;
    return e;
}

}  // namespace

AxiomEntry check_locality(const CommutatorModel& model, const GridFunction& f, const GridFunction& g,
                          const QuadratureConfig& cfg, const Tolerances& tol)
{
    const std::vector<std::string> w = digests({f, g});
    if (moves_support(model))
        return rejected("Loc", "pre_translate functionals are barred from certified locality checks", w);
    if (!f.compact() || !g.compact())
        return rejected("Loc", "certified locality needs compact supports", w);
    const GridFunction fs = star(f), gs = star(g);
    const Lattice lat = fit_lattice({&fs, &gs, &f, &g}, cfg.shell.lattice_pad);
    if (!certified_spacelike(f, g, lat))
        return rejected("Loc", "supports are not certified space-like separated", w);
    AxiomEntry e = locality_entry(model, f, g, cfg, tol, 0.0);
    e.mode = "certified";
    return e;
}

AxiomEntry check_locality(const CommutatorModel& model, const TestFunction& f, const TestFunction& g, double eps,
                          const QuadratureConfig& cfg, const Tolerances& tol)
{
    const std::vector<std::string> w = digests({f, g});
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("effective-support fraction eps must lie in (0, 1)");
    if (moves_support(model))
        return rejected("Loc", "pre_translate functionals are barred from locality checks", w);
    for (const auto& ef : effective_support(f, eps))
        for (const auto& eg : effective_support(g, eps)) {
            const Vec4 d = eg.center - ef.center;
            if (!(d.tail<3>().norm() - std::abs(d(0)) > std::sqrt(2.0) * (ef.bounding_radius() + eg.bounding_radius())))
                return rejected("Loc", "effective supports are not space-like separated", w);
        }
    // Mass outside the ellipsoids has L2 norm at most sqrt(eps) per function.
    const GramResult N = gram(model, {f, g}, cfg);
    const double extra = 2.0 * std::sqrt(eps) * cs_scale(N, 0, 1);
    AxiomEntry e = locality_entry(model, f, g, cfg, tol, extra);
    e.mode = "approximate, tail-bounded";
    std::ostringstream n;
    n << "eps=" << eps << " overlap_allowance=" << extra;
    e.note = n.str();
    return e;
}

AxiomEntry check_spectrum(const CommutatorModel& model, const std::vector<Argument>& gs, const QuadratureConfig& cfg,
                          const Tolerances& tol, std::vector<MomentumResult>* momenta)
{
    if (gs.empty())
        throw DomainError("spectrum check needs at least one test function");
    double residual = 0.0, budget = 0.0;
    bool unconverged = false;
    for (const auto& g : gs) {
        const MomentumResult p = momentum_expectation(model, g, cfg);
        if (momenta)
            momenta->push_back(p);
        const double s = std::abs(p.p(0)) + p.p.tail<3>().norm();
        const double r = std::max(0.0, -p.cone_margin()) / std::max(s, 1e-300);
        const double b = (p.error(0) + p.error.tail<3>().norm()) / std::max(s, 1e-300);
        if (r > residual || (r == residual && b > budget)) {
            residual = r;
            budget = b;
        }
        budget = std::max(budget, b);
        unconverged = unconverged || (p.flags & kUnconverged);
    }
    AxiomEntry e = make_entry("Sp", residual, tol.cone, tol.error_factor * budget, unconverged, digests(gs));
    e.error_budget = budget;
    return e;
}

std::string ClusterCurve::csv() const
{
    std::ostringstream o;
    o.precision(17);
    o << "distance,abs_value,error\n";
    for (std::size_t i = 0; i < distance.size(); ++i)
        o << distance[i] << ',' << value[i] << ',' << error[i] << '\n';
    return o.str();
}

AxiomEntry check_cluster(const CommutatorModel& model, const Argument& f, const Argument& g, const Vec4& direction,
                         const std::vector<double>& distances, const QuadratureConfig& cfg, const Tolerances& tol,
                         ClusterCurve* out)
{
    if (!(minkowski_square(direction) < 0.0))
        throw DomainError("cluster direction must be space-like");
    if (distances.size() < 2)
        throw DomainError("cluster check needs at least two distances");
    std::vector<Argument> args;
    for (double d : distances)
        args.push_back(translate(f, d * direction));
    args.push_back(g);
    const GramResult G = gram(model, args, cfg);
    const auto last = static_cast<Eigen::Index>(distances.size());
    ClusterCurve c;
    c.distance = distances;
    for (Eigen::Index i = 0; i < last; ++i) {
        c.value.push_back(std::abs(G.value(i, last)));
        c.error.push_back(G.error()(i, last));
        c.flags.push_back(static_cast<unsigned>(G.flags(i, last)));
    }
    c.knee = static_cast<int>(std::max_element(c.value.begin(), c.value.end()) - c.value.begin());
    bool monotone = true;
    for (std::size_t i = c.knee + 1; i < c.value.size(); ++i)
        if (c.value[i] > c.value[i - 1] + c.error[i] + c.error[i - 1])
            monotone = false;
    const double initial = c.value.front(), final = c.value.back();
    const double residual = initial > 0.0 ? final / initial : (final > 0.0 ? 1.0 : 0.0);
    const double budget = initial > 0.0 ? c.error.back() / initial : 0.0;
    bool unconverged = false;
    for (unsigned fl : c.flags)
        unconverged = unconverged || (fl & kUnconverged);
    AxiomEntry e = make_entry("CD", residual, tol.cluster, budget, unconverged, digests({f, g}));
    if (!monotone && e.verdict == Verdict::pass)
        e.verdict = Verdict::fail;
    std::ostringstream n;
    n << "knee=" << c.knee << " monotone_tail=" << (monotone ? "true" : "false");
    e.note = n.str();
    if (out)
        *out = std::move(c);
    return e;
}

AxiomEntry check_translation(const CommutatorModel& model, const Argument& f, const Argument& g, const Vec4& x,
                             const QuadratureConfig& cfg, const Tolerances& tol)
{
    const IntegralResult a = eval_commutator(model, f, g, cfg);
    const IntegralResult b = eval_commutator(model, translate(f, x), translate(g, x), cfg);
    const double scale = std::max(std::abs(a.value), 1e-300);
    AxiomEntry e = make_entry("PI", std::abs(a.value - b.value) / scale, tol.translation, 0.0,
                              (a.flags | b.flags) & kUnconverged, digests({f, g}));
    e.error_budget = (a.error_estimate + b.error_estimate) / scale;
    e.mode = "exact node phases";
    return e;
}

AxiomEntry check_boost(const CommutatorModel& model, const TestFunction& f, const TestFunction& g, const Mat4& L,
                       const QuadratureConfig& cfg, const Tolerances& tol)
{
    const std::vector<std::string> w = digests({f, g});
    if (!model.hiddens_even_invariant())
        return rejected("Lorentz", "frame_window hiddens are not invariant; boost check refused", w);
    if (!is_lorentz(L) || L(0, 0) < 1.0 || L.determinant() < 0.0)
        throw DomainError("boost check needs a proper orthochronous Lorentz matrix");
    const TestFunction bf = boost(f, L), bg = boost(g, L);
    const IntegralResult a = eval_commutator(model, f, g, cfg);
    const IntegralResult b = eval_commutator(model, bf, bg, cfg);
    const double scale = std::max(std::abs(a.value), 1e-300);
    double cutoff = 0.0;
    bool hidden = false;
    for (const auto& t : model.terms)
        hidden = hidden || !t.hidden.empty();
    if (hidden) {
        QuadratureConfig wide = cfg;
        wide.hidden.cutoff *= 1.5;
        const IntegralResult a2 = eval_commutator(model, f, g, wide);
        const IntegralResult b2 = eval_commutator(model, bf, bg, wide);
        cutoff = (std::abs(a2.value - a.value) + std::abs(b2.value - b.value)) / scale;
    }
    const double budget = (a.error_estimate + b.error_estimate) / scale;
    AxiomEntry e = make_entry("Lorentz", std::abs(a.value - b.value) / scale, 0.0,
                              tol.error_factor * budget + cutoff, (a.flags | b.flags) & kUnconverged, w);
    e.error_budget = budget;
    e.cutoff_sensitivity = cutoff;
    e.mode = "approximate (hidden cutoff breaks invariance)";
    return e;
}

}  // namespace nlw
