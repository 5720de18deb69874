#include "nlw/commutators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace nlw {

double Kernel::operator()(const Vec4& u) const
{
    switch (kind) {
    case KernelKind::gaussian_of_invariant: {
        const double s = minkowski_square(u);
        return amplitude * std::exp(-(s * s) / (scale * scale));
    }
    case KernelKind::window_of_invariant: {
        const double s = minkowski_square(u);
        return (s >= lower && s <= upper) ? amplitude : 0.0;
    }
    case KernelKind::frame_window:
        return amplitude * std::exp(-0.5 * u.cwiseQuotient(frame_sigma).squaredNorm());
    }
    return 0.0;
}

void Kernel::validate() const
{
    if (!std::isfinite(amplitude))
        throw DomainError("kernel amplitude must be finite");
    if (kind == KernelKind::gaussian_of_invariant && !(scale > 0.0))
        throw DomainError("gaussian_of_invariant needs a positive scale");
    if (kind == KernelKind::window_of_invariant && !(lower < upper))
        throw DomainError("window_of_invariant needs lower < upper");
    if (kind == KernelKind::frame_window && !(frame_sigma.minCoeff() > 0.0))
        throw DomainError("frame_window needs positive widths");
}

void HiddenPropagator::validate() const
{
    Kernel::validate();
    if (amplitude < 0.0)
        throw DomainError("hidden propagators must be nonnegative (amplitude < 0)");
}

HiddenPropagator gaussian_of_invariant(double scale, double amplitude)
{
    HiddenPropagator h;
    h.kind = KernelKind::gaussian_of_invariant;
    h.scale = scale;
    h.amplitude = amplitude;
    h.validate();
    return h;
}

HiddenPropagator window_of_invariant(double lower, double upper, double amplitude)
{
    HiddenPropagator h;
    h.kind = KernelKind::window_of_invariant;
    h.lower = lower;
    h.upper = upper;
    h.amplitude = amplitude;
    h.validate();
    return h;
}

HiddenPropagator frame_window(const Vec4& sigma, double amplitude)
{
    HiddenPropagator h;
    h.kind = KernelKind::frame_window;
    h.frame_sigma = sigma;
    h.amplitude = amplitude;
    h.validate();
    return h;
}

int FunctionalSpec::degree() const
{
    int d = 1;
    for (const auto& s : steps)
        if (const auto* p = std::get_if<functional::Power>(&s))
            d *= p->p;
    return d;
}

Vec4 FunctionalSpec::displacement() const
{
    Vec4 x = Vec4::Zero();
    for (const auto& s : steps)
        if (const auto* t = std::get_if<functional::PreTranslate>(&s))
            x += t->x;
    return x;
}

Vec4 FunctionalSpec::momentum_offset() const
{
    Vec4 o = Vec4::Zero();
    for (const auto& s : steps) {
        if (const auto* p = std::get_if<functional::Power>(&s)) {
            int net = 0;
            for (int i = 0; i < p->p; ++i)
                net += (!p->conj.empty() && p->conj[i]) ? -1 : 1;
            o *= net;
        } else if (const auto* m = std::get_if<functional::Modulate>(&s)) {
            o += m->u;
        }
    }
    return o;
}

namespace {

void check_power(const functional::Power& p)
{
    if (p.p < 1)
        throw DomainError("power functional needs p >= 1");
    if (!p.conj.empty() && static_cast<int>(p.conj.size()) != p.p)
        throw DomainError("power functional mixing word must have p letters");
}

}  // namespace

TestFunction apply_functional(const FunctionalSpec& s, const TestFunction& f, std::size_t max_terms)
{
    TestFunction out = f;
    for (const auto& step : s.steps) {
        if (const auto* p = std::get_if<functional::Power>(&step)) {
            check_power(*p);
            const double count = std::pow(static_cast<double>(out.size()), p->p);
            if (count > static_cast<double>(max_terms)) {
                std::ostringstream msg;
                msg << "functional would produce " << count << " Gaussian terms (limit " << max_terms << ")";
                throw DomainError(msg.str());
            }
            const TestFunction base = out;
            const TestFunction conj = star(base);
            auto copy = [&](int i) -> const TestFunction& { return (!p->conj.empty() && p->conj[i]) ? conj : base; };
            TestFunction acc = copy(0);
            for (int i = 1; i < p->p; ++i)
                acc = pointwise_multiply(acc, copy(i));
            out = acc;
        } else if (const auto* m = std::get_if<functional::Modulate>(&step)) {
            out = modulate(out, m->u);
        } else if (const auto* t = std::get_if<functional::PreTranslate>(&step)) {
            out = translate(out, t->x);
        }
    }
    return out;
}

GridFunction apply_functional(const FunctionalSpec& s, const GridFunction& f)
{
    GridFunction out = f;
    for (const auto& step : s.steps) {
        if (const auto* p = std::get_if<functional::Power>(&step)) {
            check_power(*p);
            const GridFunction base = out;
            const GridFunction conj = star(base);
            auto copy = [&](int i) -> const GridFunction& { return (!p->conj.empty() && p->conj[i]) ? conj : base; };
            GridFunction acc = copy(0);
            for (int i = 1; i < p->p; ++i)
                acc = pointwise_multiply(acc, copy(i));
            out = acc;
        } else if (const auto* m = std::get_if<functional::Modulate>(&step)) {
            // Transform f(k + u) is the real-space product with exp(-i u.x).
            const GridSpec& g = out.spec();
            std::vector<cplx> samples = out.samples();
            for (int it = 0; it < g.counts[0]; ++it)
                for (int ix = 0; ix < g.counts[1]; ++ix)
                    for (int iy = 0; iy < g.counts[2]; ++iy)
                        for (int iz = 0; iz < g.counts[3]; ++iz)
                            samples[g.index(it, ix, iy, iz)] *=
                                std::polar(1.0, -minkowski_dot(m->u, g.point(it, ix, iy, iz)));
            out = GridFunction(g, std::move(samples), out.support_center(), out.support_radius());
        } else if (const auto* t = std::get_if<functional::PreTranslate>(&step)) {
            out = translate(out, t->x);
        }
    }
    return out;
}

Argument apply_functional(const FunctionalSpec& s, const Argument& f, std::size_t max_terms)
{
    if (const auto* tf = std::get_if<TestFunction>(&f))
        return apply_functional(s, *tf, max_terms);
    return apply_functional(s, std::get<GridFunction>(f));
}

Argument star(const Argument& a)
{
    return std::visit([](const auto& f) -> Argument { return star(f); }, a);
}

Argument translate(const Argument& a, const Vec4& x)
{
    return std::visit([&x](const auto& f) -> Argument { return translate(f, x); }, a);
}

Argument scale(const Argument& a, cplx s)
{
    return std::visit([s](const auto& f) -> Argument { return scale(f, s); }, a);
}

bool CommutatorModel::column_sums_zero(double tol) const
{
    for (const auto& t : terms)
        if (t.A.size() && t.A.colwise().sum().cwiseAbs().maxCoeff() > tol * std::max(1.0, t.A.cwiseAbs().maxCoeff()))
            return false;
    return true;
}

bool CommutatorModel::hiddens_even_invariant() const
{
    for (const auto& t : terms)
        for (const auto& h : t.hidden)
            if (!h.invariant())
                return false;
    return true;
}

double CommutatorModel::min_mass() const
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : terms)
        for (const auto& f : t.factors)
            m = std::min(m, f.mass);
    return m;
}

void CommutatorModel::validate() const
{
    if (terms.empty())
        throw DomainError("commutator model has no terms");
    for (std::size_t ti = 0; ti < terms.size(); ++ti) {
        const auto& t = terms[ti];
        const std::string where = "term " + std::to_string(ti) + ": ";
        if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
            throw DomainError(where + "weights must be nonnegative (positivity)");
        if (t.factors.empty())
            throw DomainError(where + "a term needs at least one factor");
        const auto n = static_cast<Eigen::Index>(t.factors.size());
        const auto m = static_cast<Eigen::Index>(t.hidden.size());
        if (t.A.rows() != (m ? n : t.A.rows()) || t.A.cols() != m)
            throw DomainError(where + "shift matrix A must be factors x hidden");
        for (const auto& f : t.factors) {
            if (!(f.mass >= 0.0))
                throw DomainError(where + "factor masses must be nonnegative");
            if (f.derivative_coeffs.empty())
                throw DomainError(where + "derivative weight needs at least one coefficient");
            for (double c : f.derivative_coeffs)
                if (!(c >= 0.0))
                    throw DomainError(where + "derivative weight coefficients must be nonnegative");
            for (const auto& s : f.functional.steps)
                if (const auto* p = std::get_if<functional::Power>(&s))
                    check_power(*p);
        }
        for (const auto& h : t.hidden)
            h.validate();
        if (m > 0) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(t.A);
            if (lu.rank() < m)
                throw DomainError(where + "shift matrix A must have full column rank; a null direction leaves the "
                                          "hidden integral unbounded");
            if (spectrum_guard && t.A.colwise().sum().cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, t.A.cwiseAbs().maxCoeff()))
                throw DomainError(where + "column sums of A must vanish for the spectrum condition "
                                          "(disable the spectrum guard to allow)");
        }
    }
}

CommutatorModel free_model(double mass)
{
    CommutatorModel m;
    m.name = "free";
    CommutatorTerm t;
    t.factors.push_back(FactorSpec{mass, {1.0}, {}});
    t.A.resize(1, 0);
    m.terms.push_back(t);
    return m;
}

CommutatorModel power_model(int power, double mass)
{
    if (power < 1)
        throw DomainError("power model needs power >= 1");
    CommutatorModel m;
    m.name = "power" + std::to_string(power);
    CommutatorTerm t;
    t.factors.assign(power, FactorSpec{mass, {1.0}, {}});
    t.A.resize(power, 0);
    m.terms.push_back(t);
    return m;
}

CommutatorModel hidden_pair_model(const HiddenPropagator& h, double lambda, double mass,
                                  std::vector<double> derivative_coeffs)
{
    CommutatorModel m;
    m.name = "hidden_pair";
    CommutatorTerm t;
    t.factors.assign(2, FactorSpec{mass, derivative_coeffs, {}});
    t.hidden.push_back(h);
    t.A.resize(2, 1);
    t.A << 1.0, lambda;
    m.terms.push_back(t);
    m.spectrum_guard = lambda == -1.0;
    return m;
}

ChannelSpec plain_channel()
{
    ChannelSpec c;
    c.multipliers.push_back([](const MultiplierInput& in, Eigen::VectorXd& out) {
        out.setOnes(in.k.cols());
        return 0.0;
    });
    c.channels = [](int n) { return std::vector<std::vector<std::vector<int>>>{{std::vector<int>(n, 0)}}; };
    c.count = 1;
    return c;
}

Eigen::MatrixXd GramResult::error() const
{
    return (shell_error.array().square() + stat_error.array().square()).sqrt().matrix();
}

unsigned GramResult::all_flags() const
{
    unsigned f = 0;
    for (Eigen::Index i = 0; i < flags.size(); ++i)
        f |= static_cast<unsigned>(flags(i));
    return f;
}

IntegralResult GramResult::entry(Eigen::Index a, Eigen::Index b) const
{
    IntegralResult r;
    r.value = value(a, b);
    r.error_estimate = std::hypot(shell_error(a, b), stat_error(a, b));
    r.node_count = node_count;
    r.flags = static_cast<unsigned>(flags(a, b));
    return r;
}

namespace {

using Monomials = std::vector<std::vector<int>>;

struct Accum {
    std::vector<Eigen::MatrixXcd> value;
    std::vector<Eigen::MatrixXd> error;
    unsigned flags = 0;
    long nodes = 0;

    Accum(int channels, Eigen::Index r)
        : value(channels, Eigen::MatrixXcd::Zero(r, r)), error(channels, Eigen::MatrixXd::Zero(r, r))
    {
    }

    void add(const Accum& o, double w)
    {
        for (std::size_t c = 0; c < value.size(); ++c) {
            value[c] += w * o.value[c];
            error[c] += std::abs(w) * o.error[c];
        }
        flags |= o.flags;
        nodes += o.nodes;
    }
};

struct TermPlan {
    const CommutatorTerm* term = nullptr;
    std::vector<std::vector<Argument>> args;   // per factor, functional applied
    std::vector<int> degree;
    std::vector<Vec4> offset;
    std::vector<std::optional<ShellRule>> fixed;
    std::vector<Monomials> channels;
    std::vector<std::vector<int>> used;        // multiplier indices needed per factor
};

double k_sigma(const Argument& a)
{
    if (const auto* tf = std::get_if<TestFunction>(&a))
        return tf->max_k_sigma();
    const auto& g = std::get<GridFunction>(a);
    const double r = g.compact() ? g.support_radius() : g.spec().spacing.maxCoeff() * g.spec().counts[1] / 2.0;
    return 2.5 / r;
}

// Envelope width of the hidden variables: the factor product is concentrated
// where every shifted argument meets its mass shell.
double envelope_sigma(const TermPlan& plan, const HiddenConfig& cfg)
{
    double sk = 0.0, reach = 0.0;
    for (std::size_t i = 0; i < plan.args.size(); ++i) {
        const double m = plan.term->factors[i].mass;
        for (const auto& a : plan.args[i]) {
            sk = std::max(sk, k_sigma(a));
            if (const auto* tf = std::get_if<TestFunction>(&a))
                for (const auto& t : tf->terms())
                    reach = std::max(reach, std::sqrt(std::max(0.0, minkowski_square(t.center) - m * m)));
        }
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(plan.term->A);
    const double smin = svd.singularValues().minCoeff();
    return cfg.envelope_scale * (sk + reach) / std::max(smin, 1e-3);
}

Accum eval_point(const TermPlan& plan, const Eigen::VectorXd& u, const QuadratureConfig& cfg,
                 const ChannelSpec& spec, Eigen::Index r)
{
    const CommutatorTerm& t = *plan.term;
    const int n = static_cast<int>(t.factors.size());
    const int m = static_cast<int>(t.hidden.size());
    Accum acc(spec.count, r);

    std::vector<std::vector<Eigen::MatrixXcd>> fine(n);
    std::vector<std::vector<Eigen::MatrixXd>> err(n);
    std::vector<std::vector<double>> logs(n);
    for (int i = 0; i < n; ++i) {
        Vec4 v = Vec4::Zero();
        for (int j = 0; j < m; ++j)
            v += t.A(i, j) * u.segment<4>(4 * j);
        const ShellRule rule = plan.fixed[i] ? *plan.fixed[i] : fit_rule(plan.args[i], t.factors[i].mass, v, cfg.shell);
        Eigen::MatrixXcd X(rule.size(), r);
        for (Eigen::Index a = 0; a < r; ++a)
            X.col(a) = sample(plan.args[i][a], rule, v);
        const Nodes4 k = rule.k.colwise() + v;

        Eigen::VectorXd d = Eigen::VectorXd::Constant(rule.size(), t.factors[i].derivative_coeffs[0]);
        if (t.factors[i].derivative_coeffs.size() > 1) {
            const Eigen::VectorXd kv = (metric() * v).transpose() * k;
            const Eigen::VectorXd kv2 = kv.cwiseProduct(kv);
            Eigen::VectorXd pw = kv2;
            for (std::size_t j = 1; j < t.factors[i].derivative_coeffs.size(); ++j) {
                d += t.factors[i].derivative_coeffs[j] * pw;
                pw = pw.cwiseProduct(kv2);
            }
        }

        const auto& used = plan.used[i];
        Eigen::MatrixXd D(rule.size(), static_cast<Eigen::Index>(used.size()));
        logs[i].assign(spec.multipliers.size(), 0.0);
        Eigen::VectorXd mult;
        for (std::size_t c = 0; c < used.size(); ++c) {
            logs[i][used[c]] = spec.multipliers[used[c]](MultiplierInput{k, v, plan.offset[i], plan.degree[i]}, mult);
            D.col(static_cast<Eigen::Index>(c)) = d.cwiseProduct(mult);
        }
        GramSums sums = shell_gram_batch(rule, X, D);
        acc.flags |= sums.flags;
        acc.nodes += rule.size();
        fine[i].resize(spec.multipliers.size());
        err[i].resize(spec.multipliers.size());
        for (std::size_t c = 0; c < used.size(); ++c) {
            fine[i][used[c]] = std::move(sums.fine[c]);
            err[i][used[c]] = std::move(sums.error[c]);
        }
    }

    for (int ch = 0; ch < spec.count; ++ch) {
        for (const auto& mono : plan.channels[ch]) {
            double ls = 0.0;
            for (int i = 0; i < n; ++i)
                ls += logs[i][mono[i]];
            const double s = std::exp(ls);
            Eigen::MatrixXcd prod = Eigen::MatrixXcd::Ones(r, r);
            for (int i = 0; i < n; ++i)
                prod = prod.cwiseProduct(fine[i][mono[i]]);
            acc.value[ch] += s * prod;
            for (int i = 0; i < n; ++i) {
                Eigen::MatrixXd e = err[i][mono[i]];
                for (int l = 0; l < n; ++l)
                    if (l != i)
                        e = e.cwiseProduct(fine[l][mono[l]].cwiseAbs());
                acc.error[ch] += s * e;
            }
        }
    }
    return acc;
}

TermPlan make_plan(const CommutatorTerm& t, const std::vector<Argument>& args, const QuadratureConfig& cfg,
                   const ChannelSpec& spec)
{
    TermPlan p;
    p.term = &t;
    const int n = static_cast<int>(t.factors.size());
    p.args.resize(n);
    p.fixed.resize(n);
    p.used.resize(n);
    for (int i = 0; i < n; ++i) {
        for (const auto& a : args)
            p.args[i].push_back(apply_functional(t.factors[i].functional, a));
        p.degree.push_back(t.factors[i].functional.degree());
        p.offset.push_back(t.factors[i].functional.momentum_offset());
        bool grid = false;
        for (const auto& a : p.args[i])
            grid = grid || std::holds_alternative<GridFunction>(a);
        if (grid)
            p.fixed[i] = fit_rule(p.args[i], t.factors[i].mass, Vec4::Zero(), cfg.shell);
    }
    const auto channels = spec.channels(n);
    if (static_cast<int>(channels.size()) != spec.count)
        throw DomainError("channel specification does not match its count");
    p.channels = channels;
    for (const auto& ch : channels)
        for (const auto& mono : ch) {
            if (static_cast<int>(mono.size()) != n)
                throw DomainError("channel monomial length must equal the factor count");
            for (int i = 0; i < n; ++i)
                if (std::find(p.used[i].begin(), p.used[i].end(), mono[i]) == p.used[i].end())
                    p.used[i].push_back(mono[i]);
        }
    for (auto& u : p.used)
        std::sort(u.begin(), u.end());
    return p;
}

HiddenRule plan_hidden_rule(const TermPlan& plan, const QuadratureConfig& cfg)
{
    std::vector<HiddenDensity> dens;
    for (const auto& h : plan.term->hidden)
        dens.push_back([h](const Vec4& u) { return h(u); });
    const double sig = envelope_sigma(plan, cfg.hidden);
    return HiddenRule(dens, std::vector<double>(dens.size(), sig), cfg.hidden);
}

}  // namespace

HiddenRule term_hidden_rule(const CommutatorModel& model, std::size_t term, const std::vector<Argument>& args,
                            const QuadratureConfig& cfg)
{
    model.validate();
    if (term >= model.terms.size() || model.terms[term].hidden.empty())
        throw DomainError("term has no hidden variables");
    return plan_hidden_rule(make_plan(model.terms[term], args, cfg, plain_channel()), cfg);
}

std::vector<GramResult> gram_channels(const CommutatorModel& model, const std::vector<Argument>& args,
                                      const QuadratureConfig& cfg, const ChannelSpec& spec)
{
    model.validate();
    if (args.empty())
        throw DomainError("gram needs at least one argument");
    const auto r = static_cast<Eigen::Index>(args.size());
    const int C = spec.count;
    const int R = cfg.hidden.error_mode == ErrorMode::grid_doubling ? 1 : cfg.hidden.replicas;

    Accum fixed(C, r);                          // deterministic part and shell errors
    std::vector<Accum> replica(R, Accum(C, r)); // hidden parts per replica
    std::vector<Accum> half(R, Accum(C, r));    // first half of each replica
    bool any_hidden = false;

    for (const auto& term : model.terms) {
        const TermPlan plan = make_plan(term, args, cfg, spec);
        const int m = static_cast<int>(term.hidden.size());
        if (m == 0) {
            fixed.add(eval_point(plan, Eigen::VectorXd(), cfg, spec, r), term.weight);
            continue;
        }
        any_hidden = true;
        const HiddenRule rule = plan_hidden_rule(plan, cfg);
        const int P = rule.points_per_replica();
        const int S = std::min(4, P);
        std::vector<Accum> chunk(static_cast<std::size_t>(R) * S, Accum(C, r));
        parallel_for(R * S, cfg.threads, [&](int id) {
            const int rep = id / S, s = id % S;
            const int q0 = s * P / S, q1 = (s + 1) * P / S;
            Accum& a = chunk[id];
            for (int q = q0; q < q1; ++q) {
                const HiddenSample hs = rule.sample(rep, q);
                if (hs.w_plus != 0.0)
                    a.add(eval_point(plan, hs.u, cfg, spec, r), 0.5 * hs.w_plus);
                if (hs.w_minus != 0.0)
                    a.add(eval_point(plan, -hs.u, cfg, spec, r), 0.5 * hs.w_minus);
            }
        });
        for (int rep = 0; rep < R; ++rep) {
            Accum tot(C, r), first(C, r);
            for (int s = 0; s < S; ++s) {
                tot.add(chunk[rep * S + s], 1.0);
                if ((s + 1) * P / S <= P / 2)
                    first.add(chunk[rep * S + s], 1.0);
            }
            replica[rep].add(tot, term.weight / P);
            const int firstn = (S / 2) * P / S;
            if (firstn > 0)
                half[rep].add(first, term.weight / firstn);
        }
    }

    std::vector<GramResult> out(C);
    for (int c = 0; c < C; ++c) {
        GramResult& g = out[c];
        g.value = fixed.value[c];
        g.shell_error = fixed.error[c];
        g.stat_error = Eigen::MatrixXd::Zero(r, r);
        unsigned flags = fixed.flags;
        long nodes = fixed.nodes;
        if (any_hidden) {
            Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(r, r);
            Eigen::MatrixXd serr = Eigen::MatrixXd::Zero(r, r);
            for (int rep = 0; rep < R; ++rep) {
                mean += replica[rep].value[c];
                serr += replica[rep].error[c];
                flags |= replica[rep].flags;
                nodes += replica[rep].nodes;
            }
            mean /= static_cast<double>(R);
            serr /= static_cast<double>(R);
            if (R > 1) {
                Eigen::MatrixXd var = Eigen::MatrixXd::Zero(r, r);
                for (int rep = 0; rep < R; ++rep)
                    var += (replica[rep].value[c] - mean).cwiseAbs2();
                g.stat_error = (var / static_cast<double>((R - 1) * R)).cwiseSqrt();
            } else {
                g.stat_error = (replica[0].value[c] - half[0].value[c]).cwiseAbs();
            }
            g.value += mean;
            g.shell_error += serr;
        }
        g.node_count = nodes;
        g.flags = Eigen::MatrixXi::Constant(r, r, static_cast<int>(flags & ~kUnconverged));
        for (Eigen::Index a = 0; a < r; ++a)
            for (Eigen::Index b = 0; b < r; ++b) {
                const double ref = std::max(std::abs(g.value(a, b)),
                                            std::sqrt(std::abs(g.value(a, a)) * std::abs(g.value(b, b))));
                if (g.stat_error(a, b) > cfg.hidden.rel_tol * ref)
                    g.flags(a, b) |= kUnconverged;
            }
    }
    return out;
}

GramResult gram(const CommutatorModel& model, const std::vector<Argument>& args, const QuadratureConfig& cfg)
{
    return gram_channels(model, args, cfg, plain_channel()).front();
}

IntegralResult eval_commutator(const CommutatorModel& model, const Argument& f, const Argument& g,
                               const QuadratureConfig& cfg)
{
    return gram(model, {f, g}, cfg).entry(0, 1);
}

IntegralResult base_ip(const Argument& f, const Argument& g, double mass, const QuadratureConfig& cfg)
{
    return shifted_ip(f, g, mass, Vec4::Zero(), cfg);
}

ChargedDoublet ChargedDoublet::conjugate() const { return ChargedDoublet{star(f2), star(f1)}; }

bool same_representation(const Argument& a, const Argument& b, double tol)
{
    if (a.index() != b.index())
        return false;
    if (const auto* ta = std::get_if<TestFunction>(&a)) {
        const auto& tb = std::get<TestFunction>(b);
        if (ta->size() != tb.size())
            return false;
        for (std::size_t i = 0; i < ta->size(); ++i) {
            const auto &x = ta->terms()[i], &y = tb.terms()[i];
            if (std::abs(x.coeff - y.coeff) > tol || (x.center - y.center).norm() > tol ||
                (x.width - y.width).norm() > tol || (x.translation - y.translation).norm() > tol)
                return false;
        }
        return true;
    }
    const auto& ga = std::get<GridFunction>(a);
    const auto& gb = std::get<GridFunction>(b);
    if (!ga.spec().same_geometry(gb.spec()) || (ga.spec().origin - gb.spec().origin).norm() > tol)
        return false;
    for (std::size_t i = 0; i < ga.samples().size(); ++i)
        if (std::abs(ga.samples()[i] - gb.samples()[i]) > tol)
            return false;
    return true;
}

namespace {

IntegralResult sum(const IntegralResult& a, const IntegralResult& b, double sign)
{
    IntegralResult r;
    r.value = a.value + sign * b.value;
    r.error_estimate = a.error_estimate + b.error_estimate;
    r.node_count = a.node_count + b.node_count;
    r.flags = a.flags | b.flags;
    return r;
}

}  // namespace

bool ChargedDoublet::observable(double tol) const { return same_representation(f2, star(f1), tol); }

IntegralResult charged_ip(const ChargedDoublet& F, const ChargedDoublet& G, double mass, const QuadratureConfig& cfg)
{
    return sum(base_ip(F.f1, G.f1, mass, cfg), base_ip(F.f2, G.f2, mass, cfg), 1.0);
}

IntegralResult charged_commutator(const ChargedDoublet& F, const ChargedDoublet& G, double mass,
                                  const QuadratureConfig& cfg)
{
    return sum(charged_ip(F.conjugate(), G, mass, cfg), charged_ip(G.conjugate(), F, mass, cfg), -1.0);
}

}  // namespace nlw
