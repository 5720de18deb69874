#include "nlw/fock.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace nlw {

cplx permanent(const Eigen::MatrixXcd& M)
{
    const Eigen::Index n = M.rows();
    if (M.cols() != n)
        throw DomainError("permanent needs a square matrix");
    if (n > kMaxPermanentSize)
        throw DomainError("permanent of a " + std::to_string(n) + "x" + std::to_string(n) +
                          " matrix refused: Ryser's formula costs 2^n n operations (limit n = " +
                          std::to_string(kMaxPermanentSize) + ")");
    if (n == 0)
        return 1.0;
    // Gray-code enumeration of column subsets; row sums updated one column at a time.
    Eigen::VectorXcd rowsum = Eigen::VectorXcd::Zero(n);
    cplx total = 0.0;
    const std::uint64_t count = std::uint64_t{1} << n;
    std::uint64_t gray = 0;
    for (std::uint64_t i = 1; i < count; ++i) {
        const int j = std::countr_zero(i);
        const std::uint64_t bit = std::uint64_t{1} << j;
        const bool add = !(gray & bit);
        gray ^= bit;
        if (add)
            rowsum += M.col(j);
        else
            rowsum -= M.col(j);
        cplx prod = 1.0;
        for (Eigen::Index r = 0; r < n; ++r)
            prod *= rowsum(r);
        const int size = std::popcount(gray);
        total += ((n - size) % 2 == 0) ? prod : -prod;
    }
    return total;
}

VevResult permanent_with_error(const Eigen::MatrixXcd& M, const Eigen::MatrixXd& E)
{
    VevResult r;
    r.value = permanent(M);
    const Eigen::MatrixXd A = M.cwiseAbs();
    r.error = std::max(0.0, permanent((A + E).cast<cplx>()).real() - permanent(A.cast<cplx>()).real());
    return r;
}

VevResult vev_ladder(const CommutatorModel& model, const std::vector<Argument>& fs, const std::vector<Argument>& gs,
                     const QuadratureConfig& cfg)
{
    VevResult r;
    if (fs.size() != gs.size())
        return r;
    if (fs.empty()) {
        r.value = 1.0;
        return r;
    }
    std::vector<Argument> all = fs;
    all.insert(all.end(), gs.begin(), gs.end());
    const GramResult G = gram(model, all, cfg);
    const auto n = static_cast<Eigen::Index>(fs.size());
    r = permanent_with_error(G.value.block(0, n, n, n), G.error().block(0, n, n, n));
    r.flags = G.all_flags();
    r.node_count = G.node_count;
    return r;
}

int Monomial::letter_count() const
{
    int n = 0;
    for (const auto& g : groups)
        n += static_cast<int>(g.letters.size());
    return n;
}

int OperatorExpr::add_function(const Argument& f)
{
    functions.push_back(f);
    return static_cast<int>(functions.size()) - 1;
}

int OperatorExpr::max_letters() const
{
    int n = 0;
    for (const auto& t : terms)
        n = std::max(n, t.letter_count());
    return n;
}

OperatorExpr OperatorExpr::adjoint() const
{
    OperatorExpr out;
    out.functions = functions;
    std::vector<int> starred(functions.size(), -1);
    for (const auto& t : terms) {
        Monomial m;
        m.coeff = std::conj(t.coeff);
        for (auto g = t.groups.rbegin(); g != t.groups.rend(); ++g) {
            Group h;
            h.normal_ordered = g->normal_ordered;
            for (auto l = g->letters.rbegin(); l != g->letters.rend(); ++l) {
                Letter x = *l;
                if (x.kind == LetterKind::annihilate) {
                    x.kind = LetterKind::create;
                } else if (x.kind == LetterKind::create) {
                    x.kind = LetterKind::annihilate;
                } else {
                    if (starred[x.fn] < 0)
                        starred[x.fn] = out.add_function(star(functions[x.fn]));
                    x.fn = starred[x.fn];
                }
                h.letters.push_back(x);
            }
            m.groups.push_back(std::move(h));
        }
        out.terms.push_back(std::move(m));
    }
    return out;
}

OperatorExpr constant(cplx c)
{
    OperatorExpr e;
    e.terms.push_back(Monomial{c, {}});
    return e;
}

namespace {

OperatorExpr single(LetterKind kind, const Argument& f)
{
    OperatorExpr e;
    e.add_function(f);
    e.terms.push_back(Monomial{1.0, {Group{false, {Letter{kind, 0}}}}});
    return e;
}

void shift_functions(Monomial& m, int offset)
{
    for (auto& g : m.groups)
        for (auto& l : g.letters)
            l.fn += offset;
}

}  // namespace

OperatorExpr annihilate(const Argument& f) { return single(LetterKind::annihilate, f); }
OperatorExpr create(const Argument& f) { return single(LetterKind::create, f); }
OperatorExpr xi(const Argument& f) { return single(LetterKind::xi, f); }

OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b)
{
    OperatorExpr out;
    out.functions = a.functions;
    out.functions.insert(out.functions.end(), b.functions.begin(), b.functions.end());
    const int offset = static_cast<int>(a.functions.size());
    for (const auto& x : a.terms)
        for (Monomial y : b.terms) {
            shift_functions(y, offset);
            Monomial m;
            m.coeff = x.coeff * y.coeff;
            m.groups = x.groups;
            m.groups.insert(m.groups.end(), y.groups.begin(), y.groups.end());
            out.terms.push_back(std::move(m));
        }
    return out;
}

OperatorExpr operator+(const OperatorExpr& a, const OperatorExpr& b)
{
    OperatorExpr out = a;
    out.functions.insert(out.functions.end(), b.functions.begin(), b.functions.end());
    const int offset = static_cast<int>(a.functions.size());
    for (Monomial y : b.terms) {
        shift_functions(y, offset);
        out.terms.push_back(std::move(y));
    }
    return out;
}

OperatorExpr operator*(cplx c, const OperatorExpr& a)
{
    OperatorExpr out = a;
    for (auto& t : out.terms)
        t.coeff *= c;
    return out;
}

OperatorExpr normal_ordered(const OperatorExpr& a)
{
    OperatorExpr out;
    out.functions = a.functions;
    for (const auto& t : a.terms) {
        Monomial m;
        m.coeff = t.coeff;
        Group g;
        g.normal_ordered = true;
        for (const auto& h : t.groups)
            g.letters.insert(g.letters.end(), h.letters.begin(), h.letters.end());
        if (!g.letters.empty())
            m.groups.push_back(std::move(g));
        out.terms.push_back(std::move(m));
    }
    return out;
}

WickTable wick_table(const CommutatorModel& model, const OperatorExpr& expr, const QuadratureConfig& cfg)
{
    const std::size_t nf = expr.functions.size();
    WickTable t;
    t.ann.assign(nf, -1);
    t.ann_xi.assign(nf, -1);
    t.cre.assign(nf, -1);
    std::vector<Argument> rows, cols;
    for (const auto& m : expr.terms)
        for (const auto& g : m.groups)
            for (const auto& l : g.letters) {
                if (l.kind == LetterKind::annihilate && t.ann[l.fn] < 0) {
                    t.ann[l.fn] = static_cast<int>(rows.size());
                    rows.push_back(expr.functions[l.fn]);
                }
                if (l.kind == LetterKind::xi && t.ann_xi[l.fn] < 0) {
                    t.ann_xi[l.fn] = static_cast<int>(rows.size());
                    rows.push_back(star(expr.functions[l.fn]));
                }
                if (l.kind != LetterKind::annihilate && t.cre[l.fn] < 0) {
                    t.cre[l.fn] = static_cast<int>(cols.size());
                    cols.push_back(expr.functions[l.fn]);
                }
            }
    const auto R = static_cast<Eigen::Index>(rows.size()), C = static_cast<Eigen::Index>(cols.size());
    t.value = Eigen::MatrixXcd::Zero(R, C);
    t.error = Eigen::MatrixXd::Zero(R, C);
    if (R == 0 || C == 0)
        return t;
    std::vector<Argument> all = rows;
    all.insert(all.end(), cols.begin(), cols.end());
    const GramResult G = gram(model, all, cfg);
    t.value = G.value.block(0, R, R, C);
    t.error = G.error().block(0, R, R, C);
    t.flags = G.all_flags();
    t.node_count = G.node_count;
    return t;
}

namespace {

struct Bound {
    cplx v{0.0, 0.0};
    double a = 0.0;   // sum of |products|
    double e = 0.0;   // first-order error
};

struct WickLetter {
    int row = -1;     // annihilation part, or -1
    int col = -1;     // creation part, or -1
    int group = 0;
    bool normal = false;
};

class Pairing {
public:
    Pairing(std::vector<WickLetter> letters, const WickTable& t) : l_(std::move(letters)), t_(t), used_(l_.size(), false) {}

    Bound run() { return next(0); }

private:
    Bound next(std::size_t from)
    {
        std::size_t i = from;
        while (i < l_.size() && used_[i])
            ++i;
        Bound out;
        if (i == l_.size()) {
            out.v = 1.0;
            out.a = 1.0;
            return out;
        }
        if (l_[i].row < 0)
            return out;
        used_[i] = true;
        for (std::size_t j = i + 1; j < l_.size(); ++j) {
            if (used_[j] || l_[j].col < 0)
                continue;
            if (l_[i].normal && l_[j].group == l_[i].group)
                continue;
            const cplx w = t_.value(l_[i].row, l_[j].col);
            const double we = t_.error(l_[i].row, l_[j].col);
            used_[j] = true;
            const Bound rest = next(i + 1);
            used_[j] = false;
            out.v += w * rest.v;
            out.a += std::abs(w) * rest.a;
            out.e += std::abs(w) * rest.e + we * rest.a;
        }
        used_[i] = false;
        return out;
    }

    std::vector<WickLetter> l_;
    const WickTable& t_;
    std::vector<bool> used_;
};

}  // namespace

VevResult wick_vev(const OperatorExpr& expr, const WickTable& table)
{
    VevResult r;
    r.flags = table.flags;
    r.node_count = table.node_count;
    for (const auto& m : expr.terms) {
        const int n = m.letter_count();
        if (n > kMaxWickLetters)
            throw DomainError("word of " + std::to_string(n) + " letters exceeds the Wick guard of " +
                              std::to_string(kMaxWickLetters));
        if (n % 2)
            continue;
        std::vector<WickLetter> letters;
        for (std::size_t g = 0; g < m.groups.size(); ++g)
            for (const auto& l : m.groups[g].letters) {
                WickLetter w;
                w.group = static_cast<int>(g);
                w.normal = m.groups[g].normal_ordered;
                if (l.kind == LetterKind::annihilate)
                    w.row = table.ann[l.fn];
                else if (l.kind == LetterKind::xi)
                    w.row = table.ann_xi[l.fn];
                if (l.kind != LetterKind::annihilate)
                    w.col = table.cre[l.fn];
                letters.push_back(w);
            }
        const Bound b = Pairing(std::move(letters), table).run();
        r.value += m.coeff * b.v;
        r.error += std::abs(m.coeff) * b.e;
    }
    return r;
}

VevResult vev_word(const CommutatorModel& model, const OperatorExpr& expr, const QuadratureConfig& cfg)
{
    if (expr.max_letters() > kMaxWickLetters)
        throw DomainError("word exceeds the Wick guard of " + std::to_string(kMaxWickLetters) + " letters");
    return wick_vev(expr, wick_table(model, expr, cfg));
}

ZetaHiddenPair make_hidden_pair(const WeightFunction& w, int pairs, double sigma, std::uint64_t seed)
{
    w.validate();
    if (pairs < 1)
        throw DomainError("hidden-pair grid needs at least one node pair");
    HiddenConfig hc;
    hc.nodes = std::max(pairs, 2);
    hc.replicas = 1;
    hc.error_mode = ErrorMode::grid_doubling;
    hc.seed = seed;
    const HiddenRule rule({[w](const Vec4& u) { return w(u); }}, {sigma}, hc);
    ZetaHiddenPair z;
    z.weight = w;
    for (int q = 0; q < pairs; ++q) {
        const HiddenSample s = rule.sample(0, q);
        const Vec4 u = s.u.head<4>();
        z.nodes.push_back(u);
        z.weights.push_back(0.5 * s.w_plus / pairs);
        z.nodes.push_back(-u);
        z.weights.push_back(0.5 * s.w_minus / pairs);
    }
    return z;
}

namespace {

Argument modulated(const Argument& f, const Vec4& u)
{
    FunctionalSpec s;
    s.steps.push_back(functional::Modulate{u});
    return apply_functional(s, f);
}

void check_symmetric(const ZetaHiddenPair& z)
{
    if (z.nodes.size() != z.weights.size() || z.nodes.size() % 2)
        throw DomainError("hidden-pair grid must hold node pairs with one weight each");
    for (std::size_t a = 0; a < z.nodes.size(); a += 2)
        if ((z.nodes[a] + z.nodes[a + 1]).cwiseAbs().maxCoeff() != 0.0)
            throw DomainError("hidden-pair grid must be closed under u -> -u (stored as consecutive pairs)");
}

}  // namespace

OperatorExpr build_zeta(const ZetaSpec& spec, const Argument& f)
{
    if (const auto* poly = std::get_if<std::vector<ZetaPolyTerm>>(&spec.form)) {
        if (poly->empty())
            throw DomainError("polynomial zeta needs at least one term");
        OperatorExpr out;
        for (const auto& t : *poly) {
            OperatorExpr m = constant(t.coupling);
            for (const auto& T : t.functionals) {
                if (T.moves_support())
                    throw DomainError("zeta functionals must keep the support inside its causal completion");
                m = m * xi(apply_functional(T, f));
            }
            out = out.terms.empty() ? normal_ordered(m) : out + normal_ordered(m);
        }
        return out;
    }
    const auto& z = std::get<ZetaHiddenPair>(spec.form);
    check_symmetric(z);
    OperatorExpr out;
    for (std::size_t a = 0; a < z.nodes.size(); ++a) {
        const OperatorExpr m = normal_ordered(cplx(z.weights[a]) * (xi(modulated(f, z.nodes[a])) * xi(modulated(f, -z.nodes[a]))));
        out = out.terms.empty() ? m : out + m;
    }
    return out;
}

VevResult zeta_pair_closed_form(const CommutatorModel& model, const ZetaHiddenPair& z, const Argument& f,
                                const Argument& g, const QuadratureConfig& cfg)
{
    check_symmetric(z);
    const std::size_t K = z.nodes.size();
    std::vector<Argument> fu, gu;
    for (const auto& u : z.nodes) {
        fu.push_back(modulated(f, u));
        gu.push_back(modulated(g, u));
    }
    Eigen::MatrixXcd G(K, K);
    Eigen::MatrixXd E(K, K);
    VevResult r;
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b) {
            const IntegralResult x = eval_commutator(model, fu[a], gu[b], cfg);
            G(a, b) = x.value;
            E(a, b) = x.error_estimate;
            r.flags |= x.flags;
            r.node_count += x.node_count;
        }
    auto neg = [](std::size_t a) { return a ^ 1u; };
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b) {
            const double w = z.weights[a] * z.weights[b];
            const std::size_t na = neg(a), nb = neg(b);
            r.value += w * (G(a, b) * G(na, nb) + G(a, nb) * G(na, b));
            r.error += std::abs(w) * (E(a, b) * std::abs(G(na, nb)) + std::abs(G(a, b)) * E(na, nb) +
                                      E(a, nb) * std::abs(G(na, b)) + std::abs(G(a, nb)) * E(na, b));
        }
    return r;
}

namespace {

ChannelSpec momentum_channels()
{
    ChannelSpec c;
    c.multipliers.push_back([](const MultiplierInput& in, Eigen::VectorXd& out) {
        out.setOnes(in.k.cols());
        return 0.0;
    });
    for (int mu = 0; mu < 4; ++mu)
        c.multipliers.push_back([mu](const MultiplierInput& in, Eigen::VectorXd& out) {
            out = (in.k.row(mu).array() + in.offset(mu)).matrix().transpose();
            return 0.0;
        });
    c.channels = [](int n) {
        std::vector<std::vector<std::vector<int>>> ch(5);
        ch[0].push_back(std::vector<int>(n, 0));
        for (int mu = 0; mu < 4; ++mu)
            for (int i = 0; i < n; ++i) {
                std::vector<int> mono(n, 0);
                mono[i] = mu + 1;
                ch[mu + 1].push_back(mono);
            }
        return ch;
    };
    c.count = 5;
    return c;
}

MomentumResult normalized(const cplx norm, double norm_err, const Vec4c& num, const Vec4& num_err, unsigned flags)
{
    if (!(std::abs(norm) > 0.0))
        throw DomainError("momentum expectation needs <<g, g>> > 0 (vanishing norm)");
    MomentumResult r;
    r.norm = norm;
    r.flags = flags | (std::abs(norm) <= norm_err ? kUnconverged : 0u);
    for (int mu = 0; mu < 4; ++mu) {
        r.p(mu) = (num(mu) / norm).real();
        r.error(mu) = (num_err(mu) + std::abs(num(mu) / norm) * norm_err) / std::abs(norm);
    }
    return r;
}

}  // namespace

MomentumResult momentum_expectation(const CommutatorModel& model, const Argument& g, const QuadratureConfig& cfg)
{
    const auto res = gram_channels(model, {g}, cfg, momentum_channels());
    Vec4c num;
    Vec4 err;
    for (int mu = 0; mu < 4; ++mu) {
        num(mu) = res[mu + 1].value(0, 0);
        err(mu) = res[mu + 1].error()(0, 0);
    }
    unsigned flags = 0;
    for (const auto& x : res)
        flags |= x.all_flags();
    return normalized(res[0].value(0, 0), res[0].error()(0, 0), num, err, flags);
}

MomentumResult momentum_finite_difference(const CommutatorModel& model, const Argument& g,
                                          const QuadratureConfig& cfg, double h)
{
    // <<g, g_x>> carries exp(-i P.x); i d/dx^mu gives the covariant P_mu.
    std::vector<Argument> args{g};
    for (int mu = 0; mu < 4; ++mu)
        for (double s : {h, -h, 2.0 * h, -2.0 * h})
            args.push_back(translate(g, s * Vec4::Unit(mu)));
    const GramResult G = gram(model, args, cfg);
    Vec4c num;
    Vec4 err;
    for (int mu = 0; mu < 4; ++mu) {
        const Eigen::Index b = 1 + 4 * mu;
        const cplx d = (8.0 * (G.value(0, b) - G.value(0, b + 1)) - (G.value(0, b + 2) - G.value(0, b + 3))) / (12.0 * h);
        // Quadrature errors are shared by all translates and cancel in the stencil, so the
        // error is the 4-point vs 2-point discrepancy plus rounding.
        const cplx d2 = (G.value(0, b) - G.value(0, b + 1)) / (2.0 * h);
        const double e = std::abs(d - d2) + 64.0 * std::numeric_limits<double>::epsilon() *
                                                G.value.row(0).cwiseAbs().maxCoeff() / h;
        num(mu) = cplx(0.0, 1.0) * d * metric()(mu, mu);
        err(mu) = e;
    }
    return normalized(G.value(0, 0), G.error()(0, 0), num, err, G.all_flags());
}

void ThermalConfig::validate() const
{
    if (!(beta > 0.0))
        throw DomainError("thermal state needs beta > 0");
    if (!(T(0) > 0.0) || std::abs(minkowski_square(T) - 1.0) > 1e-12)
        throw DomainError("thermal frame T must be a unit forward time-like vector");
    if (terms < 1)
        throw DomainError("thermal series needs at least one term");
}

IntegralResult SeriesResult::entry(Eigen::Index a, Eigen::Index b) const
{
    IntegralResult r;
    r.value = value(a, b);
    r.error_estimate = error(a, b);
    r.flags = flags;
    r.node_count = node_count;
    return r;
}

namespace {

double min_total_mass(const CommutatorModel& model)
{
    double M = std::numeric_limits<double>::infinity();
    for (const auto& t : model.terms) {
        double s = 0.0;
        for (const auto& f : t.factors)
            s += f.mass;
        M = std::min(M, s);
    }
    return M;
}

ChannelSpec series_channels(int terms, std::function<double(int, const MultiplierInput&, Eigen::VectorXd&)> mult)
{
    ChannelSpec c;
    for (int n = 0; n <= terms; ++n)
        c.multipliers.push_back([n, mult](const MultiplierInput& in, Eigen::VectorXd& out) { return mult(n, in, out); });
    c.channels = [terms](int nf) {
        std::vector<std::vector<std::vector<int>>> ch(terms + 1);
        for (int n = 0; n <= terms; ++n)
            ch[n].push_back(std::vector<int>(nf, n));
        return ch;
    };
    c.count = terms + 1;
    return c;
}

// q: bound on the ratio of successive terms, or <= 0 to use the observed ratio.
SeriesResult assemble(const std::vector<GramResult>& ch, double q, double tail_tol, bool reject_divergent)
{
    SeriesResult s;
    const Eigen::Index r = ch[0].value.rows();
    const int N = static_cast<int>(ch.size()) - 1;
    s.value = ch[0].value;
    s.error = ch[0].error();
    s.node_count = ch[0].node_count;
    for (const auto& c : ch)
        s.flags |= c.all_flags();
    for (int n = 0; n <= N; ++n)
        s.terms.push_back(ch[n].value);
    for (int n = 1; n <= N; ++n) {
        s.value += 2.0 * ch[n].value;
        s.error += 2.0 * ch[n].error();
    }
    s.tail = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) {
            double rho = q;
            if (rho <= 0.0) {
                rho = 0.0;
                for (int n = std::max(1, N - 3); n <= N; ++n) {
                    const double prev = std::abs(ch[n - 1].value(a, b));
                    if (prev > 0.0)
                        rho = std::max(rho, std::abs(ch[n].value(a, b)) / prev);
                }
            }
            if (rho >= 1.0) {
                if (reject_divergent)
                    throw DomainError("contraction series does not converge (ratio test >= 1)");
                s.tail(a, b) = std::numeric_limits<double>::infinity();
            } else {
                s.tail(a, b) = 2.0 * std::abs(ch[N].value(a, b)) * rho / (1.0 - rho);
            }
            if (s.tail(a, b) > tail_tol * std::max(std::abs(s.value(a, b)), 1e-300))
                s.flags |= kUnconverged;
        }
    s.error += s.tail;
    return s;
}

}  // namespace

SeriesResult contraction_series(const CommutatorModel& model, const std::vector<Argument>& args,
                                const ContractionSpec& X, const QuadratureConfig& cfg)
{
    if (X.terms < 1)
        throw DomainError("contraction series needs at least one term");
    if (const auto* b = std::get_if<contraction::BetaTranslation>(&X.map)) {
        ThermalConfig th{b->beta, b->T, X.terms, X.tail_tol};
        th.validate();
        if (!(model.min_mass() > 0.0))
            throw DomainError("thermal series needs m > 0 for every factor: massless shells reach k.T = 0");
        const Vec4 gT = metric() * th.T;
        auto mult = [beta = th.beta, gT](int n, const MultiplierInput& in, Eigen::VectorXd& out) {
            // exp(-n beta (p + v + o).T) with the v and o parts returned as a log-scale.
            const Eigen::VectorXd kT = (gT.transpose() * in.k).transpose();
            const double vT = gT.dot(in.v), oT = gT.dot(in.offset);
            out = (-n * beta * (kT.array() - vT)).exp().matrix();
            return -n * beta * (vT + oT);
        };
        const auto ch = gram_channels(model, args, cfg, series_channels(X.terms, mult));
        return assemble(ch, std::exp(-th.beta * min_total_mass(model)), X.tail_tol, false);
    }
    if (const auto* a = std::get_if<contraction::Amplitude>(&X.map)) {
        if (!(a->alpha > 0.0))
            throw DomainError("amplitude contraction needs alpha > 0");
        auto mult = [alpha = a->alpha](int n, const MultiplierInput& in, Eigen::VectorXd& out) {
            out.setOnes(in.k.cols());
            return -n * alpha * in.degree;
        };
        const auto ch = gram_channels(model, args, cfg, series_channels(X.terms, mult));
        return assemble(ch, 0.0, X.tail_tol, true);
    }
    const auto& c = std::get<contraction::Custom>(X.map);
    if (!c.chi)
        throw DomainError("custom contraction needs a multiplier");
    auto mult = [chi = c.chi](int n, const MultiplierInput& in, Eigen::VectorXd& out) {
        out.resize(in.k.cols());
        for (Eigen::Index i = 0; i < in.k.cols(); ++i) {
            const Vec4 k = in.k.col(i) + in.offset;
            const double x = chi(k);
            if (!(x > 0.0) || x > 1.0)
                throw DomainError("custom contraction multiplier must lie in (0, 1] on the forward cone");
            out(i) = std::pow(x, n);
        }
        return 0.0;
    };
    const auto ch = gram_channels(model, args, cfg, series_channels(X.terms, mult));
    return assemble(ch, 0.0, X.tail_tol, true);
}

IntegralResult contracted_state_ip(const CommutatorModel& model, const Argument& f, const Argument& g,
                                   const ContractionSpec& X, const QuadratureConfig& cfg)
{
    return contraction_series(model, {f, g}, X, cfg).entry(0, 1);
}

SeriesResult thermal_gram(const CommutatorModel& model, const std::vector<Argument>& args, const ThermalConfig& th,
                          const QuadratureConfig& cfg)
{
    ContractionSpec X;
    X.map = contraction::BetaTranslation{th.beta, th.T};
    X.terms = th.terms;
    X.tail_tol = th.tail_tol;
    return contraction_series(model, args, X, cfg);
}

IntegralResult thermal_ip(const CommutatorModel& model, const Argument& f, const Argument& g, const ThermalConfig& th,
                          const QuadratureConfig& cfg)
{
    return thermal_gram(model, {f, g}, th, cfg).entry(0, 1);
}

IntegralResult thermal_free_closed_form(const Argument& f, const Argument& g, double mass, const ThermalConfig& th,
                                        const QuadratureConfig& cfg)
{
    th.validate();
    if (!(mass > 0.0))
        throw DomainError("thermal closed form needs m > 0");
    const ShellRule rule = fit_rule({f, g}, mass, Vec4::Zero(), cfg.shell);
    Eigen::MatrixXcd X(rule.size(), 2);
    X.col(0) = sample(f, rule, Vec4::Zero());
    X.col(1) = sample(g, rule, Vec4::Zero());
    const Vec4 gT = metric() * th.T;
    const Eigen::ArrayXd kT = (gT.transpose() * rule.k).transpose().array();
    const Eigen::MatrixXd D = (1.0 / (0.5 * th.beta * kT).tanh()).matrix();
    const GramSums s = shell_gram_batch(rule, X, D);
    IntegralResult r;
    r.value = s.fine[0](0, 1);
    r.error_estimate = s.error[0](0, 1);
    r.node_count = rule.size();
    r.flags = s.flags;
    return r;
}

TestFunction beta_translate(const TestFunction& f, double beta, const Vec4& T)
{
    const Vec4 b = beta * (metric() * T);
    std::vector<GaussianTerm> out;
    for (auto t : f.terms()) {
        const Vec4 Mb = t.width.ldlt().solve(b);
        t.coeff *= std::exp(0.5 * b.dot(Mb) - b.dot(t.center));
        t.center -= Mb;
        out.push_back(t);
    }
    return TestFunction(std::move(out));
}

VevResult thermal_vev(const CommutatorModel& model, const std::vector<Argument>& fs, const std::vector<Argument>& gs,
                      const ThermalConfig& th, const QuadratureConfig& cfg, ThermalOrder order)
{
    VevResult r;
    if (fs.size() != gs.size())
        return r;
    if (fs.empty()) {
        r.value = 1.0;
        return r;
    }
    std::vector<Argument> all = fs;
    all.insert(all.end(), gs.begin(), gs.end());
    const SeriesResult s = thermal_gram(model, all, th, cfg);
    const auto n = static_cast<Eigen::Index>(fs.size());
    const Eigen::MatrixXcd Gb = s.value.block(0, n, n, n), G0 = s.terms[0].block(0, n, n, n);
    const double sign = order == ThermalOrder::annihilators_first ? 1.0 : -1.0;
    const Eigen::MatrixXcd M = 0.5 * Gb + sign * 0.5 * G0;
    r = permanent_with_error(M, s.error.block(0, n, n, n));
    r.flags = s.flags;
    return r;
}

VevResult characteristic(const CommutatorModel& model, const std::vector<Argument>& fs,
                         const std::vector<double>& lambdas, const QuadratureConfig& cfg, const ThermalConfig* th)
{
    if (fs.size() != lambdas.size() || fs.empty())
        throw DomainError("characteristic function needs one lambda per test function");
    std::vector<Argument> all;
    for (const auto& f : fs)
        all.push_back(star(f));
    all.insert(all.end(), fs.begin(), fs.end());
    const auto n = static_cast<Eigen::Index>(fs.size());
    Eigen::MatrixXcd W;
    Eigen::MatrixXd E;
    unsigned flags = 0;
    if (th) {
        const SeriesResult s = thermal_gram(model, all, *th, cfg);
        W = s.value.block(0, n, n, n);
        E = s.error.block(0, n, n, n);
        flags = s.flags;
    } else {
        const GramResult G = gram(model, all, cfg);
        W = G.value.block(0, n, n, n);
        E = G.error().block(0, n, n, n);
        flags = G.all_flags();
    }
    cplx ex = 0.0;
    double ee = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            ex += -0.5 * lambdas[j] * lambdas[k] * W(j, k);
            ee += 0.5 * std::abs(lambdas[j] * lambdas[k]) * E(j, k);
        }
    VevResult r;
    r.value = std::exp(ex);
    r.error = std::abs(r.value) * ee;
    r.flags = flags;
    return r;
}

}  // namespace nlw
