#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace nlw;
using nlw::testing::Gen;
using nlw::testing::rel;

namespace {

QuadratureConfig fixed_box(int nodes = 25)
{
    QuadratureConfig cfg;
    cfg.shell.nodes = nodes;
    cfg.shell.half_extent = 4.5;
    cfg.shell.box_center = Eigen::Vector3d::Zero();
    return cfg;
}

}  // namespace

TEST_CASE("permanent matches the permutation sum (property)")
{
    Gen gen(51);
    for (int n = 1; n <= 6; ++n)
        for (int t = 0; t < 4; ++t) {
            const Eigen::MatrixXcd M = gen.complex_matrix(n);
            CHECK(rel(permanent(M), nlw::testing::permanent_brute(M)) < 1e-12);
        }
    CHECK(permanent(Eigen::MatrixXcd(0, 0)) == cplx(1.0));
    CHECK_THROWS_AS(permanent(Eigen::MatrixXcd::Ones(kMaxPermanentSize + 1, kMaxPermanentSize + 1)), DomainError);
}

TEST_CASE("permanent error bound covers a perturbation")
{
    Gen gen(52);
    const Eigen::MatrixXcd M = gen.complex_matrix(4);
    const Eigen::MatrixXd E = Eigen::MatrixXd::Constant(4, 4, 1e-3);
    const VevResult r = permanent_with_error(M, E);
    Eigen::MatrixXcd P = M;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            P(a, b) += std::polar(1e-3, gen.uniform(0.0, kTwoPi));
    CHECK(std::abs(permanent(P) - r.value) <= r.error);
}

TEST_CASE("ladder vacuum expectation")
{
    Gen gen(53);
    const QuadratureConfig cfg = fixed_box();
    const TestFunction f = gen.packet(), g = gen.packet();
    const CommutatorModel m = free_model();
    // Unequal numbers of annihilators and creators vanish exactly.
    CHECK(vev_ladder(m, {f, f}, {g}, cfg).value == cplx(0.0));
    // Rank-one table: Per = n! x^n.
    const cplx x = base_ip(f, g, 1.0, cfg).value;
    const VevResult r = vev_ladder(m, {f, f, f}, {g, g, g}, cfg);
    CHECK(rel(r.value, 6.0 * x * x * x) < 1e-12);
}

TEST_CASE("Wick expansion matches the brute-force pairing sum (property)")
{
    Gen gen(54);
    const QuadratureConfig cfg = fixed_box(17);
    const CommutatorModel m = power_model(2);
    const std::vector<Argument> fns{gen.packet(), gen.packet(), gen.packet()};
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 * gen.integer(1, 4);
        OperatorExpr e;
        e.functions = fns;
        Monomial mono;
        mono.coeff = gen.phase_coeff();
        // Up to two groups; the second may be normal-ordered.
        const int split = gen.integer(0, n);
        const bool second_no = gen.integer(0, 1) == 1;
        std::vector<int> group_of(n);
        mono.groups.resize(2);
        mono.groups[1].normal_ordered = second_no;
        std::vector<Letter> letters;
        for (int i = 0; i < n; ++i) {
            const Letter L{static_cast<LetterKind>(gen.integer(0, 2)), gen.integer(0, 2)};
            letters.push_back(L);
            group_of[i] = i < split ? 0 : 1;
            mono.groups[group_of[i]].letters.push_back(L);
        }
        e.terms.push_back(mono);
        const WickTable table = wick_table(m, e, cfg);
        std::vector<int> open(n);
        std::iota(open.begin(), open.end(), 0);
        const cplx expected = mono.coeff * nlw::testing::pairings(open, [&](int i, int j) -> cplx {
            if (second_no && group_of[i] == 1 && group_of[j] == 1)
                return 0.0;
            return nlw::testing::letter_two_point(table, letters[i], letters[j]);
        });
        const VevResult r = wick_vev(e, table);
        CHECK(std::abs(r.value - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("adjoint reverses order and conjugates")
{
    Gen gen(55);
    const TestFunction f = gen.packet(), g = gen.packet();
    const OperatorExpr e = cplx(0.0, 2.0) * (annihilate(f) * create(g));
    const OperatorExpr a = e.adjoint();
    REQUIRE(a.terms.size() == 1);
    CHECK(a.terms[0].coeff == cplx(0.0, -2.0));
    const auto& L = a.terms[0].groups;
    std::vector<Letter> flat;
    for (const auto& grp : L)
        flat.insert(flat.end(), grp.letters.begin(), grp.letters.end());
    REQUIRE(flat.size() == 2);
    CHECK(flat[0].kind == LetterKind::annihilate);
    CHECK(flat[1].kind == LetterKind::create);
    CHECK(same_representation(a.functions[flat[0].fn], g));
    CHECK(same_representation(a.functions[flat[1].fn], f));
}

TEST_CASE("characteristic function in the vacuum")
{
    Gen gen(56);
    const QuadratureConfig cfg = fixed_box();
    const TestFunction f = gen.packet(), g = gen.packet();
    const std::vector<double> lam{0.7, -0.4};
    const VevResult r = characteristic(free_model(), {f, g}, lam, cfg);
    const std::vector<Argument> fs{f, g};
    cplx ex = 0.0;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            ex += -0.5 * lam[j] * lam[k] * base_ip(star(fs[j]), fs[k], 1.0, cfg).value;
    CHECK(rel(r.value, std::exp(ex)) < 1e-12);
    CHECK_THROWS_AS(characteristic(free_model(), {f}, {1.0, 2.0}, cfg), DomainError);
}

TEST_CASE("beta translation multiplies the transform by exp(-beta k.T) (property)")
{
    Gen gen(57);
    for (int t = 0; t < 20; ++t) {
        const TestFunction f = gen.packet(2);
        const double beta = gen.uniform(0.2, 2.0);
        const Vec4 T(1.0, 0.0, 0.0, 0.0);
        const Vec4 k = gen.vec(0.5) + Vec4(1.2, 0, 0, 0);
        const cplx expected = f.ft(k) * std::exp(-beta * minkowski_dot(k, T));
        CHECK(std::abs(beta_translate(f, beta, T).ft(k) - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("free thermal inner product matches the coth closed form")
{
    const QuadratureConfig cfg = fixed_box(33);
    const TestFunction f = make_gaussian(Vec4(1.3, 0.2, 0.0, 0.1), Mat4::Identity() * 3.0);
    const TestFunction g = make_gaussian(Vec4(1.2, 0.1, -0.1, 0.0), Mat4::Identity() * 2.5, Vec4(0.0, 0.3, 0.0, 0.0));
    for (double beta : {0.5, 1.0, 2.0}) {
        ThermalConfig th;
        th.beta = beta;
        const IntegralResult s = thermal_ip(free_model(), f, g, th, cfg);
        const IntegralResult c = thermal_free_closed_form(f, g, 1.0, th, cfg);
        CHECK(std::abs(s.value - c.value) <= 1e-9 * std::abs(c.value) + 3.0 * (s.error_estimate + c.error_estimate));
        // Thermal fluctuations only add.
        CHECK(thermal_ip(free_model(), f, f, th, cfg).value.real() >= base_ip(f, f, 1.0, cfg).value.real());
    }
    ThermalConfig bad;
    bad.beta = -1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("thermal two-point functions")
{
    const QuadratureConfig cfg = fixed_box();
    Gen gen(58);
    const TestFunction f = gen.packet(), g = gen.packet();
    ThermalConfig th;
    const cplx b = thermal_ip(free_model(), f, g, th, cfg).value, z = base_ip(f, g, 1.0, cfg).value;
    CHECK(rel(thermal_vev(free_model(), {f}, {g}, th, cfg).value, 0.5 * b + 0.5 * z) < 1e-12);
    CHECK(rel(thermal_vev(free_model(), {f}, {g}, th, cfg, ThermalOrder::creators_first).value, 0.5 * b - 0.5 * z) <
          1e-10);
    CHECK(thermal_vev(free_model(), {f, f}, {g}, th, cfg).value == cplx(0.0));
}

TEST_CASE("hidden-pair zeta vacuum expectation equals the grid closed form")
{
    const QuadratureConfig cfg = fixed_box(17);
    WeightFunction w;
    w.amplitude = -0.8;
    const ZetaSpec spec{make_hidden_pair(w, 3, 0.5)};
    const TestFunction f = make_gaussian(Vec4(1.3, 0.2, 0.0, 0.0), Mat4::Identity() * 3.0);
    const TestFunction g = make_gaussian(Vec4(1.2, 0.0, 0.1, 0.0), Mat4::Identity() * 3.0, Vec4(0.0, 0.2, 0.0, 0.0));
    const CommutatorModel m = free_model();
    const VevResult word = vev_word(m, build_zeta(spec, f).adjoint() * build_zeta(spec, g), cfg);
    const VevResult closed = zeta_pair_closed_form(m, std::get<ZetaHiddenPair>(spec.form), f, g, cfg);
    CHECK(std::abs(word.value - closed.value) <= 1e-10 * std::abs(closed.value));
}

TEST_CASE("zeta functionals may not move the support")
{
    FunctionalSpec t;
    t.steps = {functional::PreTranslate{Vec4(0.0, 1.0, 0.0, 0.0)}};
    const ZetaSpec spec{std::vector<ZetaPolyTerm>{ZetaPolyTerm{1.0, {t}}}};
    CHECK_THROWS_AS(build_zeta(spec, make_gaussian(Vec4(1, 0, 0, 0), Mat4::Identity())), DomainError);
}

TEST_CASE("momentum: expectation, finite differences and forward cone")
{
    const QuadratureConfig cfg = fixed_box(33);
    const TestFunction g = make_gaussian(Vec4(1.3, 0.4, -0.2, 0.1), Mat4::Identity() * 3.0, Vec4(0.1, 0.2, 0.0, 0.0));
    const MomentumResult a = momentum_expectation(free_model(), g, cfg);
    const MomentumResult d = momentum_finite_difference(free_model(), g, cfg);
    for (int mu = 0; mu < 4; ++mu)
        CHECK(std::abs(a.p(mu) - d.p(mu)) < 1e-6);
    // Free field: the expectation is the |g|^2-weighted shell average of k.
    const ShellRule rule = fit_rule({Argument(g)}, 1.0, Vec4::Zero(), cfg.shell);
    const Eigen::VectorXcd s = sample(Argument(g), rule, Vec4::Zero());
    double norm = 0.0;
    Vec4 num = Vec4::Zero();
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const double w = rule.w(i) * std::norm(s(i));
        norm += w;
        num += w * rule.k.col(i);
    }
    for (int mu = 0; mu < 4; ++mu)
        CHECK(std::abs(a.p(mu) - num(mu) / norm) < 1e-9);
    CHECK(a.cone_margin() > 0.0);
}
