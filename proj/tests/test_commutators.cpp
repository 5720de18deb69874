#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace nlw;
using nlw::testing::Gen;
using nlw::testing::rel;

namespace {

QuadratureConfig fixed_box(int nodes = 33)
{
    QuadratureConfig cfg;
    cfg.shell.nodes = nodes;
    cfg.shell.half_extent = 4.5;
    cfg.shell.box_center = Eigen::Vector3d::Zero();
    return cfg;
}

CommutatorModel random_model(Gen& gen)
{
    CommutatorModel m;
    const int terms = gen.integer(1, 2);
    for (int t = 0; t < terms; ++t) {
        CommutatorTerm term;
        term.weight = gen.uniform(0.2, 1.0);
        const int n = gen.integer(1, 3), h = gen.integer(0, std::min(2, n - 1));
        term.factors.assign(n, FactorSpec{});
        for (int j = 0; j < h; ++j)
            term.hidden.push_back(gaussian_of_invariant(gen.uniform(0.5, 2.0)));
        term.A = Eigen::MatrixXd::Zero(n, h);
        for (int j = 0; j < h; ++j) {
            // Column-sum-zero and independent: +a on factor j, -a on factor j + 1.
            const double a = gen.uniform(0.5, 1.5) * (gen.integer(0, 1) ? 1.0 : -1.0);
            term.A(j, j) = a;
            term.A(j + 1, j) = -a;
        }
        m.terms.push_back(term);
    }
    return m;
}

}  // namespace

TEST_CASE("free and power models reduce to the base inner product")
{
    Gen gen(41);
    const QuadratureConfig cfg = fixed_box();
    const TestFunction f = gen.packet(2), g = gen.packet(1);
    const cplx b = base_ip(f, g, 1.0, cfg).value;
    CHECK(rel(eval_commutator(free_model(), f, g, cfg).value, b) < 1e-13);
    CHECK(rel(eval_commutator(power_model(2), f, g, cfg).value, b * b) < 1e-13);
    CHECK(rel(eval_commutator(power_model(3), f, g, cfg).value, b * b * b) < 1e-13);
}

TEST_CASE("Gram matrices are Hermitian and positive semidefinite (property)")
{
    Gen gen(42);
    QuadratureConfig cfg = fixed_box(17);
    cfg.hidden.nodes = 32;
    for (int trial = 0; trial < 12; ++trial) {
        const CommutatorModel m = random_model(gen);
        std::vector<Argument> args;
        for (int i = 0, n = gen.integer(2, 4); i < n; ++i)
            args.push_back(gen.packet(gen.integer(1, 2), 2.0, 4.0));
        const GramResult G = gram(m, args, cfg);
        CHECK((G.value - G.value.adjoint()).cwiseAbs().maxCoeff() <= 1e-13 * G.value.cwiseAbs().maxCoeff());
        const Eigen::MatrixXcd H = 0.5 * (G.value + G.value.adjoint());
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(H).eigenvalues()(0);
        CHECK(lmin >= -G.error().norm());
    }
}

TEST_CASE("hidden pair Gram entry equals the shared-node product of shifted inner products")
{
    const CommutatorModel m = hidden_pair_model(gaussian_of_invariant(1.0));
    QuadratureConfig cfg;
    cfg.shell.nodes = 19;
    cfg.shell.sigmas = 5.0;
    cfg.hidden.nodes = 32;
    const TestFunction f = make_gaussian(Vec4(1.2, 0.3, 0, 0), Mat4::Identity() * 4.0);
    const TestFunction g = make_gaussian(Vec4(1.3, 0.1, 0, 0), Mat4::Identity() * 4.0, Vec4(0, 0.5, 0, 0));
    const std::vector<Argument> args{f, g};
    const GramResult G = gram(m, args, cfg);
    const HiddenRule rule = term_hidden_rule(m, 0, args, cfg);
    QuadratureConfig fine = cfg;
    fine.shell.nodes = 31;
    const IntegralResult ref = hidden_integral(
        [&](const Eigen::VectorXd& u) {
            const Vec4 v = u.head<4>();
            return shifted_ip(f, g, 1.0, v, fine).value * shifted_ip(f, g, 1.0, -v, fine).value;
        },
        rule);
    // Same hidden nodes: only shell truncation separates the two.
    CHECK(std::abs(G.value(0, 1) - ref.value) <= G.shell_error(0, 1) + 1e-3 * std::abs(ref.value));
}

TEST_CASE("model validation")
{
    CommutatorModel m = hidden_pair_model(gaussian_of_invariant(1.0), 0.5);
    CHECK_FALSE(m.column_sums_zero());
    m.spectrum_guard = true;
    CHECK_THROWS_AS(m.validate(), DomainError);
    m.spectrum_guard = false;
    CHECK_NOTHROW(m.validate());
    CHECK_NOTHROW(hidden_pair_model(gaussian_of_invariant(1.0)).validate());
    CHECK(hidden_pair_model(gaussian_of_invariant(1.0)).hiddens_even_invariant());

    CommutatorModel bad = free_model();
    bad.terms[0].weight = -1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CommutatorModel neg = free_model();
    neg.terms[0].factors[0].mass = -1.0;
    CHECK_THROWS_AS(neg.validate(), DomainError);
    CHECK_THROWS_AS(window_of_invariant(1.0, 0.5).validate(), DomainError);
}

TEST_CASE("catalog kernels are even in u (property)")
{
    Gen gen(43);
    const std::vector<Kernel> ks{gaussian_of_invariant(1.3, 0.7), window_of_invariant(-1.0, 2.0),
                                 frame_window(Vec4(1.0, 0.5, 2.0, 1.5))};
    for (const auto& k : ks)
        for (int t = 0; t < 50; ++t) {
            const Vec4 u = gen.vec(1.5);
            CHECK(k(u) == k(-u));
            CHECK(k(u) >= 0.0);
        }
    const Kernel g = gaussian_of_invariant(1.0);
    const Mat4 L = boost_matrix(2, 0.7);
    const Vec4 u(0.3, 0.9, -0.2, 0.4);
    CHECK(g(L * u) == doctest::Approx(g(u)).epsilon(1e-12));
}

TEST_CASE("functionals: degree, offset and translation covariance")
{
    FunctionalSpec s;
    s.steps = {functional::Power{3, {false, true, false}}, functional::Modulate{Vec4(0.1, 0.2, 0.0, 0.0)}};
    CHECK(s.degree() == 3);
    CHECK_FALSE(s.moves_support());
    FunctionalSpec t;
    t.steps = {functional::PreTranslate{Vec4(0.0, 1.0, 0.0, 0.0)}};
    CHECK(t.moves_support());

    Gen gen(44);
    const TestFunction f = gen.packet(1, 3.0, 4.0);
    FunctionalSpec sq;
    sq.steps = {functional::Power{2, {false, true}}};
    const Vec4 x = gen.vec(0.5), y = gen.vec(0.5);
    const TestFunction a = apply_functional(sq, translate(f, x));
    const TestFunction b = translate(apply_functional(sq, f), x);
    CHECK(std::abs(a.at(y) - b.at(y)) < 1e-12);
    CHECK(std::abs(a.at(y + x) - std::norm(f.at(y))) < 1e-12);
}

TEST_CASE("charged doublets")
{
    Gen gen(45);
    const QuadratureConfig cfg = fixed_box(25);
    const TestFunction f1 = gen.packet(), f2 = gen.packet(), g1 = gen.packet(), g2 = gen.packet();
    const ChargedDoublet F{f1, f2}, G{g1, g2};
    const ChargedDoublet Fc = F.conjugate();
    CHECK(same_representation(Fc.conjugate().f1, F.f1));
    CHECK(same_representation(Fc.conjugate().f2, F.f2));
    CHECK_FALSE(F.observable());
    CHECK(ChargedDoublet{f1, star(Argument(f1))}.observable());
    const cplx ip = charged_ip(F, G, 1.0, cfg).value;
    CHECK(rel(ip, base_ip(f1, g1, 1.0, cfg).value + base_ip(f2, g2, 1.0, cfg).value) < 1e-13);
    // The commutator is antisymmetric.
    const cplx c = charged_commutator(F, G, 1.0, cfg).value;
    CHECK(std::abs(c + charged_commutator(G, F, 1.0, cfg).value) < 1e-13 * (1.0 + std::abs(c)));
}
