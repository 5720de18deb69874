#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace nlw;
using nlw::testing::Gen;

namespace {

GridSpec small_grid()
{
    GridSpec g;
    g.origin = Vec4(-0.5, -0.5, -0.5, -0.5);
    g.spacing = Vec4::Constant(0.125);
    g.counts = {9, 9, 9, 9};
    return g;
}

GridFunction random_grid_function(Gen& gen, const GridSpec& g)
{
    std::vector<cplx> s(g.size());
    for (auto& v : s)
        v = cplx(gen.normal(), gen.normal());
    return GridFunction(g, std::move(s), g.origin + 0.5 * 8 * g.spacing, -1.0);
}

cplx direct_ft(const GridFunction& f, const Vec4& k)
{
    const GridSpec& g = f.spec();
    cplx acc = 0.0;
    for (int a = 0; a < g.counts[0]; ++a)
        for (int b = 0; b < g.counts[1]; ++b)
            for (int c = 0; c < g.counts[2]; ++c)
                for (int d = 0; d < g.counts[3]; ++d)
                    acc += f.sample(a, b, c, d) * std::polar(1.0, -minkowski_dot(k, g.point(a, b, c, d)));
    return acc * g.cell_volume();
}

}  // namespace

TEST_CASE("bump is positive inside its ball and zero outside")
{
    const Vec4 c(0.1, -0.2, 0.0, 0.3);
    const GridSpec g = bump_grid(c, 1.0, 8);
    const GridFunction b = make_bump(c, 1.0, g, 2.0);
    CHECK(b.compact());
    for (int a = 0; a < g.counts[0]; a += 3)
        for (int i = 0; i < g.counts[1]; i += 2)
            for (int j = 0; j < g.counts[2]; j += 3)
                for (int k = 0; k < g.counts[3]; k += 2) {
                    const double r = (g.point(a, i, j, k) - c).norm();
                    const cplx v = b.sample(a, i, j, k);
                    if (r >= 1.0)
                        CHECK(v == cplx(0.0));
                    else if (r < 0.95)
                        CHECK(v.real() > 0.0);
                }
    CHECK(b.sample(8, 8, 8, 8).real() == doctest::Approx(2.0 * std::exp(-1.0)));
}

TEST_CASE("bumps need eight points per radius and a fitting box")
{
    CHECK_THROWS_AS(make_bump(Vec4::Zero(), 1.0, bump_grid(Vec4::Zero(), 1.0, 6)), DomainError);
    CHECK_THROWS_AS(make_bump(Vec4(0.0, 0.5, 0.0, 0.0), 1.0, bump_grid(Vec4::Zero(), 1.0, 8)), DomainError);
}

TEST_CASE("transform at any k equals the direct sum")
{
    Gen gen(21);
    const GridFunction f = random_grid_function(gen, small_grid());
    for (int t = 0; t < 5; ++t) {
        const Vec4 k = gen.vec(3.0);
        CHECK(std::abs(f.ft(k) - direct_ft(f, k)) < 1e-10 * (1.0 + std::abs(direct_ft(f, k))));
    }
}

TEST_CASE("periodic DFT round trip")
{
    Gen gen(22);
    const GridFunction f = random_grid_function(gen, small_grid());
    const auto back = f.inverse_dft(f.dft());
    double worst = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i)
        worst = std::max(worst, std::abs(back[i] - f.samples()[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("translation multiplies the transform by a phase (property)")
{
    Gen gen(23);
    const GridFunction f = random_grid_function(gen, small_grid());
    for (int t = 0; t < 10; ++t) {
        const Vec4 x = gen.vec(1.0), k = gen.vec(2.0);
        const cplx expected = f.ft(k) * std::polar(1.0, -minkowski_dot(k, x));
        CHECK(std::abs(translate(f, x).ft(k) - expected) < 1e-10);
    }
}

TEST_CASE("pointwise operations act sample by sample")
{
    Gen gen(24);
    const GridSpec g = small_grid();
    const GridFunction f = random_grid_function(gen, g), h = random_grid_function(gen, g);
    const GridFunction p = pointwise_multiply(f, h), s = add(f, h), c = star(f);
    for (std::size_t i = 0; i < g.size(); i += 97) {
        CHECK(p.samples()[i] == f.samples()[i] * h.samples()[i]);
        CHECK(s.samples()[i] == f.samples()[i] + h.samples()[i]);
        CHECK(c.samples()[i] == std::conj(f.samples()[i]));
    }
    std::vector<cplx> ph(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        ph[i] = gen.normal();
    const GridFunction phase(g, ph, g.origin, -1.0);
    const GridFunction d = dress(f, phase);
    for (std::size_t i = 0; i < g.size(); i += 101)
        CHECK(std::abs(d.samples()[i] - std::polar(1.0, ph[i].real()) * f.samples()[i]) < 1e-14);
}

TEST_CASE("fourth-order derivative on a smooth field")
{
    GridSpec g;
    g.origin = Vec4::Constant(-1.0);
    g.spacing = Vec4::Constant(0.0625);
    g.counts = {5, 33, 5, 5};
    const GridFunction f = sample_function(g, [](const Vec4& x) { return cplx(std::sin(2.0 * x(1))); }, g.origin, -1.0);
    const GridFunction d = derivative(f, 1);
    double worst = 0.0;
    for (int i = 2; i < g.counts[1] - 2; ++i) {
        const double x = g.point(2, i, 2, 2)(1);
        worst = std::max(worst, std::abs(d.sample(2, i, 2, 2) - 2.0 * std::cos(2.0 * x)));
    }
    // Truncation error h^4 f^(5) / 30.
    CHECK(worst < std::pow(0.0625, 4) * 32.0 / 30.0 * 1.01);
    CHECK_THROWS_AS(derivative(f, 4), DomainError);
}

TEST_CASE("certified space-like separation of declared balls")
{
    const Vec4 c0 = Vec4::Zero();
    const GridFunction a = make_bump(c0, 1.0, bump_grid(c0, 1.0, 8));
    auto at = [](const Vec4& c) { return make_bump(c, 1.0, bump_grid(c, 1.0, 8)); };
    CHECK(certified_spacelike(a, at(Vec4(0.0, 3.0, 0.0, 0.0))));
    CHECK_FALSE(certified_spacelike(a, at(Vec4(0.0, 2.0, 0.0, 0.0))));
    CHECK_FALSE(certified_spacelike(a, at(Vec4(2.0, 3.0, 0.0, 0.0))));
    // Boundary: sqrt(2) (r_f + r_g) = 2.83.
    CHECK(certified_spacelike(a, at(Vec4(0.0, 2.9, 0.0, 0.0))));
    CHECK_FALSE(certified_spacelike(a, at(Vec4(0.0, 2.8, 0.0, 0.0))));
    const GridFunction b = at(Vec4(0.0, 3.0, 0.0, 0.0));
    CHECK(certified_spacelike(a, b, fit_lattice({&a, &b}, 2.0)));
}

TEST_CASE("lattice sampling agrees with the direct transform")
{
    const Vec4 c = Vec4::Zero();
    const GridFunction b = make_bump(c, 1.0, bump_grid(c, 1.0, 8));
    const ShellRule rule = lattice_rule(1.0, fit_lattice({&b}, 2.0));
    REQUIRE(rule.lattice.has_value());
    const Vec4 shift(0.3, 0.2, -0.1, 0.05);
    const Eigen::VectorXcd s = b.sample_lattice(*rule.lattice, shift);
    for (Eigen::Index i = 0; i < rule.size(); i += rule.size() / 7) {
        const Vec4 k = rule.k.col(i) + shift;
        CHECK(std::abs(s(i) - b.ft(k)) < 1e-12);
    }
}
