#include "nlw/nonscalar.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace nlw {

namespace {

const cplx I{0.0, 1.0};

}  // namespace

GammaAlgebra::GammaAlgebra()
{
    for (auto& g : g_)
        g.setZero();
    g_[0].diagonal() << 1.0, 1.0, -1.0, -1.0;
    const std::array<Eigen::Matrix2cd, 3> sigma = [] {
        std::array<Eigen::Matrix2cd, 3> s;
        s[0] << 0.0, 1.0, 1.0, 0.0;
        s[1] << 0.0, -I, I, 0.0;
        s[2] << 1.0, 0.0, 0.0, -1.0;
        return s;
    }();
    for (int i = 0; i < 3; ++i) {
        g_[i + 1].topRightCorner<2, 2>() = sigma[i];
        g_[i + 1].bottomLeftCorner<2, 2>() = -sigma[i];
    }
    g5_ = I * g_[0] * g_[1] * g_[2] * g_[3];
    c_ = I * g_[2];
}

const GammaAlgebra& GammaAlgebra::dirac()
{
    static const GammaAlgebra g;
    return g;
}

Mat4c GammaAlgebra::slash(const Vec4& k) const
{
    return k(0) * g_[0] - k(1) * g_[1] - k(2) * g_[2] - k(3) * g_[3];
}

Eigen::Matrix<cplx, 1, 4> GammaAlgebra::bar(const Vec4c& a) const { return a.adjoint() * g_[0]; }

Vec4c GammaAlgebra::conjugate(const Vec4c& a) const { return c_ * a.conjugate(); }

double GammaAlgebra::clifford_residual() const
{
    double r = 0.0;
    const Mat4c one = Mat4c::Identity();
    for (int mu = 0; mu < 4; ++mu) {
        for (int nu = 0; nu < 4; ++nu) {
            const Mat4c ac = g_[mu] * g_[nu] + g_[nu] * g_[mu] - 2.0 * metric()(mu, nu) * one;
            r = std::max(r, ac.cwiseAbs().maxCoeff());
        }
        r = std::max(r, (g5_ * g_[mu] + g_[mu] * g5_).cwiseAbs().maxCoeff());
    }
    return std::max(r, (g5_ * g5_ - one).cwiseAbs().maxCoeff());
}

SpinorTestFunction SpinorTestFunction::charge_conjugate() const
{
    const Mat4c& C = GammaAlgebra::dirac().conjugation();
    SpinorTestFunction out = *this;
    for (int a = 0; a < 4; ++a) {
        int b = 0;
        while (std::abs(C(a, b)) < 0.5)
            ++b;
        const Argument s = star(c[b]);
        out.c[a] = C(a, b) == cplx(1.0, 0.0) ? s : scale(s, C(a, b));
    }
    return out;
}

SpinorTestFunction SpinorTestFunction::translated(const Vec4& x) const
{
    SpinorTestFunction out = *this;
    for (auto& a : out.c)
        a = translate(a, x);
    return out;
}

SpinorTestFunction charge_conjugate(const SpinorTestFunction& U) { return U.charge_conjugate(); }

IdentityResiduals identity_suite(int pairs, std::uint64_t seed)
{
    const GammaAlgebra& G = GammaAlgebra::dirac();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto draw = [&] {
        Vec4c v;
        for (int i = 0; i < 4; ++i)
            v(i) = cplx(nd(rng), nd(rng));
        return v;
    };
    IdentityResiduals r;
    for (int n = 0; n < pairs; ++n) {
        const Vec4c A = draw(), B = draw();
        const Vec4c Ac = G.conjugate(A), Bc = G.conjugate(B);
        const double s = A.norm() * B.norm();
        auto check = [&](double& worst, const Mat4c& M, double sign) {
            const cplx lhs = (G.bar(Ac) * M * Bc)(0, 0);
            const cplx rhs = sign * (G.bar(B) * M * A)(0, 0);
            worst = std::max(worst, std::abs(lhs - rhs) / s);
        };
        check(r.scalar, Mat4c::Identity(), -1.0);
        check(r.pseudoscalar, G.gamma5(), -1.0);
        for (int mu = 0; mu < 4; ++mu) {
            check(r.vector, G.gamma(mu), 1.0);
            check(r.axial, G.gamma(mu) * G.gamma5(), 1.0);
            check(r.axial_opposite, G.gamma(mu) * G.gamma5(), -1.0);
        }
    }
    return r;
}

Mat4c AlphaVector::vertex(const Vec4& k, double mass) const
{
    const GammaAlgebra& G = GammaAlgebra::dirac();
    const Mat4c ks = G.slash(k);
    return ks + a1 * mass * Mat4c::Identity() + (a2 * mass) * I * G.gamma5() + a3 * ks * G.gamma5();
}

namespace {

Eigen::MatrixXcd spinor_samples(const SpinorTestFunction& U, const ShellRule& rule, const Vec4& shift)
{
    Eigen::MatrixXcd X(rule.size(), 4);
    for (int a = 0; a < 4; ++a)
        X.col(a) = sample(U.c[a], rule, shift);
    return X;
}

std::vector<Argument> joined(std::initializer_list<std::vector<Argument>> parts)
{
    std::vector<Argument> out;
    for (const auto& p : parts)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

/// sum_n w_n c_n with the trapezoid error estimate.
IntegralResult node_sum(const ShellRule& rule, const Eigen::VectorXcd& c)
{
    const Eigen::MatrixXcd ones = Eigen::MatrixXcd::Ones(rule.size(), 1);
    const ShellSums s = shell_sums(rule, ones, c, Eigen::VectorXd());
    IntegralResult r;
    r.value = s.fine(0, 0);
    r.error_estimate = shell_error(s)(0, 0);
    r.node_count = rule.size();
    r.flags = s.flags;
    return r;
}

IntegralResult combine(const IntegralResult& a, const IntegralResult& b, double sb)
{
    IntegralResult r;
    r.value = a.value + sb * b.value;
    r.error_estimate = a.error_estimate + b.error_estimate;
    r.node_count = a.node_count + b.node_count;
    r.flags = a.flags | b.flags;
    return r;
}

IntegralResult dirac_half(const SpinorTestFunction& U, const SpinorTestFunction& V, int sign, const AlphaVector& alpha,
                          double mass, const QuadratureConfig& cfg, const Vec4& u)
{
    const ShellRule rule = fit_rule(joined({U.components(), V.components()}), mass, u, cfg.shell, sign);
    const Eigen::MatrixXcd XU = spinor_samples(U, rule, u), XV = spinor_samples(V, rule, u);
    const Mat4c& g0 = GammaAlgebra::dirac().gamma(0);
    Eigen::VectorXcd c(rule.size());
    for (Eigen::Index n = 0; n < rule.size(); ++n) {
        const Mat4c M = g0 * alpha.vertex(rule.k.col(n), mass);
        c(n) = XU.row(n).transpose().dot(M * XV.row(n).transpose());
    }
    if (sign < 0)
        c = -c;
    return node_sum(rule, c);
}

}  // namespace

IntegralResult dirac_ip(const SpinorTestFunction& U, const SpinorTestFunction& V, DiracPart part,
                        const AlphaVector& alpha, double mass, const QuadratureConfig& cfg, const Vec4& u)
{
    if (!alpha.admissible())
        throw DomainError("alpha is inadmissible: alpha_1^2 + alpha_2^2 + alpha_3^2 must not exceed 1");
    if (mass < 0.0)
        throw DomainError("mass must be nonnegative");
    switch (part) {
    case DiracPart::plus:
        return dirac_half(U, V, 1, alpha, mass, cfg, u);
    case DiracPart::minus:
        return dirac_half(U, V, -1, alpha, mass, cfg, u);
    case DiracPart::full:
        break;
    }
    return combine(dirac_half(U, V, 1, alpha, mass, cfg, u), dirac_half(U, V, -1, alpha, mass, cfg, u), 1.0);
}

VertexWitness vertex_psd_witness(const AlphaVector& alpha, const ShellRule& rule)
{
    const Mat4c& g0 = GammaAlgebra::dirac().gamma(0);
    VertexWitness w;
    w.min_eigenvalue = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (Eigen::Index n = 0; n < rule.size(); ++n) {
        const Vec4 k = rule.k.col(n);
        Mat4c H = g0 * alpha.vertex(k, rule.mass);
        H = 0.5 * (H + H.adjoint()).eval();
        const double e = Eigen::SelfAdjointEigenSolver<Mat4c>(H, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        scale = std::max(scale, std::abs(k(0)) + rule.mass);
        if (e < w.min_eigenvalue) {
            w.min_eigenvalue = e;
            w.k = k;
        }
    }
    w.tolerance = 1e-12 * scale;
    w.certified_negative = w.min_eigenvalue < -w.tolerance;
    return w;
}

Mat4c su2_generator(int which, const Vec4& k, double mass)
{
    const GammaAlgebra& G = GammaAlgebra::dirac();
    if (which == 0)
        return I * G.gamma5();
    if (which != 1 && which != 2)
        throw DomainError("generator index must be 0, 1 or 2");
    if (mass <= 0.0)
        throw DomainError("k-slash generators need a positive mass");
    if (which == 1)
        return (I / mass) * G.slash(k);
    return G.slash(k) * G.gamma5() / mass;
}

double su2_residual(const SpinorTestFunction& U, const SpinorTestFunction& V, int which, double theta,
                    const AlphaVector& alpha, double mass, const QuadratureConfig& cfg)
{
    if (!alpha.admissible())
        throw DomainError("alpha is inadmissible: alpha_1^2 + alpha_2^2 + alpha_3^2 must not exceed 1");
    const ShellRule rule = fit_rule(joined({U.components(), V.components()}), mass, Vec4::Zero(), cfg.shell);
    const Eigen::MatrixXcd XU = spinor_samples(U, rule, Vec4::Zero()), XV = spinor_samples(V, rule, Vec4::Zero());
    const Mat4c& g0 = GammaAlgebra::dirac().gamma(0);
    cplx before = 0.0, after = 0.0;
    for (Eigen::Index n = 0; n < rule.size(); ++n) {
        const Vec4 k = rule.k.col(n);
        const Mat4c M = g0 * alpha.vertex(k, mass);
        const Mat4c E = std::cos(theta) * Mat4c::Identity() + std::sin(theta) * su2_generator(which, k, mass);
        const Vec4c u = XU.row(n).transpose(), v = XV.row(n).transpose();
        const Vec4c eu = E * u, ev = E * v;
        before += rule.w(n) * u.dot(M * v);
        after += rule.w(n) * eu.dot(M * ev);
    }
    return std::abs(after - before);
}

IntegralResult dirac_power_commutator(const SpinorTestFunction& U, const SpinorTestFunction& V, int p,
                                      Statistics stats, double mass, const QuadratureConfig& cfg)
{
    if (p < 1)
        throw DomainError("power must be a positive integer");
    if (stats == Statistics::fermionic && p % 2 == 0)
        throw DomainError("fermionic anticommutators admit only odd powers of (U,V)_+");
    if (stats == Statistics::bosonic && p % 2 == 1)
        throw DomainError("bosonic commutators of spinor inner products require even powers");
    const AlphaVector standard;
    const IntegralResult a = dirac_ip(V, U, DiracPart::plus, standard, mass, cfg);
    const IntegralResult b = dirac_ip(V, U, DiracPart::minus, standard, mass, cfg);
    auto pw = [p](const IntegralResult& x, cplx& v, double& e) {
        v = std::pow(x.value, p);
        e = p * std::pow(std::abs(x.value), p - 1) * x.error_estimate;
    };
    cplx va, vb;
    double ea, eb;
    pw(a, va, ea);
    pw(b, vb, eb);
    IntegralResult r;
    r.value = stats == Statistics::fermionic ? va + vb : vb - va;
    r.error_estimate = ea + eb;
    r.node_count = a.node_count + b.node_count;
    r.flags = a.flags | b.flags;
    return r;
}

const std::array<Eigen::Vector3d, 12>& icosahedral_rule()
{
    static const std::array<Eigen::Vector3d, 12> pts = [] {
        const double phi = 0.5 * (1.0 + std::sqrt(5.0));
        std::array<Eigen::Vector3d, 12> p;
        int i = 0;
        for (double s1 : {-1.0, 1.0})
            for (double s2 : {-1.0, 1.0}) {
                p[i++] = Eigen::Vector3d(0.0, s1, s2 * phi);
                p[i++] = Eigen::Vector3d(s1, s2 * phi, 0.0);
                p[i++] = Eigen::Vector3d(s2 * phi, 0.0, s1);
            }
        for (auto& v : p)
            v.normalize();
        return p;
    }();
    return pts;
}

namespace {

double spinor_k_sigma(const Argument& a)
{
    if (const auto* tf = std::get_if<TestFunction>(&a))
        return tf->max_k_sigma();
    const auto& g = std::get<GridFunction>(a);
    const double r = g.compact() ? g.support_radius() : g.spec().spacing.maxCoeff() * g.spec().counts[1] / 2.0;
    return 2.5 / r;
}

/// Shell sums of bar(U) gamma^0-sandwiched basis vertices k-slash, m, m i g5, k-slash g5 at shift s.
std::array<cplx, 4> vertex_basis(const SpinorTestFunction& U, const SpinorTestFunction& V, double mass,
                                 const Vec4& s, const QuadratureConfig& cfg)
{
    const GammaAlgebra& G = GammaAlgebra::dirac();
    const ShellRule rule = fit_rule(joined({U.components(), V.components()}), mass, s, cfg.shell);
    const Eigen::MatrixXcd XU = spinor_samples(U, rule, s), XV = spinor_samples(V, rule, s);
    const Mat4c g0 = G.gamma(0), g05 = G.gamma(0) * G.gamma5();
    std::array<cplx, 4> out{};
    for (Eigen::Index n = 0; n < rule.size(); ++n) {
        const Mat4c ks = G.slash(rule.k.col(n));
        const Vec4c u = XU.row(n).transpose(), v = XV.row(n).transpose();
        const Vec4c ksv = ks * v;
        const double w = rule.w(n);
        out[0] += w * u.dot(g0 * ksv);
        out[1] += w * mass * u.dot(g0 * v);
        out[2] += w * mass * u.dot(I * (g05 * v));
        out[3] += w * u.dot(g0 * (ks * (G.gamma5() * v)));
    }
    return out;
}

}  // namespace

IntegralResult dirac_preset_ip(const SpinorTestFunction& U, const SpinorTestFunction& V, const DiracPreset& preset,
                               const QuadratureConfig& cfg)
{
    preset.hidden.validate();
    const double m = preset.mass;
    const IntegralResult plus = dirac_ip(U, V, DiracPart::plus, AlphaVector{}, m, cfg);
    const IntegralResult zero = dirac_ip(U, V, DiracPart::plus, AlphaVector{0.0, 0.0, 0.0}, m, cfg);

    double sk = 0.0, reach = 0.0;
    for (const auto& a : joined({U.components(), V.components()})) {
        sk = std::max(sk, spinor_k_sigma(a));
        if (const auto* tf = std::get_if<TestFunction>(&a))
            for (const auto& t : tf->terms())
                reach = std::max(reach, std::sqrt(std::max(0.0, minkowski_square(t.center) - m * m)));
    }
    const double sigma = cfg.hidden.envelope_scale * (sk + reach) / std::sqrt(2.0);
    const HiddenPropagator H = preset.hidden;
    const HiddenRule rule({[H](const Vec4& u) { return H(u); }}, {sigma}, cfg.hidden);

    const auto& alphas = icosahedral_rule();
    auto integrand = [&](const Eigen::VectorXd& uv) {
        const Vec4 u = uv.head<4>();
        const auto bp = vertex_basis(U, V, m, u, cfg), bm = vertex_basis(U, V, m, -u, cfg);
        cplx acc = 0.0;
        for (const auto& a : alphas) {
            const cplx fp = bp[0] + a(0) * bp[1] + a(1) * bp[2] + a(2) * bp[3];
            const cplx fm = bm[0] + a(0) * bm[1] + a(1) * bm[2] + a(2) * bm[3];
            acc += fp * fm;
        }
        // delta(|a|^2 - 1) d^3a = dOmega / 2, so the sphere integral is 2 pi times the mean.
        return kTwoPi * acc / static_cast<double>(alphas.size());
    };
    const IntegralResult hid = hidden_integral(integrand, rule, cfg.threads);

    IntegralResult r;
    r.value = plus.value + hid.value * zero.value;
    r.error_estimate = plus.error_estimate + std::abs(hid.value) * zero.error_estimate +
                       hid.error_estimate * std::abs(zero.value);
    r.node_count = plus.node_count + zero.node_count + hid.node_count;
    r.flags = plus.flags | zero.flags | hid.flags;
    return r;
}

int BivectorTestFunction::slot(int a, int b)
{
    if (a == b || a < 0 || b < 0 || a > 3 || b > 3)
        throw DomainError("bivector slots need two distinct indices in 0..3");
    if (a > b)
        std::swap(a, b);
    static constexpr int table[4][4] = {{-1, 0, 1, 2}, {-1, -1, 3, 4}, {-1, -1, -1, 5}, {-1, -1, -1, -1}};
    return table[a][b];
}

IntegralResult em_ip(const BivectorTestFunction& F, const BivectorTestFunction& G, double mass,
                     const QuadratureConfig& cfg, const Vec4& u)
{
    if (mass < 0.0)
        throw DomainError("mass must be nonnegative");
    const ShellRule rule = fit_rule(joined({F.components(), G.components()}), mass, u, cfg.shell);
    const Eigen::Index N = rule.size();
    Eigen::MatrixXcd XF(N, 6), XG(N, 6);
    for (int s = 0; s < 6; ++s) {
        XF.col(s) = sample(F.c[s], rule, u);
        XG.col(s) = sample(G.c[s], rule, u);
    }
    // a_mu = p^alpha f_[alpha mu]
    auto contract = [&](const Eigen::MatrixXcd& X, Eigen::Index n, int mu) {
        cplx a = 0.0;
        for (int al = 0; al < 4; ++al) {
            if (al == mu)
                continue;
            const double sgn = al < mu ? 1.0 : -1.0;
            a += rule.k(al, n) * sgn * X(n, BivectorTestFunction::slot(al, mu));
        }
        return a;
    };
    Eigen::VectorXcd c(N);
    for (Eigen::Index n = 0; n < N; ++n) {
        cplx acc = 0.0;
        for (int mu = 0; mu < 4; ++mu)
            acc += metric()(mu, mu) * std::conj(contract(XF, n, mu)) * contract(XG, n, mu);
        c(n) = -acc;
    }
    return node_sum(rule, c);
}

namespace {

const GridFunction& grid_of(const Argument& a)
{
    const auto* g = std::get_if<GridFunction>(&a);
    if (!g)
        throw DomainError("gauge triplets need grid-family spinor components");
    return *g;
}

bool same_grid(const GridSpec& a, const GridSpec& b)
{
    return a.same_geometry(b) && (a.origin - b.origin).norm() <= 1e-12;
}

}  // namespace

void GaugeTriplet::validate() const
{
    for (const auto& a : U.c)
        if (!same_grid(grid_of(a).spec(), u.spec()))
            throw DomainError("grid mismatch between spinor components and phase");
    for (const auto& g : conn)
        if (!same_grid(g.spec(), u.spec()))
            throw DomainError("grid mismatch between test connection and phase");
}

SpinorTestFunction GaugeTriplet::dressed() const
{
    validate();
    SpinorTestFunction out = U;
    for (auto& a : out.c)
        a = dress(std::get<GridFunction>(a), u);
    return out;
}

std::array<GridFunction, 4> GaugeTriplet::invariant_connection() const
{
    validate();
    return {add(derivative(u, 0), scale(conn[0], -1.0)), add(derivative(u, 1), scale(conn[1], -1.0)),
            add(derivative(u, 2), scale(conn[2], -1.0)), add(derivative(u, 3), scale(conn[3], -1.0))};
}

GaugeTriplet gauge_transform(const GaugeTriplet& T, const GridFunction& phi)
{
    T.validate();
    if (!same_grid(phi.spec(), T.u.spec()))
        throw DomainError("grid mismatch between gauge function and triplet");
    GaugeTriplet out = T;
    for (auto& a : out.U.c)
        a = dress(std::get<GridFunction>(a), phi);
    out.u = add(T.u, scale(phi, -1.0));
    for (int mu = 0; mu < 4; ++mu)
        out.conn[mu] = add(T.conn[mu], scale(derivative(phi, mu), -1.0));
    return out;
}

IntegralResult gauge_ip(const GaugeTriplet& T1, const GaugeTriplet& T2, GaugeKind kind, double mass,
                        const QuadratureConfig& cfg)
{
    T1.validate();
    T2.validate();
    if (!same_grid(T1.u.spec(), T2.u.spec()))
        throw DomainError("grid mismatch between triplets");
    if (kind == GaugeKind::matter)
        return dirac_ip(T1.dressed(), T2.dressed(), DiracPart::plus, AlphaVector{}, mass, cfg);

    const auto w1 = T1.invariant_connection(), w2 = T2.invariant_connection();
    std::vector<Argument> args;
    for (const auto& w : w1)
        args.emplace_back(w);
    for (const auto& w : w2)
        args.emplace_back(w);
    const ShellRule rule = fit_rule(args, 0.0, Vec4::Zero(), cfg.shell);
    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(rule.size()), b = a;
    for (int mu = 0; mu < 4; ++mu) {
        const Eigen::VectorXd kmu = rule.k.row(mu).transpose();
        a += kmu.cwiseProduct(sample(args[mu], rule, Vec4::Zero()));
        b += kmu.cwiseProduct(sample(args[4 + mu], rule, Vec4::Zero()));
    }
    return node_sum(rule, a.conjugate().cwiseProduct(b));
}

bool fermionic_observable(const SpinorTestFunction& U1, const SpinorTestFunction& U2, const GridFunction& u, double tol)
{
    GaugeTriplet t1{U1, u, {u, u, u, u}}, t2{U2, u, {u, u, u, u}};
    const SpinorTestFunction lhs = t1.dressed().charge_conjugate(), rhs = t2.dressed();
    for (int a = 0; a < 4; ++a)
        if (!same_representation(lhs.c[a], rhs.c[a], tol))
            return false;
    return true;
}

}  // namespace nlw
