#include "nlw/testfn.hpp"

#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

namespace nlw {

namespace {

void require_spd(const Mat4& M)
{
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw DomainError("width matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat4> es(M, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    if (!(lo > 0.0)) {
        std::ostringstream msg;
        msg << "width matrix is not positive definite (eigenvalue " << lo << ")";
        throw DomainError(msg.str());
    }
}

Mat4 symmetrized(const Mat4& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

TestFunction::TestFunction(std::vector<GaussianTerm> terms) : terms_(std::move(terms))
{
    if (terms_.empty())
        throw DomainError("a test function needs at least one term");
    for (auto& t : terms_) {
        require_spd(t.width);
        t.width = symmetrized(t.width);
    }
}

cplx TestFunction::ft(const Vec4& k) const
{
    cplx acc = 0.0;
    for (const auto& t : terms_) {
        const Vec4 d = k - t.center;
        const double q = d.dot(t.width * d);
        const double phase = -minkowski_dot(k, t.translation);
        acc += t.coeff * std::exp(-0.5 * q) * std::polar(1.0, phase);
    }
    return acc;
}

void TestFunction::sample_ft(const Eigen::Ref<const Nodes4>& ks, Eigen::Ref<Eigen::VectorXcd> out) const
{
    const Eigen::Index n = ks.cols();
    out.setZero();
    Nodes4 d(4, n);
    for (const auto& t : terms_) {
        d = ks.colwise() - t.center;
        const Eigen::RowVectorXd q = (t.width * d).cwiseProduct(d).colwise().sum();
        const Vec4 gx = metric() * t.translation;
        const Eigen::RowVectorXd phase = -(gx.transpose() * ks);
        for (Eigen::Index i = 0; i < n; ++i)
            out(i) += t.coeff * std::exp(-0.5 * q(i)) * std::polar(1.0, phase(i));
    }
}

cplx TestFunction::at(const Vec4& x) const
{
    cplx acc = 0.0;
    for (const auto& t : terms_) {
        const Vec4 z = metric() * (x - t.translation);
        const Mat4 P = t.width.inverse();
        const double norm = 1.0 / (kTwoPi * kTwoPi * std::sqrt(t.width.determinant()));
        acc += t.coeff * norm * std::exp(-0.5 * z.dot(P * z)) * std::polar(1.0, t.center.dot(z));
    }
    return acc;
}

double TestFunction::max_k_sigma() const
{
    double s = 0.0;
    for (const auto& t : terms_)
        s = std::max(s, std::sqrt(t.width.inverse().diagonal().maxCoeff()));
    return s;
}

TestFunction make_gaussian(const Vec4& center, const Mat4& width, const Vec4& translation, cplx coeff)
{
    return TestFunction({GaussianTerm{coeff, center, width, translation}});
}

TestFunction translate(const TestFunction& f, const Vec4& x)
{
    auto terms = f.terms();
    for (auto& t : terms)
        t.translation += x;
    return TestFunction(std::move(terms));
}

TestFunction modulate(const TestFunction& f, const Vec4& u)
{
    auto terms = f.terms();
    for (auto& t : terms) {
        t.coeff *= std::polar(1.0, -minkowski_dot(u, t.translation));
        t.center -= u;
    }
    return TestFunction(std::move(terms));
}

TestFunction star(const TestFunction& f)
{
    auto terms = f.terms();
    for (auto& t : terms) {
        t.coeff = std::conj(t.coeff);
        t.center = -t.center;
    }
    return TestFunction(std::move(terms));
}

TestFunction scale(const TestFunction& f, cplx s)
{
    auto terms = f.terms();
    for (auto& t : terms)
        t.coeff *= s;
    return TestFunction(std::move(terms));
}

TestFunction boost(const TestFunction& f, const Mat4& L)
{
    if (!is_lorentz(L, 1e-12))
        throw DomainError("boost matrix does not preserve the Minkowski metric");
    const Mat4 Linv = L.inverse();
    auto terms = f.terms();
    for (auto& t : terms) {
        t.center = L * t.center;
        t.width = symmetrized(Linv.transpose() * t.width * Linv);
        t.translation = L * t.translation;
    }
    return TestFunction(std::move(terms));
}

TestFunction transform(const TestFunction& f, const Transform& t)
{
    return std::visit(
        [&f](const auto& op) -> TestFunction {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, xform::Translate>)
                return translate(f, op.x);
            else if constexpr (std::is_same_v<T, xform::Modulate>)
                return modulate(f, op.u);
            else if constexpr (std::is_same_v<T, xform::Star>)
                return star(f);
            else if constexpr (std::is_same_v<T, xform::Scale>)
                return scale(f, op.s);
            else
                return boost(f, op.L);
        },
        t);
}

TestFunction add(const TestFunction& f, const TestFunction& g)
{
    auto terms = f.terms();
    terms.insert(terms.end(), g.terms().begin(), g.terms().end());
    return TestFunction(std::move(terms));
}

TestFunction pointwise_multiply(const TestFunction& f, const TestFunction& g)
{
    // Work in y = g x, where each term is C exp(i kappa^T (y - a) - 1/2 (y - a)^T P (y - a))
    // with P = width^-1 and a = g translation.
    std::vector<GaussianTerm> out;
    out.reserve(f.size() * g.size());
    for (const auto& t1 : f.terms()) {
        for (const auto& t2 : g.terms()) {
            const Mat4 P1 = t1.width.inverse();
            const Mat4 P2 = t2.width.inverse();
            const Mat4 P = symmetrized(P1 + P2);
            const Vec4 a1 = metric() * t1.translation;
            const Vec4 a2 = metric() * t2.translation;
            const Vec4 b = P.ldlt().solve(P1 * a1 + P2 * a2);
            const Vec4 d = a1 - a2;
            const double real_exp = -0.5 * d.dot(symmetrized(t1.width + t2.width).ldlt().solve(d));
            const Vec4 kappa = t1.center + t2.center;
            const double phase = kappa.dot(b) - t1.center.dot(a1) - t2.center.dot(a2);

            GaussianTerm t;
            t.center = kappa;
            t.width = symmetrized(P.inverse());
            t.translation = metric() * b;
            const double c1 = 1.0 / std::sqrt(t1.width.determinant());
            const double c2 = 1.0 / std::sqrt(t2.width.determinant());
            const double cn = std::sqrt(t.width.determinant());
            t.coeff = t1.coeff * t2.coeff * (c1 * c2 * cn / (kTwoPi * kTwoPi)) * std::exp(real_exp)
                      * std::polar(1.0, phase);
            out.push_back(t);
        }
    }
    return TestFunction(std::move(out));
}

double chi2_4_quantile(double p)
{
    boost::math::chi_squared dist(4.0);
    return boost::math::quantile(dist, p);
}

std::vector<Ellipsoid> effective_support(const TestFunction& f, double eps)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("effective_support needs 0 < eps < 1");
    const double q = chi2_4_quantile(1.0 - eps / static_cast<double>(f.size()));
    std::vector<Ellipsoid> out;
    for (const auto& t : f.terms()) {
        // |f|^2 is a Gaussian in x with covariance g M g / 2.
        const Mat4 cov = metric() * t.width * metric() * 0.5;
        Eigen::SelfAdjointEigenSolver<Mat4> es(cov);
        Ellipsoid e;
        e.center = t.translation;
        e.shape = symmetrized(q * cov);
        e.semi_axes = (q * es.eigenvalues()).cwiseSqrt();
        e.axes = es.eigenvectors();
        out.push_back(e);
    }
    return out;
}

}  // namespace nlw
