#pragma once

#include <variant>
#include <vector>

#include "nlw/core.hpp"

namespace nlw {

using Nodes4 = Eigen::Matrix<double, 4, Eigen::Dynamic>;

/// One Gaussian term of a test function, specified by its Fourier transform
///   coeff * exp(-1/2 (k - center)^T width (k - center)) * exp(-i k.translation)
/// where k.x is the Minkowski product.
struct GaussianTerm {
    cplx coeff{1.0, 0.0};
    Vec4 center = Vec4::Zero();
    Mat4 width = Mat4::Identity();
    Vec4 translation = Vec4::Zero();
};

/// Finite sum of Gaussian terms. Closed under translation, modulation,
/// conjugation, scaling, proper Lorentz boosts, addition and pointwise
/// products. The family has no unit element: a constant function is not
/// representable, so affine terms are built with add().
class TestFunction {
public:
    explicit TestFunction(std::vector<GaussianTerm> terms);

    const std::vector<GaussianTerm>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }

    /// Fourier transform at wave-number k.
    cplx ft(const Vec4& k) const;

    /// Fourier transform at every column of ks, written into out.
    void sample_ft(const Eigen::Ref<const Nodes4>& ks, Eigen::Ref<Eigen::VectorXcd> out) const;

    /// Real-space value, f(x) = int ft(k) exp(i k.x) d^4k / (2 pi)^4.
    cplx at(const Vec4& x) const;

    /// Largest wave-number-space standard deviation over all terms and axes.
    double max_k_sigma() const;

private:
    std::vector<GaussianTerm> terms_;
};

TestFunction make_gaussian(const Vec4& center, const Mat4& width,
                           const Vec4& translation = Vec4::Zero(), cplx coeff = 1.0);

TestFunction translate(const TestFunction& f, const Vec4& x);
/// Result has transform ft(k + u).
TestFunction modulate(const TestFunction& f, const Vec4& u);
/// Result has transform conj(ft(-k)), i.e. the complex conjugate in real space.
TestFunction star(const TestFunction& f);
TestFunction scale(const TestFunction& f, cplx s);
/// Real-space f(L^-1 x). Throws DomainError unless L is a Lorentz matrix.
TestFunction boost(const TestFunction& f, const Mat4& L);

namespace xform {
struct Translate { Vec4 x; };
struct Modulate { Vec4 u; };
struct Star {};
struct Scale { cplx s; };
struct Boost { Mat4 L; };
}  // namespace xform

using Transform = std::variant<xform::Translate, xform::Modulate, xform::Star, xform::Scale, xform::Boost>;

TestFunction transform(const TestFunction& f, const Transform& t);

TestFunction add(const TestFunction& f, const TestFunction& g);
/// Real-space pointwise product; its transform is the convolution of the
/// factors' transforms divided by (2 pi)^4.
TestFunction pointwise_multiply(const TestFunction& f, const TestFunction& g);

/// Ellipsoid {x : (x - center)^T shape^-1 (x - center) <= 1} in real space.
struct Ellipsoid {
    Vec4 center;
    Mat4 shape;        // symmetric positive definite
    Vec4 semi_axes;    // sqrt of the eigenvalues of shape, ascending
    Mat4 axes;         // eigenvectors as columns

    double bounding_radius() const { return semi_axes.maxCoeff(); }
};

/// Per-term ellipsoids that together hold at least 1 - eps of each term's
/// real-space L2 mass (eps is split evenly over terms).
std::vector<Ellipsoid> effective_support(const TestFunction& f, double eps);

/// Quantile of the chi-square distribution with 4 degrees of freedom.
double chi2_4_quantile(double p);

}  // namespace nlw
