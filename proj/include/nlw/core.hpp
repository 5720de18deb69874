#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nlw {

using cplx = std::complex<double>;

template <typename Scalar>
using Vec4T = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Mat4T = Eigen::Matrix<Scalar, 4, 4>;

using Vec4 = Vec4T<double>;
using Mat4 = Mat4T<double>;
using Mat4c = Mat4T<cplx>;
using Vec4c = Vec4T<cplx>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Minkowski metric diag(+1, -1, -1, -1).
inline const Mat4& metric()
{
    static const Mat4 g = Vec4(1.0, -1.0, -1.0, -1.0).asDiagonal();
    return g;
}

template <typename DA, typename DB>
auto minkowski_dot(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b)
{
    return a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3);
}

template <typename D>
auto minkowski_square(const Eigen::MatrixBase<D>& v)
{
    return minkowski_dot(v, v);
}

template <typename D>
bool in_forward_cone(const Eigen::MatrixBase<D>& v, double tol = 0.0)
{
    return v(0) >= -tol && minkowski_square(v) >= -tol;
}

/// Energy on the mass shell for spatial momentum p (first component ignored).
inline double shell_energy(double px, double py, double pz, double mass)
{
    return std::sqrt(px * px + py * py + pz * pz + mass * mass);
}

/// Base of every library error. Precondition and domain failures throw
/// DomainError; malformed configuration throws ConfigError.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Lorentz boost along a spatial axis (1, 2 or 3) with the given rapidity.
Mat4 boost_matrix(int axis, double rapidity);

/// Spatial rotation about a spatial axis (1, 2 or 3).
Mat4 rotation_matrix(int axis, double angle);

/// True if L^T g L == g to within tol (entrywise).
bool is_lorentz(const Mat4& L, double tol = 1e-12);

}  // namespace nlw
