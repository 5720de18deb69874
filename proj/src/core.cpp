#include "nlw/core.hpp"

namespace nlw {

Mat4 boost_matrix(int axis, double rapidity)
{
    if (axis < 1 || axis > 3)
        throw DomainError("boost axis must be 1, 2 or 3");
    Mat4 L = Mat4::Identity();
    const double ch = std::cosh(rapidity);
    const double sh = std::sinh(rapidity);
    L(0, 0) = ch;
    L(axis, axis) = ch;
    L(0, axis) = sh;
    L(axis, 0) = sh;
    return L;
}

Mat4 rotation_matrix(int axis, double angle)
{
    if (axis < 1 || axis > 3)
        throw DomainError("rotation axis must be 1, 2 or 3");
    const int a = axis % 3 + 1;
    const int b = (axis + 1) % 3 + 1;
    Mat4 R = Mat4::Identity();
    R(a, a) = std::cos(angle);
    R(b, b) = std::cos(angle);
    R(a, b) = -std::sin(angle);
    R(b, a) = std::sin(angle);
    return R;
}

bool is_lorentz(const Mat4& L, double tol)
{
    const Mat4 residual = L.transpose() * metric() * L - metric();
    return residual.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace nlw
