#pragma once

// Hand-rolled generators and brute-force references shared by the test binaries.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "nlw/config.hpp"

namespace nlw::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>()(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    cplx phase_coeff() { return std::polar(uniform(0.3, 1.0), uniform(0.0, kTwoPi)); }

    Vec4 vec(double scale) { return Vec4(normal(), normal(), normal(), normal()) * scale; }

    /// Symmetric positive-definite width with eigenvalues in [lo, hi].
    Mat4 width(double lo, double hi)
    {
        const Eigen::HouseholderQR<Mat4> qr(Mat4::NullaryExpr([&] { return normal(); }));
        const Mat4 Q = qr.householderQ();
        Vec4 ev;
        for (int i = 0; i < 4; ++i)
            ev(i) = uniform(lo, hi);
        return Q * ev.asDiagonal() * Q.transpose();
    }

    /// Packet peaked near the forward mass shell.
    TestFunction packet(int terms = 1, double w_lo = 1.0, double w_hi = 3.0)
    {
        std::vector<GaussianTerm> ts;
        for (int t = 0; t < terms; ++t) {
            const Eigen::Vector3d p(uniform(-0.6, 0.6), uniform(-0.6, 0.6), uniform(-0.6, 0.6));
            const Vec4 c(shell_energy(p(0), p(1), p(2), 1.0) + uniform(-0.2, 0.2), p(0), p(1), p(2));
            ts.push_back(GaussianTerm{phase_coeff(), c, width(w_lo, w_hi), vec(0.5)});
        }
        return TestFunction(std::move(ts));
    }

    /// Proper orthochronous Lorentz matrix: boost along a random axis times a rotation.
    Mat4 lorentz(double max_rapidity)
    {
        return boost_matrix(integer(1, 3), uniform(-max_rapidity, max_rapidity)) *
               rotation_matrix(integer(1, 3), uniform(0.0, kTwoPi));
    }

    Eigen::MatrixXcd complex_matrix(int n)
    {
        Eigen::MatrixXcd M(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                M(a, b) = cplx(normal(), normal());
        return M;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Sum over all permutations.
inline cplx permanent_brute(const Eigen::MatrixXcd& M)
{
    std::vector<int> perm(M.rows());
    std::iota(perm.begin(), perm.end(), 0);
    cplx sum = 0.0;
    do {
        cplx p = 1.0;
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            p *= M(i, perm[i]);
        sum += p;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum;
}

/// Brute-force pairing sum for a single plain monomial, given a two-point
/// function of letter positions.
template <typename TwoPoint>
cplx pairings(std::vector<int> open, const TwoPoint& two_point)
{
    if (open.empty())
        return 1.0;
    if (open.size() % 2)
        return 0.0;
    cplx s = 0.0;
    for (std::size_t k = 1; k < open.size(); ++k) {
        std::vector<int> rest;
        for (std::size_t q = 1; q < open.size(); ++q)
            if (q != k)
                rest.push_back(open[q]);
        s += two_point(open[0], open[k]) * pairings(rest, two_point);
    }
    return s;
}

/// Two-point function of letters read from a WickTable.
inline cplx letter_two_point(const WickTable& t, const Letter& L, const Letter& R)
{
    if (R.kind == LetterKind::annihilate)
        return 0.0;
    const int row = L.kind == LetterKind::annihilate ? t.ann[L.fn] : L.kind == LetterKind::xi ? t.ann_xi[L.fn] : -1;
    if (row < 0)
        return 0.0;
    return t.value(row, t.cre[R.fn]);
}

inline double rel(cplx a, cplx b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace nlw::testing
