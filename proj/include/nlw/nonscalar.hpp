#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nlw/commutators.hpp"

namespace nlw {

/// Dirac-representation gamma matrices with metric (+,-,-,-).
/// Charge conjugation is U^c = i gamma^2 U*, a signed permutation of the
/// conjugated components in this representation.
class GammaAlgebra {
public:
    static const GammaAlgebra& dirac();

    const Mat4c& gamma(int mu) const { return g_[mu]; }
    const Mat4c& gamma5() const { return g5_; }
    /// i gamma^2.
    const Mat4c& conjugation() const { return c_; }
    static const char* representation() { return "dirac"; }

    /// k_mu gamma^mu for contravariant k.
    Mat4c slash(const Vec4& k) const;
    /// conj(a)^T gamma^0.
    Eigen::Matrix<cplx, 1, 4> bar(const Vec4c& a) const;
    Vec4c conjugate(const Vec4c& a) const;

    /// Largest entrywise deviation of {g^mu, g^nu} = 2 g^{mu nu}, (g5)^2 = 1 and {g5, g^mu} = 0.
    double clifford_residual() const;

private:
    GammaAlgebra();
    std::array<Mat4c, 4> g_;
    Mat4c g5_;
    Mat4c c_;
};

struct SpinorTestFunction {
    std::array<Argument, 4> c;

    /// Component-wise i gamma^2 U*.
    SpinorTestFunction charge_conjugate() const;
    SpinorTestFunction translated(const Vec4& x) const;
    std::vector<Argument> components() const { return {c.begin(), c.end()}; }
};

SpinorTestFunction charge_conjugate(const SpinorTestFunction& U);

/// Relative residuals of the conjugation identities over random constant spinor pairs,
/// with the signs as stated:
///   vector        bar(A^c) g^mu B^c       =  bar(B) g^mu A
///   scalar        bar(A^c) B^c            = -bar(B) A
///   axial         bar(A^c) g^mu g5 B^c    =  bar(B) g^mu g5 A
///   pseudoscalar  bar(A^c) g5 B^c         = -bar(B) g5 A
/// axial_opposite tests the axial identity with the opposite sign.
struct IdentityResiduals {
    double vector = 0.0;
    double scalar = 0.0;
    double axial = 0.0;
    double pseudoscalar = 0.0;
    double axial_opposite = 0.0;

    double max() const { return std::max({vector, scalar, axial, pseudoscalar}); }
};

IdentityResiduals identity_suite(int pairs = 100, std::uint64_t seed = 7);

/// Vertex k-slash + alpha_1 m + alpha_2 m i g5 + alpha_3 k-slash g5.
struct AlphaVector {
    double a1 = 1.0;
    double a2 = 0.0;
    double a3 = 0.0;

    double norm2() const { return a1 * a1 + a2 * a2 + a3 * a3; }
    bool admissible(double tol = 1e-12) const { return norm2() <= 1.0 + tol; }
    Mat4c vertex(const Vec4& k, double mass) const;
};

enum class DiracPart { plus, minus, full };

/// (U, V)_part[u] with p on the mass shell and the transforms at p + u:
///   plus   int theta(p0)  bar(U(p+u)) Gamma(p) V(p+u)
///   minus -int theta(-p0) bar(U(p+u)) Gamma(p) V(p+u)
///   full   plus + minus
/// With alpha = (1, 0, 0) and u = 0, full is the anticommutator kernel.
IntegralResult dirac_ip(const SpinorTestFunction& U, const SpinorTestFunction& V, DiracPart part,
                        const AlphaVector& alpha, double mass, const QuadratureConfig& cfg,
                        const Vec4& u = Vec4::Zero());

/// Smallest eigenvalue of gamma^0 Gamma(k) over the nodes of a rule.
struct VertexWitness {
    double min_eigenvalue = 0.0;
    Vec4 k = Vec4::Zero();
    double tolerance = 0.0;
    bool certified_negative = false;
};

VertexWitness vertex_psd_witness(const AlphaVector& alpha, const ShellRule& rule);

/// On-shell generators i g5, i k-slash / m and k-slash g5 / m (index 0, 1, 2). Each squares to -1.
Mat4c su2_generator(int which, const Vec4& k, double mass);

/// |(U', V')_{alpha+} - (U, V)_{alpha+}| with U', V' = exp(theta G(p)) applied node-wise.
double su2_residual(const SpinorTestFunction& U, const SpinorTestFunction& V, int which, double theta,
                    const AlphaVector& alpha, double mass, const QuadratureConfig& cfg);

enum class Statistics { fermionic, bosonic };

/// fermionic (p odd): [(V,U)_+]^p + [(V,U)_-]^p; bosonic (p even): [(V,U)_-]^p - [(V,U)_+]^p.
IntegralResult dirac_power_commutator(const SpinorTestFunction& U, const SpinorTestFunction& V, int p,
                                      Statistics stats, double mass, const QuadratureConfig& cfg);

/// (U, V)_+ + int (U,V)_{a+}[u] (U,V)_{a+}[-u] delta(|a|^2 - 1) d^3a H(u) d^4u / (2 pi)^4 * (U, V)_{0+}.
struct DiracPreset {
    HiddenPropagator hidden;
    double mass = 1.0;
};

/// The 12 vertices of the icosahedron on the unit sphere.
const std::array<Eigen::Vector3d, 12>& icosahedral_rule();

IntegralResult dirac_preset_ip(const SpinorTestFunction& U, const SpinorTestFunction& V, const DiracPreset& preset,
                               const QuadratureConfig& cfg);

/// Components f_[01], f_[02], f_[03], f_[12], f_[13], f_[23].
struct BivectorTestFunction {
    std::array<Argument, 6> c;

    /// Storage index of the pair {a, b}, a != b.
    static int slot(int a, int b);
    std::vector<Argument> components() const { return {c.begin(), c.end()}; }
};

/// -int conj(f_[a mu](p+u)) p^a g^{mu nu} p^b g_[b nu](p+u) on the forward shell.
IntegralResult em_ip(const BivectorTestFunction& F, const BivectorTestFunction& G, double mass,
                     const QuadratureConfig& cfg, const Vec4& u = Vec4::Zero());

/// Grid spinor U, phase u and test connection conn_mu, all on one grid.
struct GaugeTriplet {
    SpinorTestFunction U;
    GridFunction u;
    std::array<GridFunction, 4> conn;

    void validate() const;
    SpinorTestFunction dressed() const;
    /// d_mu u - conn_mu.
    std::array<GridFunction, 4> invariant_connection() const;
};

/// (U, u, conn) -> (exp(i phi) U, u - phi, conn - d phi).
GaugeTriplet gauge_transform(const GaugeTriplet& T, const GridFunction& phi);

enum class GaugeKind { matter, connection };

/// matter: (exp(iu) U, exp(iv) V)_+; connection: massless shell integral of
/// conj(k^mu w_mu) k^nu w'_nu with w = d u - conn.
IntegralResult gauge_ip(const GaugeTriplet& T1, const GaugeTriplet& T2, GaugeKind kind, double mass,
                        const QuadratureConfig& cfg);

/// [exp(iu) U1]^c = exp(iu) U2 on the stored grids.
bool fermionic_observable(const SpinorTestFunction& U1, const SpinorTestFunction& U2, const GridFunction& u,
                          double tol = 1e-12);

}  // namespace nlw
