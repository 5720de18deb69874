#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "nlw/commutators.hpp"

namespace nlw {

inline constexpr int kMaxPermanentSize = 20;
inline constexpr int kMaxWickLetters = 16;

/// Ryser's formula with Gray-code updates. Throws for r > kMaxPermanentSize.
cplx permanent(const Eigen::MatrixXcd& M);

/// Value with a first-order error bound.
struct VevResult {
    cplx value{0.0, 0.0};
    double error = 0.0;
    unsigned flags = 0;
    long node_count = 0;
};

/// Per of M with the error bound Per(|M| + E) - Per(|M|).
VevResult permanent_with_error(const Eigen::MatrixXcd& M, const Eigen::MatrixXd& E);

/// <a_f1 .. a_fm a+_g1 .. a+_gn> in the vacuum.
VevResult vev_ladder(const CommutatorModel& model, const std::vector<Argument>& fs, const std::vector<Argument>& gs,
                     const QuadratureConfig& cfg);

enum class LetterKind { annihilate, create, xi };

/// One operator; fn indexes OperatorExpr::functions.
struct Letter {
    LetterKind kind = LetterKind::xi;
    int fn = 0;
};

/// Letters in operator order. No contraction is taken inside a normal-ordered group.
struct Group {
    bool normal_ordered = false;
    std::vector<Letter> letters;
};

struct Monomial {
    cplx coeff{1.0, 0.0};
    std::vector<Group> groups;

    int letter_count() const;
};

/// Linear combination of products of groups.
struct OperatorExpr {
    std::vector<Argument> functions;
    std::vector<Monomial> terms;

    int add_function(const Argument& f);
    int max_letters() const;
    /// Hermitian adjoint: reversed order, a <-> a+, xi_f -> xi_{f*}, conjugated coefficients.
    OperatorExpr adjoint() const;
};

OperatorExpr constant(cplx c);
OperatorExpr annihilate(const Argument& f);
OperatorExpr create(const Argument& f);
OperatorExpr xi(const Argument& f);
OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b);
OperatorExpr operator+(const OperatorExpr& a, const OperatorExpr& b);
OperatorExpr operator*(cplx c, const OperatorExpr& a);
/// Merges the groups of every monomial into one normal-ordered group.
OperatorExpr normal_ordered(const OperatorExpr& a);

/// Two-point values <<A_i, C_j>> between the annihilation parts A and the
/// creation parts C of the letters of an expression, on shared nodes.
struct WickTable {
    std::vector<int> ann;      // per function used by annihilate: row index, or -1
    std::vector<int> ann_xi;   // per function used by xi (annihilation part f*): row index, or -1
    std::vector<int> cre;      // per function used by create or xi: column index, or -1
    Eigen::MatrixXcd value;
    Eigen::MatrixXd error;
    unsigned flags = 0;
    long node_count = 0;
};

WickTable wick_table(const CommutatorModel& model, const OperatorExpr& expr, const QuadratureConfig& cfg);

/// Quasi-free VEV of expr given the two-point table.
VevResult wick_vev(const OperatorExpr& expr, const WickTable& table);

VevResult vev_word(const CommutatorModel& model, const OperatorExpr& expr, const QuadratureConfig& cfg);

/// One monomial lambda * :xi_{T_1[f]} .. xi_{T_k[f]}: of a polynomial zeta; no functionals = constant.
struct ZetaPolyTerm {
    cplx coupling{1.0, 0.0};
    std::vector<FunctionalSpec> functionals;
};

/// Discretized int :phi_{f[u]} phi_{f[-u]}: W(u) d^4u / (2 pi)^4 on a grid closed under u -> -u.
struct ZetaHiddenPair {
    WeightFunction weight;
    std::vector<Vec4> nodes;
    std::vector<double> weights;   // quadrature weights including W(u) / (2 pi)^4
};

/// Symmetric grid of 2 * pairs nodes (u and -u) drawn from a Sobol sequence
/// under a Gaussian envelope of width sigma.
ZetaHiddenPair make_hidden_pair(const WeightFunction& w, int pairs, double sigma, std::uint64_t seed = 20240611);

struct ZetaSpec {
    std::variant<std::vector<ZetaPolyTerm>, ZetaHiddenPair> form;
};

OperatorExpr build_zeta(const ZetaSpec& spec, const Argument& f);

/// <zeta_f+ zeta_g> for the hidden-pair form, summed directly on the grid:
///   sum_ab w_a w_b [<<f[ua],g[ub]>> <<f[-ua],g[-ub]>> + <<f[ua],g[-ub]>> <<f[-ua],g[ub]>>].
/// Every two-point value is its own eval_commutator call.
VevResult zeta_pair_closed_form(const CommutatorModel& model, const ZetaHiddenPair& z, const Argument& f,
                                const Argument& g, const QuadratureConfig& cfg);

struct MomentumResult {
    Vec4 p = Vec4::Zero();         // contravariant components
    Vec4 error = Vec4::Zero();
    cplx norm{0.0, 0.0};
    unsigned flags = 0;

    /// p0 - |p| (>= 0 in the closed forward cone).
    double cone_margin() const { return p(0) - p.tail<3>().norm(); }
};

/// Expected 4-momentum of phi_g |0>, weighting every factor by its wave-number.
MomentumResult momentum_expectation(const CommutatorModel& model, const Argument& g, const QuadratureConfig& cfg);

/// Same quantity from central differences of <<g_y, g_x>> in x at y = 0.
MomentumResult momentum_finite_difference(const CommutatorModel& model, const Argument& g,
                                          const QuadratureConfig& cfg, double h = 1e-3);

struct ThermalConfig {
    double beta = 1.0;
    Vec4 T = Vec4(1.0, 0.0, 0.0, 0.0);
    int terms = 200;
    double tail_tol = 1e-12;

    void validate() const;
};

struct SeriesResult {
    Eigen::MatrixXcd value;      // truncated series, per Gram entry
    Eigen::MatrixXd error;       // quadrature error plus tail bound
    Eigen::MatrixXd tail;
    std::vector<Eigen::MatrixXcd> terms;   // term n = <<f, X^n g>>
    unsigned flags = 0;
    long node_count = 0;

    IntegralResult entry(Eigen::Index a, Eigen::Index b) const;
};

/// Gram matrix of <<f, g>>_beta = <<f, g>> + 2 sum_n <<f, B^n g>>, B^n multiplying
/// every factor by exp(-n beta k.T).
SeriesResult thermal_gram(const CommutatorModel& model, const std::vector<Argument>& args, const ThermalConfig& th,
                          const QuadratureConfig& cfg);

IntegralResult thermal_ip(const CommutatorModel& model, const Argument& f, const Argument& g, const ThermalConfig& th,
                          const QuadratureConfig& cfg);

/// Free-field closed form int conj(f) g coth(beta k.T / 2) on the forward shell.
IntegralResult thermal_free_closed_form(const Argument& f, const Argument& g, double mass, const ThermalConfig& th,
                                        const QuadratureConfig& cfg);

/// Transform of B^n f for a Gaussian-family f (again a Gaussian sum).
TestFunction beta_translate(const TestFunction& f, double beta, const Vec4& T);

enum class ThermalOrder { annihilators_first, creators_first };

/// omega_beta(a_f1 .. a_fm a+_g1 .. a+_gn) = delta_mn Per[1/2 <<f_i,g_j>>_beta + 1/2 <<f_i,g_j>>], and
/// omega_beta(a+_g1 .. a+_gn a_f1 .. a_fm) with the difference 1/2 <<>>_beta - 1/2 <<>>.
VevResult thermal_vev(const CommutatorModel& model, const std::vector<Argument>& fs, const std::vector<Argument>& gs,
                      const ThermalConfig& th, const QuadratureConfig& cfg,
                      ThermalOrder order = ThermalOrder::annihilators_first);

/// exp(-1/2 sum_jk lambda_j lambda_k <<f_j*, f_k>>) in the vacuum, or with <<>>_beta when th is given.
VevResult characteristic(const CommutatorModel& model, const std::vector<Argument>& fs,
                         const std::vector<double>& lambdas, const QuadratureConfig& cfg,
                         const ThermalConfig* th = nullptr);

namespace contraction {
struct BetaTranslation { double beta = 1.0; Vec4 T = Vec4(1.0, 0.0, 0.0, 0.0); };
struct Amplitude { double alpha = 1.0; };
/// Multiplier chi(k) on each factor's transform, 0 < chi <= 1 on the forward cone.
struct Custom { std::function<double(const Vec4&)> chi; std::string name = "custom"; };
}  // namespace contraction

struct ContractionSpec {
    std::variant<contraction::BetaTranslation, contraction::Amplitude, contraction::Custom> map;
    int terms = 200;
    double tail_tol = 1e-12;
};

/// <<f, g>> + 2 sum_n <<f, X^n g>> with a ratio-test tail bound.
IntegralResult contracted_state_ip(const CommutatorModel& model, const Argument& f, const Argument& g,
                                   const ContractionSpec& X, const QuadratureConfig& cfg);

/// Series terms <<f, X^n g>> for n = 0..terms (channels of one Gram pass).
SeriesResult contraction_series(const CommutatorModel& model, const std::vector<Argument>& args,
                                const ContractionSpec& X, const QuadratureConfig& cfg);

}  // namespace nlw
