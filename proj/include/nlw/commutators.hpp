#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "nlw/quadrature.hpp"

namespace nlw {

enum class KernelKind { gaussian_of_invariant, window_of_invariant, frame_window };

/// Function of a hidden wave-number u from the closed-form catalog:
///   gaussian_of_invariant  amplitude * exp(-(u.u)^2 / scale^2)
///   window_of_invariant    amplitude on lower <= u.u <= upper, else 0
///   frame_window           amplitude * exp(-1/2 sum_mu (u_mu / frame_sigma_mu)^2)  (not invariant)
/// Every kind is even in u.
struct Kernel {
    KernelKind kind = KernelKind::gaussian_of_invariant;
    double amplitude = 1.0;
    double scale = 1.0;
    double lower = -1.0;
    double upper = 1.0;
    Vec4 frame_sigma = Vec4::Ones();

    double operator()(const Vec4& u) const;
    bool invariant() const { return kind != KernelKind::frame_window; }
    void validate() const;
};

/// Hidden propagator: a catalog kernel with nonnegative amplitude.
struct HiddenPropagator : Kernel {
    void validate() const;
};

/// Weight function for hidden-pair zeta operators: amplitude may be negative.
struct WeightFunction : Kernel {};

HiddenPropagator gaussian_of_invariant(double scale, double amplitude = 1.0);
HiddenPropagator window_of_invariant(double lower, double upper, double amplitude = 1.0);
HiddenPropagator frame_window(const Vec4& sigma, double amplitude = 1.0);

namespace functional {
struct Identity {};
/// Pointwise product of p copies of the input; conj[i] selects f* for copy i.
struct Power {
    int p = 2;
    std::vector<bool> conj;
};
/// Result has transform f(k + u).
struct Modulate { Vec4 u; };
struct PreTranslate { Vec4 x; };
}  // namespace functional

using FunctionalStep = std::variant<functional::Identity, functional::Power, functional::Modulate,
                                    functional::PreTranslate>;

/// Composable list of catalog functionals, applied in order.
struct FunctionalSpec {
    std::vector<FunctionalStep> steps;

    /// Degree of homogeneity in the input function.
    int degree() const;
    /// Net displacement of the support.
    Vec4 displacement() const;
    bool moves_support() const { return displacement().cwiseAbs().maxCoeff() != 0.0; }
    /// Wave-number offset o with S[f] built from the transform of f at k + o;
    /// translating f by x multiplies S[f]_x by exp(i o.x).
    Vec4 momentum_offset() const;
};

inline constexpr std::size_t kMaxFunctionalTerms = 4096;

Argument apply_functional(const FunctionalSpec& s, const Argument& f, std::size_t max_terms = kMaxFunctionalTerms);
TestFunction apply_functional(const FunctionalSpec& s, const TestFunction& f,
                              std::size_t max_terms = kMaxFunctionalTerms);
GridFunction apply_functional(const FunctionalSpec& s, const GridFunction& f);

/// One shell factor (S[f], S[g])[v] of a commutator term.
struct FactorSpec {
    double mass = 1.0;
    /// Integrand weight sum_j c_j (k.v)^(2j), k the argument of the test functions.
    std::vector<double> derivative_coeffs{1.0};
    FunctionalSpec functional;

    int derivative_degree() const { return 2 * (static_cast<int>(derivative_coeffs.size()) - 1); }
};

struct CommutatorTerm {
    double weight = 1.0;
    std::vector<FactorSpec> factors;
    std::vector<HiddenPropagator> hidden;
    Eigen::MatrixXd A;  // factors x hidden
};

struct CommutatorModel {
    std::string name = "model";
    std::vector<CommutatorTerm> terms;
    bool spectrum_guard = true;

    /// Throws DomainError on the first violated invariant.
    void validate() const;
    bool column_sums_zero(double tol = 1e-12) const;
    bool hiddens_even_invariant() const;
    double min_mass() const;
};

CommutatorModel free_model(double mass = 1.0);
/// [a_f, a_g^+] = (f, g)^power.
CommutatorModel power_model(int power, double mass = 1.0);
/// int (f, g)[u] (f, g)[lambda u] H(u) d^4u / (2 pi)^4.
CommutatorModel hidden_pair_model(const HiddenPropagator& h, double lambda = -1.0, double mass = 1.0,
                                  std::vector<double> derivative_coeffs = {1.0});

/// Per-factor node multiplier for series and moment channels. Writes a
/// weight per node given k = p + v and returns a log-scale constant.
struct MultiplierInput {
    const Nodes4& k;
    const Vec4& v;
    const Vec4& offset;  // momentum offset of the factor's functional
    int degree;          // homogeneity degree of the factor's functional
};
using NodeMultiplier = std::function<double(const MultiplierInput&, Eigen::VectorXd&)>;

/// Channels evaluated in one pass over the quadrature nodes. Channel c is
///   sum over monomials of prod_i (factor i with multiplier monomial[i]).
struct ChannelSpec {
    std::vector<NodeMultiplier> multipliers;
    std::function<std::vector<std::vector<std::vector<int>>>(int n_factors)> channels;
    int count = 1;
};

ChannelSpec plain_channel();

struct GramResult {
    Eigen::MatrixXcd value;
    Eigen::MatrixXd shell_error;
    Eigen::MatrixXd stat_error;
    Eigen::MatrixXi flags;
    long node_count = 0;

    Eigen::MatrixXd error() const;
    unsigned all_flags() const;
    IntegralResult entry(Eigen::Index a, Eigen::Index b) const;
};

/// Matrix of <<args_a, args_b>> (and any extra channels) on shared nodes.
std::vector<GramResult> gram_channels(const CommutatorModel& model, const std::vector<Argument>& args,
                                      const QuadratureConfig& cfg, const ChannelSpec& channels);

GramResult gram(const CommutatorModel& model, const std::vector<Argument>& args, const QuadratureConfig& cfg);

/// Hidden-variable rule gram uses for one term on these arguments.
HiddenRule term_hidden_rule(const CommutatorModel& model, std::size_t term, const std::vector<Argument>& args,
                            const QuadratureConfig& cfg);

IntegralResult eval_commutator(const CommutatorModel& model, const Argument& f, const Argument& g,
                               const QuadratureConfig& cfg);

/// Free inner product (f, g) on the shell of the given mass.
IntegralResult base_ip(const Argument& f, const Argument& g, double mass, const QuadratureConfig& cfg);

/// Charged scalar doublet f = (f1, f2).
struct ChargedDoublet {
    Argument f1;
    Argument f2;

    /// f^c = (f2*, f1*).
    ChargedDoublet conjugate() const;
    /// f = f^c, i.e. f2 = f1* (checked on the representation).
    bool observable(double tol = 1e-12) const;
};

/// (F, G) = (f1, g1) + (f2, g2).
IntegralResult charged_ip(const ChargedDoublet& F, const ChargedDoublet& G, double mass,
                          const QuadratureConfig& cfg);
/// [phi_F, phi_G] = (F^c, G) - (G^c, F).
IntegralResult charged_commutator(const ChargedDoublet& F, const ChargedDoublet& G, double mass,
                                  const QuadratureConfig& cfg);

/// Entrywise equality of the stored representations.
bool same_representation(const Argument& a, const Argument& b, double tol = 1e-12);

Argument star(const Argument& a);
Argument translate(const Argument& a, const Vec4& x);
Argument scale(const Argument& a, cplx s);

}  // namespace nlw
