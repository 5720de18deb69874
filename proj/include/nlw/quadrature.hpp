#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nlw/core.hpp"
#include "nlw/grid.hpp"
#include "nlw/testfn.hpp"

namespace nlw {

enum class Sequence { sobol, halton };
enum class ErrorMode { grid_doubling, sequence_splitting };

struct ShellConfig {
    int nodes = 33;              // per spatial axis; even values are raised by one
    double half_extent = 0.0;    // 0 = fitted to the arguments
    std::optional<Eigen::Vector3d> box_center;  // with half_extent > 0: fixed box, independent of the arguments
    double sigmas = 6.0;         // fitted box reaches this many k-space deviations past every center
    double lattice_pad = 2.0;    // periodic lattice size relative to the joint grid extent
};

struct HiddenConfig {
    int nodes = 256;             // base points over all replicas, each used with its antithetic partner
    Sequence sequence = Sequence::sobol;
    std::uint64_t seed = 20240611;
    double envelope_scale = 1.5;
    double cutoff = 8.0;         // in envelope standard deviations, per component
    int replicas = 8;
    double rel_tol = 0.05;
    ErrorMode error_mode = ErrorMode::sequence_splitting;
};

struct QuadratureConfig {
    ShellConfig shell;
    HiddenConfig hidden;
    int threads = 1;
};

enum ResultFlag : unsigned {
    kUnconverged = 1u << 0,
    kOriginExcluded = 1u << 1,
    kTailPessimistic = 1u << 2,
};

struct IntegralResult {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
    long node_count = 0;
    unsigned flags = 0;

    bool unconverged() const { return flags & kUnconverged; }
};

std::string flag_names(unsigned flags);

/// Test function of either family.
using Argument = std::variant<TestFunction, GridFunction>;

/// Trapezoid nodes on the forward (sign = +1) or backward (sign = -1) mass
/// shell, k = (sign * omega_p, p), with the invariant measure folded into w.
struct ShellRule {
    double mass = 0.0;
    int sign = 1;
    Nodes4 k;
    Eigen::VectorXd w;        // all nodes
    Eigen::VectorXd w_coarse; // every other node per axis, zero elsewhere
    std::vector<Eigen::Index> outer, inner;  // two outermost node layers
    std::optional<LatticeNodes> lattice;
    bool origin_excluded = false;

    Eigen::Index size() const { return k.cols(); }
};

/// Tensor trapezoid rule on the spatial box [lo, hi] with n nodes per axis.
ShellRule box_rule(double mass, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int n, int sign = 1);

/// Rule on the nodes of a periodic spatial lattice.
ShellRule lattice_rule(double mass, const Lattice& lattice, int sign = 1);

/// Rule suited to a set of arguments evaluated at k = p + shift. Grid
/// arguments select their shared lattice (independent of the shift);
/// otherwise the box covers every Gaussian term to cfg.sigmas deviations.
ShellRule fit_rule(const std::vector<Argument>& args, double mass, const Vec4& shift, const ShellConfig& cfg,
                   int sign = 1);

/// Transform of a at k = rule.k + shift for every node.
Eigen::VectorXcd sample(const Argument& a, const ShellRule& rule, const Vec4& shift);

/// Trapezoid estimate with error = |fine - coarse| + tail bound.
struct ShellSums {
    Eigen::MatrixXcd fine, coarse;
    Eigen::MatrixXd tail;
    unsigned flags = 0;
};

/// Gram-type shell sums G_ab = sum_n w_n d_n conj(F_na) G_nb, with their
/// coarse counterparts and tail bounds.
ShellSums shell_sums(const ShellRule& rule, const Eigen::MatrixXcd& F, const Eigen::MatrixXcd& G,
                     const Eigen::VectorXd& d);

/// Error of a ShellSums entry.
Eigen::MatrixXd shell_error(const ShellSums& s);

/// Batched Gram sums X^H diag(w D_c) X for every column c of D.
struct GramSums {
    std::vector<Eigen::MatrixXcd> fine;
    std::vector<Eigen::MatrixXd> error;
    unsigned flags = 0;
};

GramSums shell_gram_batch(const ShellRule& rule, const Eigen::MatrixXcd& X, const Eigen::MatrixXd& D);

/// int d^3p / ((2 pi)^3 2 omega) weight(omega, p) over the box [-K, K]^3 + center.
IntegralResult shell_integral(const std::function<cplx(const Vec4&)>& weight, double mass,
                              const QuadratureConfig& cfg, const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

/// (f, g)[u]: integrand conj(f(p + u)) g(p + u) over the forward shell in p.
IntegralResult shifted_ip(const Argument& f, const Argument& g, double mass, const Vec4& u,
                          const QuadratureConfig& cfg);

/// Nonnegative density of a hidden variable, evaluated at u.
using HiddenDensity = std::function<double(const Vec4&)>;

/// One antithetic pair of hidden-variable samples (u and -u).
struct HiddenSample {
    Eigen::VectorXd u;   // 4 * m components
    double w_plus = 0.0;
    double w_minus = 0.0;
};

/// Randomized quasi-Monte-Carlo rule for
///   int F(u_1..u_m) prod_j H_j(u_j) d^4u_j / (2 pi)^4
/// under independent isotropic Gaussian envelopes, one per hidden variable.
class HiddenRule {
public:
    HiddenRule(std::vector<HiddenDensity> densities, std::vector<double> envelope_sigma, const HiddenConfig& cfg);

    int dims() const { return static_cast<int>(densities_.size()); }
    int replicas() const { return replicas_; }
    int points_per_replica() const { return points_; }
    const HiddenConfig& config() const { return cfg_; }
    double cutoff_radius(int j) const { return cfg_.cutoff * sigma_[j]; }

    HiddenSample sample(int replica, int point) const;

private:
    std::vector<HiddenDensity> densities_;
    std::vector<double> sigma_;
    HiddenConfig cfg_;
    int replicas_ = 8;
    int points_ = 32;
    Eigen::MatrixXd base_;    // 4m x points
    Eigen::MatrixXd shifts_;  // 4m x replicas
};

/// Value and statistical error of a hidden integral whose integrand returns
/// a scalar. Each replica is reduced in point order; replicas are then
/// combined in index order, so the result is independent of threading.
IntegralResult hidden_integral(const std::function<cplx(const Eigen::VectorXd&)>& factor_product,
                               const HiddenRule& rule, int threads = 1);

/// Run fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace nlw
