#pragma once

#include <string>
#include <vector>

#include "nlw/fock.hpp"

namespace nlw {

enum class Verdict { pass, fail, unconverged, rejected };

std::string verdict_name(Verdict v);

/// One checked condition. tolerance is never below the error budget.
struct AxiomEntry {
    std::string name;          // Pos, H, Loc, Sp, CD, PI, Lorentz
    double residual = 0.0;
    double tolerance = 0.0;
    double error_budget = 0.0; // combined quadrature error in residual units
    Verdict verdict = Verdict::pass;
    std::vector<std::string> witnesses;   // input digests
    std::string mode;          // e.g. "certified", "approximate, tail-bounded"
    std::string note;
    double cutoff_sensitivity = 0.0;      // Lorentz only
};

struct Tolerances {
    double translation = 1e-12;
    double hermiticity = 1e-10;
    double positivity = 1e-10;
    double error_factor = 3.0;   // Loc, Sp, Lorentz: multiple of the error budget
    double cluster = 1e-3;
    double cone = 1e-9;          // absolute forward-cone margin floor for Sp
};

struct AxiomReport {
    std::string model_digest;
    std::vector<AxiomEntry> entries;

    bool all_pass() const;
    bool any_unconverged() const;
    /// 0 no failure, 1 a failure, 2 unconverged without failure. Rejected checks are not failures.
    int exit_code() const;
};

/// FNV-1a digest of the exact representation, as 16 hex digits.
std::string digest(const Argument& f);
std::string digest_bytes(const std::string& bytes);

AxiomEntry check_positivity(const CommutatorModel& model, const std::vector<Argument>& fs, const QuadratureConfig& cfg,
                            const Tolerances& tol = {});

AxiomEntry check_hermiticity(const CommutatorModel& model, const Argument& f, const Argument& g,
                             const QuadratureConfig& cfg, const Tolerances& tol = {});

/// Certified check on compact grid functions: rejected unless the declared
/// supports (and their lattice images) are strictly space-like separated.
AxiomEntry check_locality(const CommutatorModel& model, const GridFunction& f, const GridFunction& g,
                          const QuadratureConfig& cfg, const Tolerances& tol = {});

/// Approximate check on Gaussians; the effective-support overlap at eps is
/// folded into the tolerance.
AxiomEntry check_locality(const CommutatorModel& model, const TestFunction& f, const TestFunction& g, double eps,
                          const QuadratureConfig& cfg, const Tolerances& tol = {});

AxiomEntry check_spectrum(const CommutatorModel& model, const std::vector<Argument>& gs, const QuadratureConfig& cfg,
                          const Tolerances& tol = {}, std::vector<MomentumResult>* momenta = nullptr);

struct ClusterCurve {
    std::vector<double> distance;
    std::vector<double> value;
    std::vector<double> error;
    std::vector<unsigned> flags;
    int knee = 0;

    std::string csv() const;
};

/// |<<f_{d dir}, g>>| over the distances; knee = index of the curve maximum.
AxiomEntry check_cluster(const CommutatorModel& model, const Argument& f, const Argument& g, const Vec4& direction,
                         const std::vector<double>& distances, const QuadratureConfig& cfg, const Tolerances& tol = {},
                         ClusterCurve* curve = nullptr);

AxiomEntry check_translation(const CommutatorModel& model, const Argument& f, const Argument& g, const Vec4& x,
                             const QuadratureConfig& cfg, const Tolerances& tol = {});

/// Lorentz check for Gaussians and invariant hiddens. The hidden cutoff is
/// rerun at 1.5x and the change is reported and added to the tolerance.
AxiomEntry check_boost(const CommutatorModel& model, const TestFunction& f, const TestFunction& g, const Mat4& L,
                       const QuadratureConfig& cfg, const Tolerances& tol = {});

}  // namespace nlw
