#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlw/axioms.hpp"
#include "nlw/nonscalar.hpp"

namespace nlw {

inline constexpr const char* kModelSchema = "nlw-model/1";
inline constexpr const char* kOpsSchema = "nlw-ops/1";
inline constexpr const char* kReportSchema = "nlw-report/1";

using json = nlohmann::json;

/// Parsed model file: the commutator model, quadrature settings and named objects.
struct ModelConfig {
    std::string name;
    CommutatorModel model;
    QuadratureConfig quadrature;
    std::vector<std::string> function_names;   // declaration order
    std::map<std::string, Argument> functions;
    std::map<std::string, FunctionalSpec> functionals;
    std::map<std::string, SpinorTestFunction> spinors;
    std::map<std::string, BivectorTestFunction> bivectors;
    std::map<std::string, GaugeTriplet> triplets;
    std::optional<ThermalConfig> thermal;
    std::optional<DiracPreset> dirac;
    std::string digest;                        // of the file bytes

    const Argument& function(const std::string& name) const;
    const GridFunction& grid_function(const std::string& name) const;
    const FunctionalSpec& functional(const std::string& name) const;
};

/// Throws ConfigError on a missing or unknown schema_version, unknown keys or bad values.
ModelConfig parse_model(const std::string& text);
ModelConfig load_model(const std::string& path);

/// One Gaussian-family function as a YAML flow sequence of
/// {coeff_re, coeff_im, center[4], width[16], translation[4]} and back.
std::string emit_test_function(const TestFunction& f);
TestFunction parse_test_function(const std::string& yaml);

/// Ops file: JSON with a schema_version and one object per command.
struct OpsConfig {
    json doc = json::object();
    std::string digest;

    /// Section for a command, or an empty object.
    const json& section(const std::string& command) const;
};

OpsConfig parse_ops(const std::string& text);
OpsConfig load_ops(const std::string& path);

/// Operator expression from {"terms": [{"coeff": [re, im], "groups": [{"normal_ordered": b,
/// "letters": [["xi" | "a" | "a+", name], ...]}]}]}. Names refer to model functions.
OperatorExpr parse_operator(const json& j, const ModelConfig& m);

/// {"form": "poly", "terms": [{"coupling": [re, im], "functionals": [names]}]} or
/// {"form": "hidden_pair", "weight": kernel, "pairs": n, "sigma": s, "seed": n}.
ZetaSpec parse_zeta(const json& j, const ModelConfig& m);

/// Strict accessors for ops objects.
void require_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where);
Vec4 json_vec4(const json& j, const std::string& where);

/// Tolerance override by name: translation, hermiticity, positivity, error_factor, cluster, cone.
void set_tolerance(Tolerances& t, const std::string& name, double value);

json to_json(const IntegralResult& r);
json to_json(const QuadratureConfig& q);
json to_json(const AxiomEntry& e);
json to_json(const Tolerances& t);
json complex_json(cplx z);

/// Canonical text form: two-space indent, trailing newline.
std::string dump(const json& j);

std::string read_file(const std::string& path);
/// Write to a temporary sibling and rename over the target.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace nlw
