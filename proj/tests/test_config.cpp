#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "support.hpp"

using namespace nlw;
using nlw::testing::Gen;

namespace {

const std::string kMinimal = R"(schema_version: nlw-model/1
name: minimal
terms:
  - weight: 1.0
    factors:
      - {mass: 1.0}
functions:
  f:
    gaussian:
      - {center: [1.2, 0.0, 0.0, 0.0], width: [2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2]}
)";

}  // namespace

TEST_CASE("every bundled config parses")
{
    int models = 0;
    for (const auto& e : std::filesystem::directory_iterator(NLW_CONFIG_DIR)) {
        const std::string p = e.path().string();
        if (p.ends_with(".yaml")) {
            const ModelConfig m = load_model(p);
            CHECK_FALSE(m.name.empty());
            CHECK(m.digest.size() == 16);
            CHECK_NOTHROW(m.model.validate());
            ++models;
        } else if (p.ends_with(".ops.json")) {
            CHECK_NOTHROW(load_ops(p));
        }
    }
    CHECK(models >= 8);
}

TEST_CASE("minimal model")
{
    const ModelConfig m = parse_model(kMinimal);
    CHECK(m.name == "minimal");
    REQUIRE(m.function_names.size() == 1);
    const TestFunction& f = std::get<TestFunction>(m.function("f"));
    CHECK(f.terms()[0].width(1, 1) == 2.0);
    CHECK_THROWS_AS(m.function("g"), ConfigError);
}

TEST_CASE("schema and key errors")
{
    std::string text = kMinimal;
    CHECK_THROWS_AS(parse_model(text.substr(text.find('\n') + 1)), ConfigError);
    std::string wrong = kMinimal;
    wrong.replace(wrong.find("nlw-model/1"), 11, "nlw-model/9");
    CHECK_THROWS_AS(parse_model(wrong), ConfigError);
    CHECK_THROWS_AS(parse_model(kMinimal + "colour: blue\n"), ConfigError);
    std::string badkey = kMinimal;
    badkey.replace(badkey.find("{mass: 1.0}"), 11, "{mass: 1.0, spin: 2}");
    CHECK_THROWS_AS(parse_model(badkey), ConfigError);
    std::string neg = kMinimal;
    neg.replace(neg.find("weight: 1.0"), 11, "weight: -1.0");
    CHECK_THROWS_AS(parse_model(neg), Error);
}

TEST_CASE("test functions survive an emit and parse round trip (property)")
{
    Gen gen(81);
    for (int t = 0; t < 20; ++t) {
        const TestFunction f = gen.packet(gen.integer(1, 3));
        const TestFunction g = parse_test_function(emit_test_function(f));
        CHECK(same_representation(f, g, 0.0));
    }
}

TEST_CASE("ops files")
{
    CHECK_NOTHROW(parse_ops(R"({"schema_version": "nlw-ops/1", "check": {}})"));
    CHECK_THROWS_AS(parse_ops(R"({"schema_version": "nlw-ops/1", "plot": {}})"), ConfigError);
    CHECK_THROWS_AS(parse_ops(R"({"check": {}})"), ConfigError);
    CHECK_THROWS_AS(parse_ops("not json"), ConfigError);
    const OpsConfig o = parse_ops(R"({"schema_version": "nlw-ops/1", "vev": {"x": 1}})");
    CHECK(o.section("vev")["x"] == 1);
    CHECK(o.section("scan").empty());
}

TEST_CASE("tolerance overrides")
{
    Tolerances t;
    set_tolerance(t, "cluster", 0.5);
    set_tolerance(t, "error_factor", 4.0);
    CHECK(t.cluster == 0.5);
    CHECK(t.error_factor == 4.0);
    CHECK_THROWS_AS(set_tolerance(t, "speed", 1.0), ConfigError);
    CHECK(to_json(t)["cluster"] == 0.5);
}

TEST_CASE("operator expressions from JSON")
{
    const ModelConfig m = parse_model(kMinimal);
    const json j = json::parse(R"({"terms": [{"coeff": [0.0, 2.0], "groups": [
        {"normal_ordered": true, "letters": [["xi", "f"], ["xi", "f"]]},
        {"normal_ordered": false, "letters": [["a", "f"], ["a+", "f"]]}]}]})");
    const OperatorExpr e = parse_operator(j, m);
    REQUIRE(e.terms.size() == 1);
    CHECK(e.terms[0].coeff == cplx(0.0, 2.0));
    CHECK(e.terms[0].letter_count() == 4);
    CHECK(e.functions.size() == 1);
    CHECK(e.terms[0].groups[0].normal_ordered);
    CHECK(e.terms[0].groups[1].letters[1].kind == LetterKind::create);
    CHECK_THROWS_AS(parse_operator(json::parse(R"({"terms": [{"coeff": [1, 0], "groups": [
        {"normal_ordered": false, "letters": [["b", "f"]]}]}]})"), m), ConfigError);
    CHECK_THROWS_AS(parse_operator(json::parse(R"({"terms": [{"coeff": [1, 0], "groups": [
        {"normal_ordered": false, "letters": [["a", "nope"]]}]}]})"), m), ConfigError);
}

TEST_CASE("atomic writes and canonical dumps")
{
    const auto dir = std::filesystem::temp_directory_path() / "nlw_test_config";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "out.json").string();
    write_atomic(path, "first\n");
    write_atomic(path, dump(json{{"a", 1}}));
    CHECK(read_file(path) == "{\n  \"a\": 1\n}\n");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
}
