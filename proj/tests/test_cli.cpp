/**
 * @file  test_cli.cpp
 * @brief Spec-file parsing, command dispatch, report shape, exit codes, and
 *        artifact generation.
 *
 * Oracle notes:
 *  - FNV-1a 64 of the empty string is the offset basis 0xcbf29ce484222325
 *    by definition (no bytes are mixed in).
 *  - The affine1 fixture frames satisfy [A1, A2] = +A2, [B1, B2] = -B2 and
 *    centralize each other (direct bracket computation), so the reciprocal
 *    command must pass all three phases.
 *  - The lift example over the liouville fixture integrates a genuine
 *    solution of z_xy = exp(z); the surface starts at z = -2 (the z-box
 *    center), where exp(z) ~ 0.14 keeps all jet coordinates order-one over
 *    the unit parameter square, so the local-stencil residual is dominated
 *    by the h^2 truncation ~ 1e-8 and must stay far below 1e-6.
 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "eds/cli.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

using namespace eds;
using json = nlohmann::json;

namespace {

std::string fixture(const std::string& name) {
    return std::string(EDS_FIXTURE_DIR) + "/" + name;
}

/// Minimal valid spec text, used as the base for grammar-error mutations.
const char* kMinimal = "eds-spec 1\n"
                       "name tiny\n"
                       "coords x y\n"
                       "field_F d/dx\n"
                       "field_G d/dy\n";

std::string strip_generated_at(const std::string& report) {
    std::istringstream in(report);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("\"generated_at\"") == std::string::npos) {
            out << line << '\n';
        }
    }
    return out.str();
}

} // namespace

// ===========================================================================
// Spec-file parsing
// ===========================================================================

TEST_CASE("load_system_spec: liouville fixture") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    CHECK(spec.name == "liouville");
    CHECK(spec.coordinates.size() == 7);
    CHECK(spec.f_generators.size() == 2);
    CHECK(spec.g_generators.size() == 2);
    CHECK(spec.f_invariants.size() == 2);
    CHECK(spec.g_invariants.size() == 2);
    CHECK(spec.has_invariants());
    CHECK(spec.residual == "z_xy - exp(z)");

    // Per-coordinate box overrides land on the right chart axes.
    const ChartPtr chart = spec.make_chart();
    CHECK(chart->dim() == 7);
    CHECK(chart->box[0][0] == 0.5);
    CHECK(chart->box[0][1] == 1.5);
    CHECK(chart->box[2][0] == -3.0); // z
    CHECK(chart->box[2][1] == -1.0);
    CHECK(chart->box[3][0] == -1.0); // p
    CHECK(chart->box[5][0] == 0.0);  // r

    // Realization round-trips into working library objects.
    const DecomposableSystem sys = spec.make_system(chart);
    CHECK(sys.system_class() == SystemClass{3, 2, 2});
    const InvariantSet inv = spec.make_invariants(chart);
    CHECK(inv.for_f.size() == 2);
    CHECK(inv.for_g.size() == 2);
}

TEST_CASE("load_system_spec: wave fixture has five coordinates") {
    const SystemSpecFile spec = load_system_spec(fixture("wave.eds"));
    CHECK(spec.coordinates.size() == 5);
    CHECK(spec.coordinates[0] == "x");
    CHECK(spec.coordinates[4] == "q");
    CHECK(spec.f_generators.size() == 2);
    CHECK(spec.g_generators.size() == 2);
}

TEST_CASE("parse_system_spec: undeclared symbol is named with its line") {
    const std::string text = "eds-spec 1\n"
                             "name t\n"
                             "coords x y\n"
                             "field_F d/dx + w*d/dy\n"
                             "field_G d/dy\n";
    try {
        parse_system_spec(text, "inline.eds");
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'w'") != std::string::npos);
        CHECK(msg.find("inline.eds:4") != std::string::npos);
        CHECK(e.line() == 4);
    }
}

TEST_CASE("parse_system_spec: grammar errors carry position info") {
    // Missing version header.
    CHECK_THROWS_AS(parse_system_spec("name t\ncoords x\nfield_F d/dx\nfield_G d/dx\n",
                                      "m.eds"),
                    SpecError);

    // Unknown key.
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "marmalade 3\n", "m.eds"),
                    SpecError);

    // Duplicate scalar key.
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "name again\n", "m.eds"),
                    SpecError);

    // Duplicate coordinate.
    CHECK_THROWS_AS(
        parse_system_spec("eds-spec 1\nname t\ncoords x x\nfield_F d/dx\nfield_G d/dx\n",
                          "m.eds"),
        SpecError);

    // Malformed box (lo >= hi).
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "box 2 -2\n", "m.eds"),
                    SpecError);

    // Box for a coordinate that does not exist.
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "box zz 0 1\n", "m.eds"),
                    SpecError);

    // Invariants must come for both sides or neither.
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "invariant_F y\n", "m.eds"),
                    SpecError);

    // Seed must be a full unsigned integer token.
    CHECK_THROWS_AS(parse_system_spec(std::string(kMinimal) + "seed 12x\n", "m.eds"),
                    SpecError);

    // Missing file reports the path with line 0.
    try {
        load_system_spec("/nonexistent/zzz.eds");
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.line() == 0);
    }
}

TEST_CASE("parse_system_spec: exclusions and seed are honored") {
    const SystemSpecFile spec = load_system_spec(fixture("goursat_k2.eds"));
    CHECK(spec.exclusions.size() == 1);
    const ChartPtr chart = spec.make_chart();
    CHECK(chart->exclusions.size() == 1);
    CHECK(chart->box[0][0] == 0.5);
    CHECK(chart->box[2][0] == -2.0); // z keeps the default box

    const SystemSpecFile seeded =
        parse_system_spec(std::string(kMinimal) + "seed 42\n", "m.eds");
    CHECK(seeded.seed == 42);
}

TEST_CASE("input_digest: FNV-1a 64 with the standard offset basis") {
    CHECK(input_digest("") == "fnv1a64:cbf29ce484222325");
    CHECK(input_digest("a") != input_digest("b"));
    CHECK(input_digest("abc") == input_digest("abc"));
}

// ===========================================================================
// Commands
// ===========================================================================

TEST_CASE("run_command: check liouville is ok with class (3,2,2)") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    const CliResult res = run_command("check", spec, CliOptions{});
    CHECK(res.exit_code == 0);

    const json j = json::parse(res.json);
    CHECK(j["tool"] == "eds");
    CHECK(j["command"] == "check");
    CHECK(j["decomposable"]["status"] == "ok");
    CHECK(j["decomposable"]["class"] == json::array({3, 2, 2}));
    CHECK(j["invariant_counts"]["F"]["count"] == 2);
    CHECK(j["invariant_counts"]["F"]["needed"] == 2);
    CHECK(j["invariant_counts"]["G"]["count"] == 2);
    CHECK(j["darboux"]["status"] == "ok");
    CHECK(j["exit_code"] == 0);
    CHECK(res.text.find("class (3,2,2)") != std::string::npos);
}

TEST_CASE("run_command: check sine-gordon fails on the invariant counts") {
    const SystemSpecFile spec = load_system_spec(fixture("sine_gordon.eds"));
    const CliResult res = run_command("check", spec, CliOptions{});
    CHECK(res.exit_code == 1);

    const json j = json::parse(res.json);
    CHECK(j["decomposable"]["status"] == "ok"); // decomposable, class (3,2,2) ...
    CHECK(j["decomposable"]["class"] == json::array({3, 2, 2}));
    CHECK(j["invariant_counts"]["F"]["count"] == 1); // ... but not Darboux
    CHECK(j["invariant_counts"]["F"]["status"] == "fail");
    const std::string detail = j["invariant_counts"]["F"]["detail"];
    CHECK(detail.find("count_invariants(F) = 1") != std::string::npos);
    CHECK(detail.find("rank G = 2") != std::string::npos);
}

TEST_CASE("run_command: symmetries of the wave fixture") {
    const SystemSpecFile spec = load_system_spec(fixture("wave.eds"));
    const CliResult res = run_command("symmetries", spec, CliOptions{});
    CHECK(res.exit_code == 0);

    const json j = json::parse(res.json);
    CHECK(j["projection"]["b1"] == json::array({"x", "p"}));
    CHECK(j["projection"]["b2"] == json::array({"y", "q"}));
    CHECK(j["projection"]["fiber_dim"] == 1);
    CHECK(j["projection"]["fiber_coordinates"] == json::array({"z"}));

    for (const char* side : {"tangential_frame_F", "tangential_frame_G"}) {
        CHECK(j[side]["fingerprint"]["dimension"] == 1);
        CHECK(j[side]["fingerprint"]["abelian"] == true);
        CHECK(j[side]["fingerprint"]["certification"] == "symbolic");
    }
    CHECK(j["system_symmetries"] == json::array({"d/dz"}));
}

TEST_CASE("run_command: symmetries of liouville reports sl(2)-sized frames "
          "and an honest indeterminate normalization") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    const CliResult res = run_command("symmetries", spec, CliOptions{});
    CHECK(res.exit_code == 2);

    const json j = json::parse(res.json);
    CHECK(j["tangential_frame_F"]["fingerprint"]["dimension"] == 3);
    CHECK(j["tangential_frame_F"]["fingerprint"]["abelian"] == false);
    CHECK(j["tangential_frame_G"]["fingerprint"]["dimension"] == 3);
    CHECK(j["normalization"]["status"] != "ok");
}

TEST_CASE("run_command: symmetries of the goursat fixture finds the "
          "5-dimensional abelian frame") {
    const SystemSpecFile spec = load_system_spec(fixture("goursat_k2.eds"));
    const CliResult res = run_command("symmetries", spec, CliOptions{});

    const json j = json::parse(res.json);
    CHECK(j["projection"]["fiber_dim"] == 5);
    CHECK(j["tangential_frame_F"]["fingerprint"]["dimension"] == 5);
    CHECK(j["tangential_frame_F"]["fingerprint"]["abelian"] == true);
    CHECK(j["tangential_frame_G"]["fingerprint"]["dimension"] == 5);
    CHECK(j["tangential_frame_G"]["fingerprint"]["abelian"] == true);
}

TEST_CASE("run_command: reciprocal over the affine1 fixture") {
    const SystemSpecFile spec = load_system_spec(fixture("affine1.eds"));
    const CliResult res = run_command("reciprocal", spec, CliOptions{});
    CHECK(res.exit_code == 0);

    const json j = json::parse(res.json);
    CHECK(j["sign_flip"]["status"] == "ok");
    CHECK(j["sign_flip"]["certification"] == "symbolic");
    CHECK(j["reciprocal_check"]["status"] == "ok");
    CHECK(j["reciprocal_check"]["commute"] == true);
    CHECK(double(j["reciprocal_check"]["anti_iso_residual"]) < 1e-9);
    CHECK(j["reconstruction"]["status"] == "ok");
    CHECK(double(j["reconstruction"]["max_coefficient_error"]) < 1e-5);
    CHECK(j["reconstruction"]["grid"] == json::array({21, 21}));
}

TEST_CASE("run_command: reciprocal rejects frames that do not fill the chart") {
    const SystemSpecFile spec = load_system_spec(fixture("wave.eds"));
    CHECK_THROWS_AS(run_command("reciprocal", spec, CliOptions{}), std::invalid_argument);
}

TEST_CASE("run_command: prolonged wave has class (3,2,2) and passes the check") {
    const SystemSpecFile spec = load_system_spec(fixture("wave.eds"));
    const CliResult res = run_command("prolong", spec, CliOptions{});
    CHECK(res.exit_code == 0);

    const json j = json::parse(res.json);
    CHECK(j["class"] == json::array({1, 2, 2}));
    CHECK(j["prolonged"]["class"] == json::array({3, 2, 2}));
    CHECK(j["prolonged"]["coordinates"].size() == 7);
    CHECK(j["prolonged"]["check"]["status"] == "ok");
}

TEST_CASE("run_command: lift over the liouville fixture meets the residual "
          "budget and writes well-formed artifacts") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    CliOptions opt;
    opt.gamma1 = "u,u";
    opt.gamma2 = "v,v";
    opt.grid = {21, 21};
    opt.grid_set = true;
    opt.out = "lift_test_surface.csv";
    const CliResult res = run_command("lift", spec, opt);
    CHECK(res.exit_code == 0);

    const json j = json::parse(res.json);
    CHECK(j["surface"]["nu"] == 21);
    CHECK(j["surface"]["nv"] == 21);
    CHECK(double(j["surface"]["path_defect"]) < 1e-8);
    CHECK(double(j["surface"]["projection_defect"]) < 1e-8);
    CHECK(double(j["pde_residual"]["max_residual"]) < 1e-6);
    CHECK(j["pde_residual"]["nodes_evaluated"] == 441);

    // Artifacts: CSV with one header plus one row per node, and a JSON
    // sidecar carrying the residual record.
    REQUIRE(res.files.size() == 2);
    CHECK(res.files[0].first == "lift_test_surface.csv");
    CHECK(res.files[1].first == "lift_test_surface.csv.meta.json");
    const std::string& csv = res.files[0].second;
    CHECK(csv.rfind("u,v,x,y,z,p,q,r,t\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 442);
    const json sidecar = json::parse(res.files[1].second);
    CHECK(sidecar["pde_residual"]["max_residual"] == j["pde_residual"]["max_residual"]);
    CHECK(sidecar["input"]["digest"] == j["input"]["digest"]);
}

TEST_CASE("run_command: lift usage errors are invalid_argument") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    CliOptions opt;
    CHECK_THROWS_AS(run_command("lift", spec, opt), std::invalid_argument);
    opt.gamma1 = "u,u";
    opt.gamma2 = "v,v";
    CHECK_THROWS_AS(run_command("lift", spec, opt), std::invalid_argument); // no --out
    opt.out = "x.csv";
    opt.grid = {21};
    opt.grid_set = true;
    CHECK_THROWS_AS(run_command("lift", spec, opt), std::invalid_argument); // 1-d grid
}

TEST_CASE("run_command: unknown command is a usage error") {
    const SystemSpecFile spec = load_system_spec(fixture("wave.eds"));
    CHECK_THROWS_AS(run_command("frobnicate", spec, CliOptions{}), std::invalid_argument);
}

TEST_CASE("run_command: reports are deterministic modulo generated_at") {
    const SystemSpecFile spec = load_system_spec(fixture("liouville.eds"));
    const CliResult a = run_command("check", spec, CliOptions{});
    const CliResult b = run_command("check", spec, CliOptions{});
    CHECK(strip_generated_at(a.json) == strip_generated_at(b.json));
    CHECK(a.text == b.text);

    // A different seed changes the sampling but not the verdicts.
    CliOptions seeded;
    seeded.seed = 7;
    seeded.seed_set = true;
    const CliResult c = run_command("check", spec, seeded);
    CHECK(c.exit_code == 0);
    const json j = json::parse(c.json);
    CHECK(j["seed"] == 7);
}
