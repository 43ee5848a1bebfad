#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctbath/runner.hpp"

using namespace ctbath;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ctbath_runner_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string error_code(const json& document) {
    try {
        parse_config(document);
    } catch (const RunError& error) {
        return error.code();
    }
    return "";
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("defaults and unit suffixes") {
    const RunConfig defaults = parse_config(json::object());
    CHECK(defaults.upper == 14);
    CHECK(defaults.lower == 7);
    CHECK(!defaults.b0);
    CHECK(defaults.sample.realizations == 1000);

    const auto gauss = parse_config(json::parse(R"({"B0_G": 799})"));
    CHECK(*gauss.b0 == doctest::Approx(0.0799));
    const auto tesla = parse_config(json::parse(R"({"B0_T": 0.0799})"));
    CHECK(*tesla.b0 == 0.0799);

    const auto sample = parse_config(json::parse(
        R"({"sample": {"overhauser_halfwidth_Hz": 1000, "density_m3": 1e21, "seed": 42}})"));
    CHECK(sample.sample.overhauser_halfwidth == doctest::Approx(2 * constants::kPi * 1000));
    CHECK(sample.sample.seed == 42);

    const auto species = parse_config(json::parse(
        R"({"species": {"name": "As", "A_MHz": 198.35, "I": 1.5, "delta": 1.9e-4}})"));
    CHECK(species.species.level_count() == 8);
}

TEST_CASE("invalid configurations are rejected with config_invalid") {
    CHECK(error_code(json::parse(R"({"bogus": 1})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"sample": {"density": 1}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"B0_T": 0.1, "B0_G": 1000})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"B0": "ct", "B0_T": 0.1})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"scenario": "dance"})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"sample": {"realizations": 0}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"sample": {"seed": -3}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"species": {"I": 1.2}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"time": {"t_max_s": -1}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"scan": {"B_min_T": 0.5, "B_max_T": 0.1}})")) == "config_invalid");
    CHECK(error_code(json::parse(R"({"sample": {"silicon_halfwidth_Hz": 6000}})")) == "config_invalid");
    CHECK(error_code(json::parse("[1, 2]")) == "config_invalid");
}

TEST_CASE("overrides edit nested keys and parse JSON values") {
    json document = json::object();
    apply_override(document, "sample.seed=7");
    apply_override(document, "scenario=[\"decay\",\"heuristics\"]");
    apply_override(document, "B0=ct");
    CHECK(document["sample"]["seed"] == 7);
    CHECK(document["B0"] == "ct");
    const auto config = parse_config(document);
    CHECK(config.scenarios.size() == 2);
    CHECK_THROWS_AS(apply_override(document, "no-equals"), RunError);
    CHECK_THROWS_AS(apply_override(document, "a..b=1"), RunError);
}

TEST_CASE("resolved configuration round-trips with a stable hash") {
    RunConfig config = parse_config(json::parse(
        R"({"scenario": ["decay", "field-scan"], "B0_G": 800, "sample": {"overhauser_halfwidth_Hz": "estimate", "silicon_halfwidth_Hz": 6000}})"));
    const json resolved = to_json(config);
    const RunConfig again = parse_config(resolved);
    CHECK(to_json(again) == resolved);
    CHECK(config_hash(again) == config_hash(config));
    CHECK(config_hash(config).size() == 64);

    config.sample.seed += 1;
    CHECK(config_hash(config) != config_hash(again));

    const json manifest = {{"config", resolved}, {"config_sha256", "x"}};
    CHECK(to_json(parse_config(manifest)) == resolved);
}

TEST_CASE("doubles are written with 17 significant digits") {
    for (const double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) {
        const std::string text = format_double(v);
        double back = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        CHECK(back == v);
    }
    CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("time grids") {
    TimeGrid grid;
    grid.points = 5;
    const auto linear = make_time_grid(grid, 1.0);
    CHECK(linear == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    grid.kind = TimeGridKind::geometric;
    const auto geometric = make_time_grid(grid, 1.0);
    CHECK(geometric[0] == 0.0);
    CHECK(geometric[1] == doctest::Approx(1e-3));
    CHECK(geometric[4] == doctest::Approx(1.0));
    CHECK(geometric[2] / geometric[1] == doctest::Approx(geometric[3] / geometric[2]));
}

TEST_CASE("field scan with an empty line list writes header-only tables") {
    const auto dir = scratch("empty_scan");
    RunConfig config = parse_config(json::parse(
        R"({"scenario": "field-scan", "scan": {"lines": [], "B_max_G": 10}})"));
    const json manifest = run(config, {dir, 1});
    CHECK(slurp(dir / "field_scan.csv") == "B_T,line_u,line_d,phi,P_u,P_d,freq_Hz\n");
    CHECK(slurp(dir / "field_points.csv") ==
          "kind,line_u,line_d,B_T,B_G,residual,oracle_fidelity\n");
    CHECK(manifest["scenarios"]["field-scan"]["points"].empty());
}

TEST_CASE("field scan lists the 14-7 CT and the 11-10 DRP") {
    const auto dir = scratch("scan");
    const RunConfig config =
        parse_config(json::parse(R"({"scenario": "field-scan", "scan": {"lines": [[14, 7], [11, 10]]}})"));
    const json manifest = run(config, {dir, 1});
    int ct_14_7 = 0;
    int ct_11_10 = 0;
    int drp_11_10 = 0;
    for (const auto& point : manifest["scenarios"]["field-scan"]["points"]) {
        const bool first = point["line"][0] == 14;
        if (point["kind"] == "CT") {
            (first ? ct_14_7 : ct_11_10)++;
            if (first) CHECK(point["B_T"].get<double>() == doctest::Approx(0.0799).epsilon(0.0025));
        } else if (!first) {
            ++drp_11_10;
        }
    }
    CHECK(ct_14_7 == 1);
    CHECK(ct_11_10 == 0);
    CHECK(drp_11_10 >= 1);
}

TEST_CASE("a bath without donors yields a flat curve and a fit error code") {
    const auto dir = scratch("flat");
    const RunConfig config = parse_config(json::parse(
        R"({"scenario": "decay", "sample": {"density_m3": 0, "realizations": 1}, "time": {"t_max_s": 0.01, "n_time": 11}})"));
    const json manifest = run(config, {dir, 1});
    const json summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["error"]["code"] == "non_decaying");
    CHECK(summary["T2_s"].is_null());
    std::istringstream csv(slurp(dir / "coherence.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t_s,coherence_mean,coherence_stderr");
    int rows = 0;
    while (std::getline(csv, line)) {
        CHECK(line.substr(line.find(',') + 1) == "1,0");
        ++rows;
    }
    CHECK(rows == 11);
    CHECK(manifest["config_sha256"] == summary["config_sha256"]);
}

TEST_CASE("decay outputs are byte-identical across runs and thread counts") {
    const RunConfig config = parse_config(json::parse(
        R"({"scenario": "decay", "sample": {"realizations": 40, "overhauser_halfwidth_Hz": 1e5}, "time": {"n_time": 60}})"));
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run(config, {a, 1});
    run(config, {b, 4});
    CHECK(slurp(a / "coherence.csv") == slurp(b / "coherence.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));

    // Re-running from the manifest reproduces the outputs.
    const auto c = scratch("det_c");
    run(parse_config(json::parse(slurp(a / "manifest.json"))), {c, 2});
    CHECK(slurp(a / "coherence.csv") == slurp(c / "coherence.csv"));
}

TEST_CASE("heuristics scenario labels its formulas") {
    const auto dir = scratch("heuristics");
    const json manifest = run(parse_config(json::parse(R"({"scenario": "heuristics"})")), {dir, 1});
    const json h = json::parse(slurp(dir / "heuristics.json"));
    CHECK(h["enhancement"].get<double>() == doctest::Approx(8.03).epsilon(0.01));
    CHECK(h["formulas"].contains("T2_M_s"));
    CHECK(h == manifest["scenarios"]["heuristics"]);
}

TEST_CASE("a line without a CT needs an explicit field") {
    const auto dir = scratch("no_ct");
    const RunConfig config = parse_config(json::parse(
        R"({"scenario": "heuristics", "transition": {"upper": 11, "lower": 10}})"));
    try {
        run(config, {dir, 1});
        FAIL("expected RunError");
    } catch (const RunError& error) {
        CHECK(error.code() == "no_clock_transition");
    }
}

}  // TEST_SUITE
