// Command-line front end: ctbath --config run.json [--scenario decay] ...

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctbath/runner.hpp"

namespace {

using nlohmann::json;

int report(const std::string& code, const std::string& message,
           const std::filesystem::path& out_dir) {
    const json error = {{"error", {{"code", code}, {"message", message}}}};
    std::cerr << error.dump() << '\n';
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!ec) std::ofstream(out_dir / "error.json") << error.dump(2) << '\n';
    return 2;
}

json load_document(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ctbath::RunError("io_error", "cannot read configuration " + path);
    json document = json::parse(in, nullptr, false, true);
    if (document.is_discarded()) {
        throw ctbath::RunError("config_invalid", "configuration " + path + " is not valid JSON");
    }
    return document;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin-bath Hahn-echo simulator for donor clock transitions"};
    std::string config_path;
    std::vector<std::string> scenarios;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::string> overrides;

    app.add_option("--config", config_path, "JSON configuration or run manifest");
    app.add_option("--scenario", scenarios,
                   "decay, detuning-sweep, field-scan or heuristics (repeatable)");
    app.add_option("--seed", seed, "overrides sample.seed");
    app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads; results do not depend on it")
        ->check(CLI::Range(1, 1024));
    app.add_option("--override", overrides, "key.path=value, value parsed as JSON (repeatable)");
    CLI11_PARSE(app, argc, argv);

    try {
        json document = load_document(config_path);
        if (document.contains("config") && document.contains("config_sha256")) {
            document = json(document.at("config"));
        }
        for (const auto& assignment : overrides) ctbath::apply_override(document, assignment);
        if (!scenarios.empty()) document["scenario"] = scenarios;
        if (seed) document["sample"]["seed"] = *seed;

        const ctbath::RunConfig config = ctbath::parse_config(document);
        const json manifest = ctbath::run(config, {out_dir, threads});
        std::cout << manifest.at("scenarios").dump(2) << '\n';
        return EXIT_SUCCESS;
    } catch (const ctbath::RunError& error) {
        return report(error.code(), error.what(), out_dir);
    } catch (const std::exception& error) {
        return report("internal", error.what(), out_dir);
    }
}
