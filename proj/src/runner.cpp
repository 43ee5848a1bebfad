#include "ctbath/runner.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "ctbath/field_points.hpp"
#include "ctbath/heuristics.hpp"

#ifndef CTBATH_VERSION
#define CTBATH_VERSION "unknown"
#endif

namespace ctbath {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& message) {
    throw RunError("config_invalid", message);
}

// Reads one JSON object, remembering which keys were consumed so that
// anything left over can be rejected.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) invalid(where() + " must be an object");
    }

    const json* get(const std::string& key) {
        used_.insert(key);
        const auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    std::optional<double> number(const std::string& key) {
        const json* value = get(key);
        if (!value) return std::nullopt;
        if (!value->is_number()) invalid(where(key) + " must be a number");
        const double out = value->get<double>();
        if (!std::isfinite(out)) invalid(where(key) + " must be finite");
        return out;
    }

    std::optional<std::int64_t> integer(const std::string& key) {
        const json* value = get(key);
        if (!value) return std::nullopt;
        if (!value->is_number_integer()) invalid(where(key) + " must be an integer");
        return value->get<std::int64_t>();
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* value = get(key);
        if (!value) return std::nullopt;
        if (!value->is_boolean()) invalid(where(key) + " must be true or false");
        return value->get<bool>();
    }

    std::optional<std::string> text(const std::string& key) {
        const json* value = get(key);
        if (!value) return std::nullopt;
        if (!value->is_string()) invalid(where(key) + " must be a string");
        return value->get<std::string>();
    }

    /// A magnetic field given as `base`_T or `base`_G, returned in tesla.
    std::optional<double> field(const std::string& base) {
        const auto tesla = number(base + "_T");
        const auto gauss = number(base + "_G");
        if (tesla && gauss) invalid(where(base) + " given in both tesla and gauss");
        if (gauss) return gauss_to_tesla(*gauss);
        return tesla;
    }

    void finish() const {
        for (const auto& [key, value] : object_.items()) {
            if (!used_.contains(key)) invalid("unknown key " + where(key));
        }
    }

    std::string where(const std::string& key = "") const {
        if (key.empty()) return path_.empty() ? "configuration" : "'" + path_ + "'";
        return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
    }

private:
    const json& object_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename Enum, std::size_t N>
Enum parse_choice(const std::string& value, const std::array<std::pair<const char*, Enum>, N>& options,
                  const std::string& where) {
    for (const auto& [name, option] : options) {
        if (value == name) return option;
    }
    std::string allowed;
    for (const auto& [name, option] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    invalid(where + " must be one of: " + allowed);
}

constexpr std::array<std::pair<const char*, DetuningShape>, 2> kShapes{
    {{"lorentzian", DetuningShape::lorentzian}, {"gaussian", DetuningShape::gaussian}}};
constexpr std::array<std::pair<const char*, PolarizationMode>, 2> kPolarizations{
    {{"unperturbed", PolarizationMode::unperturbed}, {"perturbed", PolarizationMode::perturbed}}};
constexpr std::array<std::pair<const char*, NonresonantModel>, 2> kNonresonant{
    {{"survival", NonresonantModel::survival}, {"contrast", NonresonantModel::contrast}}};
constexpr std::array<std::pair<const char*, ChannelSelection>, 2> kChannels{
    {{"resonant-targets", ChannelSelection::resonant_targets},
     {"all-conserving", ChannelSelection::all_conserving}}};
constexpr std::array<std::pair<const char*, TimeGridKind>, 2> kGrids{
    {{"linear", TimeGridKind::linear}, {"geometric", TimeGridKind::geometric}}};
constexpr std::array<std::pair<const char*, DecayModel>, 2> kModels{
    {{"exponential", DecayModel::exponential}, {"stretched", DecayModel::stretched}}};

template <typename Enum, std::size_t N>
const char* choice_name(Enum value, const std::array<std::pair<const char*, Enum>, N>& options) {
    for (const auto& [name, option] : options) {
        if (option == value) return name;
    }
    return "unknown";
}

DonorSpecies parse_species(const json& node) {
    if (node.is_string()) {
        if (node.get<std::string>() == "Bi") return DonorSpecies::bismuth();
        invalid("unknown species preset '" + node.get<std::string>() + "'");
    }
    ObjectReader reader(node, "species");
    DonorSpecies species;
    if (auto preset = reader.text("preset")) {
        if (*preset != "Bi") invalid("unknown species preset '" + *preset + "'");
        species = DonorSpecies::bismuth();
    }
    if (auto name = reader.text("name")) species.name = *name;
    if (auto a = reader.number("A_MHz")) species.hyperfine = mhz_to_angular(*a);
    if (auto spin = reader.number("I")) species.nuclear_spin = *spin;
    if (auto delta = reader.number("delta")) species.nuclear_ratio = *delta;
    if (auto gamma = reader.number("gamma_e_rad_per_s_T")) species.gamma_e = *gamma;
    reader.finish();
    try {
        species.validate();
    } catch (const std::invalid_argument& error) {
        invalid(std::string("species: ") + error.what());
    }
    return species;
}

std::pair<int, int> parse_line(const json& node, const std::string& where) {
    if (!node.is_array() || node.size() != 2 || !node[0].is_number_integer() ||
        !node[1].is_number_integer()) {
        invalid(where + " must be a pair of level indices [upper, lower]");
    }
    return {node[0].get<int>(), node[1].get<int>()};
}

void parse_sample(const json& node, RunConfig& config) {
    ObjectReader reader(node, "sample");
    SampleSpec& sample = config.sample;
    if (auto v = reader.number("density_m3")) sample.density = *v;
    if (auto v = reader.number("resonant_fraction")) sample.resonant_fraction = *v;
    if (const json* width = reader.get("overhauser_halfwidth_Hz")) {
        if (width->is_string() && width->get<std::string>() == "estimate") {
            config.silicon_halfwidth_hz = config.silicon_halfwidth_hz.value_or(0.0);
        } else if (width->is_number()) {
            sample.overhauser_halfwidth = hz_to_angular(width->get<double>());
        } else {
            invalid("'sample.overhauser_halfwidth_Hz' must be a number or \"estimate\"");
        }
    }
    if (auto v = reader.number("silicon_halfwidth_Hz")) {
        if (!config.silicon_halfwidth_hz) {
            invalid("'sample.silicon_halfwidth_Hz' needs overhauser_halfwidth_Hz = \"estimate\"");
        }
        config.silicon_halfwidth_hz = *v;
    }
    if (auto v = reader.number("nonmagnetic_halfwidth_Hz")) {
        sample.nonmagnetic_halfwidth = hz_to_angular(*v);
    }
    if (auto v = reader.text("nonmagnetic_shape")) {
        sample.nonmagnetic_shape = parse_choice(*v, kShapes, reader.where("nonmagnetic_shape"));
    }
    if (auto v = reader.number("expected_neighbors")) sample.expected_neighbors = *v;
    if (auto v = reader.number("max_radius_m")) sample.max_radius = *v;
    if (auto v = reader.number("min_radius_m")) sample.min_radius = *v;
    if (auto v = reader.integer("realizations")) {
        if (*v < 1 || *v > 100'000'000) invalid("'sample.realizations' must lie in [1, 1e8]");
        sample.realizations = static_cast<int>(*v);
    }
    if (const json* seed = reader.get("seed")) {
        if (!seed->is_number_unsigned()) invalid("'sample.seed' must be a non-negative integer");
        sample.seed = seed->get<std::uint64_t>();
    }
    if (auto v = reader.text("polarization")) {
        sample.polarization = parse_choice(*v, kPolarizations, reader.where("polarization"));
    }
    if (auto v = reader.text("nonresonant_model")) {
        sample.nonresonant = parse_choice(*v, kNonresonant, reader.where("nonresonant_model"));
    }
    if (auto v = reader.text("channels")) {
        sample.channels = parse_choice(*v, kChannels, reader.where("channels"));
    }
    if (auto v = reader.boolean("intrinsic_mismatch")) sample.intrinsic_mismatch = *v;
    if (auto v = reader.number("cauchy_clip")) sample.cauchy_clip = *v;
    reader.finish();
    try {
        sample.validate();
    } catch (const std::invalid_argument& error) {
        invalid(std::string("sample: ") + error.what());
    }
}

void parse_time(const json& node, TimeGrid& grid) {
    ObjectReader reader(node, "time");
    if (const json* t_max = reader.get("t_max_s")) {
        if (t_max->is_string() && t_max->get<std::string>() == "auto") {
            grid.t_max.reset();
        } else if (t_max->is_number() && t_max->get<double>() > 0.0) {
            grid.t_max = t_max->get<double>();
        } else {
            invalid("'time.t_max_s' must be a positive number or \"auto\"");
        }
    }
    if (auto v = reader.integer("n_time")) {
        if (*v < 3 || *v > 1'000'000) invalid("'time.n_time' must lie in [3, 1e6]");
        grid.points = static_cast<int>(*v);
    }
    if (auto v = reader.text("grid")) grid.kind = parse_choice(*v, kGrids, reader.where("grid"));
    reader.finish();
}

void parse_sweep(const json& node, SweepSettings& sweep) {
    ObjectReader reader(node, "sweep");
    if (const json* widths = reader.get("widths_Hz")) {
        if (!widths->is_array() || widths->empty()) invalid("'sweep.widths_Hz' must be a non-empty list");
        sweep.widths_hz.clear();
        for (const auto& w : *widths) {
            if (!w.is_number() || !(w.get<double>() >= 0.0)) {
                invalid("'sweep.widths_Hz' entries must be non-negative numbers");
            }
            sweep.widths_hz.push_back(w.get<double>());
        }
    }
    if (auto v = reader.field("high_field")) {
        if (!(*v > 0.0)) invalid("'sweep.high_field' must be positive");
        sweep.high_field = *v;
    }
    if (auto v = reader.boolean("perturbed_branch")) sweep.perturbed_branch = *v;
    reader.finish();
}

void parse_scan(const json& node, ScanSettings& scan) {
    ObjectReader reader(node, "scan");
    if (auto v = reader.field("B_min")) scan.b_min = *v;
    if (auto v = reader.field("B_max")) scan.b_max = *v;
    if (auto v = reader.field("step")) scan.step = *v;
    if (const json* lines = reader.get("lines")) {
        if (!lines->is_array()) invalid("'scan.lines' must be a list of [upper, lower] pairs");
        scan.lines.clear();
        for (const auto& line : *lines) scan.lines.push_back(parse_line(line, "'scan.lines'"));
    }
    reader.finish();
    if (!(scan.b_min >= 0.0) || !(scan.b_max > scan.b_min) || !(scan.step > 0.0)) {
        invalid("scan range needs 0 <= B_min < B_max and a positive step");
    }
    if ((scan.b_max - scan.b_min) / scan.step > 1.0e7) invalid("scan grid exceeds 1e7 points");
}

// ---- output helpers --------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw RunError("io_error", "cannot write " + path.string());
}

void write_json(const std::filesystem::path& path, const json& value) {
    write_text(path, value.dump(2) + "\n");
}

class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<const char*> header) {
        bool first = true;
        for (const char* column : header) {
            text_ += first ? "" : ",";
            text_ += column;
            first = false;
        }
        text_ += '\n';
    }

    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(cells), first = false), ...);
        text_ += '\n';
    }

    const std::string& text() const { return text_; }

private:
    static std::string cell(double value) { return format_double(value); }
    static std::string cell(int value) { return std::to_string(value); }
    static std::string cell(const std::string& value) { return value; }
    static std::string cell(const char* value) { return value; }

    std::string text_;
};

json optional_number(double value) {
    return std::isfinite(value) ? json(value) : json(nullptr);
}

// ---- physics set-up --------------------------------------------------------

Transition configured_line(const RunConfig& config, int upper, int lower) {
    try {
        return resolve_line(config.species, upper, lower, config.label_field);
    } catch (const std::exception& error) {
        throw RunError("invalid_transition", error.what());
    }
}

double resolve_b0(const RunConfig& config, const Transition& line) {
    if (config.b0) return *config.b0;
    const auto points = ct_fields(config.species, line, FieldRange{});
    if (points.empty()) {
        throw RunError("no_clock_transition",
                       "line " + std::to_string(config.upper) + "-" + std::to_string(config.lower) +
                           " has no clock transition in 0-0.6 T; set B0_T explicitly");
    }
    return points.front().field;
}

SampleSpec resolved_sample(const RunConfig& config, double b0) {
    SampleSpec sample = config.sample;
    if (config.silicon_halfwidth_hz) {
        sample.overhauser_halfwidth = estimate_overhauser_width(
            Spectrum(config.species, b0), sample, hz_to_angular(*config.silicon_halfwidth_hz));
    }
    return sample;
}

// Window long enough for the heuristic decay rate at this field to reach
// about exp(-4).
double auto_t_max(const DonorSpecies& species, const Transition& line, double b0,
                  const SampleSpec& sample) {
    const double n_res = sample.resonant_fraction_for(species) * sample.density;
    if (!(n_res > 0.0)) return 0.1;
    const double rate = constants::kPi / 12.0 * dipolar_prefactor(species.gamma_e) * n_res;
    const EigenLevel u = level_at(species, line.upper.label(), b0);
    const EigenLevel d = level_at(species, line.lower.label(), b0);
    const double gap = u.polarization - d.polarization;
    const double weight = std::max({4.0 * flip_flop_element(u, d).rho, 2.0 * gap * gap, 1e-3});
    return 4.0 / (rate * weight);
}

struct FittedCurve {
    CoherenceCurve curve;
    std::optional<DecayFit> fit;
    std::optional<FitError> error;
};

FittedCurve simulate(const RunConfig& config, const Transition& line, double b0,
                     const SampleSpec& sample, const RunOptions& options) {
    const EchoModel model(config.species, b0, line, sample);
    const double t_max =
        config.time.t_max.value_or(auto_t_max(config.species, model.line(), b0, sample));
    FittedCurve out;
    out.curve = ensemble_average(model, make_time_grid(config.time, t_max), options.threads);
    try {
        out.fit = fit_decay(out.curve.times, out.curve.mean, config.fit_model);
    } catch (const FitError& error) {
        out.error = error;
    }
    return out;
}

json fit_summary(const FittedCurve& result) {
    json summary;
    if (result.fit) {
        summary["T2_s"] = result.fit->t2;
        summary["stretch_n"] = result.fit->stretch;
        summary["rmse"] = result.fit->rmse;
        summary["fit_points"] = result.fit->points;
        summary["extrapolated"] = result.fit->extrapolated;
    } else {
        summary["T2_s"] = nullptr;
        summary["stretch_n"] = nullptr;
        summary["rmse"] = nullptr;
        summary["error"] = {{"code", result.error->code()}, {"message", result.error->what()}};
    }
    return summary;
}

// ---- scenarios -------------------------------------------------------------

json run_decay(const RunConfig& config, const RunOptions& options, const std::string& hash) {
    const Transition line = configured_line(config, config.upper, config.lower);
    const double b0 = resolve_b0(config, line);
    const SampleSpec sample = resolved_sample(config, b0);
    const FittedCurve result = simulate(config, line, b0, sample, options);

    CsvWriter csv({"t_s", "coherence_mean", "coherence_stderr"});
    for (std::size_t i = 0; i < result.curve.times.size(); ++i) {
        csv.row(result.curve.times[i], result.curve.mean[i], result.curve.stderr_[i]);
    }
    write_text(options.out_dir / "coherence.csv", csv.text());

    json summary = fit_summary(result);
    summary["scenario"] = "decay";
    summary["seed"] = sample.seed;
    summary["config_sha256"] = hash;
    summary["version"] = CTBATH_VERSION;
    summary["B0_T"] = b0;
    summary["line"] = {config.upper, config.lower};
    summary["realizations"] = result.curve.realizations;
    summary["overhauser_halfwidth_Hz"] = angular_to_hz(sample.overhauser_halfwidth);
    summary["fit_model"] = to_string(config.fit_model);
    write_json(options.out_dir / "summary.json", summary);
    return summary;
}

json run_detuning_sweep(const RunConfig& config, const RunOptions& options) {
    const Transition line = configured_line(config, config.upper, config.lower);
    const double b_ct = resolve_b0(config, line);

    struct Regime {
        const char* name;
        double field;
    };
    const std::array<Regime, 2> regimes{{{"ct", b_ct}, {"high-field", config.sweep.high_field}}};
    std::vector<PolarizationMode> modes{config.sample.polarization};
    if (config.sweep.perturbed_branch && modes.front() != PolarizationMode::perturbed) {
        modes.push_back(PolarizationMode::perturbed);
    }

    CsvWriter csv({"regime", "B_T", "polarization", "w_OH_Hz", "T2_s", "stretch_n", "rmse",
                   "status"});
    json rows = json::array();
    for (const auto& regime : regimes) {
        for (const PolarizationMode mode : modes) {
            for (const double width : config.sweep.widths_hz) {
                SampleSpec sample = config.sample;
                sample.overhauser_halfwidth = hz_to_angular(width);
                sample.polarization = mode;
                const FittedCurve result = simulate(config, line, regime.field, sample, options);
                const double nan = std::numeric_limits<double>::quiet_NaN();
                const std::string status = result.fit ? "ok" : result.error->code();
                csv.row(regime.name, regime.field, choice_name(mode, kPolarizations), width,
                        result.fit ? result.fit->t2 : nan, result.fit ? result.fit->stretch : nan,
                        result.fit ? result.fit->rmse : nan, status);
                rows.push_back({{"regime", regime.name},
                                {"B_T", regime.field},
                                {"polarization", choice_name(mode, kPolarizations)},
                                {"w_OH_Hz", width},
                                {"T2_s", optional_number(result.fit ? result.fit->t2 : nan)},
                                {"status", status}});
            }
        }
    }
    write_text(options.out_dir / "detuning_sweep.csv", csv.text());

    // Enhancement: widest-width CT value over widest-width high-field value.
    auto widest = [&](const char* regime) {
        double best = std::numeric_limits<double>::quiet_NaN();
        double best_width = -1.0;
        for (const auto& row : rows) {
            if (row["regime"] != regime || row["polarization"] != rows[0]["polarization"]) continue;
            if (row["w_OH_Hz"].get<double>() > best_width && !row["T2_s"].is_null()) {
                best_width = row["w_OH_Hz"].get<double>();
                best = row["T2_s"].get<double>();
            }
        }
        return best;
    };
    return {{"scenario", "detuning-sweep"},
            {"B_ct_T", b_ct},
            {"high_field_T", config.sweep.high_field},
            {"enhancement", optional_number(widest("ct") / widest("high-field"))},
            {"points", rows}};
}

json run_field_scan(const RunConfig& config, const RunOptions& options) {
    const ScanSettings& scan = config.scan;
    std::vector<Transition> lines;
    for (const auto& [upper, lower] : scan.lines) lines.push_back(configured_line(config, upper, lower));

    std::vector<double> grid;
    const auto steps = static_cast<long>(std::floor((scan.b_max - scan.b_min) / scan.step + 1e-9));
    for (long k = 0; k <= steps; ++k) grid.push_back(scan.b_min + static_cast<double>(k) * scan.step);

    CsvWriter table({"B_T", "line_u", "line_d", "phi", "P_u", "P_d", "freq_Hz"});
    if (!lines.empty()) {
        for (const auto& row : scan_table(config.species, lines, grid)) {
            table.row(row.field, row.line_upper, row.line_lower, row.phi, row.p_upper, row.p_lower,
                      row.frequency_hz);
        }
    }
    write_text(options.out_dir / "field_scan.csv", table.text());

    std::string levels_text = "B_T";
    for (int k = 1; k <= config.species.level_count(); ++k) {
        levels_text += ",E" + std::to_string(k) + "_Hz";
    }
    levels_text += '\n';
    const auto energies = level_table(config.species, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        levels_text += format_double(grid[i]);
        for (const double e : energies[i]) levels_text += "," + format_double(angular_to_hz(e));
        levels_text += '\n';
    }
    write_text(options.out_dir / "levels.csv", levels_text);

    CsvWriter points_csv({"kind", "line_u", "line_d", "B_T", "B_G", "residual", "oracle_fidelity"});
    json points = json::array();
    const FieldRange range{scan.b_min, scan.b_max, std::min(1.0e-4, scan.b_max - scan.b_min),
                           0.5e-4};
    for (std::size_t k = 0; k < lines.size(); ++k) {
        auto found = ct_fields(config.species, lines[k], range);
        const auto drps = drp_fields(config.species, lines[k], range);
        found.insert(found.end(), drps.begin(), drps.end());
        for (const auto& point : found) {
            points_csv.row(to_string(point.kind), scan.lines[k].first, scan.lines[k].second,
                           point.field, tesla_to_gauss(point.field), point.residual,
                           point.oracle_fidelity);
            points.push_back({{"kind", to_string(point.kind)},
                              {"line", {scan.lines[k].first, scan.lines[k].second}},
                              {"B_T", point.field},
                              {"residual", point.residual},
                              {"oracle_fidelity", point.oracle_fidelity}});
        }
    }
    write_text(options.out_dir / "field_points.csv", points_csv.text());
    return {{"scenario", "field-scan"}, {"grid_points", grid.size()}, {"points", points}};
}

json run_heuristics(const RunConfig& config, const RunOptions& options) {
    const Transition line = configured_line(config, config.upper, config.lower);
    const double b0 = resolve_b0(config, line);
    HeuristicInput input;
    input.density = config.sample.density;
    input.resonant_fraction = config.sample.resonant_fraction_for(config.species);
    input.b0 = b0;
    input.high_field = config.sweep.high_field;

    HeuristicEstimate estimate;
    try {
        estimate = heuristic_t2(config.species, line, input);
    } catch (const std::invalid_argument& error) {
        throw RunError("invalid_argument", error.what());
    }
    json out = {
        {"scenario", "heuristics"},
        {"B0_T", b0},
        {"high_field_T", input.high_field},
        {"line", {config.upper, config.lower}},
        {"density_m3", input.density},
        {"resonant_density_m3", estimate.resonant_density},
        {"R_bar_m", estimate.mean_distance},
        {"J_mean_at_R_bar_rad_per_s", estimate.mean_coupling},
        {"T2_M_s", estimate.t2_m},
        {"T2_ID_s", estimate.t2_id},
        {"enhancement", estimate.enhancement},
        {"P_u", estimate.p_upper},
        {"P_d", estimate.p_lower},
        {"P_u_high_field", estimate.p_upper_high},
        {"P_d_high_field", estimate.p_lower_high},
        {"rho", estimate.rho},
        {"formulas",
         {{"R_bar_m", "(4 pi / 3) n_res R_bar^3 = 1"},
          {"J_mean_at_R_bar_rad_per_s", "(1/2) (mu0 / 4 pi) gamma_e^2 hbar / R_bar^3"},
          {"T2_M_s", "1 / T2_M = (pi / 12) (mu0 / 4 pi) gamma_e^2 hbar n_res"},
          {"enhancement", "(P_u - P_d)^2 at high field / [(1/2)(1 + P_u)(1 - P_d)] at B0"},
          {"T2_ID_s", "T2_M / enhancement"}}}};
    write_json(options.out_dir / "heuristics.json", out);
    return out;
}

std::string to_hex(const unsigned char* data, unsigned length) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < length; ++i) {
        out += kDigits[data[i] >> 4];
        out += kDigits[data[i] & 0xf];
    }
    return out;
}

}  // namespace

const char* to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::decay: return "decay";
        case Scenario::detuning_sweep: return "detuning-sweep";
        case Scenario::field_scan: return "field-scan";
        case Scenario::heuristics: return "heuristics";
    }
    return "unknown";
}

Scenario parse_scenario(const std::string& name) {
    static constexpr std::array<std::pair<const char*, Scenario>, 4> kScenarios{
        {{"decay", Scenario::decay},
         {"detuning-sweep", Scenario::detuning_sweep},
         {"field-scan", Scenario::field_scan},
         {"heuristics", Scenario::heuristics}}};
    return parse_choice(name, kScenarios, "'scenario'");
}

std::vector<double> make_time_grid(const TimeGrid& grid, double t_max) {
    if (!(t_max > 0.0) || grid.points < 3) {
        throw std::invalid_argument("time grid needs t_max > 0 and at least three points");
    }
    std::vector<double> times(static_cast<std::size_t>(grid.points), 0.0);
    const int last = grid.points - 1;
    for (int i = 1; i <= last; ++i) {
        const double fraction = static_cast<double>(i) / last;
        times[static_cast<std::size_t>(i)] =
            grid.kind == TimeGridKind::linear
                ? t_max * fraction
                : t_max * std::pow(1.0e-3, 1.0 - static_cast<double>(i - 1) / (last - 1));
    }
    return times;
}

RunConfig parse_config(const json& document) {
    if (document.is_object() && document.contains("config") && document.contains("config_sha256")) {
        return parse_config(document.at("config"));
    }
    ObjectReader reader(document, "");
    RunConfig config;

    if (const json* scenario = reader.get("scenario")) {
        config.scenarios.clear();
        if (scenario->is_string()) {
            config.scenarios.push_back(parse_scenario(scenario->get<std::string>()));
        } else if (scenario->is_array() && !scenario->empty()) {
            for (const auto& name : *scenario) {
                if (!name.is_string()) invalid("'scenario' entries must be strings");
                config.scenarios.push_back(parse_scenario(name.get<std::string>()));
            }
        } else {
            invalid("'scenario' must be a name or a non-empty list of names");
        }
    }
    if (const json* species = reader.get("species")) config.species = parse_species(*species);
    if (const json* transition = reader.get("transition")) {
        ObjectReader line(*transition, "transition");
        if (auto v = line.integer("upper")) config.upper = static_cast<int>(*v);
        if (auto v = line.integer("lower")) config.lower = static_cast<int>(*v);
        if (auto v = line.field("label_field")) config.label_field = *v;
        line.finish();
    }
    if (const json* b0 = reader.get("B0")) {
        if (!b0->is_string() || b0->get<std::string>() != "ct") {
            invalid("'B0' only accepts \"ct\"; give numeric fields as B0_T or B0_G");
        }
        if (document.contains("B0_T") || document.contains("B0_G")) {
            invalid("'B0' conflicts with B0_T / B0_G");
        }
    }
    if (auto b0 = reader.field("B0")) {
        if (!(*b0 >= 0.0)) invalid("B0 must be non-negative");
        config.b0 = *b0;
    }
    if (const json* sample = reader.get("sample")) parse_sample(*sample, config);
    if (const json* time = reader.get("time")) parse_time(*time, config.time);
    if (const json* fit = reader.get("fit")) {
        ObjectReader fit_reader(*fit, "fit");
        if (auto v = fit_reader.text("model")) {
            config.fit_model = parse_choice(*v, kModels, fit_reader.where("model"));
        }
        fit_reader.finish();
    }
    if (const json* sweep = reader.get("sweep")) parse_sweep(*sweep, config.sweep);
    if (const json* scan = reader.get("scan")) parse_scan(*scan, config.scan);
    reader.finish();
    return config;
}

json to_json(const RunConfig& config) {
    json scenarios = json::array();
    for (const Scenario scenario : config.scenarios) scenarios.push_back(to_string(scenario));

    const SampleSpec& s = config.sample;
    json sample = {
        {"density_m3", s.density},
        {"resonant_fraction", s.resonant_fraction_for(config.species)},
        {"nonmagnetic_halfwidth_Hz", angular_to_hz(s.nonmagnetic_halfwidth)},
        {"nonmagnetic_shape", choice_name(s.nonmagnetic_shape, kShapes)},
        {"expected_neighbors", s.expected_neighbors},
        {"min_radius_m", s.min_radius},
        {"realizations", s.realizations},
        {"seed", s.seed},
        {"polarization", choice_name(s.polarization, kPolarizations)},
        {"nonresonant_model", choice_name(s.nonresonant, kNonresonant)},
        {"channels", choice_name(s.channels, kChannels)},
        {"intrinsic_mismatch", s.intrinsic_mismatch},
        {"cauchy_clip", s.cauchy_clip},
    };
    if (config.silicon_halfwidth_hz) {
        sample["overhauser_halfwidth_Hz"] = "estimate";
        sample["silicon_halfwidth_Hz"] = *config.silicon_halfwidth_hz;
    } else {
        sample["overhauser_halfwidth_Hz"] = angular_to_hz(s.overhauser_halfwidth);
    }
    if (s.max_radius) sample["max_radius_m"] = *s.max_radius;

    json lines = json::array();
    for (const auto& [u, d] : config.scan.lines) lines.push_back({u, d});

    json out = {
        {"scenario", scenarios},
        {"species",
         {{"name", config.species.name},
          {"A_MHz", angular_to_hz(config.species.hyperfine) * 1.0e-6},
          {"I", config.species.nuclear_spin},
          {"delta", config.species.nuclear_ratio},
          {"gamma_e_rad_per_s_T", config.species.gamma_e}}},
        {"transition",
         {{"upper", config.upper}, {"lower", config.lower}, {"label_field_T", config.label_field}}},
        {"sample", sample},
        {"time",
         {{"t_max_s", config.time.t_max ? json(*config.time.t_max) : json("auto")},
          {"n_time", config.time.points},
          {"grid", choice_name(config.time.kind, kGrids)}}},
        {"fit", {{"model", choice_name(config.fit_model, kModels)}}},
        {"sweep",
         {{"widths_Hz", config.sweep.widths_hz},
          {"high_field_T", config.sweep.high_field},
          {"perturbed_branch", config.sweep.perturbed_branch}}},
        {"scan",
         {{"B_min_T", config.scan.b_min},
          {"B_max_T", config.scan.b_max},
          {"step_T", config.scan.step},
          {"lines", lines}}},
    };
    if (config.b0) {
        out["B0_T"] = *config.b0;
    } else {
        out["B0"] = "ct";
    }
    return out;
}

void apply_override(json& document, const std::string& assignment) {
    const auto equals = assignment.find('=');
    if (equals == std::string::npos || equals == 0) {
        invalid("override '" + assignment + "' must look like key.path=value");
    }
    const std::string path = assignment.substr(0, equals);
    const std::string text = assignment.substr(equals + 1);

    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    if (!document.is_object()) document = json::object();
    json* node = &document;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) invalid("override path '" + path + "' has an empty component");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        json& child = (*node)[key];
        if (child.is_null()) child = json::object();
        if (!child.is_object()) invalid("override path '" + path + "' crosses a non-object");
        node = &child;
        start = dot + 1;
    }
}

std::string config_hash(const RunConfig& config) {
    const std::string canonical = to_json(config).dump();
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned length = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest.data(), &length, EVP_sha256(),
                   nullptr) != 1) {
        throw RunError("internal", "SHA-256 digest failed");
    }
    return to_hex(digest.data(), length);
}

json run(const RunConfig& config, const RunOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw RunError("io_error", "cannot create " + options.out_dir.string() + ": " + ec.message());

    const std::string hash = config_hash(config);
    json scenarios = json::object();
    for (const Scenario scenario : config.scenarios) {
        try {
            switch (scenario) {
                case Scenario::decay: scenarios["decay"] = run_decay(config, options, hash); break;
                case Scenario::detuning_sweep:
                    scenarios["detuning-sweep"] = run_detuning_sweep(config, options);
                    break;
                case Scenario::field_scan: scenarios["field-scan"] = run_field_scan(config, options); break;
                case Scenario::heuristics: scenarios["heuristics"] = run_heuristics(config, options); break;
            }
        } catch (const std::invalid_argument& error) {
            throw RunError("invalid_argument", std::string(to_string(scenario)) + ": " + error.what());
        }
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest = {{"version", CTBATH_VERSION},
                     {"config", to_json(config)},
                     {"config_sha256", hash},
                     {"seed", config.sample.seed},
                     {"threads", options.threads},
                     {"wall_time_s", wall},
                     {"scenarios", scenarios}};
    write_json(options.out_dir / "manifest.json", manifest);
    return manifest;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 32> buffer{};
    const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value,
                                      std::chars_format::general, 17);
    return std::string(buffer.data(), result.ptr);
}

}  // namespace ctbath
