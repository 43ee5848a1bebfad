#include "ctbath/bath_ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace ctbath {

namespace {

double uniform01(std::mt19937_64& engine) {
    return std::generate_canonical<double, 53>(engine);
}

double sample_detuning(std::mt19937_64& engine, DetuningShape shape, double halfwidth,
                       double clip) {
    if (halfwidth == 0.0) return 0.0;
    if (shape == DetuningShape::lorentzian) return sample_cauchy(engine, halfwidth, clip);
    std::normal_distribution<double> normal(0.0, halfwidth / std::sqrt(2.0 * std::log(2.0)));
    return normal(engine);
}

Eigen::Vector3d sample_shell_point(std::mt19937_64& engine, double r_min, double r_max) {
    const double r_min3 = r_min * r_min * r_min;
    const double r_max3 = r_max * r_max * r_max;
    const double r = std::cbrt(r_min3 + uniform01(engine) * (r_max3 - r_min3));
    const double cos_theta = 2.0 * uniform01(engine) - 1.0;
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double azimuth = constants::kTwoPi * uniform01(engine);
    return {r * sin_theta * std::cos(azimuth), r * sin_theta * std::sin(azimuth),
            r * cos_theta};
}

long sample_count(std::mt19937_64& engine, double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> poisson(mean);
    return poisson(engine);
}

double neighbor_polarization(const EchoModel& model, int level, double field_rad) {
    const EigenLevel& base = model.spectrum().level(level);
    if (model.spec().polarization == PolarizationMode::unperturbed) return base.polarization;
    return polarization(model.spectrum().species(), base.label(), model.field(),
                        field_rad / model.spectrum().species().gamma_e);
}

struct Factor {
    bool resonant = false;
    std::vector<PairParams> pairs;
};

Factor neighbor_factor(const EchoModel& model, const BathConfiguration& config,
                       const Neighbor& neighbor) {
    const Spectrum& spectrum = model.spectrum();
    const Transition& line = model.line();
    const double field_a = config.central_overhauser;
    const double field_b = neighbor.overhauser;

    Factor factor;
    if (model.resonant(neighbor.level)) {
        factor.resonant = true;
        const double gamma =
            model.spec().polarization == PolarizationMode::unperturbed
                ? pair_detuning(line.upper.polarization, line.lower.polarization, field_a, field_b)
                : pair_detuning(spectrum.species(), line, model.field(), field_a, field_b,
                                PolarizationMode::perturbed);
        factor.pairs.push_back({neighbor.coupling, model.line_rho(), line.upper.polarization,
                                line.lower.polarization, gamma, neighbor.nonmagnetic, 0.0});
        return factor;
    }

    for (const PairChannel& channel : model.channels(config.central_level, neighbor.level)) {
        const double gamma = channel_detuning(
            neighbor_polarization(model, channel.central_initial, field_a),
            neighbor_polarization(model, channel.central_final, field_a),
            neighbor_polarization(model, channel.neighbor_initial, field_b),
            neighbor_polarization(model, channel.neighbor_final, field_b), field_a, field_b);
        const double mismatch = model.spec().intrinsic_mismatch ? 2.0 * channel.mismatch : 0.0;
        factor.pairs.push_back({neighbor.coupling, channel.rho, line.upper.polarization,
                                line.lower.polarization, gamma, neighbor.nonmagnetic, mismatch});
    }
    return factor;
}

}  // namespace

const char* to_string(DetuningShape shape) {
    return shape == DetuningShape::lorentzian ? "lorentzian" : "gaussian";
}

void SampleSpec::validate() const {
    if (!(density >= 0.0) || !std::isfinite(density)) {
        throw std::invalid_argument("density must be finite and non-negative");
    }
    if (resonant_fraction && !(*resonant_fraction >= 0.0 && *resonant_fraction <= 1.0)) {
        throw std::invalid_argument("resonant fraction must lie in [0, 1]");
    }
    if (!(overhauser_halfwidth >= 0.0) || !(nonmagnetic_halfwidth >= 0.0)) {
        throw std::invalid_argument("detuning half-widths must be non-negative");
    }
    if (!(expected_neighbors > 0.0)) {
        throw std::invalid_argument("expected neighbour count must be positive");
    }
    if (!(min_radius >= constants::kMinDipolarDistance)) {
        throw std::invalid_argument("minimum radius must be at least 1 nm");
    }
    if (max_radius && !(*max_radius > min_radius)) {
        throw std::invalid_argument("maximum radius must exceed the minimum radius");
    }
    if (realizations < 1) throw std::invalid_argument("need at least one realisation");
    if (!(cauchy_clip > 0.0)) throw std::invalid_argument("Cauchy clip must be positive");
}

double SampleSpec::resonant_fraction_for(const DonorSpecies& species) const {
    return resonant_fraction.value_or(2.0 / species.level_count());
}

double SampleSpec::shell_radius() const {
    if (max_radius) return *max_radius;
    if (density == 0.0) return min_radius;
    const double r_min3 = min_radius * min_radius * min_radius;
    return std::cbrt(r_min3 + 3.0 * expected_neighbors / (4.0 * constants::kPi * density));
}

double SampleSpec::expected_count() const {
    const double r_max = shell_radius();
    return density * 4.0 * constants::kPi / 3.0 *
           (r_max * r_max * r_max - min_radius * min_radius * min_radius);
}

double dipolar_coupling(const Eigen::Vector3d& r, double gamma_e) {
    const double distance = r.norm();
    if (!(distance >= constants::kMinDipolarDistance)) {
        throw std::invalid_argument("donor separation below 1 nm");
    }
    const double cos_theta = r.z() / distance;
    return dipolar_prefactor(gamma_e) * (1.0 - 3.0 * cos_theta * cos_theta) /
           (distance * distance * distance);
}

std::mt19937_64 realization_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(index),
                           static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(sequence);
}

double sample_cauchy(std::mt19937_64& engine, double halfwidth, double clip) {
    const double value = halfwidth * std::tan(constants::kPi * (uniform01(engine) - 0.5));
    const double bound = clip * halfwidth;
    return std::clamp(value, -bound, bound);
}

BathConfiguration sample_configuration(const SampleSpec& spec, const Spectrum& spectrum,
                                       const Transition& line, std::uint64_t index,
                                       std::mt19937_64& engine) {
    const int upper = spectrum.find(line.upper.label()).index;
    const int lower = spectrum.find(line.lower.label()).index;
    const double resonant_fraction = spec.resonant_fraction_for(spectrum.species());
    const int levels = spectrum.size();
    const double r_max = spec.shell_radius();

    BathConfiguration config;
    config.central_level = index % 2 == 0 ? upper : lower;

    const long count = sample_count(engine, spec.expected_count());
    config.neighbors.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        Neighbor neighbor;
        neighbor.position = sample_shell_point(engine, spec.min_radius, r_max);
        if (uniform01(engine) < resonant_fraction) {
            neighbor.level = uniform01(engine) < 0.5 ? upper : lower;
        } else {
            // Uniform over the levels other than u and d.
            int slot = static_cast<int>(uniform01(engine) * (levels - 2)) + 1;
            slot = std::min(slot, levels - 2);
            for (const int taken : {std::min(upper, lower), std::max(upper, lower)}) {
                if (slot >= taken) ++slot;
            }
            neighbor.level = slot;
        }
        neighbor.overhauser = sample_cauchy(engine, spec.overhauser_halfwidth, spec.cauchy_clip);
        neighbor.nonmagnetic = sample_detuning(engine, spec.nonmagnetic_shape,
                                               spec.nonmagnetic_halfwidth, spec.cauchy_clip);
        neighbor.coupling = dipolar_coupling(neighbor.position, spectrum.species().gamma_e);
        config.neighbors.push_back(neighbor);
    }
    return config;
}

EchoModel::EchoModel(const DonorSpecies& species, double b0_tesla, const Transition& line,
                     const SampleSpec& spec)
    : spec_(spec), spectrum_(species, b0_tesla), line_(spectrum_.transition(line)) {
    spec_.validate();
    upper_ = line_.upper.index;
    lower_ = line_.lower.index;
    rho_ = flip_flop_element(line_.upper, line_.lower).rho;

    from_upper_.resize(static_cast<std::size_t>(spectrum_.size()) + 1);
    from_lower_.resize(static_cast<std::size_t>(spectrum_.size()) + 1);
    for (int level = 1; level <= spectrum_.size(); ++level) {
        if (resonant(level)) continue;
        for (const auto& channel :
             enumerate_channels(spectrum_, line_, level, 1e-6, spec_.channels)) {
            auto& bucket = channel.central_initial == upper_ ? from_upper_ : from_lower_;
            bucket[static_cast<std::size_t>(level)].push_back(channel);
        }
    }
}

std::span<const PairChannel> EchoModel::channels(int central_level, int level) const {
    const auto& bucket = central_level == upper_ ? from_upper_ : from_lower_;
    return bucket.at(static_cast<std::size_t>(level));
}

std::vector<double> configuration_coherence(const EchoModel& model,
                                            const BathConfiguration& config,
                                            std::span<const double> times) {
    std::vector<Factor> factors;
    factors.reserve(config.neighbors.size());
    for (const auto& neighbor : config.neighbors) {
        Factor factor = neighbor_factor(model, config, neighbor);
        if (!factor.pairs.empty()) factors.push_back(std::move(factor));
    }

    std::vector<double> coherence(times.size(), 1.0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double tau = 0.5 * times[i];
        double product = 1.0;
        for (const auto& factor : factors) {
            for (const auto& pair : factor.pairs) {
                product *= factor.resonant
                               ? thermal_pair_coherence(pair, tau)
                               : nonresonant_pair_coherence(pair, tau, model.spec().nonresonant);
            }
        }
        coherence[i] = product;
    }
    return coherence;
}

CoherenceCurve ensemble_average(const EchoModel& model, std::span<const double> times,
                                int threads) {
    const int count = model.spec().realizations;
    const std::size_t width = times.size();
    std::vector<double> rows(static_cast<std::size_t>(count) * width);

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int index = next++; index < count; index = next++) {
            try {
                auto engine = realization_engine(model.spec().seed, static_cast<std::uint64_t>(index));
                const auto config = sample_configuration(model.spec(), model.spectrum(),
                                                         model.line(),
                                                         static_cast<std::uint64_t>(index), engine);
                const auto values = configuration_coherence(model, config, times);
                std::copy(values.begin(), values.end(),
                          rows.begin() + static_cast<std::ptrdiff_t>(index * width));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    const int pool = std::clamp(threads, 1, count);
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::jthread> workers;
        for (int k = 0; k < pool; ++k) workers.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    CoherenceCurve curve;
    curve.times.assign(times.begin(), times.end());
    curve.mean.assign(width, 0.0);
    curve.stderr_.assign(width, 0.0);
    curve.realizations = count;
    for (std::size_t i = 0; i < width; ++i) {
        double sum = 0.0;
        for (int r = 0; r < count; ++r) sum += rows[static_cast<std::size_t>(r) * width + i];
        const double mean = sum / count;
        double squares = 0.0;
        for (int r = 0; r < count; ++r) {
            const double diff = rows[static_cast<std::size_t>(r) * width + i] - mean;
            squares += diff * diff;
        }
        curve.mean[i] = mean;
        curve.stderr_[i] = count > 1 ? std::sqrt(squares / (count - 1) / count) : 0.0;
    }
    return curve;
}

double estimate_overhauser_width(const Spectrum& spectrum, const SampleSpec& spec,
                                 double silicon_halfwidth, int samples) {
    spec.validate();
    if (samples < 4) throw std::invalid_argument("need at least four samples");
    if (spec.density == 0.0) return silicon_halfwidth;

    const double r_max = spec.shell_radius();
    std::vector<double> fields(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        auto engine = realization_engine(spec.seed, static_cast<std::uint64_t>(s));
        const long count = sample_count(engine, spec.expected_count());
        double field = 0.0;
        for (long k = 0; k < count; ++k) {
            const Eigen::Vector3d r = sample_shell_point(engine, spec.min_radius, r_max);
            const int level =
                std::min(static_cast<int>(uniform01(engine) * spectrum.size()), spectrum.size() - 1) + 1;
            field += 0.5 * dipolar_coupling(r, spectrum.species().gamma_e) *
                     spectrum.level(level).polarization;
        }
        fields[static_cast<std::size_t>(s)] = field;
    }
    std::sort(fields.begin(), fields.end());
    auto quantile = [&](double q) {
        const double position = q * (samples - 1);
        const auto lo = static_cast<std::size_t>(position);
        const auto hi = std::min(lo + 1, fields.size() - 1);
        return fields[lo] + (position - static_cast<double>(lo)) * (fields[hi] - fields[lo]);
    };
    return 0.5 * (quantile(0.75) - quantile(0.25)) + silicon_halfwidth;
}

}  // namespace ctbath
