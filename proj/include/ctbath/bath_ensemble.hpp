#pragma once

// Monte-Carlo donor baths around a central donor and the cluster-product
// Hahn-echo coherence they produce.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctbath/pair_echo.hpp"
#include "ctbath/spin_core.hpp"

namespace ctbath {

enum class DetuningShape { lorentzian, gaussian };

const char* to_string(DetuningShape shape);

struct SampleSpec {
    double density = 4.4e21;                     // donors / m^3
    std::optional<double> resonant_fraction;     // default 2 / (number of levels)
    double overhauser_halfwidth = 0.0;           // w_OH, rad/s
    double nonmagnetic_halfwidth = 0.0;          // w_NM, rad/s
    DetuningShape nonmagnetic_shape = DetuningShape::lorentzian;
    double expected_neighbors = 100.0;           // sets R_max when max_radius is unset
    std::optional<double> max_radius;            // m
    double min_radius = constants::kMinDipolarDistance;
    int realizations = 1000;
    std::uint64_t seed = 1;
    PolarizationMode polarization = PolarizationMode::unperturbed;
    NonresonantModel nonresonant = NonresonantModel::survival;
    ChannelSelection channels = ChannelSelection::resonant_targets;
    bool intrinsic_mismatch = false;  // add 2 deltaE of each channel to its detuning
    double cauchy_clip = 1.0e6;       // Cauchy draws clipped at this many half-widths

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
    double resonant_fraction_for(const DonorSpecies& species) const;
    /// Outer radius of the sampling shell.
    double shell_radius() const;
    /// Expected number of donors in the shell [min_radius, shell_radius()].
    double expected_count() const;
};

struct Neighbor {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  // m, central donor at origin
    int level = 0;              // 1-based eigenlevel index
    double overhauser = 0.0;    // B_B, rad/s
    double nonmagnetic = 0.0;   // delta_NM, rad/s
    double coupling = 0.0;      // J, rad/s
};

struct BathConfiguration {
    int central_level = 0;            // u or d
    double central_overhauser = 0.0;  // B_A; the relative field is carried by B_B
    std::vector<Neighbor> neighbors;
};

/// J = (mu0/4pi) gamma_e^2 hbar (1 - 3 cos^2 theta_z) / |r|^3. Throws
/// std::invalid_argument for |r| below 1 nm.
double dipolar_coupling(const Eigen::Vector3d& r, double gamma_e);

/// Independent engine for realisation `index` of a run seeded with `seed`.
std::mt19937_64 realization_engine(std::uint64_t seed, std::uint64_t index);

/// w tan(pi (u - 1/2)) clipped at +-clip w.
double sample_cauchy(std::mt19937_64& engine, double halfwidth, double clip);

/// One configuration. Neighbour count is Poisson(n V); positions are uniform
/// in the shell; a neighbour is in u or d (equally) with the resonant
/// fraction, otherwise uniform over the remaining levels. The central donor
/// is in u for even `index` and d for odd `index`.
BathConfiguration sample_configuration(const SampleSpec& spec, const Spectrum& spectrum,
                                       const Transition& line, std::uint64_t index,
                                       std::mt19937_64& engine);

/// Per-field quantities shared by every configuration: polarisations and
/// the channel list for every neighbour level and both central states.
class EchoModel {
public:
    EchoModel(const DonorSpecies& species, double b0_tesla, const Transition& line,
              const SampleSpec& spec);

    const Spectrum& spectrum() const { return spectrum_; }
    const Transition& line() const { return line_; }
    const SampleSpec& spec() const { return spec_; }
    double field() const { return spectrum_.field(); }
    double line_rho() const { return rho_; }
    bool resonant(int level) const { return level == upper_ || level == lower_; }
    /// Channels for a neighbour in `level` with the central donor in `central_level`.
    std::span<const PairChannel> channels(int central_level, int level) const;

private:
    SampleSpec spec_;
    Spectrum spectrum_;
    Transition line_;
    int upper_ = 0;
    int lower_ = 0;
    double rho_ = 0.0;
    std::vector<std::vector<PairChannel>> from_upper_;
    std::vector<std::vector<PairChannel>> from_lower_;
};

/// Product over neighbours of their pair factors at total times `times`
/// (tau = t / 2). Resonant neighbours contribute thermal_pair_coherence,
/// the others the product of nonresonant_pair_coherence over their channels.
std::vector<double> configuration_coherence(const EchoModel& model,
                                            const BathConfiguration& config,
                                            std::span<const double> times);

struct CoherenceCurve {
    std::vector<double> times;  // s, total echo time 2 tau
    std::vector<double> mean;
    std::vector<double> stderr_;
    int realizations = 0;
};

/// Mean and standard error over spec.realizations configurations. Each
/// realisation owns its engine, and the reduction runs in index order, so the
/// result does not depend on `threads`.
CoherenceCurve ensemble_average(const EchoModel& model, std::span<const double> times,
                                int threads = 1);

/// Half-width of the donor dipolar field sum_k J_k P_k / 2 at the central
/// donor (interquartile half-range of `samples` Monte-Carlo draws), plus the
/// configured 29Si half-width. Cauchy half-widths add.
double estimate_overhauser_width(const Spectrum& spectrum, const SampleSpec& spec,
                                 double silicon_halfwidth, int samples = 20000);

}  // namespace ctbath
