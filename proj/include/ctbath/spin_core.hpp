#pragma once

// Donor electron-nuclear spin eigensystem.
//
// The donor Hamiltonian is
//
//   H0 = w0 (S_z - delta I_z) + A I.S,   w0 = gamma_e B0,
//
// which conserves m = m_s + m_I. Apart from the two stretched states with
// |m| = I + 1/2, every level belongs to a doublet of constant m spanned by
// |+1/2, m-1/2> and |-1/2, m+1/2>. The doublet is diagonalised analytically;
// diagonalize_full() builds the dense matrix as an independent check.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctbath/constants.hpp"

namespace ctbath {

struct DonorSpecies {
    std::string name;
    double hyperfine = 0.0;      // A, rad/s
    double nuclear_spin = 0.5;   // I
    double nuclear_ratio = 0.0;  // delta = gamma_n / gamma_e
    double gamma_e = constants::kGammaElectron;

    /// 2I; throws std::invalid_argument unless I is a positive half-integer.
    int twice_spin() const;
    int level_count() const { return 2 * (twice_spin() + 1); }

    /// Throws std::invalid_argument on A <= 0, bad I or delta outside [0, 1).
    void validate() const;

    static DonorSpecies bismuth();
};

enum class Branch { plus, minus, unmixed };

const char* to_string(Branch branch);

/// Field-independent identity of a level: branch and total projection 2m.
struct LevelLabel {
    Branch branch = Branch::unmixed;
    int twice_m = 0;

    friend bool operator==(const LevelLabel&, const LevelLabel&) = default;
};

struct EigenLevel {
    int index = 0;  // 1-based, ascending energy at the evaluation field; 0 if unassigned
    Branch branch = Branch::unmixed;
    int twice_m = 0;
    double energy = 0.0;        // rad/s
    double beta = 0.0;          // mixing angle, rad
    double polarization = 0.0;  // P = 2 <S_z>

    double m() const { return 0.5 * twice_m; }
    LevelLabel label() const { return {branch, twice_m}; }

    // Components on the Zeeman states |+1/2, m-1/2> and |-1/2, m+1/2>.
    double up_amplitude() const;
    double down_amplitude() const;

    /// Stretched states count as plus (m > 0) or minus (m < 0) for
    /// transition classification.
    Branch effective_branch() const;
};

/// Analytic level with the given label at B0 + shift (tesla). The returned
/// level has index 0. Throws std::invalid_argument on a label that does not
/// exist for the species.
EigenLevel level_at(const DonorSpecies& species, LevelLabel label, double b0_tesla,
                    double field_shift_tesla = 0.0);

/// All 2(2I+1) levels sorted by ascending energy and indexed 1..N.
/// Exactly degenerate levels (B0 = 0) are ordered by dE/dB0 so that labels
/// are continuous as B0 -> 0+.
std::vector<EigenLevel> eigensystem(const DonorSpecies& species, double b0_tesla);

struct ZeemanState {
    int twice_ms = 0;
    int twice_mi = 0;
};

struct DenseSpectrum {
    Eigen::VectorXd energies;  // ascending, rad/s
    Eigen::MatrixXd vectors;   // columns are eigenvectors in the Zeeman basis
    std::vector<ZeemanState> basis;

    /// 2 <S_z> of eigenvector `column`.
    double polarization(Eigen::Index column) const;
    /// <m_s, m_I | column> for the Zeeman state, 0 if absent.
    double amplitude(Eigen::Index column, ZeemanState state) const;
};

/// Dense diagonalisation of H0 in the |m_s, m_I> product basis at
/// B0 + shift (tesla).
DenseSpectrum diagonalize_full(const DonorSpecies& species, double b0_tesla,
                               double field_shift_tesla = 0.0);

struct MixingAngle {
    double radians = 0.0;
    bool unmixed = false;  // |m| = I + 1/2: no doublet, angle defined as 0
};

/// beta_m = atan2(sqrt(X_m), Z_m) with X_m = I(I+1) - m^2 + 1/4 and
/// Z_m = m + (w0/A)(1 + delta).
MixingAngle mixing_angle(const DonorSpecies& species, int twice_m, double b0_tesla);

/// P = 2<S_z> of the labelled level at B0 + shift.
double polarization(const DonorSpecies& species, LevelLabel label, double b0_tesla,
                    double field_shift_tesla = 0.0);

enum class TransitionKind { allowed, forbidden_nmr, forbidden_fully, not_connected };

const char* to_string(TransitionKind kind);

struct FlipFlop {
    double rho = 0.0;
    TransitionKind kind = TransitionKind::not_connected;
};

/// <to| S+ |from>; zero unless m_to = m_from + 1.
double raising_element(const EigenLevel& to, const EigenLevel& from);

/// rho = <u d| S1+ S2- + S1- S2+ |d u> for the line (u, d). Pairs that do not
/// differ by one unit of m give rho = 0 and kind not_connected.
FlipFlop flip_flop_element(const EigenLevel& u, const EigenLevel& d);

struct Transition {
    EigenLevel upper;  // u
    EigenLevel lower;  // d
    TransitionKind kind = TransitionKind::not_connected;
    double frequency = 0.0;  // E_u - E_d, rad/s
};

/// The levels of one species at one field, with label lookup.
class Spectrum {
public:
    Spectrum(DonorSpecies species, double b0_tesla);

    const DonorSpecies& species() const { return species_; }
    double field() const { return field_; }
    std::span<const EigenLevel> levels() const { return levels_; }
    int size() const { return static_cast<int>(levels_.size()); }

    /// 1-based lookup; throws std::out_of_range.
    const EigenLevel& level(int index) const;
    const EigenLevel& find(LevelLabel label) const;

    /// Line between levels u and d (E_u >= E_d required).
    Transition transition(int upper_index, int lower_index) const;
    /// Same line re-evaluated at this spectrum's field.
    Transition transition(const Transition& line) const;

private:
    DonorSpecies species_;
    double field_;
    std::vector<EigenLevel> levels_;
};

/// Resolves ascending-energy indices (u, d) at `reference_field_tesla`.
Transition resolve_line(const DonorSpecies& species, int upper_index, int lower_index,
                        double reference_field_tesla);

/// One flip-flop pathway of a (central, neighbour) pair:
/// |ci, ni> -> |cf, nf> with m_ci + m_ni = m_cf + m_nf.
struct PairChannel {
    int central_initial = 0;
    int neighbor_initial = 0;
    int central_final = 0;
    int neighbor_final = 0;
    double rho = 0.0;       // |<cf nf| S1+ S2- + S1- S2+ |ci ni>|
    double mismatch = 0.0;  // E_initial - E_final, rad/s

    bool resonant_swap() const {
        return central_initial == neighbor_final && central_final == neighbor_initial;
    }
};

enum class ChannelSelection {
    // Neighbour must land in u or d: the channels that close as B0 -> infinity.
    resonant_targets,
    // Every m-conserving S+S- pathway.
    all_conserving,
};

/// Channels for a neighbour in `neighbor_index`, for the central spin
/// starting in u and in d. Channels with rho <= threshold are dropped.
std::vector<PairChannel> enumerate_channels(const Spectrum& spectrum, const Transition& central,
                                            int neighbor_index, double threshold = 1e-6,
                                            ChannelSelection selection =
                                                ChannelSelection::resonant_targets);

}  // namespace ctbath
