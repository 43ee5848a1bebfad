#pragma once

// Two-spin Hahn-echo kernels for a central donor A and one bath donor B.
//
// Conventions: tau is the Hahn half-interval, so the echo is read out at
// t = 2 tau. In the {|u>_A|d>_B, |d>_A|u>_B} block the flip-flop dynamics is
// generated by (1/4)[[D, -J rho], [-J rho, -D]], with D the total detuning;
// omega = (1/4) sqrt(D^2 + (J rho)^2) and theta = atan2(J rho, D).

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "ctbath/spin_core.hpp"

namespace ctbath {

struct PairParams {
    double coupling = 0.0;     // J, rad/s (signed)
    double rho = 0.0;          // flip-flop matrix element
    double p_upper = 0.0;      // P_u
    double p_lower = 0.0;      // P_d
    double overhauser = 0.0;   // gamma, rad/s
    double nonmagnetic = 0.0;  // delta_NM, rad/s
    double mismatch = 0.0;     // intrinsic channel mismatch already in detuning units, rad/s

    double total_detuning() const { return overhauser + nonmagnetic + mismatch; }
    double theta() const { return std::atan2(coupling * rho, total_detuning()); }
    double omega() const { return 0.25 * std::hypot(total_detuning(), coupling * rho); }
    /// J (P_u - P_d)^2 / 4: the instantaneous-diffusion phase rate.
    double zz_rate() const {
        const double dp = p_upper - p_lower;
        return 0.25 * coupling * dp * dp;
    }
};

/// U(2 tau) = U0(tau) sigma_x U0(tau) = A sigma_x + i B 1 + C sigma_z.
struct HahnCoefficients {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
};

HahnCoefficients hahn_coefficients(const PairParams& params, double tau);

/// Initial pair state of (central, neighbour) before the first pi/2 pulse.
enum class PairState { uu, dd, ud, du };

/// Same-state pairs give the triplet (+) branch, mixed pairs the singlet (-).
inline bool is_triplet(PairState state) {
    return state == PairState::uu || state == PairState::dd;
}

/// L^+- = (1/2)[C+ e^{+-i phi} + C- e^{-+i phi}], C^+- = A +- iB -+ C,
/// phi = J (P_u - P_d)^2 tau / 4.
std::complex<double> resonant_pair_coherence(const PairParams& params, double tau,
                                             PairState initial);

/// Equal-weight average over uu, dd, ud, du:
/// [sin^2(w tau) cos 2theta + cos^2(w tau)] cos(J (P_u - P_d)^2 tau / 4).
double thermal_pair_coherence(const PairParams& params, double tau);

enum class NonresonantModel {
    // 1 - sin^2(w tau) sin^2(theta): flip-flop survival probability.
    survival,
    // 1 - 2 sin^2(w tau) sin^2(theta); equals cos(J rho tau / 2) at zero detuning.
    contrast,
};

double nonresonant_pair_coherence(const PairParams& params, double tau,
                                  NonresonantModel model = NonresonantModel::survival);

/// (P_ci - P_cf) B_A + (P_ni - P_nf) B_B: twice the Overhauser energy
/// difference between |ci, ni> and |cf, nf>. Fields are frequency
/// equivalents in rad/s.
double channel_detuning(double p_central_initial, double p_central_final,
                        double p_neighbor_initial, double p_neighbor_final, double field_a,
                        double field_b);

/// gamma = (P_u - P_d)(B_A - B_B).
double pair_detuning(double p_upper, double p_lower, double field_a, double field_b);

enum class PolarizationMode { unperturbed, perturbed };

/// Resonant-pair gamma for a line. In perturbed mode each donor's
/// polarisations are re-evaluated at B0 + B_local / gamma_e, giving
/// (P_u^A - P_d^A) B_A - (P_u^B - P_d^B) B_B.
double pair_detuning(const DonorSpecies& species, const Transition& line, double b0_tesla,
                     double field_a, double field_b, PolarizationMode mode);

enum class PulseAxis { x, y };

struct PairEvolution {
    Eigen::Vector4cd state;  // basis uu, ud, du, dd (central first)
    double fidelity = 0.0;   // |<reference|state>|^2
};

/// Exact (pi/2)_y - tau - (pi)_axis - tau - (pi/2)_y sequence in the
/// four-state (u, d) x (u, d) space with ideal pulses. The pair Hamiltonian,
/// in the frame rotating at the drive frequency, is
///   drive_detuning (S_zA + S_zB) + J P_i P_j / 4 on |ij>,
///   -J rho / 4 between |ud> and |du>.
/// The reference is the same sequence with J = 0, which for a y-axis pi
/// pulse is the initial state itself.
PairEvolution hahn_pair_evolution(double coupling, double p_upper, double p_lower, double rho,
                                  double tau, const Eigen::Vector4cd& initial,
                                  PulseAxis axis = PulseAxis::y, double drive_detuning = 0.0);

/// hahn_pair_evolution with P_u, P_d and rho of `line` evaluated at B0.
PairEvolution drp_full_evolution(const DonorSpecies& species, double b0_tesla,
                                 const Transition& line, double coupling, double tau,
                                 const Eigen::Vector4cd& initial, PulseAxis axis = PulseAxis::y);

/// Echo propagator U0(tau) Pi U0(tau) on the four-state space, without the
/// pi/2 pulses.
Eigen::Matrix4cd echo_propagator(double coupling, double p_upper, double p_lower, double rho,
                                 double tau, PulseAxis axis = PulseAxis::y,
                                 double drive_detuning = 0.0);

/// Basis helpers for the four-state space (uu, ud, du, dd).
Eigen::Vector4cd pair_basis_state(PairState state);

}  // namespace ctbath
