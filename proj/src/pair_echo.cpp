#include "ctbath/pair_echo.hpp"

#include <cmath>

namespace ctbath {

namespace {

using Complex = std::complex<double>;

Eigen::Matrix2cd rotation(PulseAxis axis, double angle) {
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    Eigen::Matrix2cd r;
    if (axis == PulseAxis::y) {
        r << c, -s, s, c;
    } else {
        r << c, Complex(0.0, -s), Complex(0.0, -s), c;
    }
    return r;
}

Eigen::Matrix4cd both_spins(const Eigen::Matrix2cd& r) {
    Eigen::Matrix4cd out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) out(2 * a + c, 2 * b + d) = r(a, b) * r(c, d);
    return out;
}

Eigen::Matrix4cd free_propagator(double coupling, double p_upper, double p_lower, double rho,
                                 double drive_detuning, double t) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    h(0, 0) = drive_detuning + 0.25 * coupling * p_upper * p_upper;
    h(1, 1) = 0.25 * coupling * p_upper * p_lower;
    h(2, 2) = h(1, 1);
    h(3, 3) = -drive_detuning + 0.25 * coupling * p_lower * p_lower;
    h(1, 2) = -0.25 * coupling * rho;
    h(2, 1) = h(1, 2);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(h);
    const Eigen::Matrix4d& v = solver.eigenvectors();
    Eigen::Vector4cd phases;
    for (int k = 0; k < 4; ++k) phases(k) = std::polar(1.0, -solver.eigenvalues()(k) * t);
    return v.cast<Complex>() * phases.asDiagonal() * v.transpose().cast<Complex>();
}

}  // namespace

HahnCoefficients hahn_coefficients(const PairParams& params, double tau) {
    const double w = params.omega();
    const double theta = params.theta();
    const double s = std::sin(w * tau);
    const double c = std::cos(w * tau);
    return {s * s * std::cos(2.0 * theta) + c * c, std::sin(2.0 * w * tau) * std::sin(theta),
            s * s * std::sin(2.0 * theta)};
}

std::complex<double> resonant_pair_coherence(const PairParams& params, double tau,
                                             PairState initial) {
    const HahnCoefficients h = hahn_coefficients(params, tau);
    const Complex c_plus(h.a - h.c, h.b);
    const Complex c_minus(h.a + h.c, -h.b);
    const double phase = (is_triplet(initial) ? 1.0 : -1.0) * params.zz_rate() * tau;
    return 0.5 * (c_plus * std::polar(1.0, phase) + c_minus * std::polar(1.0, -phase));
}

double thermal_pair_coherence(const PairParams& params, double tau) {
    return hahn_coefficients(params, tau).a * std::cos(params.zz_rate() * tau);
}

double nonresonant_pair_coherence(const PairParams& params, double tau, NonresonantModel model) {
    const double s = std::sin(params.omega() * tau);
    const double st = std::sin(params.theta());
    const double flipped = s * s * st * st;
    return model == NonresonantModel::survival ? 1.0 - flipped : 1.0 - 2.0 * flipped;
}

double channel_detuning(double p_central_initial, double p_central_final,
                        double p_neighbor_initial, double p_neighbor_final, double field_a,
                        double field_b) {
    return (p_central_initial - p_central_final) * field_a +
           (p_neighbor_initial - p_neighbor_final) * field_b;
}

double pair_detuning(double p_upper, double p_lower, double field_a, double field_b) {
    return (p_upper - p_lower) * (field_a - field_b);
}

double pair_detuning(const DonorSpecies& species, const Transition& line, double b0_tesla,
                     double field_a, double field_b, PolarizationMode mode) {
    if (mode == PolarizationMode::unperturbed) {
        const double pu = polarization(species, line.upper.label(), b0_tesla);
        const double pd = polarization(species, line.lower.label(), b0_tesla);
        return pair_detuning(pu, pd, field_a, field_b);
    }
    const double shift_a = field_a / species.gamma_e;
    const double shift_b = field_b / species.gamma_e;
    const double pu_a = polarization(species, line.upper.label(), b0_tesla, shift_a);
    const double pd_a = polarization(species, line.lower.label(), b0_tesla, shift_a);
    const double pu_b = polarization(species, line.upper.label(), b0_tesla, shift_b);
    const double pd_b = polarization(species, line.lower.label(), b0_tesla, shift_b);
    return channel_detuning(pu_a, pd_a, pd_b, pu_b, field_a, field_b);
}

Eigen::Vector4cd pair_basis_state(PairState state) {
    Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
    switch (state) {
        case PairState::uu: v(0) = 1.0; break;
        case PairState::ud: v(1) = 1.0; break;
        case PairState::du: v(2) = 1.0; break;
        case PairState::dd: v(3) = 1.0; break;
    }
    return v;
}

Eigen::Matrix4cd echo_propagator(double coupling, double p_upper, double p_lower, double rho,
                                 double tau, PulseAxis axis, double drive_detuning) {
    const Eigen::Matrix4cd u0 =
        free_propagator(coupling, p_upper, p_lower, rho, drive_detuning, tau);
    return u0 * both_spins(rotation(axis, constants::kPi)) * u0;
}

PairEvolution hahn_pair_evolution(double coupling, double p_upper, double p_lower, double rho,
                                  double tau, const Eigen::Vector4cd& initial, PulseAxis axis,
                                  double drive_detuning) {
    const Eigen::Matrix4cd half = both_spins(rotation(PulseAxis::y, 0.5 * constants::kPi));
    auto run = [&](double j) -> Eigen::Vector4cd {
        return half * echo_propagator(j, p_upper, p_lower, rho, tau, axis, drive_detuning) *
               half * initial;
    };
    PairEvolution out;
    out.state = run(coupling);
    const Eigen::Vector4cd reference = run(0.0);
    out.fidelity = std::norm(reference.dot(out.state));
    return out;
}

PairEvolution drp_full_evolution(const DonorSpecies& species, double b0_tesla,
                                 const Transition& line, double coupling, double tau,
                                 const Eigen::Vector4cd& initial, PulseAxis axis) {
    const EigenLevel u = level_at(species, line.upper.label(), b0_tesla);
    const EigenLevel d = level_at(species, line.lower.label(), b0_tesla);
    const double rho = flip_flop_element(u, d).rho;
    return hahn_pair_evolution(coupling, u.polarization, d.polarization, rho, tau, initial, axis);
}

}  // namespace ctbath
