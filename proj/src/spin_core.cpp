#include "ctbath/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctbath {

namespace {

constexpr double kHalfIntegerTolerance = 1e-9;

// <to| S+ |from> or <to| S- |from>, whichever conserves m; zero otherwise.
double spin_flip_element(const EigenLevel& to, const EigenLevel& from) {
    if (to.twice_m == from.twice_m + 2) return raising_element(to, from);
    if (to.twice_m == from.twice_m - 2) return raising_element(from, to);
    return 0.0;
}

// dE/dw0 via Hellmann-Feynman: <S_z> - delta <I_z>, with <I_z> = m - <S_z>.
double zeeman_slope(const EigenLevel& level, double delta) {
    const double sz = 0.5 * level.polarization;
    return sz - delta * (level.m() - sz);
}

}  // namespace

int DonorSpecies::twice_spin() const {
    const double twice = 2.0 * nuclear_spin;
    const double rounded = std::round(twice);
    if (!(rounded >= 1.0) || std::abs(twice - rounded) > kHalfIntegerTolerance) {
        throw std::invalid_argument("nuclear spin must be a positive half-integer, got " +
                                    std::to_string(nuclear_spin));
    }
    return static_cast<int>(rounded);
}

void DonorSpecies::validate() const {
    (void)twice_spin();
    if (!(hyperfine > 0.0) || !std::isfinite(hyperfine)) {
        throw std::invalid_argument("hyperfine coupling must be positive");
    }
    if (!(nuclear_ratio >= 0.0 && nuclear_ratio < 1.0)) {
        throw std::invalid_argument("nuclear/electron gyromagnetic ratio must lie in [0, 1)");
    }
    if (!(gamma_e > 0.0) || !std::isfinite(gamma_e)) {
        throw std::invalid_argument("electron gyromagnetic ratio must be positive");
    }
}

DonorSpecies DonorSpecies::bismuth() {
    return {"Bi", mhz_to_angular(1475.4), 4.5, 2.488e-4, constants::kGammaElectron};
}

const char* to_string(Branch branch) {
    switch (branch) {
        case Branch::plus: return "plus";
        case Branch::minus: return "minus";
        case Branch::unmixed: return "unmixed";
    }
    return "unknown";
}

const char* to_string(TransitionKind kind) {
    switch (kind) {
        case TransitionKind::allowed: return "allowed";
        case TransitionKind::forbidden_nmr: return "forbidden-nmr";
        case TransitionKind::forbidden_fully: return "forbidden-fully";
        case TransitionKind::not_connected: return "not-connected";
    }
    return "unknown";
}

double EigenLevel::up_amplitude() const {
    switch (branch) {
        case Branch::plus: return std::cos(0.5 * beta);
        case Branch::minus: return -std::sin(0.5 * beta);
        case Branch::unmixed: return twice_m > 0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double EigenLevel::down_amplitude() const {
    switch (branch) {
        case Branch::plus: return std::sin(0.5 * beta);
        case Branch::minus: return std::cos(0.5 * beta);
        case Branch::unmixed: return twice_m > 0 ? 0.0 : 1.0;
    }
    return 0.0;
}

Branch EigenLevel::effective_branch() const {
    if (branch != Branch::unmixed) return branch;
    return twice_m > 0 ? Branch::plus : Branch::minus;
}

EigenLevel level_at(const DonorSpecies& species, LevelLabel label, double b0_tesla,
                    double field_shift_tesla) {
    const int twice_i = species.twice_spin();
    const int twice_m = label.twice_m;
    const bool stretched = std::abs(twice_m) == twice_i + 1;
    if ((twice_m + twice_i + 1) % 2 != 0 || std::abs(twice_m) > twice_i + 1 ||
        stretched != (label.branch == Branch::unmixed)) {
        throw std::invalid_argument("no level with branch " + std::string(to_string(label.branch)) +
                                    " and 2m = " + std::to_string(twice_m));
    }

    const double a = species.hyperfine;
    const double delta = species.nuclear_ratio;
    const double omega = species.gamma_e * (b0_tesla + field_shift_tesla);
    const double spin = species.nuclear_spin;
    const double m = 0.5 * twice_m;

    EigenLevel level;
    level.branch = label.branch;
    level.twice_m = twice_m;

    if (stretched) {
        const double sign = twice_m > 0 ? 1.0 : -1.0;
        level.energy = sign * (0.5 * omega - delta * omega * spin) + 0.5 * a * spin;
        level.beta = 0.0;
        level.polarization = sign;
        return level;
    }

    // 2x2 block in {|+1/2, m-1/2>, |-1/2, m+1/2>}: mean -delta w0 m - A/4,
    // half-splitting (A/2) sqrt(Z_m^2 + X_m). Written without dividing by A.
    const double x = spin * (spin + 1.0) - m * m + 0.25;
    const double z = a * m + omega * (1.0 + delta);
    const double off = a * std::sqrt(x);
    const double mean = -delta * omega * m - 0.25 * a;
    const double half_split = 0.5 * std::hypot(z, off);

    level.beta = std::atan2(off, z);
    if (label.branch == Branch::plus) {
        level.energy = mean + half_split;
        level.polarization = std::cos(level.beta);
    } else {
        level.energy = mean - half_split;
        level.polarization = -std::cos(level.beta);
    }
    return level;
}

std::vector<EigenLevel> eigensystem(const DonorSpecies& species, double b0_tesla) {
    species.validate();
    if (!(b0_tesla >= 0.0)) throw std::invalid_argument("B0 must be non-negative");

    const int twice_i = species.twice_spin();
    std::vector<EigenLevel> levels;
    levels.reserve(static_cast<std::size_t>(species.level_count()));
    for (int twice_m = -twice_i - 1; twice_m <= twice_i + 1; twice_m += 2) {
        if (std::abs(twice_m) == twice_i + 1) {
            levels.push_back(level_at(species, {Branch::unmixed, twice_m}, b0_tesla));
        } else {
            levels.push_back(level_at(species, {Branch::plus, twice_m}, b0_tesla));
            levels.push_back(level_at(species, {Branch::minus, twice_m}, b0_tesla));
        }
    }

    std::sort(levels.begin(), levels.end(),
              [](const EigenLevel& l, const EigenLevel& r) { return l.energy < r.energy; });

    // Degenerate clusters (zero field multiplets) are ordered by slope.
    const double scale = species.hyperfine + species.gamma_e * b0_tesla;
    const double tolerance = 1e-12 * scale;
    const double delta = species.nuclear_ratio;
    auto begin = levels.begin();
    while (begin != levels.end()) {
        auto end = begin + 1;
        while (end != levels.end() && end->energy - (end - 1)->energy <= tolerance) ++end;
        std::stable_sort(begin, end, [delta](const EigenLevel& l, const EigenLevel& r) {
            return zeeman_slope(l, delta) < zeeman_slope(r, delta);
        });
        begin = end;
    }

    for (std::size_t i = 0; i < levels.size(); ++i) levels[i].index = static_cast<int>(i) + 1;
    return levels;
}

double DenseSpectrum::polarization(Eigen::Index column) const {
    double p = 0.0;
    for (std::size_t row = 0; row < basis.size(); ++row) {
        const double c = vectors(static_cast<Eigen::Index>(row), column);
        p += c * c * basis[row].twice_ms;
    }
    return p;
}

double DenseSpectrum::amplitude(Eigen::Index column, ZeemanState state) const {
    for (std::size_t row = 0; row < basis.size(); ++row) {
        if (basis[row].twice_ms == state.twice_ms && basis[row].twice_mi == state.twice_mi) {
            return vectors(static_cast<Eigen::Index>(row), column);
        }
    }
    return 0.0;
}

DenseSpectrum diagonalize_full(const DonorSpecies& species, double b0_tesla,
                               double field_shift_tesla) {
    const int twice_i = species.twice_spin();
    const double spin = species.nuclear_spin;
    const double a = species.hyperfine;
    const double omega = species.gamma_e * (b0_tesla + field_shift_tesla);
    const double delta = species.nuclear_ratio;

    DenseSpectrum out;
    for (int twice_ms : {1, -1}) {
        for (int twice_mi = twice_i; twice_mi >= -twice_i; twice_mi -= 2) {
            out.basis.push_back({twice_ms, twice_mi});
        }
    }
    const auto n = static_cast<Eigen::Index>(out.basis.size());
    const Eigen::Index nuclear_dim = twice_i + 1;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index row = 0; row < n; ++row) {
        const double ms = 0.5 * out.basis[static_cast<std::size_t>(row)].twice_ms;
        const double mi = 0.5 * out.basis[static_cast<std::size_t>(row)].twice_mi;
        h(row, row) = omega * ms - omega * delta * mi + a * ms * mi;
    }
    // (A/2)(S+ I- + S- I+): |-1/2, mI> <-> |+1/2, mI - 1>.
    for (Eigen::Index k = 0; k < nuclear_dim; ++k) {
        const Eigen::Index down = nuclear_dim + k;  // |-1/2, mI>
        const double mi = 0.5 * out.basis[static_cast<std::size_t>(down)].twice_mi;
        if (out.basis[static_cast<std::size_t>(down)].twice_mi == -twice_i) continue;
        const Eigen::Index up = k + 1;  // |+1/2, mI - 1>
        const double element = 0.5 * a * std::sqrt(spin * (spin + 1.0) - mi * (mi - 1.0));
        h(up, down) = element;
        h(down, up) = element;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("dense diagonalisation failed");
    }
    out.energies = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
    return out;
}

MixingAngle mixing_angle(const DonorSpecies& species, int twice_m, double b0_tesla) {
    const int twice_i = species.twice_spin();
    if (std::abs(twice_m) == twice_i + 1) return {0.0, true};
    return {level_at(species, {Branch::plus, twice_m}, b0_tesla).beta, false};
}

double polarization(const DonorSpecies& species, LevelLabel label, double b0_tesla,
                    double field_shift_tesla) {
    return level_at(species, label, b0_tesla, field_shift_tesla).polarization;
}

double raising_element(const EigenLevel& to, const EigenLevel& from) {
    if (to.twice_m != from.twice_m + 2) return 0.0;
    // S+ |-1/2, m_from + 1/2> = |+1/2, m_to - 1/2>.
    return to.up_amplitude() * from.down_amplitude();
}

FlipFlop flip_flop_element(const EigenLevel& u, const EigenLevel& d) {
    const int step = u.twice_m - d.twice_m;
    if (std::abs(step) != 2) return {0.0, TransitionKind::not_connected};
    const EigenLevel& high = step > 0 ? u : d;
    const EigenLevel& low = step > 0 ? d : u;
    const double amplitude = raising_element(high, low);

    const Branch hb = high.effective_branch();
    const Branch lb = low.effective_branch();
    TransitionKind kind = TransitionKind::forbidden_nmr;
    if (hb == Branch::plus && lb == Branch::minus) kind = TransitionKind::allowed;
    if (hb == Branch::minus && lb == Branch::plus) kind = TransitionKind::forbidden_fully;
    return {amplitude * amplitude, kind};
}

Spectrum::Spectrum(DonorSpecies species, double b0_tesla)
    : species_(std::move(species)), field_(b0_tesla), levels_(eigensystem(species_, b0_tesla)) {}

const EigenLevel& Spectrum::level(int index) const {
    if (index < 1 || index > size()) {
        throw std::out_of_range("level index " + std::to_string(index) + " outside 1.." +
                                std::to_string(size()));
    }
    return levels_[static_cast<std::size_t>(index - 1)];
}

const EigenLevel& Spectrum::find(LevelLabel label) const {
    for (const auto& level : levels_) {
        if (level.label() == label) return level;
    }
    throw std::out_of_range("no level with the requested label");
}

Transition Spectrum::transition(int upper_index, int lower_index) const {
    const EigenLevel& u = level(upper_index);
    const EigenLevel& d = level(lower_index);
    if (upper_index == lower_index || u.energy < d.energy) {
        throw std::invalid_argument("transition needs E_u > E_d, got " +
                                    std::to_string(upper_index) + "->" +
                                    std::to_string(lower_index));
    }
    return {u, d, flip_flop_element(u, d).kind, u.energy - d.energy};
}

Transition Spectrum::transition(const Transition& line) const {
    const EigenLevel& u = find(line.upper.label());
    const EigenLevel& d = find(line.lower.label());
    return {u, d, flip_flop_element(u, d).kind, u.energy - d.energy};
}

Transition resolve_line(const DonorSpecies& species, int upper_index, int lower_index,
                        double reference_field_tesla) {
    return Spectrum(species, reference_field_tesla).transition(upper_index, lower_index);
}

std::vector<PairChannel> enumerate_channels(const Spectrum& spectrum, const Transition& central,
                                            int neighbor_index, double threshold,
                                            ChannelSelection selection) {
    const EigenLevel& u = spectrum.find(central.upper.label());
    const EigenLevel& d = spectrum.find(central.lower.label());
    const EigenLevel& neighbor = spectrum.level(neighbor_index);

    std::vector<PairChannel> channels;
    for (const bool from_upper : {true, false}) {
        const EigenLevel& ci = from_upper ? u : d;
        const EigenLevel& cf = from_upper ? d : u;
        const double central_element = spin_flip_element(cf, ci);
        if (central_element == 0.0) continue;
        const int target_twice_m = neighbor.twice_m - (cf.twice_m - ci.twice_m);

        for (const auto& nf : spectrum.levels()) {
            if (nf.twice_m != target_twice_m) continue;
            if (selection == ChannelSelection::resonant_targets && nf.index != u.index &&
                nf.index != d.index) {
                continue;
            }
            const double rho = std::abs(central_element * spin_flip_element(nf, neighbor));
            if (rho <= threshold) continue;
            channels.push_back({ci.index, neighbor.index, cf.index, nf.index, rho,
                                (ci.energy + neighbor.energy) - (cf.energy + nf.energy)});
        }
    }
    return channels;
}

}  // namespace ctbath
