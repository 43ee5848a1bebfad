#include "ctbath/heuristics.hpp"

#include <cmath>
#include <stdexcept>

namespace ctbath {

HeuristicEstimate heuristic_t2(const DonorSpecies& species, const Transition& line,
                               const HeuristicInput& input) {
    if (!(input.density > 0.0) || !(input.resonant_fraction > 0.0)) {
        throw std::invalid_argument("heuristics need a positive density and resonant fraction");
    }
    const double alpha = dipolar_prefactor(species.gamma_e);

    HeuristicEstimate out;
    out.resonant_density = input.resonant_fraction * input.density;
    out.mean_distance = std::cbrt(3.0 / (4.0 * constants::kPi * out.resonant_density));
    out.mean_coupling = 0.5 * alpha / std::pow(out.mean_distance, 3);
    out.t2_m = 1.0 / (constants::kPi / 12.0 * alpha * out.resonant_density);

    const EigenLevel u = level_at(species, line.upper.label(), input.b0);
    const EigenLevel d = level_at(species, line.lower.label(), input.b0);
    out.p_upper = u.polarization;
    out.p_lower = d.polarization;
    out.rho = flip_flop_element(u, d).rho;
    out.p_upper_high = polarization(species, line.upper.label(), input.high_field);
    out.p_lower_high = polarization(species, line.lower.label(), input.high_field);

    const double gap = out.p_upper_high - out.p_lower_high;
    out.enhancement = gap * gap / (2.0 * out.rho);
    out.t2_id = out.t2_m / out.enhancement;
    return out;
}

}  // namespace ctbath
