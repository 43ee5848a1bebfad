#pragma once

// Closed-form T2 estimates from the typical resonant-neighbour coupling.

#include "ctbath/spin_core.hpp"

namespace ctbath {

struct HeuristicInput {
    double density = 4.4e21;            // donors / m^3
    double resonant_fraction = 0.1;
    double b0 = 0.0;                    // tesla, usually the CT field
    double high_field = 3.0;            // tesla, stands in for B0 -> infinity
};

struct HeuristicEstimate {
    double resonant_density = 0.0;     // n_res = f n, m^-3
    double mean_distance = 0.0;        // R with (4 pi / 3) n_res R^3 = 1, m
    double mean_coupling = 0.0;        // <J>(R) = alpha / (2 R^3), rad/s
    double t2_m = 0.0;                 // 1 / T2_M = (pi / 12) alpha n_res, s
    double t2_id = 0.0;                // T2_M / enhancement, s
    double enhancement = 0.0;          // (P_u - P_d)^2 at high field / (2 rho) at B0
    double p_upper = 0.0;              // at B0
    double p_lower = 0.0;
    double p_upper_high = 0.0;         // at high_field
    double p_lower_high = 0.0;
    double rho = 0.0;                  // at B0
};

/// Throws std::invalid_argument on a non-positive density or fraction.
HeuristicEstimate heuristic_t2(const DonorSpecies& species, const Transition& line,
                               const HeuristicInput& input);

}  // namespace ctbath
