#pragma once

// Clock transitions (P_u = P_d) and dipolar refocusing points (phi = 0) as
// roots of scalar functions of B0, plus field-scan tables.

#include <span>
#include <vector>

#include "ctbath/spin_core.hpp"

namespace ctbath {

enum class FieldPointKind { clock_transition, dipolar_refocusing };

const char* to_string(FieldPointKind kind);

struct FieldPoint {
    FieldPointKind kind = FieldPointKind::clock_transition;
    double field = 0.0;  // tesla
    Transition transition;
    double residual = 0.0;
    /// Minimum echo fidelity of the four-state oracle (DRPs only, else 1).
    double oracle_fidelity = 1.0;
};

struct FieldRange {
    double lower = 0.0;  // tesla
    double upper = 0.6;
    double scan_step = 1.0e-4;   // coarse bracketing grid (1 G)
    double merge_within = 0.5e-4;  // roots closer than this are one root
};

/// P_u(B) - P_d(B) for the line's levels.
double polarization_gap(const DonorSpecies& species, const Transition& line, double b_tesla);

/// phi = (P_u - P_d)^2 - 2 rho, rho from flip_flop_element for the line's
/// kind. For allowed lines this is (P_u - P_d)^2 - (1/2)(1 + P_u)(1 - P_d).
double phi(const DonorSpecies& species, const Transition& line, double b_tesla);

/// All clock transitions in range, ascending. Empty if P_u - P_d keeps its sign.
std::vector<FieldPoint> ct_fields(const DonorSpecies& species, const Transition& line,
                                  const FieldRange& range = {});

/// All dipolar refocusing points in range, ascending. Each root is checked
/// with hahn_pair_evolution for |u>|d> at three fixed (J, tau) draws.
std::vector<FieldPoint> drp_fields(const DonorSpecies& species, const Transition& line,
                                   const FieldRange& range = {});

struct ScanRow {
    double field = 0.0;  // tesla
    int line_upper = 0;
    int line_lower = 0;
    double phi = 0.0;
    double p_upper = 0.0;
    double p_lower = 0.0;
    double frequency_hz = 0.0;
};

/// Rows ordered by line, then by grid point. Throws std::invalid_argument on
/// a non-monotone grid.
std::vector<ScanRow> scan_table(const DonorSpecies& species, std::span<const Transition> lines,
                                std::span<const double> grid);

/// Level energies (rad/s) at each grid field; row k holds the 2(2I+1)
/// ascending energies at grid[k].
std::vector<std::vector<double>> level_table(const DonorSpecies& species,
                                             std::span<const double> grid);

}  // namespace ctbath
