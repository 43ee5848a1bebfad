#include "ctbath/field_points.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "ctbath/pair_echo.hpp"

namespace ctbath {

namespace {

using ScalarFunction = std::function<double(double)>;

struct Root {
    double field;
    double residual;
};

// Sign changes on a coarse grid, each refined by TOMS 748 (bracketing,
// inverse-quadratic/cubic steps).
std::vector<Root> bracketed_roots(const ScalarFunction& f, const FieldRange& range) {
    if (!(range.upper > range.lower) || !(range.scan_step > 0.0)) {
        throw std::invalid_argument("field range must be increasing with a positive step");
    }
    std::vector<Root> roots;
    const auto steps =
        static_cast<std::int64_t>(std::ceil((range.upper - range.lower) / range.scan_step));

    double left = range.lower;
    double f_left = f(left);
    if (f_left == 0.0) roots.push_back({left, 0.0});
    for (std::int64_t k = 1; k <= steps; ++k) {
        const double right =
            std::min(range.upper, range.lower + static_cast<double>(k) * range.scan_step);
        const double f_right = f(right);
        if (f_right == 0.0) {
            roots.push_back({right, 0.0});
        } else if (f_left != 0.0 && std::signbit(f_left) != std::signbit(f_right)) {
            std::uintmax_t iterations = 200;
            const auto bracket = boost::math::tools::toms748_solve(
                f, left, right, f_left, f_right, boost::math::tools::eps_tolerance<double>(52),
                iterations);
            const double lo_res = std::abs(f(bracket.first));
            const double hi_res = std::abs(f(bracket.second));
            const double root = lo_res <= hi_res ? bracket.first : bracket.second;
            roots.push_back({root, f(root)});
        }
        left = right;
        f_left = f_right;
    }

    std::vector<Root> merged;
    for (const auto& root : roots) {
        if (!merged.empty() && root.field - merged.back().field < range.merge_within) {
            if (std::abs(root.residual) < std::abs(merged.back().residual)) merged.back() = root;
            continue;
        }
        merged.push_back(root);
    }
    return merged;
}

Transition line_at(const DonorSpecies& species, const Transition& line, double b_tesla) {
    return Spectrum(species, b_tesla).transition(line);
}

}  // namespace

const char* to_string(FieldPointKind kind) {
    return kind == FieldPointKind::clock_transition ? "CT" : "DRP";
}

double polarization_gap(const DonorSpecies& species, const Transition& line, double b_tesla) {
    return polarization(species, line.upper.label(), b_tesla) -
           polarization(species, line.lower.label(), b_tesla);
}

double phi(const DonorSpecies& species, const Transition& line, double b_tesla) {
    const EigenLevel u = level_at(species, line.upper.label(), b_tesla);
    const EigenLevel d = level_at(species, line.lower.label(), b_tesla);
    const double gap = u.polarization - d.polarization;
    return gap * gap - 2.0 * flip_flop_element(u, d).rho;
}

std::vector<FieldPoint> ct_fields(const DonorSpecies& species, const Transition& line,
                                  const FieldRange& range) {
    const auto roots = bracketed_roots(
        [&](double b) { return polarization_gap(species, line, b); }, range);
    std::vector<FieldPoint> points;
    for (const auto& root : roots) {
        points.push_back({FieldPointKind::clock_transition, root.field,
                          line_at(species, line, root.field), root.residual, 1.0});
    }
    return points;
}

std::vector<FieldPoint> drp_fields(const DonorSpecies& species, const Transition& line,
                                   const FieldRange& range) {
    const auto roots = bracketed_roots([&](double b) { return phi(species, line, b); }, range);

    // Fixed draws: J over 1e1..1e4 rad/s, tau over 1e-6..1 s.
    std::mt19937_64 engine(0x5eed'd17eULL);
    std::uniform_real_distribution<double> log_j(1.0, 4.0);
    std::uniform_real_distribution<double> log_tau(-6.0, 0.0);
    std::vector<std::pair<double, double>> draws;
    for (int k = 0; k < 3; ++k) {
        const double j = std::pow(10.0, log_j(engine));
        draws.emplace_back(j, std::pow(10.0, log_tau(engine)));
    }

    const Eigen::Vector4cd initial = pair_basis_state(PairState::ud);
    std::vector<FieldPoint> points;
    for (const auto& root : roots) {
        double worst = 1.0;
        for (const auto& [j, tau] : draws) {
            worst = std::min(
                worst, drp_full_evolution(species, root.field, line, j, tau, initial).fidelity);
        }
        points.push_back({FieldPointKind::dipolar_refocusing, root.field,
                          line_at(species, line, root.field), root.residual, worst});
    }
    return points;
}

std::vector<ScanRow> scan_table(const DonorSpecies& species, std::span<const Transition> lines,
                                std::span<const double> grid) {
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) {
            throw std::invalid_argument("scan grid must be strictly increasing");
        }
    }
    std::vector<ScanRow> rows;
    rows.reserve(lines.size() * grid.size());
    for (const auto& line : lines) {
        for (const double b : grid) {
            const EigenLevel u = level_at(species, line.upper.label(), b);
            const EigenLevel d = level_at(species, line.lower.label(), b);
            const double gap = u.polarization - d.polarization;
            rows.push_back({b, line.upper.index, line.lower.index,
                            gap * gap - 2.0 * flip_flop_element(u, d).rho, u.polarization,
                            d.polarization, angular_to_hz(u.energy - d.energy)});
        }
    }
    return rows;
}

std::vector<std::vector<double>> level_table(const DonorSpecies& species,
                                             std::span<const double> grid) {
    std::vector<std::vector<double>> table;
    table.reserve(grid.size());
    for (const double b : grid) {
        std::vector<double> row;
        for (const auto& level : eigensystem(species, b)) row.push_back(level.energy);
        table.push_back(std::move(row));
    }
    return table;
}

}  // namespace ctbath
