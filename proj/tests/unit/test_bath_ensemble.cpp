#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ctbath/bath_ensemble.hpp"
#include "ctbath/field_points.hpp"
#include "oracles.hpp"

using namespace ctbath;

namespace {

const DonorSpecies kBi = DonorSpecies::bismuth();

Transition line_14_7() { return resolve_line(kBi, 14, 7, 0.0799); }

double ct_field() { return ct_fields(kBi, line_14_7()).front().field; }

std::vector<double> grid(double t_max, int points) {
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = t_max * i / (points - 1);
    return t;
}

}  // namespace

TEST_SUITE("bath_ensemble") {

TEST_CASE("dipolar coupling geometry") {
    const double alpha = dipolar_prefactor(kBi.gamma_e);
    const double r = 2e-8;
    CHECK(dipolar_coupling({0, 0, r}, kBi.gamma_e) == doctest::Approx(-2 * alpha / (r * r * r)));
    CHECK(dipolar_coupling({r, 0, 0}, kBi.gamma_e) == doctest::Approx(alpha / (r * r * r)));

    const double magic = std::acos(1.0 / std::sqrt(3.0));
    const Eigen::Vector3d at_magic{r * std::sin(magic), 0.0, r * std::cos(magic)};
    CHECK(std::abs(dipolar_coupling(at_magic, kBi.gamma_e)) < 1e-12 * alpha / (r * r * r));

    const Eigen::Vector3d v{1e-8, -2e-8, 3e-8};
    CHECK(dipolar_coupling(2 * v, kBi.gamma_e) == doctest::Approx(dipolar_coupling(v, kBi.gamma_e) / 8));

    CHECK_THROWS_AS(dipolar_coupling({0, 0, 0.5e-9}, kBi.gamma_e), std::invalid_argument);
    CHECK_THROWS_AS(dipolar_coupling({0, 0, 0}, kBi.gamma_e), std::invalid_argument);
}

TEST_CASE("orientation average of |J| is 4 / (3 sqrt 3) alpha / r^3") {
    const double integral =
        oracle::simpson([](double u) { return 0.5 * std::abs(1 - 3 * u * u); }, -1.0, 1.0, 200000);
    CHECK(integral == doctest::Approx(4.0 / (3.0 * std::sqrt(3.0))).epsilon(1e-6));

    auto engine = realization_engine(7, 0);
    std::uniform_real_distribution<double> cosine(-1.0, 1.0);
    const double r = 3e-8;
    const double alpha = dipolar_prefactor(kBi.gamma_e);
    double sum = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double c = cosine(engine);
        sum += std::abs(dipolar_coupling({r * std::sqrt(1 - c * c), 0, r * c}, kBi.gamma_e));
    }
    CHECK(sum / n / (alpha / (r * r * r)) == doctest::Approx(integral).epsilon(0.01));
}

TEST_CASE("Cauchy draws: quartiles at +-w and clipping") {
    auto engine = realization_engine(1, 2);
    std::vector<double> draws;
    for (int k = 0; k < 40000; ++k) draws.push_back(sample_cauchy(engine, 3.0, 1e6));
    std::sort(draws.begin(), draws.end());
    CHECK(draws[10000] == doctest::Approx(-3.0).epsilon(0.05));
    CHECK(draws[30000] == doctest::Approx(3.0).epsilon(0.05));
    CHECK(draws.front() >= -3e6);
    CHECK(draws.back() <= 3e6);

    auto tight = realization_engine(1, 3);
    for (int k = 0; k < 1000; ++k) CHECK(std::abs(sample_cauchy(tight, 1.0, 2.0)) <= 2.0);
    CHECK(sample_cauchy(tight, 0.0, 1e6) == 0.0);
}

TEST_CASE("configurations are reproducible per (seed, index)") {
    SampleSpec spec;
    const Spectrum spectrum(kBi, 0.0799);
    auto first = realization_engine(99, 5);
    auto second = realization_engine(99, 5);
    const auto a = sample_configuration(spec, spectrum, line_14_7(), 5, first);
    const auto b = sample_configuration(spec, spectrum, line_14_7(), 5, second);
    REQUIRE(a.neighbors.size() == b.neighbors.size());
    for (std::size_t k = 0; k < a.neighbors.size(); ++k) {
        CHECK(a.neighbors[k].position == b.neighbors[k].position);
        CHECK(a.neighbors[k].level == b.neighbors[k].level);
        CHECK(a.neighbors[k].coupling == b.neighbors[k].coupling);
    }
    CHECK(a.central_level == 7);

    auto other = realization_engine(99, 6);
    CHECK(sample_configuration(spec, spectrum, line_14_7(), 6, other).central_level == 14);
}

TEST_CASE("neighbour statistics: count, resonant fraction, level coverage, radius") {
    SampleSpec spec;
    const Spectrum spectrum(kBi, 0.0799);
    const int configs = 3000;
    double count = 0.0;
    double resonant = 0.0;
    std::vector<int> per_level(21, 0);
    for (int i = 0; i < configs; ++i) {
        auto engine = realization_engine(4, static_cast<std::uint64_t>(i));
        const auto config = sample_configuration(spec, spectrum, line_14_7(), i, engine);
        count += config.neighbors.size();
        for (const auto& n : config.neighbors) {
            CHECK(n.position.norm() <= spec.shell_radius() * (1 + 1e-12));
            CHECK(n.position.norm() >= spec.min_radius);
            if (n.level == 7 || n.level == 14) resonant += 1;
            ++per_level[static_cast<std::size_t>(n.level)];
        }
    }
    CHECK(count / configs == doctest::Approx(100.0).epsilon(0.01));
    const double fraction = resonant / count;
    CHECK(std::abs(fraction - 0.1) < 4 * std::sqrt(0.09 / count));
    // Uniform over all 20 levels by default.
    for (int level = 1; level <= 20; ++level) {
        CHECK(per_level[static_cast<std::size_t>(level)] / count == doctest::Approx(0.05).epsilon(0.06));
    }
}

TEST_CASE("nearest resonant neighbour follows 1 - exp(-r^3 / R^3)") {
    SampleSpec spec;
    const Spectrum spectrum(kBi, 0.0799);
    const double n_res = spec.density * spec.resonant_fraction_for(kBi);
    std::vector<double> nearest;
    for (int i = 0; i < 3000; ++i) {
        auto engine = realization_engine(12, static_cast<std::uint64_t>(i));
        const auto config = sample_configuration(spec, spectrum, line_14_7(), i, engine);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& n : config.neighbors) {
            if (n.level == 7 || n.level == 14) best = std::min(best, n.position.norm());
        }
        nearest.push_back(best);
    }
    const double p = oracle::ks_pvalue(nearest, [&](double r) {
        return 1.0 - std::exp(-4.0 * constants::kPi / 3.0 * n_res * r * r * r);
    });
    CHECK(p > 0.01);
}

TEST_CASE("single resonant neighbour reproduces the pair kernel") {
    SampleSpec spec;
    const double b = 0.0799;
    const EchoModel model(kBi, b, line_14_7(), spec);
    BathConfiguration config;
    config.central_level = 14;
    Neighbor n;
    n.position = {0, 0, 3e-8};
    n.level = 7;
    n.overhauser = 2.5e3;
    n.nonmagnetic = 40.0;
    n.coupling = dipolar_coupling(n.position, kBi.gamma_e);
    config.neighbors.push_back(n);

    const auto times = grid(0.05, 21);
    const auto values = configuration_coherence(model, config, times);
    const Transition line = model.line();
    PairParams p;
    p.coupling = n.coupling;
    p.rho = flip_flop_element(line.upper, line.lower).rho;
    p.p_upper = line.upper.polarization;
    p.p_lower = line.lower.polarization;
    p.overhauser = pair_detuning(p.p_upper, p.p_lower, 0.0, n.overhauser);
    p.nonmagnetic = n.nonmagnetic;
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(values[i] == doctest::Approx(thermal_pair_coherence(p, times[i] / 2)).epsilon(1e-14));
    }
}

TEST_CASE("neighbours without channels leave the coherence at one") {
    SampleSpec spec;
    const EchoModel model(kBi, ct_field(), line_14_7(), spec);
    BathConfiguration config;
    config.central_level = 14;
    for (const int level : {1, 2, 3, 4, 9, 10, 11, 16, 17, 18, 19, 20}) {
        REQUIRE(model.channels(14, level).empty());
        Neighbor n;
        n.position = {2e-8, 0, 1e-8 * level};
        n.level = level;
        n.coupling = dipolar_coupling(n.position, kBi.gamma_e);
        config.neighbors.push_back(n);
    }
    for (const double v : configuration_coherence(model, config, grid(0.1, 11))) CHECK(v == 1.0);
}

TEST_CASE("high field with large Overhauser detunings is instantaneous diffusion only") {
    SampleSpec spec;
    const double b = 1.0e3;
    const EchoModel model(kBi, b, line_14_7(), spec);
    const Transition line = model.line();
    const double dp = line.upper.polarization - line.lower.polarization;
    BathConfiguration config;
    config.central_level = line.upper.index;
    auto engine = realization_engine(3, 3);
    std::uniform_real_distribution<double> coord(-5e-8, 5e-8);
    for (int k = 0; k < 40; ++k) {
        Neighbor n;
        do {
            n.position = {coord(engine), coord(engine), coord(engine)};
        } while (n.position.norm() < 5e-9);
        n.level = k % 3 == 0 ? line.lower.index : (k % 3 == 1 ? line.upper.index : 1 + k % 20);
        n.overhauser = (k % 2 ? 1.0 : -1.0) * 1e12;
        n.coupling = dipolar_coupling(n.position, kBi.gamma_e);
        config.neighbors.push_back(n);
    }
    const auto times = grid(0.01, 41);
    const auto values = configuration_coherence(model, config, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
        double expected = 1.0;
        for (const auto& n : config.neighbors) {
            if (model.resonant(n.level)) expected *= std::cos(n.coupling * dp * dp * times[i] / 8);
        }
        CHECK(values[i] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("ensemble: N = 1 equals the single configuration") {
    SampleSpec spec;
    spec.realizations = 1;
    spec.seed = 8;
    const EchoModel model(kBi, 0.0799, line_14_7(), spec);
    const auto times = grid(0.05, 31);
    const auto curve = ensemble_average(model, times);
    auto engine = realization_engine(8, 0);
    const auto config = sample_configuration(spec, model.spectrum(), model.line(), 0, engine);
    const auto direct = configuration_coherence(model, config, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(curve.mean[i] == direct[i]);
        CHECK(curve.stderr_[i] == 0.0);
    }
}

TEST_CASE("ensemble: thread count does not change a single bit") {
    SampleSpec spec;
    spec.realizations = 64;
    spec.overhauser_halfwidth = hz_to_angular(1e3);
    const EchoModel model(kBi, ct_field(), line_14_7(), spec);
    const auto times = grid(0.08, 50);
    const auto one = ensemble_average(model, times, 1);
    const auto many = ensemble_average(model, times, 5);
    CHECK(one.mean == many.mean);
    CHECK(one.stderr_ == many.stderr_);
    CHECK(one.mean.front() == 1.0);
    for (const double v : one.mean) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
}

TEST_CASE("ensemble: standard error shrinks as N^-1/2") {
    SampleSpec spec;
    spec.overhauser_halfwidth = hz_to_angular(1e4);
    const auto times = grid(0.03, 4);
    spec.realizations = 500;
    const auto small = ensemble_average(EchoModel(kBi, ct_field(), line_14_7(), spec), times);
    spec.realizations = 1000;
    const auto large = ensemble_average(EchoModel(kBi, ct_field(), line_14_7(), spec), times);
    for (std::size_t i = 1; i < times.size(); ++i) {
        CHECK(large.stderr_[i] / small.stderr_[i] == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.2));
    }
}

TEST_CASE("zero density gives a flat curve") {
    SampleSpec spec;
    spec.density = 0.0;
    spec.realizations = 3;
    const auto curve = ensemble_average(EchoModel(kBi, 0.0799, line_14_7(), spec), grid(0.1, 5));
    for (const double v : curve.mean) CHECK(v == 1.0);
}

TEST_CASE("sample settings validation") {
    SampleSpec spec;
    spec.realizations = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.density = -1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.min_radius = 1e-10;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.resonant_fraction = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    CHECK(spec.expected_count() == doctest::Approx(100.0));
}

TEST_CASE("Overhauser width estimator") {
    const Spectrum spectrum(kBi, 0.0799);
    SampleSpec spec;
    spec.density = 0.0;
    CHECK(estimate_overhauser_width(spectrum, spec, 0.0) == 0.0);

    spec.density = 4.4e21;
    const double donors = estimate_overhauser_width(spectrum, spec, 0.0, 20000);
    spec.density = 8.8e21;
    const double doubled = estimate_overhauser_width(spectrum, spec, 0.0, 20000);
    CHECK(doubled / donors == doctest::Approx(2.0).epsilon(0.05));

    spec.density = 4.4e21;
    const double silicon = hz_to_angular(6e3);
    const double combined = estimate_overhauser_width(spectrum, spec, silicon, 20000);
    CHECK(combined == doctest::Approx(donors + silicon));
    CHECK(silicon / combined > 0.9);
}

}  // TEST_SUITE
