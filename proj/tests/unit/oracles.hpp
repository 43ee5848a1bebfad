#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

/// exp(-i H t) by Pade scaling-and-squaring, not by eigen-decomposition.
inline Eigen::MatrixXcd propagator(const Eigen::MatrixXcd& h, double t) {
    const Eigen::MatrixXcd generator = std::complex<double>(0.0, -t) * h;
    return generator.exp();
}

/// Flip-flop block generator (1/4)[[D, -J rho], [-J rho, -D]].
inline Eigen::MatrixXcd flip_flop_block(double detuning, double coupling_rho) {
    Eigen::MatrixXcd h(2, 2);
    h << 0.25 * detuning, -0.25 * coupling_rho, -0.25 * coupling_rho, -0.25 * detuning;
    return h;
}

/// Composite Simpson rule on [a, b] with an even number of intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
    const double h = (b - a) / intervals;
    double sum = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/// Asymptotic Kolmogorov survival Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS p-value (Stephens' small-sample correction).
inline double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = std::isfinite(sample[i]) ? cdf(sample[i]) : 1.0;
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    const double root = std::sqrt(n);
    return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

}  // namespace oracle
