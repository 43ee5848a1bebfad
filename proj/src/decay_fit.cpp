#include "ctbath/decay_fit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace ctbath {

namespace {

// Residuals f_i = exp(-(t_i / T2)^n) - y_i in x = (log T2, n).
struct DecayResiduals : Eigen::DenseFunctor<double> {
    DecayResiduals(std::vector<double> t, std::vector<double> y, bool stretched)
        : Eigen::DenseFunctor<double>(stretched ? 2 : 1, static_cast<int>(t.size())),
          times_(std::move(t)), values_(std::move(y)), stretched_(stretched) {}

    double exponent(const InputType& x) const { return stretched_ ? x(1) : 1.0; }

    int operator()(const InputType& x, ValueType& f) const {
        const double t2 = std::exp(x(0));
        const double n = exponent(x);
        for (std::size_t i = 0; i < times_.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            f(row) = std::exp(-std::pow(times_[i] / t2, n)) - values_[i];
        }
        return 0;
    }

    int df(const InputType& x, JacobianType& jac) const {
        const double t2 = std::exp(x(0));
        const double n = exponent(x);
        for (std::size_t i = 0; i < times_.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            if (times_[i] == 0.0) {
                jac.row(row).setZero();
                continue;
            }
            const double ratio = times_[i] / t2;
            const double power = std::pow(ratio, n);
            const double model = std::exp(-power);
            jac(row, 0) = model * power * n;
            if (stretched_) jac(row, 1) = -model * power * std::log(ratio);
        }
        return 0;
    }

    std::vector<double> times_;
    std::vector<double> values_;
    bool stretched_;
};

// T2 guess from the first crossing of 1/e, linearly interpolated.
double initial_t2(std::span<const double> t, std::span<const double> y) {
    const double target = std::exp(-1.0);
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (y[i] < target) {
            const double w = (y[i - 1] - target) / (y[i - 1] - y[i]);
            return t[i - 1] + w * (t[i] - t[i - 1]);
        }
    }
    // Never reaches 1/e: extrapolate from the last point assuming exp(-t / T2).
    const double last = std::clamp(y.back(), 1e-12, 1.0 - 1e-12);
    return t.back() / -std::log(last);
}

}  // namespace

const char* to_string(DecayModel model) {
    return model == DecayModel::exponential ? "exponential" : "stretched";
}

DecayFit fit_decay(std::span<const double> times, std::span<const double> values,
                   DecayModel model, double floor) {
    if (times.size() != values.size() || times.size() < 3) {
        throw std::invalid_argument("fit needs matching time and value arrays of length >= 3");
    }
    if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0.0) {
        throw std::invalid_argument("fit times must be non-negative and ascending");
    }
    if (*std::min_element(values.begin(), values.end()) > 0.99) {
        throw FitError("non_decaying", "coherence stays above 0.99; no decay to fit");
    }

    std::size_t end = 0;
    while (end < values.size() && values[end] >= floor) ++end;
    const std::size_t minimum = model == DecayModel::stretched ? 3 : 2;
    if (end < minimum) {
        throw FitError("too_fast", "coherence falls below the fit floor within the first samples; "
                                   "use a finer time grid");
    }
    const auto t = times.first(end);
    const auto y = values.first(end);

    DecayFit fit;
    fit.model = model;
    fit.points = static_cast<int>(end);
    fit.extrapolated = std::none_of(values.begin(), values.end(),
                                    [](double v) { return v < std::exp(-1.0); });

    DecayResiduals functor({t.begin(), t.end()}, {y.begin(), y.end()},
                           model == DecayModel::stretched);
    Eigen::VectorXd x(model == DecayModel::stretched ? 2 : 1);
    x(0) = std::log(initial_t2(t, y));
    if (model == DecayModel::stretched) x(1) = 1.0;

    Eigen::LevenbergMarquardt<DecayResiduals> solver(functor);
    solver.setXtol(1e-14);
    solver.setFtol(1e-14);
    solver.setGtol(1e-14);
    solver.setMaxfev(2000);
    solver.minimize(x);

    fit.t2 = std::exp(x(0));
    fit.stretch = model == DecayModel::stretched ? x(1) : 1.0;
    if (!std::isfinite(fit.t2) || !std::isfinite(fit.stretch) || fit.stretch <= 0.0) {
        throw FitError("fit_diverged", "least-squares fit did not converge to a finite decay");
    }
    Eigen::VectorXd residuals(static_cast<Eigen::Index>(end));
    functor(x, residuals);
    fit.rmse = std::sqrt(residuals.squaredNorm() / static_cast<double>(end));
    return fit;
}

}  // namespace ctbath
