#pragma once

// Least-squares fits of exp(-t / T2) and exp(-(t / T2)^n) to a coherence curve.

#include <span>
#include <stdexcept>
#include <string>

namespace ctbath {

enum class DecayModel { exponential, stretched };

const char* to_string(DecayModel model);

struct DecayFit {
    DecayModel model = DecayModel::exponential;
    double t2 = 0.0;         // s
    double stretch = 1.0;    // n; fixed at 1 for the exponential model
    double rmse = 0.0;       // over the fit window
    int points = 0;          // samples in the fit window
    bool extrapolated = false;  // the curve never fell below 1/e
};

/// Raised when the curve does not decay enough to be fitted.
class FitError : public std::runtime_error {
public:
    FitError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

/// Fits samples from t = 0 up to (not including) the first value below
/// `floor`, with uniform weights. Parameters are log T2 and n, so T2 stays
/// positive. Throws FitError("non_decaying") when the curve never drops
/// below 0.99, and std::invalid_argument on mismatched or unsorted input.
DecayFit fit_decay(std::span<const double> times, std::span<const double> values,
                   DecayModel model = DecayModel::stretched, double floor = 0.05);

}  // namespace ctbath
