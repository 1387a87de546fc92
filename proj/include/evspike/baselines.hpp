#pragma once

#include <vector>

#include "evspike/detection.hpp"
#include "evspike/recording.hpp"

namespace evspike {

struct FilterSpec {
    double low_hz = 300.0;
    double high_hz = 3000.0;
    int order = 4;  // lowpass prototype order; bandpass runs 2x as biquads

    void validate(double sample_rate_hz) const;
};

struct Biquad {
    // H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

/// Butterworth bandpass as cascaded second-order sections (bilinear transform
/// with corner pre-warping).
std::vector<Biquad> design_bandpass(const FilterSpec& spec, double sample_rate_hz);

/// Zero-phase (forward-backward) application with edge padding.
Recording bandpass(const Recording& rec, const FilterSpec& spec);

struct ThresholdSpec {
    enum class Method { absolute, neo };
    Method method = Method::absolute;
    double multiplier = 4.0;  // AT default 4.0, NEO default 8.0
    double t_ref_us = 1000.0;

    void validate() const;
};

/// Negative threshold crossing at -multiplier * median(|x|)/0.6745,
/// timestamped at the local minimum in the following 0.5 ms.
DetectionSet detect_at(const Recording& rec, const ThresholdSpec& spec);

/// Nonlinear energy operator psi[n] = x[n]^2 - x[n-1]*x[n+1], smoothed by a
/// 13-point triangular window, thresholded at multiplier * mean(psi).
DetectionSet detect_neo(const Recording& rec, const ThresholdSpec& spec);

}  // namespace evspike
