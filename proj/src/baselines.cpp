#include "evspike/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "evspike/common.hpp"

namespace evspike {

void FilterSpec::validate(double sample_rate_hz) const {
    if (order < 1) throw ConfigError("filter order must be >= 1");
    if (!(low_hz > 0 && low_hz < high_hz && high_hz < sample_rate_hz / 2))
        throw ConfigError("corners must satisfy 0 < low_hz < high_hz < sample_rate/2");
}

void ThresholdSpec::validate() const {
    if (!(multiplier > 0)) throw ConfigError("multiplier must be > 0");
    if (!(t_ref_us > 0)) throw ConfigError("t_ref_us must be > 0");
}

namespace {

using cd = std::complex<double>;

cd biquad_response(const Biquad& s, double w) {
    const cd z1 = std::polar(1.0, -w);
    const cd z2 = z1 * z1;
    return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

}  // namespace

std::vector<Biquad> design_bandpass(const FilterSpec& spec, double fs) {
    spec.validate(fs);
    const int n = spec.order;
    const double pi = std::numbers::pi;

    // Pre-warped analog corners, lowpass-to-bandpass transform, bilinear map.
    const double w1 = 2.0 * fs * std::tan(pi * spec.low_hz / fs);
    const double w2 = 2.0 * fs * std::tan(pi * spec.high_hz / fs);
    const double bw = w2 - w1;
    const double w0 = std::sqrt(w1 * w2);

    std::vector<cd> digital;  // all 2n poles
    for (int k = 1; k <= n; ++k) {
        const cd proto = std::polar(1.0, pi * (2.0 * k + n - 1.0) / (2.0 * n));
        const cd pb = proto * bw;
        const cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        for (const cd s : {(pb + disc) / 2.0, (pb - disc) / 2.0})
            digital.push_back((2.0 * fs + s) / (2.0 * fs - s));
    }

    constexpr double tol = 1e-10;
    std::vector<cd> upper;
    std::vector<double> reals;
    for (const cd& p : digital) {
        if (p.imag() > tol)
            upper.push_back(p);
        else if (p.imag() > -tol)
            reals.push_back(p.real());
    }
    std::sort(reals.begin(), reals.end());
    if (upper.size() + reals.size() / 2 != static_cast<std::size_t>(n))
        throw ConfigError("bandpass pole pairing failed for the given corners");

    std::vector<Biquad> sections;
    for (const cd& p : upper) {
        Biquad s;
        s.b0 = 1;
        s.b2 = -1;  // one zero at z=1, one at z=-1 per section
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        sections.push_back(s);
    }
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s;
        s.b0 = 1;
        s.b2 = -1;
        s.a1 = -(reals[i] + reals[i + 1]);
        s.a2 = reals[i] * reals[i + 1];
        sections.push_back(s);
    }

    // Unit gain at the geometric center frequency.
    const double wc = 2.0 * std::atan(w0 / (2.0 * fs));
    for (auto& s : sections) {
        const double g = std::abs(biquad_response(s, wc));
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
    }
    return sections;
}

namespace {

// Direct form II transposed, state initialized to the step-input steady state
// of the first sample (kills startup transients on DC-offset signals).
void filt_inplace(const std::vector<Biquad>& sos, std::vector<double>& x) {
    for (const auto& s : sos) {
        const double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double x0 = x.empty() ? 0.0 : x[0];
        const double y0 = h1 * x0;
        double z2 = s.b2 * x0 - s.a2 * y0;
        double z1 = s.b1 * x0 - s.a1 * y0 + z2;
        for (double& v : x) {
            const double y = s.b0 * v + z1;
            z1 = s.b1 * v - s.a1 * y + z2;
            z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace

Recording bandpass(const Recording& rec, const FilterSpec& spec) {
    const auto sos = design_bandpass(spec, rec.sample_rate_hz);
    const std::size_t n = rec.samples.size();
    if (n == 0) throw DataError("empty recording");

    const std::size_t pad = std::min<std::size_t>(n - 1, 600);
    std::vector<double> x;
    x.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i)  // odd extension front
        x.push_back(2.0 * rec.samples[0] - rec.samples[pad - i]);
    for (float v : rec.samples) x.push_back(v);
    for (std::size_t i = 0; i < pad; ++i)  // odd extension back
        x.push_back(2.0 * rec.samples[n - 1] - rec.samples[n - 2 - i]);

    filt_inplace(sos, x);
    std::reverse(x.begin(), x.end());
    filt_inplace(sos, x);
    std::reverse(x.begin(), x.end());

    Recording out;
    out.sample_rate_hz = rec.sample_rate_hz;
    out.meta = rec.meta;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(x[pad + i]);
    return out;
}

namespace {

std::uint64_t sample_time_us(std::size_t n, double fs) {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * 1e6 / fs));
}

}  // namespace

DetectionSet detect_at(const Recording& rec, const ThresholdSpec& spec) {
    spec.validate();
    if (rec.samples.empty()) throw DataError("empty recording");
    const double fs = rec.sample_rate_hz;

    std::vector<float> mags(rec.samples.size());
    for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::fabs(rec.samples[i]);
    const std::size_t mid = mags.size() / 2;
    std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
    const double sigma_n = mags[mid] / 0.6745;
    const double thr = spec.multiplier * sigma_n;

    const std::size_t win = static_cast<std::size_t>(std::lround(0.5e-3 * fs));
    const std::uint64_t t_ref = static_cast<std::uint64_t>(std::ceil(spec.t_ref_us));

    DetectionSet det;
    det.detector_tag = "at";
    std::size_t n = 0;
    while (n < rec.samples.size()) {
        if (rec.samples[n] < -thr && thr > 0) {
            std::size_t best = n;
            const std::size_t end = std::min(rec.samples.size(), n + win + 1);
            for (std::size_t i = n; i < end; ++i)
                if (rec.samples[i] < rec.samples[best]) best = i;
            const std::uint64_t t = sample_time_us(best, fs);
            det.times_us.push_back(t);
            const std::uint64_t next_allowed = t + t_ref;
            n = static_cast<std::size_t>(
                std::ceil(static_cast<double>(next_allowed) * fs / 1e6));
        } else {
            ++n;
        }
    }
    return det;
}

DetectionSet detect_neo(const Recording& rec, const ThresholdSpec& spec) {
    spec.validate();
    const std::size_t n = rec.samples.size();
    if (n < 3) throw DataError("NEO needs at least 3 samples");
    const double fs = rec.sample_rate_hz;

    std::vector<double> psi(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
        psi[i] = static_cast<double>(rec.samples[i]) * rec.samples[i] -
                 static_cast<double>(rec.samples[i - 1]) * rec.samples[i + 1];

    // 13-point triangular smoothing, unit-sum weights
    constexpr int half = 6;
    double wsum = 0.0;
    double w[2 * half + 1];
    for (int k = -half; k <= half; ++k) {
        w[k + half] = static_cast<double>(half + 1 - std::abs(k));
        wsum += w[k + half];
    }
    std::vector<double> smooth(n, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) {
            const std::int64_t j = static_cast<std::int64_t>(i) + k;
            if (j >= 0 && j < static_cast<std::int64_t>(n)) acc += w[k + half] * psi[j];
        }
        smooth[i] = acc / wsum;
        mean += smooth[i];
    }
    mean /= static_cast<double>(n);
    const double thr = spec.multiplier * mean;

    const std::size_t win = static_cast<std::size_t>(std::lround(0.5e-3 * fs));
    const std::uint64_t t_ref = static_cast<std::uint64_t>(std::ceil(spec.t_ref_us));

    DetectionSet det;
    det.detector_tag = "neo";
    std::size_t i = 0;
    while (i < n) {
        if (smooth[i] > thr && thr > 0) {
            std::size_t best = i;
            const std::size_t end = std::min(n, i + win + 1);
            for (std::size_t j = i; j < end; ++j)
                if (smooth[j] > smooth[best]) best = j;
            const std::uint64_t t = sample_time_us(best, fs);
            det.times_us.push_back(t);
            i = static_cast<std::size_t>(
                std::ceil(static_cast<double>(t + t_ref) * fs / 1e6));
        } else {
            ++i;
        }
    }
    return det;
}

}  // namespace evspike
