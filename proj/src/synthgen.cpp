#include "evspike/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evspike/baselines.hpp"

namespace evspike {

std::size_t SpikeTemplate::peak_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < shape.size(); ++i)
        if (std::fabs(shape[i]) > std::fabs(shape[best])) best = i;
    return best;
}

void GeneratorConfig::validate() const {
    if (!(sample_rate_hz > 0)) throw ConfigError("sample_rate_hz must be > 0");
    if (!(duration_s > 0)) throw ConfigError("duration_s must be > 0");
    if (num_neurons < 1) throw ConfigError("num_neurons must be >= 1");
    if (firing_rate_hz < 0) throw ConfigError("firing_rate_hz must be >= 0");
    if (!(noise_sigma >= 0 && noise_sigma < 1))
        throw ConfigError("noise_sigma must be in [0, 1)");
    if (per_neuron_refractory_ms < 0)
        throw ConfigError("per_neuron_refractory_ms must be >= 0");
    if (!(firing_rate_hz * per_neuron_refractory_ms / 1000.0 < 1.0))
        throw ConfigError("firing_rate_hz x refractory must leave the process feasible");
}

std::vector<SpikeTemplate> make_templates(int num_neurons, double sample_rate_hz,
                                          double duration_ms) {
    // Negative-going main lobe plus a softer positive rebound, difference of
    // Gaussians. Widths in samples at 24 kHz.
    struct Params {
        double w_neg, offset, rebound, w_pos;
    };
    static const Params base[3] = {
        {2.0, 5.0, 0.40, 3.2},
        {2.6, 6.0, 0.50, 4.0},
        {2.2, 7.0, 0.35, 3.6},
    };

    const double scale = sample_rate_hz / 24000.0;
    const int len = std::max(8, static_cast<int>(std::lround(duration_ms * sample_rate_hz / 1000.0)));

    std::vector<SpikeTemplate> out;
    out.reserve(static_cast<std::size_t>(num_neurons));
    for (int id = 0; id < num_neurons; ++id) {
        Params p = base[id % 3];
        const double stretch = 1.0 + 0.12 * (id / 3);  // extra neurons get wider shapes
        p.w_neg *= scale * stretch;
        p.w_pos *= scale * stretch;
        p.offset *= scale * stretch;

        SpikeTemplate tpl;
        tpl.duration_ms = duration_ms;
        tpl.template_id = id;
        tpl.shape.resize(static_cast<std::size_t>(len));
        const double tc = 0.40 * len;
        double peak = 0.0;
        for (int i = 0; i < len; ++i) {
            const double dn = (i - tc) / p.w_neg;
            const double dp = (i - tc - p.offset) / p.w_pos;
            const double v = -std::exp(-0.5 * dn * dn) + p.rebound * std::exp(-0.5 * dp * dp);
            tpl.shape[static_cast<std::size_t>(i)] = static_cast<float>(v);
            peak = std::max(peak, std::fabs(v));
        }
        for (auto& v : tpl.shape) v = static_cast<float>(v / peak);
        out.push_back(std::move(tpl));
    }
    return out;
}

std::pair<Recording, GroundTruth> generate(const GeneratorConfig& config) {
    config.validate();

    const double fs = config.sample_rate_hz;
    const std::size_t num_samples =
        static_cast<std::size_t>(std::llround(config.duration_s * fs));
    const auto templates = make_templates(config.num_neurons, fs);

    std::mt19937_64 rng(config.seed);

    // Poisson trains with refractory thinning: candidates whose gap to the
    // last accepted spike fall below the refractory period are dropped. The
    // thinning is applied across neurons, so spikes never overlap (as in the
    // non-superimposed synthetic recordings this generator stands in for).
    struct Event {
        double time_s;
        int neuron;
    };
    std::vector<Event> events;
    const double t_ref_s = config.per_neuron_refractory_ms / 1000.0;
    for (int n = 0; n < config.num_neurons; ++n) {
        if (config.firing_rate_hz <= 0) continue;
        std::exponential_distribution<double> gap(config.firing_rate_hz);
        double t = gap(rng);
        while (t < config.duration_s) {
            events.push_back({t, n});
            t += gap(rng);
        }
    }
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.time_s < b.time_s; });
    {
        std::vector<Event> kept;
        double last = -1e9;
        for (const Event& ev : events) {
            if (ev.time_s - last >= t_ref_s) {
                kept.push_back(ev);
                last = ev.time_s;
            }
        }
        events = std::move(kept);
    }

    Recording rec;
    rec.sample_rate_hz = fs;
    rec.meta.seed = config.seed;
    rec.meta.noise_sigma = config.noise_sigma;
    rec.samples.assign(num_samples, 0.0f);

    GroundTruth gt;
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    for (const Event& ev : events) {
        const double amp = jitter(rng);
        const SpikeTemplate& tpl = templates[static_cast<std::size_t>(ev.neuron)];
        const std::int64_t peak_sample = std::llround(ev.time_s * fs);
        const std::int64_t start = peak_sample - static_cast<std::int64_t>(tpl.peak_index());
        const std::int64_t end = start + static_cast<std::int64_t>(tpl.shape.size());
        if (start < 0 || end > static_cast<std::int64_t>(num_samples)) continue;
        for (std::size_t i = 0; i < tpl.shape.size(); ++i)
            rec.samples[static_cast<std::size_t>(start) + i] +=
                static_cast<float>(amp * tpl.shape[i]);

        std::uint64_t t_us = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(peak_sample) / fs * 1e6));
        if (!gt.spike_times_us.empty() && t_us <= gt.spike_times_us.back())
            t_us = gt.spike_times_us.back() + 1;  // keep strictly increasing
        gt.spike_times_us.push_back(t_us);
        gt.neuron_ids.push_back(static_cast<std::uint32_t>(ev.neuron));
    }

    if (config.noise_sigma > 0) {
        // Background multi-unit activity: sparse low-amplitude spike shapes
        // from distant neurons, with a heavy-tailed amplitude distribution
        // scaled by the noise level. These are noise, not ground truth.
        const double bg_rate_hz = 1.0;
        const double bg_amp_cap = 0.65;
        const double bg_stretch = 1.5;  // distant units arrive broadened in time
        const auto bg_templates = make_templates(config.num_neurons, fs * bg_stretch);
        std::exponential_distribution<double> bg_gap(bg_rate_hz);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        double t_bg = bg_gap(rng);
        while (t_bg < config.duration_s) {
            const double u = std::max(uni(rng), 1e-9);
            const double amp =
                std::min(bg_amp_cap, config.noise_sigma * 1.25 / u);
            const std::size_t which =
                static_cast<std::size_t>(uni(rng) * static_cast<double>(bg_templates.size())) %
                bg_templates.size();
            const SpikeTemplate& tpl = bg_templates[which];
            const std::int64_t peak_sample = std::llround(t_bg * fs);
            const std::int64_t start =
                peak_sample - static_cast<std::int64_t>(tpl.peak_index());
            const std::int64_t end = start + static_cast<std::int64_t>(tpl.shape.size());
            if (start >= 0 && end <= static_cast<std::int64_t>(num_samples))
                for (std::size_t i = 0; i < tpl.shape.size(); ++i)
                    rec.samples[static_cast<std::size_t>(start) + i] +=
                        static_cast<float>(amp * tpl.shape[i]);
            t_bg += bg_gap(rng);
        }

        // Short electrode artifacts: a few samples of alternating polarity,
        // amplitude scaled by the noise level. High instantaneous energy but
        // no spike-like temporal spread.
        const double glitch_rate_hz = 0.8;
        std::exponential_distribution<double> glitch_gap(glitch_rate_hz);
        std::uniform_real_distribution<double> glitch_amp(6.0, 10.0);
        double t_gl = glitch_gap(rng);
        while (t_gl < config.duration_s) {
            const double amp = std::min(0.8, config.noise_sigma * glitch_amp(rng));
            const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
            const std::int64_t start = std::llround(t_gl * fs);
            for (std::int64_t j = 0; j < 4; ++j) {
                const std::int64_t idx = start + j;
                if (idx < 0 || idx >= static_cast<std::int64_t>(num_samples)) continue;
                rec.samples[static_cast<std::size_t>(idx)] +=
                    static_cast<float>(sign * (j % 2 == 0 ? amp : -amp));
            }
            t_gl += glitch_gap(rng);
        }

        std::normal_distribution<double> normal(0.0, 1.0);
        Recording white;
        white.sample_rate_hz = fs;
        white.samples.resize(num_samples);
        for (auto& v : white.samples) v = static_cast<float>(normal(rng));

        // Background activity sits at the low end of the spike band; shape the
        // white process with the baselines band-pass and add it as-is, so the
        // configured sigma is the pre-filter standard deviation.
        FilterSpec band;
        band.low_hz = 300.0;
        band.high_hz = 1000.0;
        Recording shaped = bandpass(white, band);
        for (std::size_t i = 0; i < num_samples; ++i)
            rec.samples[i] += static_cast<float>(config.noise_sigma * shaped.samples[i]);
    }

    return {std::move(rec), std::move(gt)};
}

}  // namespace evspike
