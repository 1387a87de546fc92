#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evspike/recording.hpp"

namespace evspike {

/// Biphasic spike waveform, peak magnitude normalized to 1.0.
struct SpikeTemplate {
    std::vector<float> shape;
    double duration_ms = 1.0;
    int template_id = 0;

    /// Index of the largest-magnitude sample (the ground-truth anchor).
    std::size_t peak_index() const;
};

struct GeneratorConfig {
    double sample_rate_hz = 24000.0;
    double duration_s = 1.0;
    int num_neurons = 3;
    double firing_rate_hz = 20.0;
    double noise_sigma = 0.1;
    double per_neuron_refractory_ms = 2.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError naming the violated invariant
};

/// Distinct biphasic difference-of-Gaussians templates, one per neuron.
std::vector<SpikeTemplate> make_templates(int num_neurons, double sample_rate_hz,
                                          double duration_ms = 1.0);

/// Poisson spike trains with refractory thinning, template superposition and
/// band-limited Gaussian noise. Deterministic for a fixed config.
std::pair<Recording, GroundTruth> generate(const GeneratorConfig& config);

}  // namespace evspike
