#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "evspike/common.hpp"

namespace evspike {

struct RecordingMeta {
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    std::string generator = "evspike-synthgen-1";
};

/// Uniformly sampled single-channel extracellular signal, spike peak ~= 1.0.
struct Recording {
    std::vector<float> samples;
    double sample_rate_hz = 24000.0;
    RecordingMeta meta;

    double sample_period_us() const { return 1e6 / sample_rate_hz; }
    double duration_us() const { return static_cast<double>(samples.size()) * sample_period_us(); }
};

/// Sidecar ground truth: template peak times, strictly increasing.
struct GroundTruth {
    std::vector<std::uint64_t> spike_times_us;
    std::vector<std::uint32_t> neuron_ids;

    std::size_t size() const { return spike_times_us.size(); }
    bool empty() const { return spike_times_us.empty(); }
};

// NREC1 container: magic "NREC1" + version 0x01 + u32 LE header length +
// JSON header + num_samples f32 LE payload.
void write_recording(const std::filesystem::path& path, const Recording& rec,
                     const GroundTruth& gt);
std::pair<Recording, GroundTruth> read_recording(const std::filesystem::path& path);

}  // namespace evspike
