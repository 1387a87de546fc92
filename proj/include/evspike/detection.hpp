#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evspike {

/// Ordered detected spike times, refractory-spaced.
struct DetectionSet {
    std::vector<std::uint64_t> times_us;  // strictly increasing
    int channel_id = 0;
    std::string detector_tag;
};

/// CSV with header `time_us,channel,detector`, rows sorted by time.
void write_detections_csv(const std::filesystem::path& path, const DetectionSet& det);
DetectionSet read_detections_csv(const std::filesystem::path& path);

}  // namespace evspike
