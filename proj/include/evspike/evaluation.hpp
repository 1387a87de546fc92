#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "evspike/detection.hpp"
#include "evspike/encoder.hpp"
#include "evspike/recording.hpp"

namespace evspike {

struct MatchConfig {
    double delta_t_us = 500.0;

    void validate() const;
};

struct MetricsReport {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    double sensitivity = 1.0;
    double fdr = 0.0;
    double accuracy = 1.0;
};

struct CompressionReport {
    std::uint64_t total_pcm_events = 0;
    std::uint64_t detected_spikes = 0;
    double events_per_spike = 0.0;
    double compression_ratio = 0.0;
    bool defined = false;  // false when detected_spikes == 0
};

/// Greedy one-to-one matching in time order: each detection takes the nearest
/// unmatched ground-truth spike within |dt| <= delta_t (ties go to the earlier
/// spike). Matched -> TP, leftover detections -> FP, leftover truth -> FN.
MetricsReport match(const DetectionSet& detections, const GroundTruth& gt,
                    const MatchConfig& cfg);

CompressionReport compression(const PcmSeries& pcm, const DetectionSet& detections,
                              double packet_bits_event = 1.0,
                              double packet_bits_spike = 1.0);

struct MetricsRecord {
    std::string detector;
    std::string params;
    MetricsReport metrics;
    double s_pcm = -1.0;             // omitted when < 0
    double compression_ratio = -1.0;  // omitted when < 0
};

void write_metrics_json(const std::filesystem::path& path, const MetricsRecord& rec);
MetricsRecord read_metrics_json(const std::filesystem::path& path);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& records);

}  // namespace evspike
