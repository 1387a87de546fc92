#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evspike/detection.hpp"
#include "evspike/encoder.hpp"
#include "evspike/evaluation.hpp"

namespace evspike {

struct EvSpdConfig {
    int n_th = 5;
    int tau_bins = 11;
    double t_ref_us = 1000.0;

    void validate() const;
};

/// Non-zero-count neighborhood detector: trigger when the current bin is
/// non-zero and the causal window [b - tau, b] holds >= n_th non-zero bins,
/// then hold off for t_ref.
DetectionSet detect_ev(const PcmSeries& pcm, const EvSpdConfig& cfg);

/// Trigger bins before refractory filtering (shared by detect_ev and the
/// sweep monotonicity checks).
std::vector<std::uint64_t> ev_trigger_bins(const PcmSeries& pcm, int n_th, int tau_bins);

struct SweepCell {
    int n_th = 0;
    int tau_bins = 0;
    bool valid = true;  // false when n_th > tau + 1 (skipped pair)
    MetricsReport metrics;
};

std::vector<SweepCell> sweep_ev(const PcmSeries& pcm, const GroundTruth& gt,
                                const std::vector<int>& n_th_range,
                                const std::vector<int>& tau_range,
                                double t_ref_us, const MatchConfig& eval_cfg,
                                int max_threads = 0);

/// Heatmap CSV: `n_th,tau,sensitivity,fdr,accuracy` (skipped pairs marked "nan").
void write_heatmap_csv(const std::filesystem::path& path,
                       const std::vector<SweepCell>& cells);

}  // namespace evspike
