#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evspike/recording.hpp"

namespace evspike {

struct EncoderConfig {
    double k = 0.2;
    double v_spike_max = 1.0;
    double bin_us = 1e6 / 24000.0;  // t_b, default one sample period
    bool allow_multi_event_per_sample = true;

    double th_on() const { return k * v_spike_max; }
    double th_off() const { return -k * v_spike_max; }

    void validate(double sample_period_us) const;
};

struct Pulse {
    std::uint64_t time_us = 0;
    int polarity = 0;  // +1 ON, -1 OFF
};

struct PulseTrain {
    std::vector<Pulse> pulses;  // non-decreasing times
};

/// Per-bin ON/OFF counts; only non-zero bins are stored.
struct PcmSeries {
    struct Bin {
        std::uint64_t index = 0;
        std::uint16_t n_on = 0;
        std::uint16_t n_off = 0;
    };
    double bin_us = 1e6 / 24000.0;
    std::uint64_t num_bins = 0;
    std::vector<Bin> nonzero;  // strictly increasing index
    bool saturated = false;    // any bin hit the u16 count ceiling
};

struct SparsityReport {
    double s_pcm = 0.0;
    std::uint64_t events_total = 0;
    std::uint64_t events_on = 0;
    std::uint64_t events_off = 0;
    bool saturated = false;
};

struct EncodeStats {
    double max_abs_tracking_error = 0.0;  // max |samples[n] - reference|
};

/// Delta-modulator emulation: per-sample threshold crossings against a tracked
/// reference; multi-event mode steps the reference by whole thresholds.
PulseTrain encode(const Recording& rec, const EncoderConfig& cfg,
                  EncodeStats* stats = nullptr);

PcmSeries bin_pcm(const PulseTrain& pt, const EncoderConfig& cfg, double duration_us);

/// Stair-step reconstruction at bin rate.
Recording recover(const PcmSeries& pcm, const EncoderConfig& cfg, double initial);

SparsityReport sparsity(const PcmSeries& pcm);

// NPCM1 container: magic "NPCM1" + version + u32 LE header length + JSON
// header + (u64 index, u16 n_on, u16 n_off) LE records sorted by index.
void write_pcm(const std::filesystem::path& path, const PcmSeries& pcm,
               double k = 0.2, double v_spike_max = 1.0,
               const std::string& source_sha256 = "");
PcmSeries read_pcm(const std::filesystem::path& path);

}  // namespace evspike
