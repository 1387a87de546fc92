#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evspike/detection.hpp"
#include "evspike/encoder.hpp"
#include "evspike/recording.hpp"

namespace evspike {

struct FrameConfig {
    int tau_f_bins = 24;        // frame half-width, ~= +/-1 ms at default bin width
    int count_clip = 15;        // counts clip here, then scale to [0, 1]
    double label_margin_us = 1000.0;

    void validate() const;
    /// 2 * (2*tau_f + 1): ON counts then OFF counts.
    int frame_length() const { return 2 * (2 * tau_f_bins + 1); }
};

struct EventFrame {
    std::vector<float> values;
    std::uint64_t center_bin = 0;
    int label = -1;  // 1 spike, 0 background, -1 unlabeled
};

/// Candidate frames at every non-zero bin, labeled against ground truth and
/// balanced by seeded undersampling of the majority class.
std::vector<EventFrame> extract_frames(const PcmSeries& pcm, const GroundTruth& gt,
                                       const FrameConfig& fcfg, double delta_t_us,
                                       std::uint64_t seed);

struct MlpModel {
    std::vector<int> layer_dims;                 // [D, H..., 1]
    std::vector<std::vector<double>> weights;    // per layer, row-major [out][in]
    std::vector<std::vector<double>> biases;     // per layer
    double decision_threshold = 0.5;
    // training provenance, carried through save/load
    std::uint64_t train_seed = 0;
    int epochs_run = 0;
    double best_val_acc = 0.0;

    std::size_t num_parameters() const;
    void validate() const;
    /// Logistic output score in (0, 1).
    double forward(std::span<const float> input) const;
};

MlpModel init_model(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Mean BCE loss over a batch plus analytic gradients (same layout as the
/// model's weights/biases).
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    double loss = 0.0;
};
Gradients loss_and_gradients(const MlpModel& model,
                             const std::vector<const EventFrame*>& batch);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    int early_stop_patience = 10;
    double momentum = 0.9;

    void validate() const;
};

struct TrainResult {
    MlpModel model;
    struct EpochLog {
        int epoch;
        double train_loss;
        double val_accuracy;
    };
    std::vector<EpochLog> log;
};

/// Mini-batch SGD with momentum on BCE; keeps the best-validation parameters.
/// Deterministic for a fixed seed.
TrainResult train(const std::vector<EventFrame>& frames,
                  const std::vector<int>& layer_dims, const TrainConfig& tcfg);

/// Classify a frame at each non-zero bin outside refractory; score above the
/// decision threshold emits a detection at the bin center time.
DetectionSet infer_online(const PcmSeries& pcm, const MlpModel& model,
                          const FrameConfig& fcfg, double t_ref_us);

struct ComplexityReport {
    std::uint64_t mac_per_frame_dense = 0;
    double mac_per_frame_effective = 0.0;  // first layer scaled by s_pcm
    std::uint64_t memory_bits = 0;
};

ComplexityReport complexity(const MlpModel& model, double s_pcm, int bit_width = 32);

// JSON model file, format tag "mlp-spd-v1".
void save_model(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace evspike
