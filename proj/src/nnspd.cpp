#include "evspike/nnspd.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <unordered_map>

#include "evspike/ioutil.hpp"

namespace evspike {

void FrameConfig::validate() const {
    if (tau_f_bins < 1) throw ConfigError("tau_f_bins must be >= 1");
    if (count_clip < 1) throw ConfigError("count_clip must be >= 1");
    if (label_margin_us < 0) throw ConfigError("label_margin_us must be >= 0");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(validation_fraction > 0 && validation_fraction < 1))
        throw ConfigError("validation_fraction must be in (0, 1)");
}

namespace {

struct BinLookup {
    std::unordered_map<std::uint64_t, std::pair<std::uint16_t, std::uint16_t>> map;

    explicit BinLookup(const PcmSeries& pcm) {
        map.reserve(pcm.nonzero.size());
        for (const auto& b : pcm.nonzero) map.emplace(b.index, std::make_pair(b.n_on, b.n_off));
    }
};

EventFrame build_frame(const PcmSeries& pcm, const BinLookup& lut, std::uint64_t center,
                       const FrameConfig& fcfg) {
    const int tau = fcfg.tau_f_bins;
    const int width = 2 * tau + 1;
    const float clip = static_cast<float>(fcfg.count_clip);
    EventFrame frame;
    frame.center_bin = center;
    frame.values.assign(static_cast<std::size_t>(2 * width), 0.0f);
    for (int k = -tau; k <= tau; ++k) {
        const std::int64_t b = static_cast<std::int64_t>(center) + k;
        if (b < 0 || b >= static_cast<std::int64_t>(pcm.num_bins)) continue;
        const auto it = lut.map.find(static_cast<std::uint64_t>(b));
        if (it == lut.map.end()) continue;
        const float on = std::min<float>(it->second.first, clip) / clip;
        const float off = std::min<float>(it->second.second, clip) / clip;
        frame.values[static_cast<std::size_t>(k + tau)] = on;
        frame.values[static_cast<std::size_t>(width + k + tau)] = off;
    }
    return frame;
}

double bin_center_us(std::uint64_t bin, double bin_us) {
    return (static_cast<double>(bin) + 0.5) * bin_us;
}

// nearest ground-truth distance via binary search over sorted times
double nearest_gt_us(const GroundTruth& gt, double t) {
    if (gt.empty()) return std::numeric_limits<double>::infinity();
    auto it = std::lower_bound(gt.spike_times_us.begin(), gt.spike_times_us.end(),
                               static_cast<std::uint64_t>(std::max(0.0, t)));
    double best = std::numeric_limits<double>::infinity();
    if (it != gt.spike_times_us.end())
        best = std::min(best, std::fabs(static_cast<double>(*it) - t));
    if (it != gt.spike_times_us.begin())
        best = std::min(best, std::fabs(static_cast<double>(*(it - 1)) - t));
    return best;
}

}  // namespace

std::vector<EventFrame> extract_frames(const PcmSeries& pcm, const GroundTruth& gt,
                                       const FrameConfig& fcfg, double delta_t_us,
                                       std::uint64_t seed) {
    fcfg.validate();
    if (pcm.nonzero.empty()) throw DataError("no candidate frames: PCM series is all-zero");

    const BinLookup lut(pcm);
    std::vector<EventFrame> spikes, background;
    for (const auto& bin : pcm.nonzero) {
        const double t = bin_center_us(bin.index, pcm.bin_us);
        const double d = nearest_gt_us(gt, t);
        int label;
        if (d <= delta_t_us)
            label = 1;
        else if (d > fcfg.label_margin_us)
            label = 0;
        else
            continue;  // ambiguous ring
        EventFrame f = build_frame(pcm, lut, bin.index, fcfg);
        f.label = label;
        (label ? spikes : background).push_back(std::move(f));
    }
    if (spikes.empty()) throw DataError("no spike-labeled frames");
    if (background.empty()) throw DataError("no background-labeled frames");

    // balance by undersampling the majority class
    std::mt19937_64 rng(seed);
    auto& major = spikes.size() > background.size() ? spikes : background;
    const std::size_t target = std::min(spikes.size(), background.size());
    std::shuffle(major.begin(), major.end(), rng);
    major.resize(target);

    std::vector<EventFrame> out;
    out.reserve(2 * target);
    for (auto& f : spikes) out.push_back(std::move(f));
    for (auto& f : background) out.push_back(std::move(f));
    std::sort(out.begin(), out.end(),
              [](const EventFrame& a, const EventFrame& b) { return a.center_bin < b.center_bin; });
    return out;
}

std::size_t MlpModel::num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        n += static_cast<std::size_t>(layer_dims[l]) * layer_dims[l + 1] + layer_dims[l + 1];
    return n;
}

void MlpModel::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("layer_dims needs input and output");
    if (layer_dims.back() != 1) throw ConfigError("output dimension must be 1");
    const std::size_t layers = layer_dims.size() - 1;
    if (weights.size() != layers || biases.size() != layers)
        throw ConfigError("weight/bias layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t want =
            static_cast<std::size_t>(layer_dims[l]) * layer_dims[l + 1];
        if (weights[l].size() != want || biases[l].size() != static_cast<std::size_t>(layer_dims[l + 1]))
            throw ConfigError("parameter shape mismatch at layer " + std::to_string(l));
        for (double v : weights[l])
            if (!std::isfinite(v)) throw DataError("non-finite weight");
        for (double v : biases[l])
            if (!std::isfinite(v)) throw DataError("non-finite bias");
    }
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// forward pass keeping pre-activations; returns output logit
double forward_cached(const MlpModel& m, std::span<const float> input,
                      std::vector<std::vector<double>>& activations) {
    activations.clear();
    std::vector<double> cur(input.begin(), input.end());
    activations.push_back(cur);
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        const int in = m.layer_dims[l];
        const int out = m.layer_dims[l + 1];
        std::vector<double> next(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double acc = m.biases[l][static_cast<std::size_t>(o)];
            const double* w = m.weights[l].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += w[i] * cur[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = acc;
        }
        if (l + 2 < m.layer_dims.size())
            for (auto& v : next) v = std::max(0.0, v);  // rectifier hidden units
        cur = next;
        activations.push_back(cur);
    }
    return cur[0];
}

}  // namespace

double MlpModel::forward(std::span<const float> input) const {
    if (static_cast<int>(input.size()) != layer_dims.front())
        throw DataError("input length does not match model input dimension");
    std::vector<std::vector<double>> acts;
    return logistic(forward_cached(*this, input, acts));
}

MlpModel init_model(const std::vector<int>& layer_dims, std::uint64_t seed) {
    MlpModel m;
    m.layer_dims = layer_dims;
    if (layer_dims.size() < 2 || layer_dims.back() != 1)
        throw ConfigError("layer_dims must be [D, H..., 1]");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int in = layer_dims[l];
        const int out = layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(static_cast<std::size_t>(in) * out);
        for (auto& v : w) v = dist(rng);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
    }
    m.train_seed = seed;
    return m;
}

Gradients loss_and_gradients(const MlpModel& model,
                             const std::vector<const EventFrame*>& batch) {
    model.validate();
    if (batch.empty()) throw DataError("empty batch");

    Gradients g;
    g.weights.resize(model.weights.size());
    g.biases.resize(model.biases.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        g.weights[l].assign(model.weights[l].size(), 0.0);
        g.biases[l].assign(model.biases[l].size(), 0.0);
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<double>> acts;
    for (const EventFrame* f : batch) {
        const double y = f->label > 0 ? 1.0 : 0.0;
        const double z = forward_cached(model, f->values, acts);
        // stable BCE on the logit
        g.loss += inv_n * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z))));

        std::vector<double> delta{(logistic(z) - y) * inv_n};  // dL/dz at output
        for (std::size_t l = model.weights.size(); l-- > 0;) {
            const int in = model.layer_dims[l];
            const int out = model.layer_dims[l + 1];
            const auto& a = acts[l];  // post-activation input to layer l
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                g.biases[l][static_cast<std::size_t>(o)] += d;
                double* gw = g.weights[l].data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) gw[i] += d * a[static_cast<std::size_t>(i)];
            }
            if (l == 0) break;
            std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
            for (int i = 0; i < in; ++i) {
                if (acts[l][static_cast<std::size_t>(i)] <= 0.0) continue;  // ReLU gate
                double acc = 0.0;
                for (int o = 0; o < out; ++o)
                    acc += model.weights[l][static_cast<std::size_t>(o) * in + i] *
                           delta[static_cast<std::size_t>(o)];
                prev[static_cast<std::size_t>(i)] = acc;
            }
            delta = std::move(prev);
        }
    }
    return g;
}

TrainResult train(const std::vector<EventFrame>& frames, const std::vector<int>& layer_dims,
                  const TrainConfig& tcfg) {
    tcfg.validate();
    if (frames.empty()) throw DataError("no training frames");
    for (const auto& f : frames)
        if (f.label != 0 && f.label != 1) throw DataError("unlabeled frame in training set");
    if (static_cast<int>(frames.front().values.size()) != layer_dims.front())
        throw ConfigError("frame length does not match input dimension");

    std::mt19937_64 rng(tcfg.seed);

    // stratified validation split
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < frames.size(); ++i)
        (frames[i].label ? pos : neg).push_back(i);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::size_t> val_idx, train_idx;
    const auto split = [&](std::vector<std::size_t>& cls) {
        const std::size_t n_val = static_cast<std::size_t>(
            std::lround(tcfg.validation_fraction * static_cast<double>(cls.size())));
        for (std::size_t i = 0; i < cls.size(); ++i)
            (i < n_val ? val_idx : train_idx).push_back(cls[i]);
    };
    split(pos);
    split(neg);
    if (train_idx.empty() || val_idx.empty())
        throw DataError("too few frames for the requested validation split");

    MlpModel model = init_model(layer_dims, tcfg.seed);
    model.train_seed = tcfg.seed;

    const auto val_accuracy = [&](const MlpModel& m) {
        std::size_t correct = 0;
        for (std::size_t i : val_idx) {
            const double score = m.forward(frames[i].values);
            const int pred = score > m.decision_threshold ? 1 : 0;
            if (pred == frames[i].label) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(val_idx.size());
    };

    TrainResult result;
    MlpModel best = model;
    double best_acc = val_accuracy(model);
    int best_epoch = 0;

    std::vector<std::vector<double>> vel_w(model.weights.size());
    std::vector<std::vector<double>> vel_b(model.biases.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        vel_w[l].assign(model.weights[l].size(), 0.0);
        vel_b[l].assign(model.biases[l].size(), 0.0);
    }

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(tcfg.batch_size)) {
            std::vector<const EventFrame*> batch;
            const std::size_t end =
                std::min(train_idx.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            for (std::size_t i = start; i < end; ++i) batch.push_back(&frames[train_idx[i]]);
            const Gradients g = loss_and_gradients(model, batch);
            if (!std::isfinite(g.loss))
                throw DataError("training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch));
            epoch_loss += g.loss;
            ++batches;
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
                    vel_w[l][i] = tcfg.momentum * vel_w[l][i] - tcfg.learning_rate * g.weights[l][i];
                    model.weights[l][i] += vel_w[l][i];
                }
                for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
                    vel_b[l][i] = tcfg.momentum * vel_b[l][i] - tcfg.learning_rate * g.biases[l][i];
                    model.biases[l][i] += vel_b[l][i];
                }
            }
        }
        const double acc = val_accuracy(model);
        result.log.push_back({epoch, batches ? epoch_loss / static_cast<double>(batches) : 0.0, acc});
        if (acc > best_acc) {
            best_acc = acc;
            best = model;
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= tcfg.early_stop_patience) break;
    }

    best.epochs_run = result.log.empty() ? 0 : result.log.back().epoch;
    best.best_val_acc = best_acc;
    best.train_seed = tcfg.seed;
    result.model = std::move(best);
    return result;
}

DetectionSet infer_online(const PcmSeries& pcm, const MlpModel& model,
                          const FrameConfig& fcfg, double t_ref_us) {
    model.validate();
    fcfg.validate();
    if (model.layer_dims.front() != fcfg.frame_length())
        throw ConfigError("model input dimension does not match frame length");

    const BinLookup lut(pcm);
    const std::uint64_t t_ref = static_cast<std::uint64_t>(std::ceil(t_ref_us));
    DetectionSet det;
    det.detector_tag = "mlp";
    std::uint64_t next_allowed = 0;
    for (const auto& bin : pcm.nonzero) {
        const std::uint64_t t = static_cast<std::uint64_t>(
            std::llround(bin_center_us(bin.index, pcm.bin_us)));
        if (t < next_allowed) continue;
        const EventFrame frame = build_frame(pcm, lut, bin.index, fcfg);
        if (model.forward(frame.values) > model.decision_threshold) {
            det.times_us.push_back(t);
            next_allowed = t + t_ref;
        }
    }
    return det;
}

ComplexityReport complexity(const MlpModel& model, double s_pcm, int bit_width) {
    if (!(s_pcm >= 0 && s_pcm <= 1)) throw ConfigError("s_pcm must be in [0, 1]");
    if (bit_width < 1) throw ConfigError("bit_width must be >= 1");
    ComplexityReport rep;
    for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
        const std::uint64_t macs =
            static_cast<std::uint64_t>(model.layer_dims[l]) * model.layer_dims[l + 1];
        rep.mac_per_frame_dense += macs;
        rep.mac_per_frame_effective += (l == 0) ? s_pcm * static_cast<double>(macs)
                                                : static_cast<double>(macs);
    }
    rep.memory_bits = model.num_parameters() * static_cast<std::uint64_t>(bit_width);
    return rep;
}

void save_model(const std::filesystem::path& path, const MlpModel& model) {
    model.validate();
    nlohmann::json j = {
        {"format", "mlp-spd-v1"},
        {"layer_dims", model.layer_dims},
        {"hidden_activation", "relu"},
        {"output_activation", "logistic"},
        {"decision_threshold", model.decision_threshold},
        {"weights", model.weights},
        {"biases", model.biases},
        {"train_meta",
         {{"seed", model.train_seed},
          {"epochs_run", model.epochs_run},
          {"best_val_acc", model.best_val_acc}}},
    };
    write_file_atomic(path, j.dump(2) + "\n");
}

MlpModel load_model(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid model JSON " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "mlp-spd-v1")
        throw FormatError("unknown model format in " + path.string());
    MlpModel m;
    try {
        m.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        m.decision_threshold = j.value("decision_threshold", 0.5);
        if (j.contains("train_meta")) {
            const auto& tm = j["train_meta"];
            m.train_seed = tm.value("seed", std::uint64_t{0});
            m.epochs_run = tm.value("epochs_run", 0);
            m.best_val_acc = tm.value("best_val_acc", 0.0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad model field: " + std::string(e.what()));
    }
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("model file inconsistent: ") + e.what());
    }
    return m;
}

}  // namespace evspike
