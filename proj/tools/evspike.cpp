// evspike: event-based spike detection pipeline driver.
//
// Subcommands: generate, encode, recover, detect (ev|at|neo|mlp), train,
// evaluate, sweep, report. All timestamps are microseconds end to end.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <random>
#include <nlohmann/json.hpp>
#include <set>

#include "evspike/baselines.hpp"
#include "evspike/encoder.hpp"
#include "evspike/evaluation.hpp"
#include "evspike/evspd.hpp"
#include "evspike/ioutil.hpp"
#include "evspike/nnspd.hpp"
#include "evspike/synthgen.hpp"

namespace {

using nlohmann::json;
using namespace evspike;

json g_config;  // optional config file, sections keyed by module

const std::set<std::string> kSections = {"generator", "encoder", "evspd", "frame",
                                         "train",     "threshold", "match"};

void load_config(const std::string& path) {
    try {
        g_config = json::parse(read_file_bytes(path));
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    for (const auto& [key, value] : g_config.items()) {
        if (!kSections.count(key)) throw ConfigError("unknown config section: " + key);
        if (!value.is_object()) throw ConfigError("config section " + key + " must be an object");
    }
}

// Config values apply only where the flag was not given on the command line.
template <typename T>
void config_override(const CLI::Option* opt, const std::string& section,
                     const std::string& key, T& value,
                     const std::set<std::string>& known) {
    if (!g_config.contains(section)) return;
    const json& sec = g_config[section];
    for (const auto& [k, v] : sec.items())
        if (!known.count(k)) throw ConfigError("unknown key in config section " + section + ": " + k);
    if (opt && opt->count() > 0) return;
    if (sec.contains(key)) value = sec[key].get<T>();
}

std::vector<int> parse_range(const std::string& text) {
    const auto colon = text.find(':');
    std::vector<int> out;
    if (colon == std::string::npos) {
        out.push_back(std::stoi(text));
        return out;
    }
    const int a = std::stoi(text.substr(0, colon));
    const int b = std::stoi(text.substr(colon + 1));
    if (b < a) throw ConfigError("range must be low:high, got " + text);
    for (int v = a; v <= b; ++v) out.push_back(v);
    return out;
}

struct EncoderFlags {
    double k = 0.2;
    double vmax = 1.0;
    double bin_us = 1e6 / 24000.0;
    bool bin_us_set = false;
    bool no_multi = false;

    CLI::Option* opt_k = nullptr;
    CLI::Option* opt_vmax = nullptr;
    CLI::Option* opt_bin = nullptr;

    void add(CLI::App* app) {
        opt_k = app->add_option("--k", k, "threshold fraction of v_spike_max");
        opt_vmax = app->add_option("--vmax", vmax, "mean spike peak amplitude");
        opt_bin = app->add_option("--bin-us", bin_us, "PCM bin width in microseconds");
        app->add_flag("--no-multi", no_multi, "one pulse max per sample");
    }

    EncoderConfig resolve(double sample_rate_hz) {
        static const std::set<std::string> known = {"k", "v_spike_max", "bin_us",
                                                    "allow_multi_event_per_sample"};
        config_override(opt_k, "encoder", "k", k, known);
        config_override(opt_vmax, "encoder", "v_spike_max", vmax, known);
        config_override(opt_bin, "encoder", "bin_us", bin_us, known);
        EncoderConfig cfg;
        cfg.k = k;
        cfg.v_spike_max = vmax;
        cfg.bin_us = (opt_bin->count() || (g_config.contains("encoder") &&
                                           g_config["encoder"].contains("bin_us")))
                         ? bin_us
                         : 1e6 / sample_rate_hz;
        cfg.allow_multi_event_per_sample = !no_multi;
        return cfg;
    }
};

int cmd_generate(const std::string& out, GeneratorConfig cfg) {
    auto [rec, gt] = generate(cfg);
    write_recording(out, rec, gt);
    std::cout << "wrote " << out << ": " << rec.samples.size() << " samples, "
              << gt.size() << " spikes\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-based spike detection pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize a recording with ground truth");
    GeneratorConfig gcfg;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output NREC1 file")->required();
    auto* o_sigma = gen->add_option("--sigma", gcfg.noise_sigma, "noise sigma");
    auto* o_dur = gen->add_option("--duration", gcfg.duration_s, "duration in seconds");
    auto* o_seed = gen->add_option("--seed", gcfg.seed, "RNG seed");
    auto* o_rate = gen->add_option("--sample-rate", gcfg.sample_rate_hz, "sample rate Hz");
    auto* o_neur = gen->add_option("--neurons", gcfg.num_neurons, "number of neurons");
    auto* o_fire = gen->add_option("--firing-rate", gcfg.firing_rate_hz, "per-neuron rate Hz");
    auto* o_refr = gen->add_option("--refractory-ms", gcfg.per_neuron_refractory_ms,
                                   "per-neuron refractory ms");

    // encode
    auto* enc = app.add_subcommand("encode", "delta-modulate a recording into PCM events");
    std::string enc_in, enc_out;
    enc->add_option("--in", enc_in, "input NREC1 file")->required();
    enc->add_option("--out", enc_out, "output NPCM1 file")->required();
    EncoderFlags enc_flags;
    enc_flags.add(enc);

    // recover
    auto* rcv = app.add_subcommand("recover", "stair-step reconstruction from PCM events");
    std::string rcv_in, rcv_out;
    double rcv_initial = 0.0;
    rcv->add_option("--in", rcv_in, "input NPCM1 file")->required();
    rcv->add_option("--out", rcv_out, "output NREC1 file")->required();
    rcv->add_option("--initial", rcv_initial, "initial signal value");
    EncoderFlags rcv_flags;
    rcv_flags.add(rcv);

    // detect
    auto* det = app.add_subcommand("detect", "run a spike detector");
    det->require_subcommand(1);
    std::string det_in, det_out, det_model;
    double tref_ms = 1.0;

    auto* det_ev = det->add_subcommand("ev", "event-neighborhood detector");
    EvSpdConfig ecfg;
    det_ev->add_option("--in", det_in, "input NPCM1 file")->required();
    det_ev->add_option("--out", det_out, "detections CSV")->required();
    auto* o_nth = det_ev->add_option("--nth", ecfg.n_th, "non-zero bin count threshold");
    auto* o_tau = det_ev->add_option("--tau", ecfg.tau_bins, "trailing window in bins");
    auto* o_tref_ev = det_ev->add_option("--tref-ms", tref_ms, "refractory period ms");

    ThresholdSpec tspec;
    FilterSpec fspec;
    bool no_filter = false;
    double at_mult = 4.0, neo_mult = 8.0;
    CLI::Option *o_at_mult, *o_neo_mult;
    auto add_signal_flags = [&](CLI::App* sub) {
        sub->add_option("--in", det_in, "input NREC1 file")->required();
        sub->add_option("--out", det_out, "detections CSV")->required();
        sub->add_option("--tref-ms", tref_ms, "refractory period ms");
        sub->add_option("--low", fspec.low_hz, "bandpass low corner Hz");
        sub->add_option("--high", fspec.high_hz, "bandpass high corner Hz");
        sub->add_option("--order", fspec.order, "bandpass prototype order");
        sub->add_flag("--no-filter", no_filter, "skip band-pass filtering");
    };
    auto* det_at = det->add_subcommand("at", "absolute negative threshold crossing");
    add_signal_flags(det_at);
    o_at_mult = det_at->add_option("--mult", at_mult, "threshold multiplier");
    auto* det_neo = det->add_subcommand("neo", "nonlinear energy operator");
    add_signal_flags(det_neo);
    o_neo_mult = det_neo->add_option("--mult", neo_mult, "threshold multiplier");

    auto* det_mlp = det->add_subcommand("mlp", "trained event-frame classifier");
    FrameConfig fr_cfg;
    det_mlp->add_option("--in", det_in, "input NPCM1 file")->required();
    det_mlp->add_option("--out", det_out, "detections CSV")->required();
    det_mlp->add_option("--model", det_model, "model JSON file")->required();
    auto* o_tau_f = det_mlp->add_option("--tau-f", fr_cfg.tau_f_bins, "frame half-width in bins");
    auto* o_clip = det_mlp->add_option("--clip", fr_cfg.count_clip, "frame count clip");
    det_mlp->add_option("--tref-ms", tref_ms, "refractory period ms");

    // train
    auto* trn = app.add_subcommand("train", "train an event-frame classifier");
    std::vector<std::string> trn_in;
    std::string trn_out;
    std::vector<int> hidden = {32};
    TrainConfig tcfg;
    FrameConfig trn_frame;
    double trn_delta_t = 500.0;
    std::size_t max_frames = 0;
    trn->add_option("--in", trn_in, "training NREC1 file(s)")->required();
    trn->add_option("--out", trn_out, "output model JSON")->required();
    trn->add_option("--hidden", hidden, "hidden layer sizes");
    auto* o_epochs = trn->add_option("--epochs", tcfg.epochs, "training epochs");
    auto* o_batch = trn->add_option("--batch", tcfg.batch_size, "mini-batch size");
    auto* o_lr = trn->add_option("--lr", tcfg.learning_rate, "learning rate");
    auto* o_valf = trn->add_option("--val-frac", tcfg.validation_fraction, "validation fraction");
    auto* o_tseed = trn->add_option("--seed", tcfg.seed, "training seed");
    auto* o_pat = trn->add_option("--patience", tcfg.early_stop_patience, "early stop patience");
    auto* o_tf2 = trn->add_option("--tau-f", trn_frame.tau_f_bins, "frame half-width in bins");
    auto* o_clip2 = trn->add_option("--clip", trn_frame.count_clip, "frame count clip");
    auto* o_marg = trn->add_option("--label-margin-us", trn_frame.label_margin_us,
                                   "background exclusion ring");
    trn->add_option("--delta-t-us", trn_delta_t, "spike label window");
    trn->add_option("--max-frames", max_frames, "cap on balanced training frames (0 = no cap)");
    EncoderFlags trn_enc;
    trn_enc.add(trn);

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "match detections against ground truth");
    std::string evl_det, evl_gt, evl_pcm, evl_out, evl_params;
    MatchConfig mcfg;
    evl->add_option("--det", evl_det, "detections CSV")->required();
    evl->add_option("--gt", evl_gt, "NREC1 file with ground truth")->required();
    evl->add_option("--pcm", evl_pcm, "NPCM1 file (adds sparsity and compression)");
    evl->add_option("--out", evl_out, "metrics JSON")->required();
    auto* o_dt = evl->add_option("--delta-t-us", mcfg.delta_t_us, "matching tolerance");
    evl->add_option("--params", evl_params, "free-form parameter note");

    // sweep
    auto* swp = app.add_subcommand("sweep", "Ev-SPD parameter grid");
    std::string swp_in, swp_gt, swp_out, swp_nth = "1:10", swp_tau = "1:20";
    double swp_tref_ms = 1.0, swp_delta_t = 500.0;
    swp->add_option("--in", swp_in, "input NPCM1 file")->required();
    swp->add_option("--gt", swp_gt, "NREC1 file with ground truth")->required();
    swp->add_option("--out", swp_out, "heatmap CSV")->required();
    swp->add_option("--nth", swp_nth, "n_th range low:high");
    swp->add_option("--tau", swp_tau, "tau range low:high");
    swp->add_option("--tref-ms", swp_tref_ms, "refractory period ms");
    swp->add_option("--delta-t-us", swp_delta_t, "matching tolerance");

    // report
    auto* rpt = app.add_subcommand("report", "aggregate metrics JSONs into a table");
    std::vector<std::string> rpt_in;
    std::string rpt_out;
    rpt->add_option("--in", rpt_in, "metrics JSON file(s)")->required();
    rpt->add_option("--out", rpt_out, "summary CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) load_config(config_path);

        if (gen->parsed()) {
            static const std::set<std::string> known = {
                "sample_rate_hz", "duration_s",   "num_neurons", "firing_rate_hz",
                "noise_sigma",    "per_neuron_refractory_ms",    "seed"};
            config_override(o_rate, "generator", "sample_rate_hz", gcfg.sample_rate_hz, known);
            config_override(o_dur, "generator", "duration_s", gcfg.duration_s, known);
            config_override(o_neur, "generator", "num_neurons", gcfg.num_neurons, known);
            config_override(o_fire, "generator", "firing_rate_hz", gcfg.firing_rate_hz, known);
            config_override(o_sigma, "generator", "noise_sigma", gcfg.noise_sigma, known);
            config_override(o_refr, "generator", "per_neuron_refractory_ms",
                            gcfg.per_neuron_refractory_ms, known);
            config_override(o_seed, "generator", "seed", gcfg.seed, known);
            return cmd_generate(gen_out, gcfg);
        }

        if (enc->parsed()) {
            auto [rec, gt] = read_recording(enc_in);
            const EncoderConfig cfg = enc_flags.resolve(rec.sample_rate_hz);
            const PulseTrain pt = encode(rec, cfg);
            const PcmSeries pcm = bin_pcm(pt, cfg, rec.duration_us());
            write_pcm(enc_out, pcm, cfg.k, cfg.v_spike_max, sha256_file_hex(enc_in));
            const SparsityReport sp = sparsity(pcm);
            std::cout << "wrote " << enc_out << ": " << sp.events_total
                      << " events, s_pcm=" << sp.s_pcm << "\n";
            return 0;
        }

        if (rcv->parsed()) {
            const PcmSeries pcm = read_pcm(rcv_in);
            const EncoderConfig cfg = rcv_flags.resolve(1e6 / pcm.bin_us);
            const Recording rec = recover(pcm, cfg, rcv_initial);
            write_recording(rcv_out, rec, {});
            std::cout << "wrote " << rcv_out << ": " << rec.samples.size() << " samples\n";
            return 0;
        }

        if (det->parsed()) {
            DetectionSet result;
            if (det_ev->parsed()) {
                static const std::set<std::string> known = {"n_th", "tau_bins", "t_ref_us"};
                config_override(o_nth, "evspd", "n_th", ecfg.n_th, known);
                config_override(o_tau, "evspd", "tau_bins", ecfg.tau_bins, known);
                double tref_us = tref_ms * 1000.0;
                config_override(o_tref_ev, "evspd", "t_ref_us", tref_us, known);
                ecfg.t_ref_us = tref_us;
                result = detect_ev(read_pcm(det_in), ecfg);
            } else if (det_at->parsed() || det_neo->parsed()) {
                auto [rec, gt] = read_recording(det_in);
                const Recording filtered = no_filter ? rec : bandpass(rec, fspec);
                tspec.t_ref_us = tref_ms * 1000.0;
                static const std::set<std::string> known = {"method", "multiplier", "t_ref_us"};
                if (det_at->parsed()) {
                    tspec.method = ThresholdSpec::Method::absolute;
                    tspec.multiplier = at_mult;
                    config_override(o_at_mult, "threshold", "multiplier", tspec.multiplier, known);
                    result = detect_at(filtered, tspec);
                } else {
                    tspec.method = ThresholdSpec::Method::neo;
                    tspec.multiplier = neo_mult;
                    config_override(o_neo_mult, "threshold", "multiplier", tspec.multiplier, known);
                    result = detect_neo(filtered, tspec);
                }
            } else if (det_mlp->parsed()) {
                static const std::set<std::string> known = {"tau_f_bins", "count_clip",
                                                            "label_margin_us"};
                config_override(o_tau_f, "frame", "tau_f_bins", fr_cfg.tau_f_bins, known);
                config_override(o_clip, "frame", "count_clip", fr_cfg.count_clip, known);
                result = infer_online(read_pcm(det_in), load_model(det_model), fr_cfg,
                                      tref_ms * 1000.0);
            }
            write_detections_csv(det_out, result);
            std::cout << "wrote " << det_out << ": " << result.times_us.size()
                      << " detections\n";
            return 0;
        }

        if (trn->parsed()) {
            static const std::set<std::string> frame_known = {"tau_f_bins", "count_clip",
                                                              "label_margin_us"};
            config_override(o_tf2, "frame", "tau_f_bins", trn_frame.tau_f_bins, frame_known);
            config_override(o_clip2, "frame", "count_clip", trn_frame.count_clip, frame_known);
            config_override(o_marg, "frame", "label_margin_us", trn_frame.label_margin_us,
                            frame_known);
            static const std::set<std::string> train_known = {
                "epochs", "batch_size", "learning_rate", "validation_fraction",
                "seed",   "early_stop_patience"};
            config_override(o_epochs, "train", "epochs", tcfg.epochs, train_known);
            config_override(o_batch, "train", "batch_size", tcfg.batch_size, train_known);
            config_override(o_lr, "train", "learning_rate", tcfg.learning_rate, train_known);
            config_override(o_valf, "train", "validation_fraction", tcfg.validation_fraction,
                            train_known);
            config_override(o_tseed, "train", "seed", tcfg.seed, train_known);
            config_override(o_pat, "train", "early_stop_patience", tcfg.early_stop_patience,
                            train_known);

            std::vector<EventFrame> frames;
            for (const auto& path : trn_in) {
                auto [rec, gt] = read_recording(path);
                const EncoderConfig cfg = trn_enc.resolve(rec.sample_rate_hz);
                const PcmSeries pcm = bin_pcm(encode(rec, cfg), cfg, rec.duration_us());
                auto part = extract_frames(pcm, gt, trn_frame, trn_delta_t, tcfg.seed);
                frames.insert(frames.end(), std::make_move_iterator(part.begin()),
                              std::make_move_iterator(part.end()));
            }
            if (max_frames > 0 && frames.size() > max_frames) {
                std::vector<EventFrame> pos, neg;
                for (auto& f : frames) (f.label ? pos : neg).push_back(std::move(f));
                std::mt19937_64 rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
                std::shuffle(pos.begin(), pos.end(), rng);
                std::shuffle(neg.begin(), neg.end(), rng);
                const std::size_t per_class = std::min({pos.size(), neg.size(), max_frames / 2});
                frames.clear();
                for (std::size_t i = 0; i < per_class; ++i) {
                    frames.push_back(std::move(pos[i]));
                    frames.push_back(std::move(neg[i]));
                }
            }
            std::vector<int> dims = {trn_frame.frame_length()};
            dims.insert(dims.end(), hidden.begin(), hidden.end());
            dims.push_back(1);
            const TrainResult result = train(frames, dims, tcfg);
            save_model(trn_out, result.model);
            std::cout << "wrote " << trn_out << ": best_val_acc="
                      << result.model.best_val_acc << " after "
                      << result.model.epochs_run << " epochs on " << frames.size()
                      << " frames\n";
            return 0;
        }

        if (evl->parsed()) {
            static const std::set<std::string> known = {"delta_t_us"};
            config_override(o_dt, "match", "delta_t_us", mcfg.delta_t_us, known);
            const DetectionSet detections = read_detections_csv(evl_det);
            auto [rec, gt] = read_recording(evl_gt);
            MetricsRecord record;
            record.detector = detections.detector_tag;
            record.params = evl_params;
            record.metrics = match(detections, gt, mcfg);
            if (!evl_pcm.empty()) {
                const PcmSeries pcm = read_pcm(evl_pcm);
                record.s_pcm = sparsity(pcm).s_pcm;
                const CompressionReport comp = compression(pcm, detections);
                if (comp.defined) record.compression_ratio = comp.compression_ratio;
            }
            write_metrics_json(evl_out, record);
            std::cout << "wrote " << evl_out << ": S=" << record.metrics.sensitivity
                      << " FDR=" << record.metrics.fdr
                      << " A=" << record.metrics.accuracy << "\n";
            return 0;
        }

        if (swp->parsed()) {
            const PcmSeries pcm = read_pcm(swp_in);
            auto [rec, gt] = read_recording(swp_gt);
            MatchConfig cfg;
            cfg.delta_t_us = swp_delta_t;
            const auto cells = sweep_ev(pcm, gt, parse_range(swp_nth), parse_range(swp_tau),
                                        swp_tref_ms * 1000.0, cfg);
            write_heatmap_csv(swp_out, cells);
            std::cout << "wrote " << swp_out << ": " << cells.size() << " cells\n";
            return 0;
        }

        if (rpt->parsed()) {
            std::vector<MetricsRecord> records;
            for (const auto& path : rpt_in) records.push_back(read_metrics_json(path));
            write_metrics_csv(rpt_out, records);
            std::cout << "wrote " << rpt_out << ": " << records.size() << " rows\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
