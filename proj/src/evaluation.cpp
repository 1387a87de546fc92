#include "evspike/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "evspike/ioutil.hpp"

namespace evspike {

void MatchConfig::validate() const {
    if (!(delta_t_us > 0)) throw ConfigError("delta_t_us must be > 0");
}

namespace {

void check_sorted(const std::vector<std::uint64_t>& v, const char* what) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1]) throw DataError(std::string(what) + " not strictly increasing");
}

MetricsReport finish(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    MetricsReport m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.sensitivity = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    m.fdr = (tp + fp) ? static_cast<double>(fp) / static_cast<double>(tp + fp) : 0.0;
    m.accuracy =
        (tp + fp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 1.0;
    return m;
}

}  // namespace

MetricsReport match(const DetectionSet& detections, const GroundTruth& gt,
                    const MatchConfig& cfg) {
    cfg.validate();
    check_sorted(detections.times_us, "detections");
    check_sorted(gt.spike_times_us, "ground truth");

    std::vector<bool> taken(gt.spike_times_us.size(), false);
    std::uint64_t tp = 0;
    std::size_t lo = 0;  // earliest spike that can still reach future detections
    for (std::uint64_t d : detections.times_us) {
        const double dt = static_cast<double>(d);
        while (lo < gt.spike_times_us.size() &&
               static_cast<double>(gt.spike_times_us[lo]) < dt - cfg.delta_t_us)
            ++lo;
        double best = cfg.delta_t_us + 1;
        std::size_t best_i = gt.spike_times_us.size();
        for (std::size_t i = lo; i < gt.spike_times_us.size(); ++i) {
            const double g = static_cast<double>(gt.spike_times_us[i]);
            if (g > dt + cfg.delta_t_us) break;
            if (taken[i]) continue;
            const double diff = std::fabs(g - dt);
            if (diff < best) {  // ties keep the earlier spike
                best = diff;
                best_i = i;
            }
        }
        if (best_i < gt.spike_times_us.size()) {
            taken[best_i] = true;
            ++tp;
        }
    }
    const std::uint64_t fp = detections.times_us.size() - tp;
    const std::uint64_t fn = gt.spike_times_us.size() - tp;
    return finish(tp, fp, fn);
}

CompressionReport compression(const PcmSeries& pcm, const DetectionSet& detections,
                              double packet_bits_event, double packet_bits_spike) {
    CompressionReport rep;
    for (const auto& bin : pcm.nonzero) rep.total_pcm_events += bin.n_on + bin.n_off;
    rep.detected_spikes = detections.times_us.size();
    if (rep.detected_spikes > 0) {
        rep.defined = true;
        rep.events_per_spike = static_cast<double>(rep.total_pcm_events) /
                               static_cast<double>(rep.detected_spikes);
        rep.compression_ratio = rep.events_per_spike * packet_bits_event / packet_bits_spike;
    }
    return rep;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsRecord& rec) {
    nlohmann::json j = {
        {"detector", rec.detector},
        {"params", rec.params},
        {"tp", rec.metrics.tp},
        {"fp", rec.metrics.fp},
        {"fn", rec.metrics.fn},
        {"sensitivity", rec.metrics.sensitivity},
        {"fdr", rec.metrics.fdr},
        {"accuracy", rec.metrics.accuracy},
    };
    if (rec.s_pcm >= 0) j["s_pcm"] = rec.s_pcm;
    if (rec.compression_ratio >= 0) j["compression_ratio"] = rec.compression_ratio;
    write_file_atomic(path, j.dump(2) + "\n");
}

MetricsRecord read_metrics_json(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid metrics JSON " + path.string() + ": " + e.what());
    }
    MetricsRecord rec;
    rec.detector = j.value("detector", "");
    rec.params = j.value("params", "");
    rec.metrics.tp = j.value("tp", std::uint64_t{0});
    rec.metrics.fp = j.value("fp", std::uint64_t{0});
    rec.metrics.fn = j.value("fn", std::uint64_t{0});
    rec.metrics.sensitivity = j.value("sensitivity", 0.0);
    rec.metrics.fdr = j.value("fdr", 0.0);
    rec.metrics.accuracy = j.value("accuracy", 0.0);
    rec.s_pcm = j.value("s_pcm", -1.0);
    rec.compression_ratio = j.value("compression_ratio", -1.0);
    return rec;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& records) {
    std::ostringstream out;
    out << "detector,params,tp,fp,fn,sensitivity,fdr,accuracy,s_pcm,compression_ratio\n";
    for (const auto& r : records) {
        out << r.detector << ',' << r.params << ',' << r.metrics.tp << ',' << r.metrics.fp
            << ',' << r.metrics.fn << ',' << r.metrics.sensitivity << ',' << r.metrics.fdr
            << ',' << r.metrics.accuracy << ',';
        if (r.s_pcm >= 0) out << r.s_pcm;
        out << ',';
        if (r.compression_ratio >= 0) out << r.compression_ratio;
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace evspike
