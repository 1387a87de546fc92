#include "evspike/evspd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "evspike/ioutil.hpp"

namespace evspike {

void EvSpdConfig::validate() const {
    if (n_th < 1) throw ConfigError("n_th must be >= 1");
    if (tau_bins < 1) throw ConfigError("tau_bins must be >= 1");
    if (n_th > tau_bins + 1) throw ConfigError("n_th must be <= tau_bins + 1");
    if (!(t_ref_us > 0)) throw ConfigError("t_ref_us must be > 0");
}

std::vector<std::uint64_t> ev_trigger_bins(const PcmSeries& pcm, int n_th, int tau_bins) {
    // Incremental window count over the sparse index list: for non-zero bin i,
    // N_e = #indices in [idx[i] - tau, idx[i]].
    std::vector<std::uint64_t> triggers;
    std::size_t lo = 0;
    for (std::size_t i = 0; i < pcm.nonzero.size(); ++i) {
        const std::uint64_t b = pcm.nonzero[i].index;
        const std::uint64_t wstart = b >= static_cast<std::uint64_t>(tau_bins)
                                         ? b - static_cast<std::uint64_t>(tau_bins)
                                         : 0;
        while (pcm.nonzero[lo].index < wstart) ++lo;
        const std::size_t n_e = i - lo + 1;
        if (n_e >= static_cast<std::size_t>(n_th)) triggers.push_back(b);
    }
    return triggers;
}

DetectionSet detect_ev(const PcmSeries& pcm, const EvSpdConfig& cfg) {
    cfg.validate();
    DetectionSet det;
    det.detector_tag = "ev";
    const std::uint64_t t_ref = static_cast<std::uint64_t>(std::ceil(cfg.t_ref_us));

    std::size_t lo = 0;
    std::uint64_t next_allowed = 0;
    for (std::size_t i = 0; i < pcm.nonzero.size(); ++i) {
        const std::uint64_t b = pcm.nonzero[i].index;
        const std::uint64_t wstart = b >= static_cast<std::uint64_t>(cfg.tau_bins)
                                         ? b - static_cast<std::uint64_t>(cfg.tau_bins)
                                         : 0;
        while (pcm.nonzero[lo].index < wstart) ++lo;
        const std::uint64_t t_us = static_cast<std::uint64_t>(
            std::llround((static_cast<double>(b) + 0.5) * pcm.bin_us));
        if (t_us < next_allowed) continue;  // refractory: evaluation suppressed
        const std::size_t n_e = i - lo + 1;
        if (n_e >= static_cast<std::size_t>(cfg.n_th)) {
            det.times_us.push_back(t_us);
            next_allowed = t_us + t_ref;
        }
    }
    return det;
}

std::vector<SweepCell> sweep_ev(const PcmSeries& pcm, const GroundTruth& gt,
                                const std::vector<int>& n_th_range,
                                const std::vector<int>& tau_range, double t_ref_us,
                                const MatchConfig& eval_cfg, int max_threads) {
    if (n_th_range.empty() || tau_range.empty())
        throw ConfigError("sweep ranges must be non-empty");

    std::vector<SweepCell> cells;
    for (int n_th : n_th_range)
        for (int tau : tau_range)
            cells.push_back({n_th, tau, n_th <= tau + 1, {}});

    if (max_threads <= 0) {
        if (const char* env = std::getenv("EVSPIKE_THREADS"))
            max_threads = std::max(1, std::atoi(env));
        else
            max_threads = static_cast<int>(std::thread::hardware_concurrency());
        if (max_threads <= 0) max_threads = 1;
    }

    auto run_cell = [&](SweepCell& cell) {
        if (!cell.valid) return;
        EvSpdConfig cfg;
        cfg.n_th = cell.n_th;
        cfg.tau_bins = cell.tau_bins;
        cfg.t_ref_us = t_ref_us;
        cell.metrics = match(detect_ev(pcm, cfg), gt, eval_cfg);
    };

    if (max_threads == 1 || cells.size() < 2) {
        for (auto& cell : cells) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n = std::min<std::size_t>(max_threads, cells.size());
        for (int t = 0; t < n; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
            });
        for (auto& th : pool) th.join();
    }
    return cells;
}

void write_heatmap_csv(const std::filesystem::path& path,
                       const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "n_th,tau,sensitivity,fdr,accuracy\n";
    for (const auto& c : cells) {
        out << c.n_th << ',' << c.tau_bins << ',';
        if (c.valid)
            out << c.metrics.sensitivity << ',' << c.metrics.fdr << ','
                << c.metrics.accuracy << '\n';
        else
            out << "nan,nan,nan\n";
    }
    write_file_atomic(path, out.str());
}

}  // namespace evspike
