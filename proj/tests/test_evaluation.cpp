#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "evspike/evaluation.hpp"

using namespace evspike;
namespace fs = std::filesystem;

namespace {

DetectionSet det_of(std::vector<std::uint64_t> times) {
    DetectionSet d;
    d.times_us = std::move(times);
    return d;
}

GroundTruth gt_of(std::vector<std::uint64_t> times) {
    GroundTruth g;
    g.spike_times_us = std::move(times);
    g.neuron_ids.assign(g.spike_times_us.size(), 0);
    return g;
}

// Maximum bipartite matching (augmenting paths) between detections and
// ground-truth spikes within the tolerance: an upper bound on any valid
// one-to-one assignment, and the exact optimum.
std::uint64_t optimal_tp(const std::vector<std::uint64_t>& det,
                         const std::vector<std::uint64_t>& gt, double delta_t) {
    std::vector<std::vector<std::size_t>> adj(det.size());
    for (std::size_t i = 0; i < det.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j)
            if (std::fabs(static_cast<double>(det[i]) - static_cast<double>(gt[j])) <= delta_t)
                adj[i].push_back(j);

    std::vector<std::size_t> owner(gt.size(), SIZE_MAX);
    std::vector<bool> visited;
    const std::function<bool(std::size_t)> augment = [&](std::size_t i) -> bool {
        for (std::size_t j : adj[i]) {
            if (visited[j]) continue;
            visited[j] = true;
            if (owner[j] == SIZE_MAX || augment(owner[j])) {
                owner[j] = i;
                return true;
            }
        }
        return false;
    };
    std::uint64_t matched = 0;
    for (std::size_t i = 0; i < det.size(); ++i) {
        visited.assign(gt.size(), false);
        if (augment(i)) ++matched;
    }
    return matched;
}

}  // namespace

TEST_CASE("a perfect detector scores perfectly") {
    const auto gt = gt_of({1000, 5000, 9000, 20000});
    const auto m = match(det_of({1000, 5000, 9000, 20000}), gt, MatchConfig{});
    CHECK(m.tp == 4);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.fdr == 0.0);
    CHECK(m.accuracy == 1.0);
}

TEST_CASE("worked example with hits, misses and false alarms") {
    // truth at 10/20/30/40 ms; detections at 10.2/19.7/31.0/50 ms
    const auto gt = gt_of({10000, 20000, 30000, 40000});
    const auto m = match(det_of({10200, 19700, 31000, 50000}), gt, MatchConfig{});
    CHECK(m.tp == 2);
    CHECK(m.fp == 2);
    CHECK(m.fn == 2);
    CHECK(m.sensitivity == doctest::Approx(0.5));
    CHECK(m.fdr == doctest::Approx(0.5));
    CHECK(m.accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("metric formulas at TP=8 FP=2 FN=2") {
    std::vector<std::uint64_t> gts, dets;
    for (std::uint64_t i = 0; i < 10; ++i) gts.push_back(10000 * (i + 1));
    for (std::uint64_t i = 0; i < 8; ++i) dets.push_back(10000 * (i + 1) + 100);
    dets.push_back(500000);  // far from any spike
    dets.push_back(600000);
    const auto m = match(det_of(dets), gt_of(gts), MatchConfig{});
    CHECK(m.tp == 8);
    CHECK(m.fp == 2);
    CHECK(m.fn == 2);
    CHECK(m.sensitivity == doctest::Approx(0.8));
    CHECK(m.fdr == doctest::Approx(0.2));
    CHECK(m.accuracy == doctest::Approx(8.0 / 12.0));
}

TEST_CASE("zero-denominator conventions") {
    SUBCASE("nothing to detect, nothing detected") {
        const auto m = match(det_of({}), gt_of({}), MatchConfig{});
        CHECK(m.sensitivity == 1.0);
        CHECK(m.fdr == 0.0);
        CHECK(m.accuracy == 1.0);
    }
    SUBCASE("missed everything") {
        const auto m = match(det_of({}), gt_of({1000, 2000}), MatchConfig{});
        CHECK(m.sensitivity == 0.0);
        CHECK(m.fdr == 0.0);
        CHECK(m.accuracy == 0.0);
    }
    SUBCASE("nothing real to find") {
        const auto m = match(det_of({1000, 300000}), gt_of({}), MatchConfig{});
        CHECK(m.sensitivity == 1.0);
        CHECK(m.fdr == 1.0);
        CHECK(m.accuracy == 0.0);
    }
}

TEST_CASE("tolerance boundary is closed and ties prefer the earlier spike") {
    MatchConfig cfg;  // 500 us
    // exactly at the boundary counts
    CHECK(match(det_of({10500}), gt_of({10000}), cfg).tp == 1);
    CHECK(match(det_of({10501}), gt_of({10000}), cfg).tp == 0);
    // equidistant between two spikes: the earlier one is taken, the second
    // detection still matches the later spike
    const auto m = match(det_of({10500, 10900}), gt_of({10000, 11000}), cfg);
    CHECK(m.tp == 2);
}

TEST_CASE("counts are consistent with a one-to-one assignment") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::uint64_t> step(1, 3000);
        std::vector<std::uint64_t> gts, dets;
        std::uint64_t t = 0;
        for (int i = 0; i < 40; ++i) gts.push_back(t += step(rng));
        t = 0;
        for (int i = 0; i < 40; ++i) dets.push_back(t += step(rng));
        const auto m = match(det_of(dets), gt_of(gts), MatchConfig{});
        CHECK(m.tp <= std::min(dets.size(), gts.size()));
        CHECK(m.fp == dets.size() - m.tp);
        CHECK(m.fn == gts.size() - m.tp);
        // greedy nearest-first can never beat the optimal assignment
        CHECK(m.tp <= optimal_tp(dets, gts, 500.0));
    }
}

TEST_CASE("greedy matching is optimal when events are well separated") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        // spacing > 2*delta_t: every detection can reach at most one spike
        std::uniform_int_distribution<std::uint64_t> step(1100, 5000);
        std::uniform_int_distribution<std::int64_t> jitter(-700, 700);
        std::bernoulli_distribution keep(0.7);
        std::vector<std::uint64_t> gts, dets;
        std::uint64_t t = 10000;
        for (int i = 0; i < 30; ++i) {
            t += step(rng);
            gts.push_back(t);
            if (keep(rng))
                dets.push_back(static_cast<std::uint64_t>(
                    static_cast<std::int64_t>(t) + jitter(rng)));
        }
        std::sort(dets.begin(), dets.end());
        dets.erase(std::unique(dets.begin(), dets.end()), dets.end());
        const auto m = match(det_of(dets), gt_of(gts), MatchConfig{});
        CHECK(m.tp == optimal_tp(dets, gts, 500.0));
    }
}

TEST_CASE("matching is invariant under a common time shift") {
    const std::vector<std::uint64_t> gts{10000, 20000, 30000};
    const std::vector<std::uint64_t> dets{10200, 20900, 29600};
    const auto base = match(det_of(dets), gt_of(gts), MatchConfig{});
    auto g2 = gts;
    auto d2 = dets;
    for (auto& v : g2) v += 123456;
    for (auto& v : d2) v += 123456;
    const auto shifted = match(det_of(d2), gt_of(g2), MatchConfig{});
    CHECK(shifted.tp == base.tp);
    CHECK(shifted.fp == base.fp);
    CHECK(shifted.fn == base.fn);
}

TEST_CASE("unsorted or duplicated inputs are rejected") {
    CHECK_THROWS_AS(match(det_of({2000, 1000}), gt_of({}), MatchConfig{}), DataError);
    CHECK_THROWS_AS(match(det_of({}), gt_of({5000, 5000}), MatchConfig{}), DataError);
    MatchConfig bad;
    bad.delta_t_us = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("compression accounting") {
    PcmSeries pcm;
    pcm.num_bins = 1000;
    pcm.nonzero = {{1, 30, 10}, {5, 20, 20}};  // 80 events total

    SUBCASE("events per detected spike") {
        const auto rep = compression(pcm, det_of({100, 200, 300, 400, 500,
                                                  600, 700, 800, 900, 1000}));
        CHECK(rep.defined);
        CHECK(rep.total_pcm_events == 80);
        CHECK(rep.detected_spikes == 10);
        CHECK(rep.events_per_spike == doctest::Approx(8.0));
        CHECK(rep.compression_ratio == doctest::Approx(8.0));
    }
    SUBCASE("packet sizes scale the ratio") {
        PcmSeries big;
        big.num_bins = 1000;
        big.nonzero = {{0, 60, 40}};  // 100 events
        const auto rep = compression(big, det_of({100, 200, 300, 400, 500,
                                                  600, 700, 800, 900, 1000}),
                                     20.0, 10.0);
        CHECK(rep.events_per_spike == doctest::Approx(10.0));
        CHECK(rep.compression_ratio == doctest::Approx(20.0));
    }
    SUBCASE("no events") {
        PcmSeries empty;
        empty.num_bins = 1000;
        const auto rep = compression(empty, det_of({100}));
        CHECK(rep.defined);
        CHECK(rep.total_pcm_events == 0);
        CHECK(rep.events_per_spike == 0.0);
    }
    SUBCASE("no detections leaves the ratio undefined") {
        const auto rep = compression(pcm, det_of({}));
        CHECK_FALSE(rep.defined);
        CHECK(rep.compression_ratio == 0.0);
    }
}

TEST_CASE("metrics records round-trip through JSON and render as CSV") {
    MetricsRecord rec;
    rec.detector = "ev";
    rec.params = "n_th=5;tau=11";
    rec.metrics = match(det_of({10200, 19700}), gt_of({10000, 20000, 30000}), MatchConfig{});
    rec.s_pcm = 0.125;
    rec.compression_ratio = 12.5;

    const fs::path jpath = fs::temp_directory_path() / "evspike_test_metrics.json";
    write_metrics_json(jpath, rec);
    const auto back = read_metrics_json(jpath);
    CHECK(back.detector == rec.detector);
    CHECK(back.params == rec.params);
    CHECK(back.metrics.tp == rec.metrics.tp);
    CHECK(back.metrics.fp == rec.metrics.fp);
    CHECK(back.metrics.fn == rec.metrics.fn);
    CHECK(back.metrics.sensitivity == doctest::Approx(rec.metrics.sensitivity));
    CHECK(back.metrics.fdr == doctest::Approx(rec.metrics.fdr));
    CHECK(back.metrics.accuracy == doctest::Approx(rec.metrics.accuracy));
    CHECK(back.s_pcm == doctest::Approx(0.125));
    CHECK(back.compression_ratio == doctest::Approx(12.5));

    SUBCASE("optional fields are omitted and read back as sentinels") {
        MetricsRecord minimal;
        minimal.detector = "at";
        write_metrics_json(jpath, minimal);
        const auto m2 = read_metrics_json(jpath);
        CHECK(m2.s_pcm == -1.0);
        CHECK(m2.compression_ratio == -1.0);

        std::ifstream in(jpath);
        const std::string body((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        CHECK(body.find("s_pcm") == std::string::npos);
    }
    SUBCASE("garbage is a format error") {
        std::ofstream(jpath) << "not json";
        CHECK_THROWS_AS(read_metrics_json(jpath), FormatError);
    }

    const fs::path cpath = fs::temp_directory_path() / "evspike_test_metrics.csv";
    write_metrics_csv(cpath, {rec});
    std::ifstream in(cpath);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "detector,params,tp,fp,fn,sensitivity,fdr,accuracy,s_pcm,compression_ratio");
    CHECK(row.rfind("ev,n_th=5;tau=11,2,0,1,", 0) == 0);
    fs::remove(jpath);
    fs::remove(cpath);
}
