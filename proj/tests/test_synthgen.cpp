#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "evspike/synthgen.hpp"

using namespace evspike;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("templates are peak-normalized biphasic shapes of the right length") {
    for (int n : {1, 3, 5}) {
        const auto tpls = make_templates(n, 24000.0);
        REQUIRE(tpls.size() == static_cast<std::size_t>(n));
        for (const auto& tpl : tpls) {
            CHECK(tpl.shape.size() == 24);  // round(1.0 ms * 24 kHz)
            float peak = 0.0f, mn = 0.0f, mx = 0.0f;
            for (float v : tpl.shape) {
                peak = std::max(peak, std::fabs(v));
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            CHECK(peak == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(mn < -0.9f);            // negative main lobe
            CHECK(mx > 0.05f);            // positive rebound
            CHECK(std::fabs(tpl.shape.front()) <= 0.05f);
            // the rebound lobe is still decaying at the window edge
            CHECK(std::fabs(tpl.shape.back()) <= 0.25f);
            CHECK(std::fabs(tpl.shape.back()) < mx);
        }
    }
    // distinct shapes per neuron
    const auto tpls = make_templates(3, 24000.0);
    CHECK(tpls[0].shape != tpls[1].shape);
    CHECK(tpls[1].shape != tpls[2].shape);
}

TEST_CASE("config validation names the violated invariant") {
    GeneratorConfig cfg;
    cfg.sample_rate_hz = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = GeneratorConfig{};
    cfg.noise_sigma = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = GeneratorConfig{};
    cfg.duration_s = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = GeneratorConfig{};
    cfg.firing_rate_hz = 600.0;  // 600 * 2 ms = 1.2 >= 1, infeasible
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("no sources and no noise produce a silent recording") {
    GeneratorConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.firing_rate_hz = 0.0;
    cfg.duration_s = 1.0;
    const auto [rec, gt] = generate(cfg);
    CHECK(rec.samples.size() == 24000);
    CHECK(gt.empty());
    for (float v : rec.samples) CHECK(v == 0.0f);
}

TEST_CASE("noiseless extrema of at least half spike height sit on ground truth") {
    GeneratorConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.num_neurons = 1;
    cfg.duration_s = 1.0;
    cfg.seed = 3;
    const auto [rec, gt] = generate(cfg);
    REQUIRE(!gt.empty());

    const double period_us = rec.sample_period_us();
    for (std::size_t n = 1; n + 1 < rec.samples.size(); ++n) {
        const float a = std::fabs(rec.samples[n]);
        if (a < 0.5f) continue;
        const bool extremum = std::fabs(rec.samples[n]) >= std::fabs(rec.samples[n - 1]) &&
                              std::fabs(rec.samples[n]) >= std::fabs(rec.samples[n + 1]);
        if (!extremum) continue;
        const double t = static_cast<double>(n) * period_us;
        double best = 1e18;
        for (std::uint64_t g : gt.spike_times_us)
            best = std::min(best, std::fabs(t - static_cast<double>(g)));
        CHECK(best <= 500.0);
    }
}

TEST_CASE("generation is deterministic for a fixed seed") {
    GeneratorConfig cfg;
    cfg.duration_s = 2.0;
    cfg.noise_sigma = 0.1;
    cfg.seed = 42;
    const auto [rec1, gt1] = generate(cfg);
    const auto [rec2, gt2] = generate(cfg);
    CHECK(rec1.samples == rec2.samples);
    CHECK(gt1.spike_times_us == gt2.spike_times_us);
    CHECK(gt1.neuron_ids == gt2.neuron_ids);
}

TEST_CASE("empirical firing rate within 20% of nominal") {
    GeneratorConfig cfg;
    cfg.duration_s = 30.0;
    cfg.noise_sigma = 0.1;
    cfg.seed = 11;
    const auto [rec, gt] = generate(cfg);
    const double nominal = cfg.firing_rate_hz * cfg.num_neurons * cfg.duration_s;
    CHECK(static_cast<double>(gt.size()) > 0.8 * nominal);
    CHECK(static_cast<double>(gt.size()) < 1.2 * nominal);
}

TEST_CASE("ground truth is strictly increasing with per-neuron refractory gaps") {
    GeneratorConfig cfg;
    cfg.duration_s = 20.0;
    cfg.noise_sigma = 0.05;
    cfg.seed = 5;
    const auto [rec, gt] = generate(cfg);
    REQUIRE(gt.spike_times_us.size() == gt.neuron_ids.size());

    std::vector<std::uint64_t> last(static_cast<std::size_t>(cfg.num_neurons), 0);
    std::vector<bool> seen(static_cast<std::size_t>(cfg.num_neurons), false);
    const std::uint64_t ref_us =
        static_cast<std::uint64_t>(cfg.per_neuron_refractory_ms * 1000.0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (i > 0) CHECK(gt.spike_times_us[i] > gt.spike_times_us[i - 1]);
        const auto id = gt.neuron_ids[i];
        REQUIRE(id < static_cast<std::uint32_t>(cfg.num_neurons));
        // +2 us slack for integer-microsecond timestamp rounding
        if (seen[id]) CHECK(gt.spike_times_us[i] - last[id] + 2 >= ref_us);
        seen[id] = true;
        last[id] = gt.spike_times_us[i];
    }
}

TEST_CASE("noiseless floor between spikes is exactly zero and peaks are bounded") {
    GeneratorConfig cfg;
    cfg.duration_s = 5.0;
    cfg.noise_sigma = 0.0;
    cfg.seed = 8;
    const auto [rec, gt] = generate(cfg);

    float peak = 0.0f;
    for (float v : rec.samples) peak = std::max(peak, std::fabs(v));
    CHECK(peak <= 1.1f + 1e-6f);  // amplitude jitter ceiling, no superposition

    const double period_us = rec.sample_period_us();
    std::size_t zeros_checked = 0;
    for (std::size_t n = 0; n < rec.samples.size(); ++n) {
        const double t = static_cast<double>(n) * period_us;
        double best = 1e18;
        for (std::uint64_t g : gt.spike_times_us)
            best = std::min(best, std::fabs(t - static_cast<double>(g)));
        if (best > 1100.0) {  // beyond any template extent
            CHECK(rec.samples[n] == 0.0f);
            ++zeros_checked;
        }
    }
    CHECK(zeros_checked > 1000);
}

TEST_CASE("recording container round-trips losslessly") {
    GeneratorConfig cfg;
    cfg.duration_s = 1.0;
    cfg.noise_sigma = 0.15;
    cfg.seed = 77;
    const auto [rec, gt] = generate(cfg);

    const fs::path path = temp_file("evspike_test_roundtrip.nrec");
    write_recording(path, rec, gt);
    const auto [rec2, gt2] = read_recording(path);
    CHECK(rec2.samples == rec.samples);
    CHECK(rec2.sample_rate_hz == rec.sample_rate_hz);
    CHECK(rec2.meta.seed == cfg.seed);
    CHECK(rec2.meta.noise_sigma == doctest::Approx(cfg.noise_sigma));
    CHECK(gt2.spike_times_us == gt.spike_times_us);
    CHECK(gt2.neuron_ids == gt.neuron_ids);
    fs::remove(path);
}

TEST_CASE("malformed recording containers are rejected with format errors") {
    GeneratorConfig cfg;
    cfg.duration_s = 0.1;
    cfg.seed = 1;
    const auto [rec, gt] = generate(cfg);
    const fs::path path = temp_file("evspike_test_bad.nrec");
    write_recording(path, rec, gt);

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    SUBCASE("wrong magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(path, std::ios::binary).write(bad.data(), static_cast<long>(bad.size()));
        CHECK_THROWS_AS(read_recording(path), FormatError);
    }
    SUBCASE("truncated payload") {
        std::string bad = bytes.substr(0, bytes.size() - 100);
        std::ofstream(path, std::ios::binary).write(bad.data(), static_cast<long>(bad.size()));
        CHECK_THROWS_AS(read_recording(path), FormatError);
    }
    fs::remove(path);
}
