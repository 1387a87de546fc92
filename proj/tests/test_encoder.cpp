#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "evspike/encoder.hpp"
#include "evspike/synthgen.hpp"

using namespace evspike;
namespace fs = std::filesystem;

namespace {

Recording make_rec(std::vector<float> samples, double fs = 24000.0) {
    Recording rec;
    rec.samples = std::move(samples);
    rec.sample_rate_hz = fs;
    return rec;
}

std::uint64_t sample_time_us(std::size_t n, double fs = 24000.0) {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * 1e6 / fs));
}

}  // namespace

TEST_CASE("constant signal emits no pulses") {
    const auto pt = encode(make_rec(std::vector<float>(100, 0.5f)), EncoderConfig{});
    CHECK(pt.pulses.empty());
}

TEST_CASE("hand-traced reference updates") {
    // thresholds +-0.2, reference starts at samples[0] = 0
    const auto pt = encode(make_rec({0.0f, 0.05f, 0.25f, 0.15f, -0.1f}), EncoderConfig{});
    REQUIRE(pt.pulses.size() == 2);
    CHECK(pt.pulses[0].polarity == +1);
    CHECK(pt.pulses[0].time_us == sample_time_us(2));
    CHECK(pt.pulses[1].polarity == -1);
    CHECK(pt.pulses[1].time_us == sample_time_us(4));
}

TEST_CASE("a ramp rising by ten thresholds emits exactly ten ON pulses") {
    std::vector<float> ramp;
    for (int i = 0; i <= 40; ++i) ramp.push_back(static_cast<float>(i) * 0.05f);
    const auto pt = encode(make_rec(std::move(ramp)), EncoderConfig{});
    std::size_t on = 0, off = 0;
    for (const auto& p : pt.pulses) (p.polarity > 0 ? on : off)++;
    CHECK(on == 10);
    CHECK(off == 0);
}

TEST_CASE("non-finite samples are rejected with the sample index") {
    std::vector<float> s(10, 0.0f);
    s[3] = std::numeric_limits<float>::quiet_NaN();
    try {
        encode(make_rec(std::move(s)), EncoderConfig{});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
}

TEST_CASE("encode is scale covariant") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> base(4000);
    for (auto& v : base) v = dist(rng);

    EncoderConfig unit;
    const auto pt1 = encode(make_rec(std::vector<float>(base)), unit);

    std::vector<float> scaled(base);
    for (auto& v : scaled) v *= 4.0f;  // power of two: exact in float
    EncoderConfig big;
    big.v_spike_max = 4.0;
    const auto pt2 = encode(make_rec(std::move(scaled)), big);

    REQUIRE(pt1.pulses.size() == pt2.pulses.size());
    for (std::size_t i = 0; i < pt1.pulses.size(); ++i) {
        CHECK(pt1.pulses[i].time_us == pt2.pulses[i].time_us);
        CHECK(pt1.pulses[i].polarity == pt2.pulses[i].polarity);
    }
}

TEST_CASE("multi-event tracking error stays under one threshold") {
    GeneratorConfig gcfg;
    gcfg.duration_s = 5.0;
    gcfg.noise_sigma = 0.15;
    gcfg.seed = 9;
    const auto [rec, gt] = generate(gcfg);

    EncodeStats stats;
    encode(rec, EncoderConfig{}, &stats);
    CHECK(stats.max_abs_tracking_error < EncoderConfig{}.th_on());
}

TEST_CASE("binning by index arithmetic") {
    PulseTrain pt;
    pt.pulses = {{10, +1}, {20, +1}, {90, -1}};
    const auto pcm = bin_pcm(pt, EncoderConfig{}, 1000.0);
    REQUIRE(pcm.nonzero.size() == 2);
    CHECK(pcm.nonzero[0].index == 0);
    CHECK(pcm.nonzero[0].n_on == 2);
    CHECK(pcm.nonzero[0].n_off == 0);
    CHECK(pcm.nonzero[1].index == 2);
    CHECK(pcm.nonzero[1].n_on == 0);
    CHECK(pcm.nonzero[1].n_off == 1);
}

TEST_CASE("empty pulse train bins to an empty series") {
    const auto pcm = bin_pcm(PulseTrain{}, EncoderConfig{}, 1000.0);
    CHECK(pcm.nonzero.empty());
    CHECK(pcm.num_bins == 24);
}

TEST_CASE("pulse counts are conserved through binning") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        PulseTrain pt;
        std::uint64_t t = 0;
        std::uniform_int_distribution<std::uint64_t> gap(0, 80);
        std::bernoulli_distribution pol(0.5);
        std::size_t want_on = 0, want_off = 0;
        for (int i = 0; i < 500; ++i) {
            t += gap(rng);
            const int p = pol(rng) ? +1 : -1;
            (p > 0 ? want_on : want_off)++;
            pt.pulses.push_back({t, p});
        }
        const auto pcm = bin_pcm(pt, EncoderConfig{}, static_cast<double>(t) + 1.0);
        std::size_t got_on = 0, got_off = 0;
        std::uint64_t prev = 0;
        bool first = true;
        for (const auto& bin : pcm.nonzero) {
            CHECK(bin.n_on + bin.n_off > 0);
            CHECK(bin.index < pcm.num_bins);
            if (!first) CHECK(bin.index > prev);
            first = false;
            prev = bin.index;
            got_on += bin.n_on;
            got_off += bin.n_off;
        }
        CHECK(got_on == want_on);
        CHECK(got_off == want_off);
    }
}

TEST_CASE("pulses beyond the declared duration are rejected") {
    PulseTrain pt;
    pt.pulses = {{5000, +1}};
    CHECK_THROWS_AS(bin_pcm(pt, EncoderConfig{}, 1000.0), DataError);
}

TEST_CASE("stair-step recovery") {
    SUBCASE("empty series recovers to zero") {
        PcmSeries pcm;
        pcm.num_bins = 50;
        const auto rec = recover(pcm, EncoderConfig{}, 0.0);
        REQUIRE(rec.samples.size() == 50);
        for (float v : rec.samples) CHECK(v == 0.0f);
    }
    SUBCASE("a single bin of three ON events steps to 0.6") {
        PcmSeries pcm;
        pcm.num_bins = 10;
        pcm.nonzero = {{4, 3, 0}};
        const auto rec = recover(pcm, EncoderConfig{}, 0.0);
        CHECK(rec.samples[3] == 0.0f);
        CHECK(rec.samples[4] == doctest::Approx(0.6));
        CHECK(rec.samples[9] == doctest::Approx(0.6));
    }
}

TEST_CASE("recovered signal tracks the original within threshold plus slew") {
    GeneratorConfig gcfg;
    gcfg.duration_s = 3.0;
    gcfg.noise_sigma = 0.1;
    gcfg.seed = 13;
    const auto [rec, gt] = generate(gcfg);

    EncoderConfig cfg;
    const auto pcm = bin_pcm(encode(rec, cfg), cfg, rec.duration_us());
    const auto rec2 = recover(pcm, cfg, rec.samples[0]);

    double max_slew = 0.0;
    for (std::size_t n = 1; n < rec.samples.size(); ++n)
        max_slew = std::max(max_slew,
                            std::fabs(static_cast<double>(rec.samples[n]) - rec.samples[n - 1]));
    const double bound = cfg.th_on() + max_slew + 1e-9;
    // default bin width equals the sample period, so bins align with samples
    REQUIRE(rec2.samples.size() >= rec.samples.size());
    for (std::size_t n = 0; n < rec.samples.size(); ++n)
        CHECK(std::fabs(static_cast<double>(rec2.samples[n]) - rec.samples[n]) < bound);
}

TEST_CASE("noiseless spikes keep sign and peak location through recovery") {
    GeneratorConfig gcfg;
    gcfg.duration_s = 2.0;
    gcfg.noise_sigma = 0.0;
    gcfg.seed = 31;
    const auto [rec, gt] = generate(gcfg);
    REQUIRE(!gt.empty());

    EncoderConfig cfg;
    const auto pcm = bin_pcm(encode(rec, cfg), cfg, rec.duration_us());
    const auto rec2 = recover(pcm, cfg, 0.0);

    for (std::uint64_t g : gt.spike_times_us) {
        const auto p = static_cast<std::int64_t>(
            std::floor((static_cast<double>(g) + 0.5) / pcm.bin_us));
        std::int64_t best = p;
        for (std::int64_t b = p - 5; b <= p + 5; ++b) {
            if (b < 0 || b >= static_cast<std::int64_t>(rec2.samples.size())) continue;
            if (rec2.samples[static_cast<std::size_t>(b)] <
                rec2.samples[static_cast<std::size_t>(best)])
                best = b;
        }
        CHECK(rec2.samples[static_cast<std::size_t>(best)] < 0.0f);  // trough sign
        CHECK(std::llabs(best - p) <= 1);                            // +-1 bin location
    }
}

TEST_CASE("sparsity definition and saturation") {
    PcmSeries pcm;
    pcm.num_bins = 100;
    CHECK(sparsity(pcm).s_pcm == 0.0);

    for (std::uint64_t b = 0; b < 20; ++b) pcm.nonzero.push_back({b * 5, 1, 0});
    const auto rep = sparsity(pcm);
    CHECK(rep.s_pcm == doctest::Approx(0.2));
    CHECK(rep.events_total == 20);

    PulseTrain flood;
    for (int i = 0; i < 70000; ++i) flood.pulses.push_back({0, +1});
    const auto sat = bin_pcm(flood, EncoderConfig{}, 100.0);
    CHECK(sat.saturated);
    CHECK(sat.nonzero[0].n_on == 65535);
    CHECK(sparsity(sat).saturated);
}

TEST_CASE("encoder config validation") {
    EncoderConfig cfg;
    cfg.bin_us = 10.0;  // below the 41.667 us sample period
    CHECK_THROWS_AS(cfg.validate(1e6 / 24000.0), ConfigError);
    cfg = EncoderConfig{};
    cfg.k = 0.0;
    CHECK_THROWS_AS(cfg.validate(1e6 / 24000.0), ConfigError);
}

TEST_CASE("PCM container round-trips and rejects malformed files") {
    GeneratorConfig gcfg;
    gcfg.duration_s = 1.0;
    gcfg.noise_sigma = 0.1;
    gcfg.seed = 17;
    const auto [rec, gt] = generate(gcfg);
    EncoderConfig cfg;
    const auto pcm = bin_pcm(encode(rec, cfg), cfg, rec.duration_us());

    const fs::path path = fs::temp_directory_path() / "evspike_test.npcm";
    write_pcm(path, pcm, cfg.k, cfg.v_spike_max, "deadbeef");
    const auto pcm2 = read_pcm(path);
    CHECK(pcm2.bin_us == doctest::Approx(pcm.bin_us));
    CHECK(pcm2.num_bins == pcm.num_bins);
    REQUIRE(pcm2.nonzero.size() == pcm.nonzero.size());
    for (std::size_t i = 0; i < pcm.nonzero.size(); ++i) {
        CHECK(pcm2.nonzero[i].index == pcm.nonzero[i].index);
        CHECK(pcm2.nonzero[i].n_on == pcm.nonzero[i].n_on);
        CHECK(pcm2.nonzero[i].n_off == pcm.nonzero[i].n_off);
    }

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    SUBCASE("wrong magic") {
        bytes[0] = 'Z';
        std::ofstream(path, std::ios::binary)
            .write(bytes.data(), static_cast<long>(bytes.size()));
        CHECK_THROWS_AS(read_pcm(path), FormatError);
    }
    SUBCASE("truncated records") {
        bytes.resize(bytes.size() - 7);
        std::ofstream(path, std::ios::binary)
            .write(bytes.data(), static_cast<long>(bytes.size()));
        CHECK_THROWS_AS(read_pcm(path), FormatError);
    }
    fs::remove(path);
}
