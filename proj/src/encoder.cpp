#include "evspike/encoder.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <nlohmann/json.hpp>

#include "evspike/ioutil.hpp"

namespace evspike {

void EncoderConfig::validate(double sample_period_us) const {
    if (!(th_on() > 0)) throw ConfigError("th_on must be > 0 (k and v_spike_max positive)");
    if (bin_us < sample_period_us - 1e-9)
        throw ConfigError("bin_us must be >= the sample period");
}

PulseTrain encode(const Recording& rec, const EncoderConfig& cfg, EncodeStats* stats) {
    if (rec.samples.empty()) throw DataError("empty recording");
    cfg.validate(rec.sample_period_us());

    const double th = cfg.th_on();
    const double fs = rec.sample_rate_hz;
    PulseTrain pt;
    double ref = rec.samples[0];
    double max_err = 0.0;

    for (std::size_t n = 0; n < rec.samples.size(); ++n) {
        const double x = rec.samples[n];
        if (!std::isfinite(x))
            throw DataError("non-finite sample at index " + std::to_string(n));
        const double d = x - ref;
        const std::uint64_t t_us =
            static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * 1e6 / fs));
        if (d >= th) {
            const long m = cfg.allow_multi_event_per_sample
                               ? static_cast<long>(std::floor(d / th))
                               : 1L;
            for (long i = 0; i < m; ++i) pt.pulses.push_back({t_us, +1});
            ref = cfg.allow_multi_event_per_sample ? ref + static_cast<double>(m) * th : x;
        } else if (d <= -th) {
            const long m = cfg.allow_multi_event_per_sample
                               ? static_cast<long>(std::floor(-d / th))
                               : 1L;
            for (long i = 0; i < m; ++i) pt.pulses.push_back({t_us, -1});
            ref = cfg.allow_multi_event_per_sample ? ref - static_cast<double>(m) * th : x;
        }
        max_err = std::max(max_err, std::fabs(x - ref));
    }
    if (stats) stats->max_abs_tracking_error = max_err;
    return pt;
}

namespace {

// Pulse timestamps carry integer-microsecond rounding; the half-microsecond
// slack keeps sample-aligned pulses in their own bin.
std::uint64_t bin_of(std::uint64_t time_us, double bin_us) {
    return static_cast<std::uint64_t>(std::floor((static_cast<double>(time_us) + 0.5) / bin_us));
}

}  // namespace

PcmSeries bin_pcm(const PulseTrain& pt, const EncoderConfig& cfg, double duration_us) {
    PcmSeries pcm;
    pcm.bin_us = cfg.bin_us;
    pcm.num_bins = static_cast<std::uint64_t>(std::ceil(duration_us / cfg.bin_us));
    if (pcm.num_bins == 0) pcm.num_bins = 1;

    constexpr std::uint16_t kMax = std::numeric_limits<std::uint16_t>::max();
    for (const Pulse& p : pt.pulses) {
        if (static_cast<double>(p.time_us) > duration_us)
            throw DataError("pulse at " + std::to_string(p.time_us) +
                            " us beyond duration " + std::to_string(duration_us));
        std::uint64_t b = bin_of(p.time_us, cfg.bin_us);
        if (b >= pcm.num_bins) b = pcm.num_bins - 1;
        if (pcm.nonzero.empty() || pcm.nonzero.back().index != b)
            pcm.nonzero.push_back({b, 0, 0});
        auto& bin = pcm.nonzero.back();
        auto& count = (p.polarity > 0) ? bin.n_on : bin.n_off;
        if (count == kMax)
            pcm.saturated = true;
        else
            ++count;
    }
    return pcm;
}

Recording recover(const PcmSeries& pcm, const EncoderConfig& cfg, double initial) {
    Recording out;
    out.sample_rate_hz = 1e6 / pcm.bin_us;
    out.samples.resize(pcm.num_bins, 0.0f);
    double value = initial;
    std::size_t next = 0;
    for (std::uint64_t b = 0; b < pcm.num_bins; ++b) {
        if (next < pcm.nonzero.size() && pcm.nonzero[next].index == b) {
            const auto& bin = pcm.nonzero[next++];
            value += bin.n_on * cfg.th_on() + bin.n_off * cfg.th_off();
        }
        out.samples[b] = static_cast<float>(value);
    }
    return out;
}

SparsityReport sparsity(const PcmSeries& pcm) {
    SparsityReport rep;
    for (const auto& bin : pcm.nonzero) {
        rep.events_on += bin.n_on;
        rep.events_off += bin.n_off;
    }
    rep.events_total = rep.events_on + rep.events_off;
    rep.s_pcm = pcm.num_bins ? static_cast<double>(pcm.nonzero.size()) /
                                   static_cast<double>(pcm.num_bins)
                             : 0.0;
    rep.saturated = pcm.saturated;
    return rep;
}

namespace {

constexpr char kMagic[5] = {'N', 'P', 'C', 'M', '1'};
constexpr unsigned char kVersion = 0x01;

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& bytes, std::size_t off, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
}

}  // namespace

void write_pcm(const std::filesystem::path& path, const PcmSeries& pcm, double k,
               double v_spike_max, const std::string& source_sha256) {
    nlohmann::json header = {
        {"bin_us", pcm.bin_us},
        {"num_bins", pcm.num_bins},
        {"k", k},
        {"v_spike_max", v_spike_max},
        {"source_recording_sha256", source_sha256},
        {"num_records", pcm.nonzero.size()},
        {"saturated", pcm.saturated},
    };
    const std::string hdr = header.dump();
    std::string out;
    out.reserve(10 + hdr.size() + 12 * pcm.nonzero.size());
    out.append(kMagic, 5);
    out.push_back(static_cast<char>(kVersion));
    put_le(out, hdr.size(), 4);
    out += hdr;
    for (const auto& bin : pcm.nonzero) {
        put_le(out, bin.index, 8);
        put_le(out, bin.n_on, 2);
        put_le(out, bin.n_off, 2);
    }
    write_file_atomic(path, out);
}

PcmSeries read_pcm(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 10) throw FormatError("file too short at byte 0: " + path.string());
    if (std::memcmp(bytes.data(), kMagic, 5) != 0)
        throw FormatError("bad magic at byte 0 in " + path.string());
    if (static_cast<unsigned char>(bytes[5]) != kVersion)
        throw FormatError("unsupported version at byte 5 in " + path.string());
    const std::size_t hdr_len = get_le(bytes, 6, 4);
    if (bytes.size() < 10 + hdr_len) throw FormatError("truncated header at byte 10");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(10, hdr_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid JSON header at byte 10: " + std::string(e.what()));
    }

    PcmSeries pcm;
    pcm.bin_us = header.at("bin_us").get<double>();
    pcm.num_bins = header.at("num_bins").get<std::uint64_t>();
    pcm.saturated = header.value("saturated", false);
    const std::uint64_t n = header.at("num_records").get<std::uint64_t>();
    std::size_t off = 10 + hdr_len;
    if (bytes.size() < off + 12 * n)
        throw FormatError("truncated records at byte " + std::to_string(bytes.size()));
    pcm.nonzero.reserve(n);
    std::uint64_t prev = 0;
    for (std::uint64_t i = 0; i < n; ++i, off += 12) {
        PcmSeries::Bin bin;
        bin.index = get_le(bytes, off, 8);
        bin.n_on = static_cast<std::uint16_t>(get_le(bytes, off + 8, 2));
        bin.n_off = static_cast<std::uint16_t>(get_le(bytes, off + 10, 2));
        if (i > 0 && bin.index <= prev)
            throw FormatError("records not strictly increasing at byte " + std::to_string(off));
        if (bin.index >= pcm.num_bins)
            throw FormatError("bin index out of range at byte " + std::to_string(off));
        if (bin.n_on + bin.n_off == 0)
            throw FormatError("empty record at byte " + std::to_string(off));
        prev = bin.index;
        pcm.nonzero.push_back(bin);
    }
    return pcm;
}

}  // namespace evspike
