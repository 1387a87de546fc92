#include <cstring>
#include <nlohmann/json.hpp>

#include "evspike/ioutil.hpp"
#include "evspike/recording.hpp"

namespace evspike {

namespace {

constexpr char kMagic[5] = {'N', 'R', 'E', 'C', '1'};
constexpr unsigned char kVersion = 0x01;

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const std::string& bytes, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
}

}  // namespace

void write_recording(const std::filesystem::path& path, const Recording& rec,
                     const GroundTruth& gt) {
    if (rec.samples.empty()) throw DataError("recording has no samples");
    if (gt.spike_times_us.size() != gt.neuron_ids.size())
        throw DataError("ground truth times and neuron ids differ in length");

    nlohmann::json header = {
        {"sample_rate_hz", rec.sample_rate_hz},
        {"num_samples", rec.samples.size()},
        {"noise_sigma", rec.meta.noise_sigma},
        {"seed", rec.meta.seed},
        {"ground_truth_us", gt.spike_times_us},
        {"neuron_ids", gt.neuron_ids},
    };
    const std::string hdr = header.dump();

    std::string out;
    out.reserve(5 + 1 + 4 + hdr.size() + 4 * rec.samples.size());
    out.append(kMagic, 5);
    out.push_back(static_cast<char>(kVersion));
    put_u32_le(out, static_cast<std::uint32_t>(hdr.size()));
    out += hdr;
    // f32 LE payload (host is little-endian on every supported target)
    const char* p = reinterpret_cast<const char*>(rec.samples.data());
    out.append(p, 4 * rec.samples.size());
    write_file_atomic(path, out);
}

std::pair<Recording, GroundTruth> read_recording(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 10) throw FormatError("file too short at byte 0: " + path.string());
    if (std::memcmp(bytes.data(), kMagic, 5) != 0)
        throw FormatError("bad magic at byte 0 in " + path.string());
    if (static_cast<unsigned char>(bytes[5]) != kVersion)
        throw FormatError("unsupported version at byte 5 in " + path.string());
    const std::uint32_t hdr_len = get_u32_le(bytes, 6);
    if (bytes.size() < 10 + static_cast<std::size_t>(hdr_len))
        throw FormatError("truncated header at byte 10 in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(10, hdr_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid JSON header at byte 10: " + std::string(e.what()));
    }

    Recording rec;
    GroundTruth gt;
    try {
        rec.sample_rate_hz = header.at("sample_rate_hz").get<double>();
        rec.meta.noise_sigma = header.value("noise_sigma", 0.0);
        rec.meta.seed = header.value("seed", std::uint64_t{0});
        gt.spike_times_us = header.value("ground_truth_us", std::vector<std::uint64_t>{});
        gt.neuron_ids = header.value("neuron_ids", std::vector<std::uint32_t>{});
        const auto num_samples = header.at("num_samples").get<std::uint64_t>();
        const std::size_t payload_off = 10 + hdr_len;
        if (bytes.size() < payload_off + 4 * num_samples)
            throw FormatError("truncated payload at byte " + std::to_string(bytes.size()) +
                              ": expected " + std::to_string(num_samples) + " samples");
        rec.samples.resize(num_samples);
        std::memcpy(rec.samples.data(), bytes.data() + payload_off, 4 * num_samples);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad header field: " + std::string(e.what()));
    }
    return {std::move(rec), std::move(gt)};
}

}  // namespace evspike
