#include "evspike/detection.hpp"

#include <sstream>

#include "evspike/common.hpp"
#include "evspike/ioutil.hpp"

namespace evspike {

void write_detections_csv(const std::filesystem::path& path, const DetectionSet& det) {
    std::ostringstream out;
    out << "time_us,channel,detector\n";
    for (std::uint64_t t : det.times_us)
        out << t << ',' << det.channel_id << ',' << det.detector_tag << '\n';
    write_file_atomic(path, out.str());
}

DetectionSet read_detections_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file_bytes(path));
    std::string line;
    if (!std::getline(in, line) || line != "time_us,channel,detector")
        throw FormatError("bad detections CSV header in " + path.string());
    DetectionSet det;
    std::uint64_t prev = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw FormatError("bad detections CSV row: " + line);
        const std::uint64_t t = std::stoull(line.substr(0, c1));
        det.channel_id = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        det.detector_tag = line.substr(c2 + 1);
        if (!first && t <= prev) throw DataError("detections CSV not strictly increasing");
        det.times_us.push_back(t);
        prev = t;
        first = false;
    }
    return det;
}

}  // namespace evspike
