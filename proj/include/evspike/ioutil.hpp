#pragma once

#include <filesystem>
#include <string>

namespace evspike {

/// Write-temp-then-rename; partial files never appear under the final name.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

std::string read_file_bytes(const std::filesystem::path& path);

/// Hex SHA-256 of a file's contents (empty string when the file is missing).
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace evspike
