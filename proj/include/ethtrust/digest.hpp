#pragma once

#include <filesystem>
#include <string>

namespace ethtrust {

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);  // throws IoError

}  // namespace ethtrust
