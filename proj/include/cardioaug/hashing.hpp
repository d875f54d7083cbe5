// hashing.hpp - SHA-256 digests for provenance records.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cardioaug {

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path &path);

} // namespace cardioaug
