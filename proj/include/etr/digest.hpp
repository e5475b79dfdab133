#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace etr {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& file);

}  // namespace etr
