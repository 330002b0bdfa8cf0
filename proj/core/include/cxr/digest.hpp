#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cxr {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lower-case hex SHA-256 of a file's contents. Throws IoError if unreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

/// Reads a whole file into memory. Throws IoError if unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace cxr
