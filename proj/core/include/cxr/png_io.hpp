#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxr::imaging {

/// Decoded image at native bit depth. Samples are row-major and interleaved.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;    // 1 (gray) or 3 (RGB); 4 only for encoder input
  int bit_depth = 8;   // 8 or 16
  std::vector<std::uint16_t> samples;

  /// Throws ValidationError if dimensions, channels, depth or sample count
  /// are inconsistent, or a sample exceeds the bit depth.
  void validate() const;

  std::uint16_t max_value() const noexcept {
    return bit_depth == 16 ? std::uint16_t{65535} : std::uint16_t{255};
  }

  bool operator==(const RawImage&) const = default;
};

/// Decodes a PNG. Palette images expand to RGB, alpha is dropped.
/// Throws DecodeError (with the byte offset reached) on malformed input and
/// on native bit depths other than 8 and 16.
RawImage load_png(std::span<const std::uint8_t> bytes);
RawImage load_png(std::string_view bytes);

/// Reads and decodes a PNG file. Throws IoError when the file is unreadable.
RawImage load_png_file(const std::filesystem::path& path);

/// Encodes a gray, RGB or RGBA image. Output is deterministic.
std::string encode_png(const RawImage& image);

}  // namespace cxr::imaging
