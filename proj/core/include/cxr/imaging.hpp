#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "cxr/png_io.hpp"

namespace cxr::imaging {

/// Side length of the network input.
inline constexpr int kInputSide = 224;
/// Normalized pixel range is [-kPixelBound, kPixelBound].
inline constexpr double kPixelBound = 1024.0;

/// Single-channel real-valued image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// 224x224 image with every value in [-1024, 1024].
class PreprocessedImage {
 public:
  static constexpr int kSide = kInputSide;
  static constexpr std::size_t kSize = static_cast<std::size_t>(kSide) * kSide;

  /// All-zero image (mid-gray after normalization).
  PreprocessedImage() : values_(kSize, 0.0) {}

  /// Throws ValidationError on wrong size or out-of-range / non-finite values.
  explicit PreprocessedImage(std::vector<double> values);

  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * kSide + x]; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const PreprocessedImage&) const = default;

 private:
  std::vector<double> values_;
};

/// Gray passes through; RGB becomes the per-pixel channel mean. Values stay in
/// the native sample range. Throws ValidationError for other channel counts.
GrayImage to_grayscale(const RawImage& image);

/// Largest centered square; offsets are floor((dim - side) / 2).
GrayImage center_crop(const GrayImage& image);

/// Bilinear resampling with half-pixel centers and edge clamping.
GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height);

/// Center crop followed by bilinear resampling to side x side.
GrayImage center_crop_resize(const GrayImage& image, int side = kInputSide);

/// v / (2^bit_depth - 1) * 2048 - 1024. Throws ValidationError when v is
/// outside [0, 2^bit_depth - 1] or bit_depth is not 8 or 16.
double normalize_sample(double v, int bit_depth);

/// Applies normalize_sample to a 224x224 image.
PreprocessedImage normalize_range(const GrayImage& image, int bit_depth);

enum class ResizeMode {
  kCenterCrop,  // crop to the centered square, then resample
  kStretch,     // resample the full frame directly (aspect ratio not kept)
};

/// to_grayscale -> crop/resize -> normalize_range.
PreprocessedImage preprocess(const RawImage& image, ResizeMode mode = ResizeMode::kCenterCrop);

/// Debug dump: 224 lines of 224 comma-separated values.
void write_matrix_csv(std::ostream& out, const PreprocessedImage& image);

}  // namespace cxr::imaging
