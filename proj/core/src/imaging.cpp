#include "cxr/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cxr/error.hpp"

namespace cxr::imaging {

PreprocessedImage::PreprocessedImage(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() != kSize) {
    throw ValidationError("preprocessed image must hold 224x224 values, got " +
                          std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!(v >= -kPixelBound && v <= kPixelBound)) {
      throw ValidationError("preprocessed value out of [-1024, 1024]: " + std::to_string(v));
    }
  }
}

GrayImage to_grayscale(const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ValidationError("to_grayscale expects 1 or 3 channels, got " +
                          std::to_string(image.channels));
  }
  GrayImage out(image.width, image.height);
  if (out.values.size() * image.channels != image.samples.size()) {
    throw ValidationError("sample count does not match width x height x channels");
  }
  if (image.channels == 1) {
    std::copy(image.samples.begin(), image.samples.end(), out.values.begin());
    return out;
  }
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double sum = static_cast<double>(image.samples[3 * i]) + image.samples[3 * i + 1] +
                       image.samples[3 * i + 2];
    out.values[i] = sum / 3.0;
  }
  return out;
}

GrayImage center_crop(const GrayImage& image) {
  if (image.width < 1 || image.height < 1) throw ValidationError("cannot crop an empty image");
  const int side = std::min(image.width, image.height);
  const int x0 = (image.width - side) / 2;
  const int y0 = (image.height - side) / 2;
  GrayImage out(side, side);
  for (int y = 0; y < side; ++y) {
    const auto src = image.values.begin() + static_cast<std::ptrdiff_t>(y0 + y) * image.width + x0;
    std::copy(src, src + side, out.values.begin() + static_cast<std::ptrdiff_t>(y) * side);
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Source taps for each output coordinate: src = (dst + 0.5) * in / out - 0.5.
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    const double src = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    taps[static_cast<std::size_t>(d)] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return taps;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height) {
  if (image.width < 1 || image.height < 1) throw ValidationError("cannot resize an empty image");
  if (out_width < 1 || out_height < 1) throw ValidationError("output size must be positive");
  if (image.width == out_width && image.height == out_height) return image;

  const auto xs = bilinear_taps(image.width, out_width);
  const auto ys = bilinear_taps(image.height, out_height);

  // Horizontal pass, then vertical. std::lerp is exact at the endpoints and
  // stays within [a, b], so constants and value bounds survive resampling.
  GrayImage rows(out_width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto& t = xs[static_cast<std::size_t>(x)];
      rows.at(x, y) = std::lerp(image.at(t.lo, y), image.at(t.hi, y), t.frac);
    }
  }
  GrayImage out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    const auto& t = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_width; ++x) {
      out.at(x, y) = std::lerp(rows.at(x, t.lo), rows.at(x, t.hi), t.frac);
    }
  }
  return out;
}

GrayImage center_crop_resize(const GrayImage& image, int side) {
  return resize_bilinear(center_crop(image), side, side);
}

double normalize_sample(double v, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw ValidationError("unsupported bit depth " + std::to_string(bit_depth));
  }
  const double max = bit_depth == 16 ? 65535.0 : 255.0;
  if (!(v >= 0.0 && v <= max)) {
    throw ValidationError("sample " + std::to_string(v) + " outside [0, " +
                          std::to_string(static_cast<int>(max)) + "]");
  }
  return v / max * (2.0 * kPixelBound) - kPixelBound;
}

PreprocessedImage normalize_range(const GrayImage& image, int bit_depth) {
  if (image.width != kInputSide || image.height != kInputSide) {
    throw ValidationError("normalize_range expects a 224x224 image");
  }
  std::vector<double> out(image.values.size());
  std::transform(image.values.begin(), image.values.end(), out.begin(),
                 [bit_depth](double v) { return normalize_sample(v, bit_depth); });
  return PreprocessedImage(std::move(out));
}

PreprocessedImage preprocess(const RawImage& image, ResizeMode mode) {
  const GrayImage gray = to_grayscale(image);
  const GrayImage sized = mode == ResizeMode::kCenterCrop
                              ? center_crop_resize(gray, kInputSide)
                              : resize_bilinear(gray, kInputSide, kInputSide);
  return normalize_range(sized, image.bit_depth);
}

void write_matrix_csv(std::ostream& out, const PreprocessedImage& image) {
  char buf[32];
  for (int y = 0; y < PreprocessedImage::kSide; ++y) {
    for (int x = 0; x < PreprocessedImage::kSide; ++x) {
      if (x != 0) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, image.at(x, y),
                                     std::chars_format::general, 9);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace cxr::imaging
