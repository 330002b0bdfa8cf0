#include "cxr/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>

#include "cxr/digest.hpp"
#include "cxr/error.hpp"

namespace cxr::imaging {
namespace {

struct ReadState {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
  std::string error;
};

void read_bytes(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (len > st->data.size() - st->pos) {
    st->pos = st->data.size();
    png_error(png, "unexpected end of data");
  }
  std::memcpy(out, st->data.data() + st->pos, len);
  st->pos += len;
}

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

// Every object with a destructor lives in the caller: longjmp must not skip any.
bool decode(ReadState& st, png_structp png, png_infop info, RawImage& out,
            std::vector<std::uint8_t>& pixels, std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;

  png_set_read_fn(png, &st, read_bytes);
  png_read_info(png, info);

  const int native_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (native_depth != 8 && native_depth != 16) {
    st.error = "unsupported bit depth " + std::to_string(native_depth);
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    st.error = "unexpected decoded layout";
    return false;
  }

  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.channels = channels;
  out.bit_depth = depth;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  out.samples.resize(n);
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* row = rows[y];
    std::uint16_t* dst = out.samples.data() + static_cast<std::size_t>(y) * width * channels;
    const std::size_t count = static_cast<std::size_t>(width) * channels;
    if (depth == 8) {
      for (std::size_t i = 0; i < count; ++i) dst[i] = row[i];
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        dst[i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
      }
    }
  }
  return true;
}

struct WriteState {
  std::string out;
};

void write_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<WriteState*>(png_get_io_ptr(png));
  st->out.append(reinterpret_cast<const char*>(data), len);
}

void flush_noop(png_structp) {}

bool encode(const RawImage& img, png_structp png, png_infop info, WriteState& st,
            std::vector<std::uint8_t>& pixels, std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;

  png_set_write_fn(png, &st, write_bytes, flush_noop);
  const int color_type = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                             : PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), img.bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t bytes_per_sample = img.bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width) * img.channels * bytes_per_sample;
  pixels.resize(rowbytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes_per_sample == 1) {
      pixels[i] = static_cast<std::uint8_t>(img.samples[i]);
    } else {
      pixels[2 * i] = static_cast<std::uint8_t>(img.samples[i] >> 8);
      pixels[2 * i + 1] = static_cast<std::uint8_t>(img.samples[i] & 0xFF);
    }
  }
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

void RawImage::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ValidationError("unsupported channel count " + std::to_string(channels));
  }
  if (bit_depth != 8 && bit_depth != 16) {
    throw ValidationError("unsupported bit depth " + std::to_string(bit_depth));
  }
  if (samples.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ValidationError("sample count does not match width x height x channels");
  }
  const auto max = max_value();
  for (auto s : samples) {
    if (s > max) throw ValidationError("sample exceeds bit depth");
  }
}

RawImage load_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw DecodeError("not a PNG stream: bad signature", 0);
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_error, on_warning);
  if (png == nullptr) throw DecodeError("cannot allocate decoder", 0);
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("cannot allocate decoder", 0);
  }

  ReadState st{bytes, 0, {}};
  RawImage out;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  const bool ok = decode(st, png, info, out, pixels, rows);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) {
    throw DecodeError(st.error.empty() ? error : st.error, st.pos);
  }
  return out;
}

RawImage load_png(std::string_view bytes) {
  return load_png(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

RawImage load_png_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return load_png(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.reason(), e.offset());
  }
}

std::string encode_png(const RawImage& image) {
  image.validate();
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_error, on_warning);
  if (png == nullptr) throw Error("cannot allocate PNG encoder");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("cannot allocate PNG encoder");
  }
  WriteState st;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  const bool ok = encode(image, png, info, st, pixels, rows);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error("PNG encoding failed: " + error);
  return std::move(st.out);
}

}  // namespace cxr::imaging
