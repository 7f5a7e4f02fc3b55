#include "segprop/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

namespace segprop {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr file(std::fopen(path.c_str(), mode));
  if (!file) {
    throw IoError("cannot open " + path.string());
  }
  return file;
}

// libpng reports errors through longjmp; the callbacks below copy the
// message so it can be rethrown as an exception once control is back in
// C++ frames.
struct PngErrorState {
  char message[256] = {};
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Decodes into `out`. Returns false on a libpng error; no C++ objects with
// destructors are created between setjmp and the libpng calls.
bool decode(std::FILE* file, PngErrorState* err, RawImage* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err,
                                           on_png_error, on_png_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA,
               nullptr);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);

  out->height = height;
  out->width = width;
  out->channels = channels;
  out->bit_depth = depth;
  if ((depth == 8 || depth == 16) && (channels == 1 || channels == 3)) {
    out->samples.resize(static_cast<std::size_t>(height) * width * channels);
    std::size_t i = 0;
    for (int y = 0; y < height; ++y) {
      const png_bytep row = rows[y];
      for (int s = 0; s < width * channels; ++s) {
        out->samples[i++] = depth == 8
                                ? row[s]
                                : static_cast<std::uint16_t>(
                                      (row[2 * s] << 8) | row[2 * s + 1]);
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* file, PngErrorState* err, int height, int width,
            int channels, const std::uint8_t* samples) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err,
                                            on_png_error, on_png_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(samples + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

RawImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8] = {};
  if (std::fread(signature, 1, 8, file.get()) != 8 ||
      png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError(path.string() + ": not a PNG file");
  }
  std::rewind(file.get());
  PngErrorState err;
  RawImage image;
  if (!decode(file.get(), &err, &image)) {
    throw IoError(path.string() + ": PNG decode failed: " + err.message);
  }
  if (image.bit_depth != 8 && image.bit_depth != 16) {
    throw IoError(path.string() + ": unsupported bit depth " +
                  std::to_string(image.bit_depth));
  }
  if (image.channels != 1 && image.channels != 3) {
    throw IoError(path.string() + ": unsupported channel count " +
                  std::to_string(image.channels));
  }
  return image;
}

void write_png8(const std::filesystem::path& path, int height, int width,
                int channels, std::span<const std::uint8_t> samples) {
  if (samples.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ValidationError("write_png8: sample count does not match " +
                          std::to_string(height) + "x" + std::to_string(width) +
                          "x" + std::to_string(channels));
  }
  FilePtr file = open_file(path, "wb");
  PngErrorState err;
  if (!encode(file.get(), &err, height, width, channels, samples.data())) {
    throw IoError(path.string() + ": PNG encode failed: " + err.message);
  }
  if (std::fflush(file.get()) != 0) {
    throw IoError("write failed: " + path.string());
  }
}

Frame load_frame(const std::filesystem::path& path) {
  RawImage image = read_png(path);
  const float scale = image.bit_depth == 8 ? 255.0f : 65535.0f;
  std::vector<float> data(image.samples.size());
  std::transform(image.samples.begin(), image.samples.end(), data.begin(),
                 [scale](std::uint16_t s) { return s / scale; });
  return Frame(image.height, image.width, image.channels, std::move(data));
}

void save_frame(const Frame& frame, const std::filesystem::path& path) {
  std::vector<std::uint8_t> samples(frame.data().size());
  std::transform(frame.data().begin(), frame.data().end(), samples.begin(),
                 [](float v) {
                   return static_cast<std::uint8_t>(
                       std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
                 });
  write_png8(path, frame.height(), frame.width(), frame.channels(), samples);
}

LabelMap load_label(const std::filesystem::path& path, int num_classes) {
  RawImage image = read_png(path);
  if (image.channels != 1 || image.bit_depth != 8) {
    throw IoError(path.string() +
                  ": label PNG must be single-channel 8-bit");
  }
  std::vector<std::uint8_t> data(image.samples.begin(), image.samples.end());
  try {
    return LabelMap(image.height, image.width, num_classes, std::move(data));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_label(const LabelMap& label, const std::filesystem::path& path) {
  write_png8(path, label.height(), label.width(), 1, label.data());
}

void save_gray_png(std::span<const double> values, Size size, double scale,
                   const std::filesystem::path& path) {
  std::vector<std::uint8_t> samples(values.size());
  const double inv = scale > 0.0 ? 1.0 / scale : 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    samples[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(values[i] * inv, 0.0, 1.0) * 255.0));
  }
  write_png8(path, size.height, size.width, 1, samples);
}

}  // namespace segprop
