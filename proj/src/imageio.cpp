#include "shadowae/imageio.hpp"

#include <png.h>

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace shadowae::imageio {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw ImageError(std::string("cannot open ") + path.string() + ": " + std::strerror(errno));
  }
  return f;
}

enum class Format { Png, Pgm };

Format format_of(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return Format::Png;
  if (ext == ".pgm") return Format::Pgm;
  throw ImageError("unsupported image extension \"" + ext + "\" for " + path.string() +
                   " (expected .png or .pgm)");
}

// libpng reports errors with longjmp; the message is kept here and rethrown
// as an exception after the jump lands back in C++ code.
struct PngErrorSink {
  char message[256] = {};
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

// Reads the header and pixels. Returns false on failure with sink->message set.
// No objects with destructors live in this frame across setjmp.
bool read_png_raw(std::FILE* f, PngErrorSink* sink, int want_color, png_uint_32* w, png_uint_32* h,
                  int* depth, int* color, std::vector<std::uint8_t>* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, sink, png_error_fn, png_warning_fn);
  if (!png) {
    std::snprintf(sink->message, sizeof(sink->message), "out of memory");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  // volatile: assigned after setjmp and read after a longjmp.
  png_bytep* volatile rows = nullptr;
  if (!info || setjmp(png_jmpbuf(png))) {
    std::free(rows);
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  int interlace = 0;
  png_get_IHDR(png, info, w, h, depth, color, &interlace, nullptr, nullptr);
  if (*color != want_color || *depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;  // caller rejects based on depth/color
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(*w) * (want_color == PNG_COLOR_TYPE_RGB ? 3 : 1);
  out->resize(stride * *h);
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * *h));
  png_bytep* row_ptrs = rows;
  for (png_uint_32 y = 0; y < *h; ++y) row_ptrs[y] = out->data() + static_cast<std::size_t>(y) * stride;
  png_read_image(png, row_ptrs);
  png_read_end(png, nullptr);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_png_raw(std::FILE* f, PngErrorSink* sink, png_uint_32 w, png_uint_32 h, int color,
                   const std::uint8_t* pixels, std::size_t stride) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, sink, png_error_fn, png_warning_fn);
  if (!png) {
    std::snprintf(sink->message, sizeof(sink->message), "out of memory");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

template <typename Image>
Image read_png_as(const std::filesystem::path& path, int want_color) {
  auto f = open_file(path, "rb");
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageError(path.string() + ": not a PNG file");
  }
  std::rewind(f.get());
  PngErrorSink sink;
  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  Image img;
  if (!read_png_raw(f.get(), &sink, want_color, &w, &h, &depth, &color, &img.pixels)) {
    throw ImageError(path.string() + ": malformed PNG (" + sink.message + ")");
  }
  if (color != want_color) {
    throw ImageError(path.string() + ": expected 8-bit " +
                     (want_color == PNG_COLOR_TYPE_RGB ? "RGB" : "grayscale") + " PNG (color type " +
                     std::to_string(color) + ")");
  }
  if (depth != 8) {
    throw ImageError(path.string() + ": unsupported bit depth " + std::to_string(depth) +
                     " (expected 8)");
  }
  img.width = w;
  img.height = h;
  return img;
}

GrayImage read_png(const std::filesystem::path& path) { return read_png_as<GrayImage>(path, PNG_COLOR_TYPE_GRAY); }

// Skips whitespace and '#' comments between PGM header tokens.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(in.get()));
  return !tok.empty();
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  std::string magic, ws, hs, ms;
  if (!next_token(in, magic) || magic != "P5") {
    throw ImageError(path.string() + ": not a binary PGM (P5) file");
  }
  if (!next_token(in, ws) || !next_token(in, hs) || !next_token(in, ms)) {
    throw ImageError(path.string() + ": truncated PGM header");
  }
  GrayImage img;
  try {
    img.width = std::stoul(ws);
    img.height = std::stoul(hs);
    if (std::stoul(ms) != 255) {
      throw ImageError(path.string() + ": unsupported PGM maxval " + ms + " (expected 255)");
    }
  } catch (const std::logic_error&) {
    throw ImageError(path.string() + ": malformed PGM header");
  }
  in.get();  // single whitespace byte before the raster
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw ImageError(path.string() + ": truncated PGM raster");
  }
  return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw ImageError("write failed for " + path.string());
}

void check_plane(const Tensor<float>& t, const char* what) {
  const auto& s = t.shape();
  if (s.size() < 2) throw std::invalid_argument(std::string(what) + ": tensor must have rank >= 2");
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] != 1) {
      throw std::invalid_argument(std::string(what) + ": expected a single image plane, got " +
                                  shape_str(s));
    }
  }
}

}  // namespace

std::uint8_t quantize(float v) {
  if (!(v >= 0.0f && v <= 1.0f)) {
    throw std::invalid_argument("imageio: value " + std::to_string(v) + " outside [0, 1]");
  }
  // nearbyint honours the current rounding mode; FE_TONEAREST is ties-to-even.
  return static_cast<std::uint8_t>(std::nearbyint(255.0 * static_cast<double>(v)));
}

RgbImage read_rgb_png(const std::filesystem::path& path) { return read_png_as<RgbImage>(path, PNG_COLOR_TYPE_RGB); }

GrayImage read_gray(const std::filesystem::path& path) {
  return format_of(path) == Format::Png ? read_png(path) : read_pgm(path);
}

void write_gray(const GrayImage& img, const std::filesystem::path& path) {
  if (img.pixels.size() != img.width * img.height || img.width == 0 || img.height == 0) {
    throw std::invalid_argument("imageio: inconsistent image dimensions");
  }
  if (format_of(path) == Format::Pgm) return write_pgm(img, path);
  auto f = open_file(path, "wb");
  PngErrorSink sink;
  if (!write_png_raw(f.get(), &sink, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), PNG_COLOR_TYPE_GRAY, img.pixels.data(),
                     img.width)) {
    throw ImageError(path.string() + ": PNG write failed (" + sink.message + ")");
  }
}

void write_rgb_png(const RgbImage& img, const std::filesystem::path& path) {
  if (img.pixels.size() != 3 * img.width * img.height || img.width == 0 || img.height == 0) {
    throw std::invalid_argument("imageio: inconsistent RGB image dimensions");
  }
  auto f = open_file(path, "wb");
  PngErrorSink sink;
  if (!write_png_raw(f.get(), &sink, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), PNG_COLOR_TYPE_RGB, img.pixels.data(),
                     3 * img.width)) {
    throw ImageError(path.string() + ": PNG write failed (" + sink.message + ")");
  }
}

Tensor<float> to_tensor(const GrayImage& img) {
  Tensor<float> t(Shape{1, 1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return t;
}

GrayImage from_tensor(const Tensor<float>& t) {
  check_plane(t, "imageio::save");
  GrayImage img;
  img.height = t.shape()[t.rank() - 2];
  img.width = t.shape()[t.rank() - 1];
  img.pixels.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) img.pixels[i] = quantize(t[i]);
  return img;
}

Tensor<float> load(const std::filesystem::path& path) { return to_tensor(read_gray(path)); }

void save(const Tensor<float>& t, const std::filesystem::path& path) {
  write_gray(from_tensor(t), path);
}

GrayImage from_mask(const BinaryMask& m) {
  GrayImage img{m.width, m.height, std::vector<std::uint8_t>(m.pixels.size())};
  for (std::size_t i = 0; i < m.pixels.size(); ++i) img.pixels[i] = m.pixels[i] ? 255 : 0;
  return img;
}

BinaryMask to_mask(const GrayImage& img) {
  BinaryMask m(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.pixels[i] = img.pixels[i] != 0;
  return m;
}

}  // namespace shadowae::imageio
