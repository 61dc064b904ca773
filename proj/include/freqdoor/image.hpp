#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "freqdoor/errors.hpp"
#include "freqdoor/tensor.hpp"

namespace freqdoor {

/// H x W x C intensity image in [0,1], stored channel-planar in double.
///
/// Construction does not enforce the value range so that metrics can be fed
/// shifted or unclamped data; pipeline entry points call validate().
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : t_(channels, height, width, fill) {
    require(height > 0 && width > 0 && channels > 0, "image dimensions must be positive");
  }
  explicit Image(Tensor<double> t) : t_(std::move(t)) {}

  int height() const { return t_.height(); }
  int width() const { return t_.width(); }
  int channels() const { return t_.channels(); }
  std::size_t size() const { return t_.size(); }
  bool empty() const { return t_.empty(); }

  double& at(int y, int x, int c) { return t_.at(c, y, x); }
  double at(int y, int x, int c) const { return t_.at(c, y, x); }
  double& operator[](std::size_t i) { return t_[i]; }
  double operator[](std::size_t i) const { return t_[i]; }
  double* plane(int c) { return t_.channel(c); }
  const double* plane(int c) const { return t_.channel(c); }

  const Tensor<double>& tensor() const { return t_; }
  Tensor<double>& tensor() { return t_; }

  template <class T>
  Tensor<T> as() const {
    return t_.template cast<T>();
  }

  template <class T>
  static Image from(const Tensor<T>& t) {
    return Image(t.template cast<double>());
  }

  bool same_shape(const Image& o) const { return t_.shape() == o.t_.shape(); }

  /// Dimensions, channel count, finiteness and [0,1] range.
  bool valid() const {
    if (height() < 8 || width() < 8 || (channels() != 1 && channels() != 3)) return false;
    for (double v : t_.vec())
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    return true;
  }

  void validate(const char* what = "image") const {
    if (!valid()) throw ParameterError(std::string(what) + ": invalid image (" + t_.shape().str() + ")");
  }

  void clamp01() {
    for (auto& v : t_.vec()) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Tensor<double> t_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b))
    throw ParameterError(std::string(op) + ": shape mismatch " + a.tensor().shape().str() + " vs " +
                         b.tensor().shape().str());
}

inline double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_abs_diff");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / double(a.size());
}

/// 8-bit code value for an intensity: round(v * 255) after clamping.
inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Rounds every pixel to the 8-bit grid (what a PNG round trip yields).
inline Image quantize8(const Image& img) {
  Image out = img;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(out[i]) / 255.0;
  return out;
}

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

inline void save_png(const Image& img, const std::filesystem::path& path) {
  require(img.channels() == 1 || img.channels() == 3, "save_png: 1 or 3 channels");
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  const int h = img.height(), w = img.width(), c = img.channels();
  std::vector<png_byte> rows(std::size_t(h) * w * c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) rows[(std::size_t(y) * w + x) * c + k] = to_byte(img.at(y, x, k));
  std::vector<png_bytep> ptrs(h);
  for (int y = 0; y < h; ++y) ptrs[y] = rows.data() + std::size_t(y) * w * c;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Loads 8-bit gray/RGB(A) PNG; alpha is dropped, palettes expanded.
inline Image load_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng read failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  const int c = int(png_get_channels(png, info));
  std::vector<png_byte> rows(std::size_t(h) * w * c);
  std::vector<png_bytep> ptrs(h);
  for (int y = 0; y < h; ++y) ptrs[y] = rows.data() + std::size_t(y) * w * c;
  png_read_image(png, ptrs.data());
  png_destroy_read_struct(&png, &info, nullptr);
  if (c != 1 && c != 3) throw IoError("unsupported channel count in " + path.string());
  Image img(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(y, x, k) = rows[(std::size_t(y) * w + x) * c + k] / 255.0;
  return img;
}

}  // namespace freqdoor
