#pragma once

// Shared image, mask and flow containers used by the whole pipeline.
// Pixel values are floating point in [0,1]; 8-bit file data is mapped
// to that range by the io module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace defence {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};
struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& msg) : Error(msg) {}
};
struct InputTooSmall : Error {
  explicit InputTooSmall(const std::string& msg) : Error(msg) {}
};
struct NonFiniteState : Error {
  explicit NonFiniteState(const std::string& msg) : Error(msg) {}
};
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& msg) : Error(msg) {}
};
struct AllHoles : Error {
  explicit AllHoles(const std::string& msg) : Error(msg) {}
};
struct InvalidSpec : Error {
  explicit InvalidSpec(const std::string& msg) : Error(msg) {}
};
struct EmptyGroundTruth : Error {
  explicit EmptyGroundTruth(const std::string& msg) : Error(msg) {}
};
struct EmptyRegion : Error {
  explicit EmptyRegion(const std::string& msg) : Error(msg) {}
};
struct NeighborWindowEmpty : Error {
  explicit NeighborWindowEmpty(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Containers

/// Single-channel grid of doubles, row-major. The workhorse for luminance
/// images, soft masks and flow components.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0)
      throw InvalidSpec("Grid dimensions must be positive");
  }
  Grid(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0)
      throw InvalidSpec("Grid dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height)
      throw DimensionMismatch("Grid data length does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_size(const Grid& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// H×W×3 RGB image, channels interleaved, values in [0,1].
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * 3, fill) {
    if (width <= 0 || height <= 0)
      throw InvalidSpec("Frame dimensions must be positive");
  }
  Frame(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0)
      throw InvalidSpec("Frame dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height * 3)
      throw DimensionMismatch("Frame data length does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::array<double, 3> pixel(int x, int y) const {
    return {at(x, y, 0), at(x, y, 1), at(x, y, 2)};
  }
  void set_pixel(int x, int y, const std::array<double, 3>& rgb) {
    for (int c = 0; c < 3; ++c) at(x, y, c) = rgb[c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_size(const Frame& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  void clamp01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// H×W boolean grid, true = fence pixel.
class FenceMask {
 public:
  FenceMask() = default;
  FenceMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    if (width <= 0 || height <= 0)
      throw InvalidSpec("FenceMask dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool get(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  bool same_size(const FenceMask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }
  bool operator==(const FenceMask& o) const {
    return width_ == o.width_ && height_ == o.height_ && bits_ == o.bits_;
  }

  std::size_t count_true() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<unsigned char> bits_;
};

/// H×W per-pixel scores in [0,1]; a Grid with the range contract.
using SoftMask = Grid;

/// Dense displacement field in pixels.
struct FlowField {
  Grid u;
  Grid v;

  FlowField() = default;
  FlowField(int width, int height) : u(width, height), v(width, height) {}

  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

/// Translation in pixels between a registered frame pair.
struct Translation {
  double dx = 0.0;
  double dy = 0.0;
};

// ---------------------------------------------------------------------------
// Sampling and arithmetic

struct BilinearSample {
  std::array<double, 3> rgb{0.0, 0.0, 0.0};
  bool valid = false;
};

/// Bilinear interpolation inside [0,width-1]x[0,height-1]; out-of-bounds
/// coordinates yield zeros with valid=false rather than clamping.
inline BilinearSample sample_bilinear(const Frame& frame, double x, double y) {
  BilinearSample s;
  const int w = frame.width(), h = frame.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0)) return s;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 == w - 1) x0 = w - 2 < 0 ? 0 : w - 2;
  if (y0 == h - 1) y0 = h - 2 < 0 ? 0 : h - 2;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  for (int c = 0; c < 3; ++c) {
    const double top = frame.at(x0, y0, c) * (1.0 - fx) + frame.at(x1, y0, c) * fx;
    const double bot = frame.at(x0, y1, c) * (1.0 - fx) + frame.at(x1, y1, c) * fx;
    s.rgb[c] = top * (1.0 - fy) + bot * fy;
  }
  s.valid = true;
  return s;
}

/// Same contract for single-channel grids; returns {value, valid}.
inline std::pair<double, bool> sample_bilinear(const Grid& g, double x, double y) {
  const int w = g.width(), h = g.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0)) return {0.0, false};
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 == w - 1) x0 = w - 2 < 0 ? 0 : w - 2;
  if (y0 == h - 1) y0 = h - 2 < 0 ? 0 : h - 2;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = g.at(x0, y0) * (1.0 - fx) + g.at(x1, y0) * fx;
  const double bot = g.at(x0, y1) * (1.0 - fx) + g.at(x1, y1) * fx;
  return {top * (1.0 - fy) + bot * fy, true};
}

/// ITU-R 601 luminance.
inline Grid to_grayscale(const Frame& frame) {
  Grid g(frame.width(), frame.height());
  const auto& d = frame.data();
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = 0.299 * d[i * 3] + 0.587 * d[i * 3 + 1] + 0.114 * d[i * 3 + 2];
  return g;
}

}  // namespace defence
