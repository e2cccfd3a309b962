#pragma once

// File interchange: 8-bit PNG frames and masks, middlebury-style binary
// flow files, and flat key=value config text. All binary formats are
// explicitly little-endian.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "defence/core.hpp"
#include "defence/synth.hpp"

namespace defence {

struct MissingFrames : Error {
  explicit MissingFrames(const std::string& msg) : Error(msg) {}
};
struct NonContiguousIndices : Error {
  explicit NonContiguousIndices(const std::string& msg) : Error(msg) {}
};
struct DecodeError : Error {
  explicit DecodeError(const std::string& msg) : Error(msg) {}
};
struct BadMagic : Error {
  explicit BadMagic(const std::string& msg) : Error(msg) {}
};
struct TruncatedFile : Error {
  explicit TruncatedFile(const std::string& msg) : Error(msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

namespace detail {

struct PngImage {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> bytes;  // row-major, interleaved
};

inline PngImage read_png(const std::filesystem::path& path, bool want_rgb) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw DecodeError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DecodeError("libpng init failed");
  }
  PngImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DecodeError("PNG decode failed: " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_expand(png);
  if (want_rgb)
    png_set_gray_to_rgb(png);
  else if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = want_rgb ? 3 : 1;
  const std::size_t stride = png_get_rowbytes(png, info);
  img.bytes.resize(stride * img.height);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

inline void write_png(const std::filesystem::path& path, int width, int height,
                      int channels, const std::vector<std::uint8_t>& bytes) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("libpng init failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("PNG encode failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + stride * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

/// round(v*255) with ties to even, clamped to [0,255].
inline std::uint8_t quantize(double v) {
  const double r = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(r);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Frames and masks

inline Frame load_frame(const std::filesystem::path& path) {
  const auto img = detail::read_png(path, /*want_rgb=*/true);
  Frame f(img.width, img.height);
  for (std::size_t i = 0; i < f.data().size(); ++i)
    f.data()[i] = img.bytes[i] / 255.0;
  return f;
}

inline void save_frame(const std::filesystem::path& path, const Frame& frame) {
  std::vector<std::uint8_t> bytes(frame.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = detail::quantize(frame.data()[i]);
  detail::write_png(path, frame.width(), frame.height(), 3, bytes);
}

inline SoftMask load_soft_mask(const std::filesystem::path& path) {
  const auto img = detail::read_png(path, /*want_rgb=*/false);
  SoftMask m(img.width, img.height);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = img.bytes[i] / 255.0;
  return m;
}

inline FenceMask load_mask(const std::filesystem::path& path) {
  const auto img = detail::read_png(path, /*want_rgb=*/false);
  FenceMask m(img.width, img.height);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, img.bytes[i] >= 128);
  return m;
}

inline void save_mask(const std::filesystem::path& path, const FenceMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.get(i) ? 255 : 0;
  detail::write_png(path, mask.width(), mask.height(), 1, bytes);
}

inline void save_soft_mask(const std::filesystem::path& path, const SoftMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = detail::quantize(mask[i]);
  detail::write_png(path, mask.width(), mask.height(), 1, bytes);
}

// ---------------------------------------------------------------------------
// Sequences: frame_%05d.png / mask_%05d.png, index-ordered, no gaps.

namespace detail {

inline std::vector<std::filesystem::path> sequence_paths(
    const std::filesystem::path& dir, const std::string& prefix) {
  if (!std::filesystem::is_directory(dir))
    throw MissingFrames("not a directory: " + dir.string());
  std::map<int, std::filesystem::path> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != prefix.size() + 9 || name.compare(0, prefix.size(), prefix) != 0 ||
        name.compare(name.size() - 4, 4, ".png") != 0)
      continue;
    const std::string digits = name.substr(prefix.size(), 5);
    if (!std::all_of(digits.begin(), digits.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
      continue;
    found[std::stoi(digits)] = entry.path();
  }
  if (found.empty())
    throw MissingFrames("no " + prefix + "NNNNN.png files in " + dir.string());
  int expected = 0;
  std::vector<std::filesystem::path> paths;
  for (const auto& [idx, path] : found) {
    if (idx != expected)
      throw NonContiguousIndices("gap in sequence at index " + std::to_string(expected) +
                                 " in " + dir.string());
    paths.push_back(path);
    ++expected;
  }
  return paths;
}

inline std::string indexed_name(const std::string& prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05d.png", prefix.c_str(), index);
  return buf;
}

}  // namespace detail

inline std::vector<Frame> load_sequence(const std::filesystem::path& dir) {
  std::vector<Frame> frames;
  for (const auto& p : detail::sequence_paths(dir, "frame_"))
    frames.push_back(load_frame(p));
  return frames;
}

inline std::vector<SoftMask> load_soft_mask_sequence(const std::filesystem::path& dir) {
  std::vector<SoftMask> masks;
  for (const auto& p : detail::sequence_paths(dir, "mask_"))
    masks.push_back(load_soft_mask(p));
  return masks;
}

inline std::vector<FenceMask> load_mask_sequence(const std::filesystem::path& dir) {
  std::vector<FenceMask> masks;
  for (const auto& p : detail::sequence_paths(dir, "mask_"))
    masks.push_back(load_mask(p));
  return masks;
}

// ---------------------------------------------------------------------------
// Flow files

inline constexpr float kFlowMagic = 202021.25f;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  // Serialize explicitly little-endian, byte by byte.
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::istream& is, T& value) {
  std::uint8_t bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace detail

inline void write_flow(const std::filesystem::path& path, const FlowField& flow) {
  for (std::size_t i = 0; i < flow.u.size(); ++i)
    if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i]))
      throw NonFiniteState("write_flow: non-finite flow value");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  detail::write_le(os, kFlowMagic);
  detail::write_le(os, static_cast<std::int32_t>(flow.width()));
  detail::write_le(os, static_cast<std::int32_t>(flow.height()));
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      detail::write_le(os, static_cast<float>(flow.u.at(x, y)));
      detail::write_le(os, static_cast<float>(flow.v.at(x, y)));
    }
}

inline FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  float magic = 0.0f;
  if (!detail::read_le(is, magic)) throw TruncatedFile("flow file too short: " + path.string());
  if (magic != kFlowMagic) throw BadMagic("bad flow magic in " + path.string());
  std::int32_t w = 0, h = 0;
  if (!detail::read_le(is, w) || !detail::read_le(is, h))
    throw TruncatedFile("flow header truncated: " + path.string());
  if (w <= 0 || h <= 0) throw DecodeError("bad flow dimensions in " + path.string());
  FlowField flow(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float u = 0.0f, v = 0.0f;
      if (!detail::read_le(is, u) || !detail::read_le(is, v))
        throw TruncatedFile("flow payload truncated: " + path.string());
      flow.u.at(x, y) = u;
      flow.v.at(x, y) = v;
    }
  return flow;
}

// ---------------------------------------------------------------------------
// Flat key=value config

/// Parsed key=value file. Consumers take() each key they understand and
/// call finish(), which rejects unknown keys.
class Config {
 public:
  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (cfg.values_.count(key))
        throw ConfigError("duplicate key: " + key);
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    return parse(buf.str());
  }

  std::string take_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  double take_double(const std::string& key, double fallback) {
    const std::string s = take_string(key, "");
    if (s.empty()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw ConfigError("");
      return v;
    } catch (...) {
      throw ConfigError("key " + key + ": not a number: " + s);
    }
  }
  long take_int(const std::string& key, long fallback) {
    const std::string s = take_string(key, "");
    if (s.empty()) return fallback;
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw ConfigError("");
      return v;
    } catch (...) {
      throw ConfigError("key " + key + ": not an integer: " + s);
    }
  }

  /// Throws on any key no take_* call claimed; typos fail loudly.
  void finish() const {
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key)) throw ConfigError("unknown key: " + key);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

// ---------------------------------------------------------------------------
// SceneSpec text form

inline SceneSpec scene_spec_from_config(Config& cfg) {
  SceneSpec spec;
  spec.width = static_cast<int>(cfg.take_int("width", spec.width));
  spec.height = static_cast<int>(cfg.take_int("height", spec.height));
  spec.frame_count = static_cast<int>(cfg.take_int("frame_count", spec.frame_count));
  const std::string bg = cfg.take_string("background", "smooth_noise");
  if (bg == "smooth_noise") spec.background = BackgroundKind::SmoothNoise;
  else if (bg == "gradient") spec.background = BackgroundKind::Gradient;
  else if (bg == "checker") spec.background = BackgroundKind::Checker;
  else throw ConfigError("background: unknown kind: " + bg);
  spec.background_motion.dx = cfg.take_double("background_dx", spec.background_motion.dx);
  spec.background_motion.dy = cfg.take_double("background_dy", spec.background_motion.dy);
  spec.fence_motion.dx = cfg.take_double("fence_dx", spec.fence_motion.dx);
  spec.fence_motion.dy = cfg.take_double("fence_dy", spec.fence_motion.dy);
  const std::string pattern = cfg.take_string("fence_pattern", "grid");
  if (pattern == "grid") spec.fence.pattern = FencePattern::RectangularGrid;
  else if (pattern == "diamond") spec.fence.pattern = FencePattern::DiamondLattice;
  else throw ConfigError("fence_pattern: unknown pattern: " + pattern);
  spec.fence.wire_width = static_cast<int>(cfg.take_int("wire_width", spec.fence.wire_width));
  spec.fence.cell_size = static_cast<int>(cfg.take_int("cell_size", spec.fence.cell_size));
  spec.fence.rotation_deg = cfg.take_double("rotation_deg", spec.fence.rotation_deg);
  spec.fence.color[0] = cfg.take_double("fence_r", spec.fence.color[0]);
  spec.fence.color[1] = cfg.take_double("fence_g", spec.fence.color[1]);
  spec.fence.color[2] = cfg.take_double("fence_b", spec.fence.color[2]);
  spec.fence.irregularity = cfg.take_double("irregularity", spec.fence.irregularity);
  spec.rng_seed = static_cast<std::uint32_t>(cfg.take_int("rng_seed", spec.rng_seed));
  cfg.finish();
  spec.validate();
  return spec;
}

inline std::string scene_spec_to_config(const SceneSpec& spec) {
  std::ostringstream os;
  os << "width = " << spec.width << "\n";
  os << "height = " << spec.height << "\n";
  os << "frame_count = " << spec.frame_count << "\n";
  os << "background = "
     << (spec.background == BackgroundKind::SmoothNoise ? "smooth_noise"
         : spec.background == BackgroundKind::Gradient ? "gradient" : "checker")
     << "\n";
  os << "background_dx = " << spec.background_motion.dx << "\n";
  os << "background_dy = " << spec.background_motion.dy << "\n";
  os << "fence_dx = " << spec.fence_motion.dx << "\n";
  os << "fence_dy = " << spec.fence_motion.dy << "\n";
  os << "fence_pattern = "
     << (spec.fence.pattern == FencePattern::RectangularGrid ? "grid" : "diamond") << "\n";
  os << "wire_width = " << spec.fence.wire_width << "\n";
  os << "cell_size = " << spec.fence.cell_size << "\n";
  os << "rotation_deg = " << spec.fence.rotation_deg << "\n";
  os << "fence_r = " << spec.fence.color[0] << "\n";
  os << "fence_g = " << spec.fence.color[1] << "\n";
  os << "fence_b = " << spec.fence.color[2] << "\n";
  os << "irregularity = " << spec.fence.irregularity << "\n";
  os << "rng_seed = " << spec.rng_seed << "\n";
  return os.str();
}

}  // namespace defence
