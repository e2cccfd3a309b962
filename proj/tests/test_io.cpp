#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "defence/io.hpp"
#include "test_util.hpp"

using namespace defence;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("defence_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("frame save/load round-trip stays within 8-bit quantization") {
  TempDir dir;
  const Frame f = testutil::frame_from_grid(testutil::random_grid(17, 13, 2));
  save_frame(dir.path / "f.png", f);
  const Frame g = load_frame(dir.path / "f.png");
  REQUIRE(g.same_size(f));
  for (std::size_t i = 0; i < f.data().size(); ++i)
    CHECK(std::abs(f.data()[i] - g.data()[i]) <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("binary mask round-trip is exact") {
  TempDir dir;
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> d(0, 1);
  FenceMask m(23, 11);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, d(rng));
  save_mask(dir.path / "m.png", m);
  CHECK(load_mask(dir.path / "m.png") == m);
}

TEST_CASE("soft mask round-trip stays within quantization") {
  TempDir dir;
  const SoftMask m = testutil::random_grid(9, 9, 6);
  save_soft_mask(dir.path / "s.png", m);
  const SoftMask r = load_soft_mask(dir.path / "s.png");
  for (std::size_t i = 0; i < m.size(); ++i)
    CHECK(std::abs(m[i] - r[i]) <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("load_sequence returns frames in order and enforces contiguity") {
  TempDir dir;
  const Frame f(6, 6, 0.5);
  for (int i = 0; i < 3; ++i)
    save_frame(dir.path / detail::indexed_name("frame_", i), f);
  CHECK(load_sequence(dir.path).size() == 3);

  fs::remove(dir.path / "frame_00001.png");
  CHECK_THROWS_AS(load_sequence(dir.path), NonContiguousIndices);

  TempDir empty;
  CHECK_THROWS_AS(load_sequence(empty.path), MissingFrames);
}

TEST_CASE("flow round-trip is bit-exact") {
  TempDir dir;
  FlowField flow(2, 2);
  flow.u.at(0, 0) = 1.25;
  flow.u.at(1, 0) = -3.5;
  flow.v.at(0, 1) = 0.0078125;
  flow.v.at(1, 1) = -202.0;
  write_flow(dir.path / "f.flo", flow);
  const FlowField back = read_flow(dir.path / "f.flo");
  CHECK(back.u.data() == flow.u.data());
  CHECK(back.v.data() == flow.v.data());
}

TEST_CASE("flow file error paths") {
  TempDir dir;
  {
    std::ofstream os(dir.path / "bad.flo", std::ios::binary);
    const float zero = 0.0f;
    os.write(reinterpret_cast<const char*>(&zero), 4);
    const std::int32_t wh[2] = {2, 2};
    os.write(reinterpret_cast<const char*>(wh), 8);
  }
  CHECK_THROWS_AS(read_flow(dir.path / "bad.flo"), BadMagic);

  {
    FlowField flow(4, 4);
    write_flow(dir.path / "trunc.flo", flow);
    fs::resize_file(dir.path / "trunc.flo", 20);
  }
  CHECK_THROWS_AS(read_flow(dir.path / "trunc.flo"), TruncatedFile);
}

TEST_CASE("config parsing: comments, whitespace, unknown keys") {
  Config cfg = Config::parse("# a comment\nwidth = 32\n  height=16 # trailing\n");
  CHECK(cfg.take_int("width", 0) == 32);
  CHECK(cfg.take_int("height", 0) == 16);
  CHECK_NOTHROW(cfg.finish());

  Config bad = Config::parse("witdh = 32\n");
  bad.take_int("width", 0);
  CHECK_THROWS_AS(bad.finish(), ConfigError);

  CHECK_THROWS_AS(Config::parse("no equals sign here\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("scene spec text round-trip") {
  SceneSpec spec;
  spec.width = 80;
  spec.height = 50;
  spec.frame_count = 7;
  spec.background = BackgroundKind::Checker;
  spec.background_motion = {1.5, -0.25};
  spec.fence.pattern = FencePattern::DiamondLattice;
  spec.fence.wire_width = 3;
  spec.fence.cell_size = 20;
  spec.fence.irregularity = 0.75;
  spec.rng_seed = 99;

  Config cfg = Config::parse(scene_spec_to_config(spec));
  const SceneSpec back = scene_spec_from_config(cfg);
  CHECK(back.width == spec.width);
  CHECK(back.height == spec.height);
  CHECK(back.frame_count == spec.frame_count);
  CHECK(back.background == spec.background);
  CHECK(back.background_motion.dx == spec.background_motion.dx);
  CHECK(back.fence.pattern == spec.fence.pattern);
  CHECK(back.fence.wire_width == spec.fence.wire_width);
  CHECK(back.fence.irregularity == spec.fence.irregularity);
  CHECK(back.rng_seed == spec.rng_seed);
}

TEST_CASE("scene spec config rejects invalid fences") {
  Config cfg = Config::parse("wire_width = 4\ncell_size = 8\n");
  CHECK_THROWS_AS(scene_spec_from_config(cfg), InvalidSpec);
}
