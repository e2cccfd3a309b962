#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "defence/registration.hpp"
#include "test_util.hpp"

using namespace defence;

TEST_CASE("phase_correlate of an image with itself is (0,0)") {
  const Grid g = testutil::smooth_texture(64, 64, 5);
  const Translation t = phase_correlate(g, g);
  CHECK(std::abs(t.dx) < 1e-6);
  CHECK(std::abs(t.dy) < 1e-6);
}

TEST_CASE("phase_correlate recovers integer circular shifts") {
  const Grid g = testutil::smooth_texture(64, 64, 11);
  for (auto [dx, dy] : {std::pair{3, 5}, {-7, 2}, {0, -9}, {15, -15}}) {
    const Grid moved = testutil::circshift(g, dx, dy);
    const Translation t = phase_correlate(g, moved);
    CHECK(std::lround(t.dx) == dx);
    CHECK(std::lround(t.dy) == dy);
    CHECK(std::abs(t.dx - dx) < 0.1);
    CHECK(std::abs(t.dy - dy) < 0.1);
  }
}

TEST_CASE("phase_correlate property: recovers all small shifts") {
  const Grid g = testutil::smooth_texture(64, 64, 23);
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> d(-16, 16);
  for (int trial = 0; trial < 40; ++trial) {
    const int dx = d(rng), dy = d(rng);
    const Translation t = phase_correlate(g, testutil::circshift(g, dx, dy));
    CHECK(std::lround(t.dx) == dx);
    CHECK(std::lround(t.dy) == dy);
  }
}

TEST_CASE("phase_correlate antisymmetry") {
  const Grid a = testutil::smooth_texture(64, 64, 31);
  const Grid b = testutil::circshift(a, 4, -6);
  const Translation ab = phase_correlate(a, b);
  const Translation ba = phase_correlate(b, a);
  CHECK(std::abs(ab.dx + ba.dx) < 0.1);
  CHECK(std::abs(ab.dy + ba.dy) < 0.1);
}

TEST_CASE("phase_correlate error paths") {
  const Grid g = testutil::smooth_texture(32, 32, 3);
  CHECK_THROWS_AS(phase_correlate(g, Grid(16, 16)), DimensionMismatch);
  CHECK_THROWS_AS(phase_correlate(Grid(32, 32, 0.5), g), DegenerateInput);
  CHECK_THROWS_AS(phase_correlate(g, Grid(32, 32, 0.1)), DegenerateInput);
  const Grid tiny = testutil::smooth_texture(4, 4, 3);
  CHECK_THROWS_AS(phase_correlate(tiny, tiny), InputTooSmall);
}

TEST_CASE("warp_by_translation identity and integer shift") {
  SoftMask m = testutil::random_grid(10, 8, 77);
  const SoftMask same = warp_by_translation(m, {0.0, 0.0});
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(same[i] == doctest::Approx(m[i]));

  const SoftMask shifted = warp_by_translation(m, {1.0, 0.0});
  for (int y = 0; y < 8; ++y) {
    CHECK(shifted.at(0, y) == 0.0);  // leftmost column has no source
    for (int x = 1; x < 10; ++x)
      CHECK(shifted.at(x, y) == doctest::Approx(m.at(x - 1, y)));
  }
}

TEST_CASE("warp_by_translation keeps a constant mask constant inside") {
  const SoftMask ones(12, 12, 1.0);
  const SoftMask w = warp_by_translation(ones, {0.5, 0.0});
  for (int y = 0; y < 12; ++y)
    for (int x = 1; x < 12; ++x) CHECK(w.at(x, y) == doctest::Approx(1.0));
}

TEST_CASE("warp round-trip with the inverse integer translation is exact") {
  const SoftMask m = testutil::random_grid(16, 16, 13);
  const SoftMask back = warp_by_translation(warp_by_translation(m, {3.0, -2.0}), {-3.0, 2.0});
  for (int y = 2; y < 14; ++y)
    for (int x = 3; x < 13; ++x)
      CHECK(std::abs(back.at(x, y) - m.at(x, y)) < 1e-6);
}
