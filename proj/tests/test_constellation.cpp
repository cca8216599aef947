#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "tmrange/constellation.hpp"
#include "tmrange/error.hpp"

using namespace tmrange;

namespace {

const ConstellationId kAll[] = {ConstellationId::Qpsk, ConstellationId::Psk8, ConstellationId::Apsk16,
                                ConstellationId::Apsk32, ConstellationId::Apsk64};

}  // namespace

TEST_CASE("qpsk points sit at (+-1 +-j)/sqrt2 with label 0 at (1+j)/sqrt2") {
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  REQUIRE(c.size() == 4);
  CHECK(c.bits_per_symbol == 2);
  const double r = 1.0 / std::numbers::sqrt2;
  CHECK(std::abs(c.points[0] - cd(r, r)) < 1e-15);
  for (const cd& p : c.points) {
    CHECK(std::abs(std::abs(p.real()) - r) < 1e-15);
    CHECK(std::abs(std::abs(p.imag()) - r) < 1e-15);
  }
}

TEST_CASE("8psk points are the eighth roots of unity") {
  const Constellation c = build_constellation(ConstellationId::Psk8);
  REQUIRE(c.size() == 8);
  std::set<int> seen;
  for (const cd& p : c.points) {
    CHECK(std::abs(std::abs(p) - 1.0) < 1e-12);
    const double k = std::arg(p) / (2.0 * std::numbers::pi / 8.0);
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    seen.insert(static_cast<int>(std::lround(k) + 8) % 8);
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("16apsk has a 4 + 12 ring layout with unit mean power") {
  const Constellation c = build_constellation(ConstellationId::Apsk16);
  REQUIRE(c.size() == 16);
  int inner = 0;
  int outer = 0;
  double sum = 0.0;
  for (const cd& p : c.points) {
    sum += std::norm(p);
    if (std::abs(std::abs(p) - c.ring_radii[0]) < 1e-9) ++inner;
    if (std::abs(std::abs(p) - c.ring_radii[1]) < 1e-9) ++outer;
  }
  CHECK(inner == 4);
  CHECK(outer == 12);
  CHECK(std::abs(sum / 16.0 - 1.0) < 1e-12);
  CHECK(c.ring_radii[1] / c.ring_radii[0] == doctest::Approx(3.09).epsilon(1e-9));
}

TEST_CASE("every alphabet is unit power, distinct and of size 2^bits") {
  for (auto id : kAll) {
    const Constellation c = build_constellation(id);
    CAPTURE(to_string(id));
    CHECK(c.size() == (std::size_t{1} << c.bits_per_symbol));
    CHECK(std::abs(mean_power(c) - 1.0) < 1e-12);
    CHECK(min_distance(c) > 0.0);
    int ring_total = 0;
    for (int n : c.ring_sizes) ring_total += n;
    CHECK(ring_total == static_cast<int>(c.size()));
  }
}

TEST_CASE("psk labels are gray: neighbours on the circle differ in one bit") {
  for (auto id : {ConstellationId::Qpsk, ConstellationId::Psk8}) {
    const Constellation c = build_constellation(id);
    const auto m = c.size();
    std::vector<std::uint32_t> by_angle(m);
    for (std::uint32_t l = 0; l < m; ++l) by_angle[l] = l;
    std::sort(by_angle.begin(), by_angle.end(),
              [&](auto a, auto b) { return std::arg(c.points[a]) < std::arg(c.points[b]); });
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::popcount(by_angle[i] ^ by_angle[(i + 1) % m]) == 1);
    }
  }
}

TEST_CASE("decide returns the nearest point") {
  const Constellation q = build_constellation(ConstellationId::Qpsk);
  CHECK(decide(q, cd(0.9, 0.9)).index == 0);
  const Decision d = decide(q, q.points[2]);
  CHECK(d.index == 2);
  CHECK(d.bits == std::vector<std::uint8_t>{1, 0});

  for (auto id : kAll) {
    const Constellation c = build_constellation(id);
    for (std::uint32_t i = 0; i < c.size(); ++i) {
      CHECK(decide_index(c, c.points[i]) == i);
      CHECK(decide_index(c, c.points[i] + cd(1e-6, -1e-6)) == i);
    }
  }
}

TEST_CASE("decide breaks ties toward the lowest index") {
  const Constellation q = build_constellation(ConstellationId::Qpsk);
  // The origin is equidistant from all four points.
  CHECK(decide_index(q, cd(0.0, 0.0)) == 0);
  const Constellation two = make_custom_constellation({cd(1, 0), cd(-1, 0)});
  CHECK(decide_index(two, cd(0.0, 5.0)) == 0);
}

TEST_CASE("decide rejects non-finite input") {
  const Constellation q = build_constellation(ConstellationId::Qpsk);
  CHECK_THROWS_AS(decide(q, cd(std::nan(""), 0.0)), Error);
  CHECK_THROWS_AS(decide(q, cd(0.0, INFINITY)), Error);
}

TEST_CASE("unknown constellation names are rejected") {
  CHECK(parse_constellation_id("16apsk") == ConstellationId::Apsk16);
  CHECK_THROWS_WITH_AS(parse_constellation_id("256qam"), doctest::Contains("unsupported constellation"),
                       Error);
}

TEST_CASE("map_bits follows the label table and checks lengths") {
  const Constellation q = build_constellation(ConstellationId::Qpsk);
  const std::vector<std::uint8_t> zero{0, 0};
  CHECK(map_bits(q, zero).front() == q.points[0]);
  const std::vector<std::uint8_t> eight{0, 1, 1, 1, 1, 0, 0, 0};
  const auto syms = map_bits(q, eight);
  REQUIRE(syms.size() == 4);
  CHECK(syms[1] == q.points[3]);
  CHECK(syms[2] == q.points[2]);

  const Constellation a64 = build_constellation(ConstellationId::Apsk64);
  CHECK(map_bits(a64, std::vector<std::uint8_t>(60, 1)).size() == 10);
  CHECK_THROWS_AS(map_bits(a64, std::vector<std::uint8_t>(59, 0)), Error);
}

TEST_CASE("noiseless map then decide reproduces random bits") {
  std::mt19937_64 eng(7);
  for (auto id : kAll) {
    const Constellation c = build_constellation(id);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(c.bits_per_symbol) * 500);
    for (auto& b : bits) b = static_cast<std::uint8_t>(eng() & 1u);
    std::vector<std::uint8_t> back;
    for (const cd& s : map_bits(c, bits)) {
      const auto d = decide(c, s);
      back.insert(back.end(), d.bits.begin(), d.bits.end());
    }
    CHECK(back == bits);
  }
}

TEST_CASE("custom alphabets are normalized and must have power-of-two size") {
  const Constellation c = make_custom_constellation({cd(2, 0), cd(-2, 0)});
  CHECK(std::abs(mean_power(c) - 1.0) < 1e-12);
  CHECK(c.bits_per_symbol == 1);
  const Constellation one = make_custom_constellation({cd(3, 4)});
  CHECK(one.bits_per_symbol == 0);
  CHECK(std::abs(std::abs(one.points[0]) - 1.0) < 1e-12);
  CHECK_THROWS_AS(make_custom_constellation({cd(1, 0), cd(0, 1), cd(-1, 0)}), Error);
}
