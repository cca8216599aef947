#include "tmrange/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

struct RingLayout {
  std::vector<int> sizes;
  std::vector<double> ratios;  // radius relative to the inner ring, inner first
};

RingLayout layout_for(ConstellationId id) {
  switch (id) {
    case ConstellationId::Qpsk: return {{4}, {1.0}};
    case ConstellationId::Psk8: return {{8}, {1.0}};
    case ConstellationId::Apsk16: return {{4, 12}, {1.0, 3.09}};
    case ConstellationId::Apsk32: return {{4, 12, 16}, {1.0, 2.84, 5.25}};
    case ConstellationId::Apsk64: return {{4, 12, 20, 28}, {1.0, 2.94, 4.87, 6.81}};
    case ConstellationId::Custom: break;
  }
  throw Error("unsupported constellation");
}

std::uint32_t gray(std::uint32_t k) { return k ^ (k >> 1); }

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

int log2_exact(std::size_t n) {
  int b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

}  // namespace

ConstellationId parse_constellation_id(std::string_view name) {
  if (name == "qpsk") return ConstellationId::Qpsk;
  if (name == "8psk") return ConstellationId::Psk8;
  if (name == "16apsk") return ConstellationId::Apsk16;
  if (name == "32apsk") return ConstellationId::Apsk32;
  if (name == "64apsk") return ConstellationId::Apsk64;
  throw Error("unsupported constellation: '" + std::string(name) + "'");
}

std::string to_string(ConstellationId id) {
  switch (id) {
    case ConstellationId::Qpsk: return "qpsk";
    case ConstellationId::Psk8: return "8psk";
    case ConstellationId::Apsk16: return "16apsk";
    case ConstellationId::Apsk32: return "32apsk";
    case ConstellationId::Apsk64: return "64apsk";
    case ConstellationId::Custom: return "custom";
  }
  return "custom";
}

Constellation build_constellation(ConstellationId id) {
  const RingLayout layout = layout_for(id);
  std::size_t m = 0;
  for (int n : layout.sizes) m += static_cast<std::size_t>(n);
  const int bps = log2_exact(m);

  // Walk the Gray sequence once; each ring takes, in order, the labels that
  // fall inside its contiguous label range.
  std::vector<std::uint32_t> gray_order(m);
  for (std::uint32_t k = 0; k < m; ++k) gray_order[k] = gray(k);

  double power = 0.0;
  for (std::size_t r = 0; r < layout.sizes.size(); ++r) {
    power += layout.sizes[r] * layout.ratios[r] * layout.ratios[r];
  }
  const double scale = 1.0 / std::sqrt(power / static_cast<double>(m));

  Constellation c;
  c.id = id;
  c.bits_per_symbol = bps;
  c.points.assign(m, cd{});
  c.ring_sizes = layout.sizes;

  // QPSK sits at (+-1 +-j)/sqrt(2); 8PSK starts on the real axis.
  std::uint32_t lo = 0;
  for (std::size_t r = 0; r < layout.sizes.size(); ++r) {
    const int n = layout.sizes[r];
    const std::uint32_t hi = lo + static_cast<std::uint32_t>(n);
    const double radius = layout.ratios[r] * scale;
    const double offset = (id == ConstellationId::Psk8) ? 0.0 : std::numbers::pi / n;
    c.ring_radii.push_back(radius);
    int pos = 0;
    for (std::uint32_t label : gray_order) {
      if (label < lo || label >= hi) continue;
      const double phase = offset + 2.0 * std::numbers::pi * pos / n;
      c.points[label] = std::polar(radius, phase);
      ++pos;
    }
    lo = hi;
  }
  return c;
}

Constellation make_custom_constellation(std::vector<cd> points) {
  if (!is_power_of_two(points.size())) {
    throw Error("custom constellation size must be a power of two");
  }
  double power = 0.0;
  for (const cd& p : points) power += std::norm(p);
  power /= static_cast<double>(points.size());
  if (!(power > 0.0) || !std::isfinite(power)) throw Error("custom constellation has no power");
  const double scale = 1.0 / std::sqrt(power);
  Constellation c;
  c.id = ConstellationId::Custom;
  c.bits_per_symbol = log2_exact(points.size());
  for (cd& p : points) p *= scale;
  c.points = std::move(points);
  return c;
}

std::vector<cd> map_bits(const Constellation& c, std::span<const std::uint8_t> bits) {
  const auto bps = static_cast<std::size_t>(c.bits_per_symbol);
  if (bps == 0) throw Error("constellation carries no bits");
  if (bits.size() % bps != 0) {
    throw Error("bit count " + std::to_string(bits.size()) + " is not a multiple of " +
                std::to_string(bps));
  }
  std::vector<cd> out;
  out.reserve(bits.size() / bps);
  for (std::size_t i = 0; i < bits.size(); i += bps) {
    std::uint32_t label = 0;
    for (std::size_t b = 0; b < bps; ++b) {
      if (bits[i + b] > 1) throw Error("bits must be 0 or 1");
      label = (label << 1) | bits[i + b];
    }
    out.push_back(c.points[label]);
  }
  return out;
}

std::vector<cd> map_labels(const Constellation& c, std::span<const std::uint32_t> labels) {
  std::vector<cd> out;
  out.reserve(labels.size());
  for (std::uint32_t l : labels) {
    if (l >= c.points.size()) throw Error("label out of range");
    out.push_back(c.points[l]);
  }
  return out;
}

void label_to_bits(std::uint32_t label, int bits_per_symbol, std::vector<std::uint8_t>& out) {
  for (int b = bits_per_symbol - 1; b >= 0; --b) {
    out.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
  }
}

std::uint32_t decide_index(const Constellation& c, cd z) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < c.points.size(); ++i) {
    const double d = std::norm(z - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Decision decide(const Constellation& c, cd z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw Error("decide: non-finite sample");
  }
  Decision d;
  d.index = decide_index(c, z);
  label_to_bits(d.index, c.bits_per_symbol, d.bits);
  return d;
}

double mean_power(const Constellation& c) {
  double s = 0.0;
  for (const cd& p : c.points) s += std::norm(p);
  return s / static_cast<double>(c.points.size());
}

double min_distance(const Constellation& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    for (std::size_t j = i + 1; j < c.points.size(); ++j) {
      best = std::min(best, std::abs(c.points[i] - c.points[j]));
    }
  }
  return best;
}

}  // namespace tmrange
