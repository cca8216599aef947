#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tmrange {

using cd = std::complex<double>;

enum class ConstellationId { Qpsk, Psk8, Apsk16, Apsk32, Apsk64, Custom };

ConstellationId parse_constellation_id(std::string_view name);
std::string to_string(ConstellationId id);

/// Unit mean power symbol alphabet. `points[label]` is the point carrying
/// the `bits_per_symbol`-bit label (MSB first on the wire).
struct Constellation {
  ConstellationId id = ConstellationId::Custom;
  std::vector<cd> points;
  int bits_per_symbol = 0;
  /// One entry per ring, normalized radii (PSK has a single ring).
  std::vector<double> ring_radii;
  std::vector<int> ring_sizes;

  std::size_t size() const { return points.size(); }
};

/// Builds one of the five supported alphabets.
///
/// PSK alphabets are Gray labelled around the circle. APSK alphabets are
/// labelled ring-major (inner ring first); within a ring the positions walk
/// the binary-reflected Gray sequence restricted to that ring's label range.
/// Ring ratios (outer/inner radius):
///   16APSK 4+12        3.09
///   32APSK 4+12+16     2.84, 5.25
///   64APSK 4+12+20+28  2.94, 4.87, 6.81
/// Ring n carries a phase offset of pi/n. Radii are renormalized to unit
/// mean power afterwards.
Constellation build_constellation(ConstellationId id);

/// Arbitrary alphabet for tests and constant-envelope references. The size
/// must be a power of two; points are rescaled to unit mean power.
Constellation make_custom_constellation(std::vector<cd> points);

/// Maps a bit sequence (one bit per byte, 0/1) to symbols.
std::vector<cd> map_bits(const Constellation& c, std::span<const std::uint8_t> bits);

/// Label sequence -> symbols.
std::vector<cd> map_labels(const Constellation& c, std::span<const std::uint32_t> labels);

/// Unpacks one label to `bits_per_symbol` bits, MSB first.
void label_to_bits(std::uint32_t label, int bits_per_symbol, std::vector<std::uint8_t>& out);

struct Decision {
  std::uint32_t index = 0;
  std::vector<std::uint8_t> bits;
};

/// Minimum-distance hard decision; ties go to the lowest index.
Decision decide(const Constellation& c, cd z);

/// Same as decide() without materializing the bits (hot path).
std::uint32_t decide_index(const Constellation& c, cd z);

double mean_power(const Constellation& c);
double min_distance(const Constellation& c);

}  // namespace tmrange
