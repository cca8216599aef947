#include "tmrange/channel.hpp"

#include <cmath>

#include "tmrange/error.hpp"

namespace tmrange {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(root) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

AwgnSource::AwgnSource(double n0, double sample_rate, std::uint64_t seed) : engine_(seed) {
  if (!(n0 >= 0.0) || !std::isfinite(n0)) throw Error("awgn: n0 must be finite and >= 0");
  if (!(sample_rate > 0.0)) throw Error("awgn: sample rate must be positive");
  sigma_ = std::sqrt(0.5 * n0 * sample_rate);
}

void AwgnSource::add_to(std::span<cd> samples) {
  if (sigma_ == 0.0) return;
  for (cd& s : samples) {
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    s += cd{sigma_ * re, sigma_ * im};
  }
}

SampleStream add_awgn(const SampleStream& s, const NoiseSpec& spec) {
  SampleStream out = s;
  AwgnSource src(spec.n0, s.sample_rate, spec.seed);
  src.add_to(out.samples);
  return out;
}

double n0_from_pn0bl(double pn0bl_db, double ranging_power, double loop_bandwidth) {
  if (!(ranging_power > 0.0) || !(loop_bandwidth > 0.0)) {
    throw Error("n0_from_pn0bl: power and loop bandwidth must be positive");
  }
  return ranging_power / (loop_bandwidth * std::pow(10.0, pn0bl_db / 10.0));
}

double n0_from_ebn0(double ebn0_db, double symbol_period, int bits_per_symbol,
                    double signal_power) {
  if (bits_per_symbol <= 0) throw Error("n0_from_ebn0: constellation carries no bits");
  const double eb = signal_power * symbol_period / bits_per_symbol;
  return eb / std::pow(10.0, ebn0_db / 10.0);
}

}  // namespace tmrange
