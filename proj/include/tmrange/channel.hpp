#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "tmrange/waveform.hpp"

namespace tmrange {

/// One-sided noise density N0 in W/Hz (complex baseband: N0/2 per quadrature).
struct NoiseSpec {
  double n0 = 0.0;
  std::uint64_t seed = 0;
};

/// SplitMix64 finalizer; used to derive independent per-trial stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

/// Circularly-symmetric complex Gaussian noise with per-sample variance
/// N0 * sample_rate, i.e. a flat PSD of N0 across the simulated band.
class AwgnSource {
 public:
  AwgnSource(double n0, double sample_rate, std::uint64_t seed);

  void add_to(std::span<cd> samples);
  double per_sample_variance() const { return 2.0 * sigma_ * sigma_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double sigma_ = 0.0;  // per quadrature
};

SampleStream add_awgn(const SampleStream& s, const NoiseSpec& spec);

/// N0 giving the requested P/(N0 B_L) in dB.
double n0_from_pn0bl(double pn0bl_db, double ranging_power, double loop_bandwidth);

/// N0 giving the requested Eb/N0 in dB for telemetry of power `signal_power`
/// (Eb = signal_power * T / bits_per_symbol).
double n0_from_ebn0(double ebn0_db, double symbol_period, int bits_per_symbol,
                    double signal_power = 1.0);

}  // namespace tmrange
