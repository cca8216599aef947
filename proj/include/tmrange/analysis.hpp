#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmrange/constellation.hpp"
#include "tmrange/pn_code.hpp"
#include "tmrange/waveform.hpp"

namespace tmrange {

/// Neumaier-compensated sum; keeps aggregates independent of trial order
/// to within rounding of the final result.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct JitterBoundInputs {
  double ranging_power = 0.0;  // P at the tracking loop input
  double n0 = 0.0;
  double loop_bandwidth = 0.0;
  double chip_period = 0.0;
  double sigma2_p = 0.0;
};

struct JitterBound {
  double bound_norm = 0.0;   // full upper bound / Tc^2
  double theory_norm = 0.0;  // thermal-noise term alone / Tc^2
};

/// sigma_tau^2 <= B_L Tc^2 (N0 / (8P) + sigma2_P Tc / 8), normalized by Tc^2.
JitterBound jitter_bound(const JitterBoundInputs& in);

/// Useful ranging power at the tracking loop input, E[(2 J1(m) s(t))^2],
/// by direct time average of the unit-peak chip waveform s(t) of `code`
/// (Jacobi-Anger: Im exp(j m s) ~ 2 J1(m) s).
double ranging_power(double m_rg, const PnCode& code);

/// Mid-phase detector slope per unit chip error, 2 sqrt(2P).
double detector_gain(double ranging_power);

struct Sigma2pOptions {
  double symbol_rate = 4.2e6;
  double sample_rate = 25.2e6;
  int span = 16;
  PulseShape shape = PulseShape::Srrc;
};

/// Monte Carlo Var(|x_tm|^2) of a synthesized stream with one filter span
/// trimmed from both ends.
double sigma2_p(const Constellation& c, double rolloff, std::int64_t n_symbols, std::uint64_t seed,
                const Sigma2pOptions& opt = {});

struct Psd {
  std::vector<double> freq;   // Hz, ascending, DC included
  std::vector<double> power;  // power per bin (sums to mean |x|^2)
};

/// Welch estimate with a Hann window; segment length a power of two.
Psd welch_psd(const SampleStream& s, std::size_t segment = 16384, double overlap = 0.5);

/// Smallest band [-B/2, B/2] holding `fraction` of the power, linearly
/// interpolated between bins. `symbol_rate` (if > 0) enforces a minimum of
/// 100 symbols of data.
double occupied_bandwidth(const SampleStream& s, double fraction = 0.99, double symbol_rate = 0.0,
                          std::size_t segment = 16384);

/// Mean of ((tau_hat - tau) / Tc)^2 with the difference wrapped to one chip.
double jitter_estimate(std::span<const double> trajectory, double tau_true, double chip_period);

/// Variance of the trajectory about its own (circular) mean, / Tc^2.
double jitter_about_mean(std::span<const double> trajectory, double chip_period);

/// Wraps x into [-0.5, 0.5).
double wrap_chip(double x);

double q_function(double x);

/// AWGN bit error reference in absence of ranging:
///   QPSK   Q(sqrt(2 Eb/N0)) (exact, Gray)
///   8PSK   exact, integrating the received-phase density over each
///          decision sector and weighting by label Hamming distance
///   APSK   nearest-neighbour union bound, sum over Gabriel-graph neighbours
///          of d_H(i, j) Q(|p_i - p_j| / sqrt(2 N0)) / (M log2 M), capped at 0.5
double ber_theory(const Constellation& c, double ebn0_db);

/// Metrics for one sweep point (aggregated over trials) plus the echo of
/// the configuration that produced them.
struct RunReport {
  double snr_db = 0.0;
  std::string axis;  // "pn0bl" or "ebn0"
  double jitter_var_norm = 0.0;
  double jitter_ci = 0.0;
  double jitter_bound_norm = 0.0;
  double jitter_theory_norm = 0.0;
  double ber = 0.0;
  double ber_ci = 0.0;
  double ber_theory = 0.0;
  double obw_hz = 0.0;
  std::int64_t n_bits = 0;
  std::int64_t n_chips = 0;

  // Secondary measurements and the operating point in both SNR units.
  double jitter_mean_norm = 0.0;  // variance about the trajectory mean
  double pn0bl_db = 0.0;
  double ebn0_db = 0.0;
  double n0 = 0.0;
  double ranging_power = 0.0;
  double sigma2_p = 0.0;

  // Config echo.
  std::string constellation;
  double rolloff = 0.0;
  double symbol_rate = 0.0;
  double chip_rate = 0.0;
  double sample_rate = 0.0;
  double m_rg = 0.0;
  std::string code;
  double loop_bandwidth = 0.0;
  std::string loop_order;
  double damping = 0.0;
  std::string mode;
  std::string tau_true;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

}  // namespace tmrange
