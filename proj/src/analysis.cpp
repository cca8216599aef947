#include "tmrange/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::uint32_t random_label(std::mt19937_64& eng, int bits) {
  if (bits == 0) return 0;
  return static_cast<std::uint32_t>(eng() >> (64 - bits));
}

// Density of the received phase of a unit symbol in complex AWGN with
// symbol SNR g = Es/N0.
double phase_density(double theta, double g) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double sg = std::sqrt(g);
  return (std::exp(-g) + std::sqrt(kPi * g) * c * std::exp(-g * s * s) * (1.0 + std::erf(sg * c))) /
         (2.0 * kPi);
}

double sector_probability(double lo, double hi, double g) {
  const int n = 400;
  const double h = (hi - lo) / n;
  double acc = phase_density(lo, g) + phase_density(hi, g);
  for (int i = 1; i < n; ++i) acc += phase_density(lo + i * h, g) * ((i % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double psk_ber_exact(const Constellation& c, double es_n0) {
  const auto m = static_cast<int>(c.size());
  const double half = kPi / m;
  double errors = 0.0;
  for (int i = 0; i < m; ++i) {
    const double ai = std::arg(c.points[static_cast<std::size_t>(i)]);
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      double delta = std::arg(c.points[static_cast<std::size_t>(j)]) - ai;
      delta -= 2.0 * kPi * std::floor(delta / (2.0 * kPi) + 0.5);
      const int dh = std::popcount(static_cast<unsigned>(i ^ j));
      errors += dh * sector_probability(delta - half, delta + half, es_n0);
    }
  }
  return errors / (m * c.bits_per_symbol);
}

double union_bound_ber(const Constellation& c, double n0) {
  const std::size_t m = c.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const cd mid = 0.5 * (c.points[i] + c.points[j]);
      const double r2 = std::norm(c.points[i] - c.points[j]) * 0.25;
      bool gabriel = true;
      for (std::size_t k = 0; k < m && gabriel; ++k) {
        if (k == i || k == j) continue;
        if (std::norm(c.points[k] - mid) < r2 * (1.0 - 1e-12)) gabriel = false;
      }
      if (!gabriel) continue;
      const int dh = std::popcount(static_cast<unsigned>(i ^ j));
      acc += dh * q_function(std::abs(c.points[i] - c.points[j]) / std::sqrt(2.0 * n0));
    }
  }
  return std::min(0.5, acc / (static_cast<double>(m) * c.bits_per_symbol));
}

}  // namespace

JitterBound jitter_bound(const JitterBoundInputs& in) {
  if (!(in.ranging_power > 0.0) || !(in.loop_bandwidth > 0.0) || !(in.chip_period > 0.0) ||
      !(in.n0 >= 0.0) || !(in.sigma2_p >= 0.0)) {
    throw Error("jitter_bound: inputs must be positive (n0, sigma2_p non-negative)");
  }
  JitterBound b;
  b.theory_norm = in.loop_bandwidth * in.n0 / (8.0 * in.ranging_power);
  b.bound_norm = b.theory_norm + in.loop_bandwidth * in.sigma2_p * in.chip_period / 8.0;
  return b;
}

double ranging_power(double m_rg, const PnCode& code) {
  if (!(m_rg >= 0.0) || m_rg > kPi / 2.0) throw Error("ranging_power: m_rg must lie in [0, pi/2]");
  if (m_rg == 0.0) return 0.0;
  const double alpha = 2.0 * std::cyl_bessel_j(1.0, m_rg);
  const std::int64_t n_chips = std::min<std::int64_t>(static_cast<std::int64_t>(code.size()), 4096);
  constexpr int kPerChip = 64;
  CompensatedSum acc;
  for (std::int64_t k = 0; k < n_chips; ++k) {
    for (int i = 0; i < kPerChip; ++i) {
      // Midpoint rule over the chip, in units of Tc.
      const double s = chip_waveform(code, static_cast<double>(k) + (i + 0.5) / kPerChip, 1.0);
      acc.add(alpha * alpha * s * s);
    }
  }
  return acc.value() / static_cast<double>(n_chips * kPerChip);
}

double detector_gain(double p) {
  if (!(p > 0.0)) throw Error("detector_gain: ranging power must be positive");
  return 2.0 * std::sqrt(2.0 * p);
}

double sigma2_p(const Constellation& c, double rolloff, std::int64_t n_symbols, std::uint64_t seed,
                const Sigma2pOptions& opt) {
  const double T = 1.0 / opt.symbol_rate;
  const ShapingPulse pulse = opt.shape == PulseShape::Rectangular
                                 ? rectangular_pulse(T, opt.sample_rate)
                                 : srrc_design(rolloff, T, opt.sample_rate, opt.span);
  const auto trim = static_cast<std::int64_t>(pulse.taps.size());
  const double sps = pulse.samples_per_symbol();
  if (static_cast<double>(n_symbols) * sps <= 4.0 * static_cast<double>(trim)) {
    throw Error("sigma2_p: too few symbols for the filter span");
  }
  std::mt19937_64 eng(seed);
  std::vector<cd> symbols(static_cast<std::size_t>(n_symbols));
  for (auto& s : symbols) s = c.points[random_label(eng, c.bits_per_symbol)];
  const SampleStream x = synth_telemetry(symbols, pulse, opt.sample_rate);

  const auto n = static_cast<std::int64_t>(x.size());
  CompensatedSum s1;
  for (std::int64_t i = trim; i < n - trim; ++i) s1.add(std::norm(x.samples[static_cast<std::size_t>(i)]));
  const double count = static_cast<double>(n - 2 * trim);
  const double mean = s1.value() / count;
  CompensatedSum s2;
  for (std::int64_t i = trim; i < n - trim; ++i) {
    const double d = std::norm(x.samples[static_cast<std::size_t>(i)]) - mean;
    s2.add(d * d);
  }
  return s2.value() / count;
}

Psd welch_psd(const SampleStream& s, std::size_t segment, double overlap) {
  if (segment < 16 || !std::has_single_bit(segment)) {
    throw Error("welch_psd: segment length must be a power of two >= 16");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error("welch_psd: overlap must be in [0, 1)");
  if (s.size() < segment) throw Error("welch_psd: stream shorter than one segment");
  const std::size_t n = segment;
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * (1.0 - overlap))));

  std::vector<double> win(n);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    wsum2 += win[i] * win[i];
  }

  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  std::vector<double> acc(n, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + n <= s.size(); start += step) {
    for (std::size_t i = 0; i < n; ++i) {
      const cd v = s.samples[start + i] * win[i];
      buf[i][0] = v.real();
      buf[i][1] = v.imag();
    }
    fftw_execute(plan);
    for (std::size_t i = 0; i < n; ++i) acc[i] += buf[i][0] * buf[i][0] + buf[i][1] * buf[i][1];
    ++segments;
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);

  Psd psd;
  psd.freq.resize(n);
  psd.power.resize(n);
  const double norm = 1.0 / (static_cast<double>(segments) * static_cast<double>(n) * wsum2);
  const double df = s.sample_rate / static_cast<double>(n);
  // Reorder bins to ascending frequency: -n/2 .. n/2 - 1.
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t bin = (j + n / 2) % n;
    psd.freq[j] = (static_cast<double>(j) - static_cast<double>(n / 2)) * df;
    psd.power[j] = acc[bin] * norm;
  }
  return psd;
}

double occupied_bandwidth(const SampleStream& s, double fraction, double symbol_rate,
                          std::size_t segment) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("occupied_bandwidth: fraction must be in (0, 1)");
  if (symbol_rate > 0.0 && static_cast<double>(s.size()) / s.sample_rate * symbol_rate < 100.0) {
    throw Error("occupied_bandwidth: stream too short (< 100 symbols)");
  }
  while (segment > 16 && segment > s.size()) segment /= 2;
  const Psd psd = welch_psd(s, segment);
  const std::size_t n = psd.power.size();
  const std::size_t dc = n / 2;
  const double df = psd.freq[dc + 1] - psd.freq[dc];
  double total = 0.0;
  for (double p : psd.power) total += p;
  if (!(total > 0.0)) throw Error("occupied_bandwidth: stream carries no power");
  const double target = fraction * total;

  // Band [-(j + 1/2) df, (j + 1/2) df] holds cum(j).
  double prev = 0.0;
  double cum = psd.power[dc];
  std::size_t j = 0;
  while (cum < target && j + 1 < dc) {
    ++j;
    prev = cum;
    cum += psd.power[dc + j] + psd.power[dc - j];
  }
  const double frac = cum > prev ? (target - prev) / (cum - prev) : 1.0;
  const double half = j == 0 ? 0.5 * frac * df : (static_cast<double>(j) - 0.5 + frac) * df;
  return 2.0 * half;
}

double wrap_chip(double x) { return x - std::floor(x + 0.5); }

double jitter_estimate(std::span<const double> traj, double tau_true, double chip_period) {
  if (traj.empty()) throw Error("jitter_estimate: empty trajectory");
  CompensatedSum acc;
  for (double t : traj) {
    const double e = wrap_chip((t - tau_true) / chip_period);
    acc.add(e * e);
  }
  return acc.value() / static_cast<double>(traj.size());
}

double jitter_about_mean(std::span<const double> traj, double chip_period) {
  if (traj.empty()) throw Error("jitter_about_mean: empty trajectory");
  const double ref = traj.front() / chip_period;
  CompensatedSum s1;
  for (double t : traj) s1.add(wrap_chip(t / chip_period - ref));
  const double mean = s1.value() / static_cast<double>(traj.size());
  CompensatedSum s2;
  for (double t : traj) {
    const double d = wrap_chip(t / chip_period - ref) - mean;
    s2.add(d * d);
  }
  return s2.value() / static_cast<double>(traj.size());
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double ber_theory(const Constellation& c, double ebn0_db) {
  if (std::isnan(ebn0_db)) throw Error("ber_theory: Eb/N0 must not be NaN");
  if (c.bits_per_symbol == 0) return 0.0;
  const double gb = std::pow(10.0, ebn0_db / 10.0);
  if (std::isinf(gb)) return 0.0;
  switch (c.id) {
    case ConstellationId::Qpsk: return q_function(std::sqrt(2.0 * gb));
    case ConstellationId::Psk8: return psk_ber_exact(c, gb * c.bits_per_symbol);
    default: break;
  }
  if (gb == 0.0) return 0.5;
  // Unit mean symbol energy: N0 = Es / (bps Eb/N0).
  return union_bound_ber(c, 1.0 / (c.bits_per_symbol * gb));
}

}  // namespace tmrange
