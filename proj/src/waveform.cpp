#include "tmrange/waveform.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

constexpr double kPi = std::numbers::pi;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double blackman(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(kPi * u) + 0.08 * std::cos(2.0 * kPi * u);
}

bool same_rate(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); }

}  // namespace

int ShapingPulse::integer_sps() const {
  const double sps = samples_per_symbol();
  const double r = std::round(sps);
  return (r >= 1.0 && std::abs(sps - r) < 1e-9) ? static_cast<int>(r) : 0;
}

double ShapingPulse::energy() const {
  double e = 0.0;
  for (double t : taps) e += t * t;
  return e;
}

double ShapingPulse::value_at(double t) const {
  if (shape == PulseShape::Rectangular) {
    return (t >= -0.5 * symbol_period && t < 0.5 * symbol_period) ? 1.0 : 0.0;
  }
  if (std::abs(t) > span * symbol_period) return 0.0;
  return scale * srrc_unit(t / symbol_period, rolloff);
}

double srrc_unit(double x, double beta) {
  if (std::abs(x) < 1e-9) return 1.0 - beta + 4.0 * beta / kPi;
  const double edge = 1.0 / (4.0 * beta);
  if (std::abs(std::abs(x) - edge) < 1e-9) {
    const double a = kPi / (4.0 * beta);
    return beta / std::numbers::sqrt2 *
           ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
  }
  const double num = std::sin(kPi * x * (1.0 - beta)) + 4.0 * beta * x * std::cos(kPi * x * (1.0 + beta));
  const double den = kPi * x * (1.0 - (4.0 * beta * x) * (4.0 * beta * x));
  return num / den;
}

ShapingPulse srrc_design(double rolloff, double symbol_period, double sample_rate, int span) {
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw Error("srrc_design: rolloff must be in (0, 1]");
  if (!(symbol_period > 0.0)) throw Error("srrc_design: symbol period must be positive");
  if (!(sample_rate * symbol_period >= 4.0 - 1e-9)) {
    throw Error("srrc_design: sample rate must be at least 4 / T");
  }
  if (span < 8) throw Error("srrc_design: span must be >= 8 symbols");

  ShapingPulse p;
  p.shape = PulseShape::Srrc;
  p.rolloff = rolloff;
  p.symbol_period = symbol_period;
  p.sample_rate = sample_rate;
  p.span = span;

  const double sps = symbol_period * sample_rate;
  const auto half = static_cast<std::int64_t>(std::floor(span * sps + 1e-9));
  p.center = static_cast<std::size_t>(half);
  p.taps.resize(static_cast<std::size_t>(2 * half + 1));
  double energy = 0.0;
  for (std::int64_t n = -half; n <= half; ++n) {
    const double g = srrc_unit(static_cast<double>(n) / sps, rolloff);
    p.taps[static_cast<std::size_t>(n + half)] = g;
    energy += g * g;
  }
  p.scale = std::sqrt(sps / energy);
  for (double& t : p.taps) t *= p.scale;
  return p;
}

ShapingPulse rectangular_pulse(double symbol_period, double sample_rate) {
  ShapingPulse p;
  p.shape = PulseShape::Rectangular;
  p.symbol_period = symbol_period;
  p.sample_rate = sample_rate;
  p.span = 1;
  const int sps = p.integer_sps();
  if (sps == 0) throw Error("rectangular_pulse: needs an integer number of samples per symbol");
  p.taps.assign(static_cast<std::size_t>(sps), 1.0);
  p.center = static_cast<std::size_t>(sps / 2);
  return p;
}

void SymbolBuffer::discard_before(std::int64_t k) {
  const std::int64_t drop = k - first;
  if (drop <= 0) return;
  if (drop >= static_cast<std::int64_t>(symbols.size())) {
    symbols.clear();
    first = k;
    return;
  }
  symbols.erase(symbols.begin(), symbols.begin() + drop);
  first = k;
}

SampleStream synth_telemetry(std::span<const cd> symbols, const ShapingPulse& pulse,
                             double sample_rate) {
  if (symbols.empty()) throw Error("synth_telemetry: empty symbol sequence");
  if (!(sample_rate > 0.0)) throw Error("synth_telemetry: sample rate must be positive");

  SampleStream out;
  out.sample_rate = sample_rate;
  const auto n_sym = static_cast<std::int64_t>(symbols.size());
  const int sps = pulse.integer_sps();

  if (sps > 0 && same_rate(pulse.sample_rate, sample_rate)) {
    out.t0 = -static_cast<double>(pulse.center) / sample_rate;
    out.samples.assign(static_cast<std::size_t>((n_sym - 1) * sps) + pulse.taps.size(), cd{});
    for (std::int64_t k = 0; k < n_sym; ++k) {
      cd* dst = out.samples.data() + k * sps;
      const cd a = symbols[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < pulse.taps.size(); ++i) dst[i] += a * pulse.taps[i];
    }
    return out;
  }

  // Fractional samples per symbol: evaluate the pulse analytically.
  const double T = pulse.symbol_period;
  const double reach = pulse.shape == PulseShape::Srrc ? pulse.span * T : 0.5 * T;
  out.t0 = -reach;
  const double t_end = static_cast<double>(n_sym - 1) * T + reach;
  const auto n_out = static_cast<std::size_t>(std::floor((t_end - out.t0) * sample_rate)) + 1;
  out.samples.assign(n_out, cd{});
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = out.time_of(n);
    const auto k_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((t - reach) / T)));
    const auto k_hi = std::min<std::int64_t>(n_sym - 1, static_cast<std::int64_t>(std::floor((t + reach) / T)));
    cd acc{};
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      acc += symbols[static_cast<std::size_t>(k)] * pulse.value_at(t - static_cast<double>(k) * T);
    }
    out.samples[n] = acc;
  }
  return out;
}

void synthesize_samples(const ShapingPulse& pulse, const SymbolBuffer& symbols,
                        std::int64_t n_begin, std::span<cd> out) {
  const int sps = pulse.integer_sps();
  if (sps == 0) throw Error("synthesize_samples: needs integer samples per symbol");
  const auto center = static_cast<std::int64_t>(pulse.center);
  const auto n_taps = static_cast<std::int64_t>(pulse.taps.size());
  const double* taps = pulse.taps.data();
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const std::int64_t n = n_begin + static_cast<std::int64_t>(idx);
    std::int64_t k = floor_div(n + center, sps);
    std::int64_t i = n + center - k * sps;
    cd acc{};
    for (; i < n_taps; i += sps, --k) acc += symbols.at(k) * taps[i];
    out[idx] = acc;
  }
}

cd matched_filter_at(const ShapingPulse& pulse, std::span<const cd> samples,
                     std::int64_t n_first, std::int64_t k) {
  const int sps = pulse.integer_sps();
  if (sps == 0) throw Error("matched_filter_at: needs integer samples per symbol");
  const std::int64_t start = k * sps - static_cast<std::int64_t>(pulse.center) - n_first;
  const auto n_taps = static_cast<std::int64_t>(pulse.taps.size());
  const auto n_samples = static_cast<std::int64_t>(samples.size());
  const std::int64_t i_lo = std::max<std::int64_t>(0, -start);
  const std::int64_t i_hi = std::min<std::int64_t>(n_taps, n_samples - start);
  cd acc{};
  for (std::int64_t i = i_lo; i < i_hi; ++i) {
    acc += samples[static_cast<std::size_t>(start + i)] * pulse.taps[static_cast<std::size_t>(i)];
  }
  return acc / pulse.energy();
}

void validate_ranging(const RangingParams& params, double symbol_period) {
  if (!(params.m_rg > 0.0) || !std::isfinite(params.m_rg)) {
    throw Error("ranging: modulation index must be positive");
  }
  if (!(params.chip_rate > 0.0)) throw Error("ranging: chip rate must be positive");
  const double tc = params.chip_period();
  if (!(params.tau_rg >= -0.5 * tc && params.tau_rg < 0.5 * tc)) {
    throw Error("ranging: tau_rg must lie in [-Tc/2, Tc/2)");
  }
  if (symbol_period > 0.0) {
    const double ratio = tc / symbol_period;
    const double n = std::round(ratio);
    if (n >= 1.0 && std::abs(ratio - n) < 1e-9) {
      throw Error("ranging: chip period is an integer multiple of the symbol period (Tc != nT)");
    }
  }
}

double chip_pulse(double t, double chip_period) {
  if (t < 0.0 || t >= chip_period) return 0.0;
  return std::sin(kPi * t / chip_period);
}

double chip_waveform(const PnCode& code, double t, double chip_period) {
  const double x = t / chip_period;
  const double k = std::floor(x);
  return code.chip(static_cast<std::int64_t>(k)) * std::sin(kPi * (x - k));
}

cd ranging_phasor(const PnCode& code, double m_rg, double chip_period, double t) {
  return std::polar(1.0, m_rg * chip_waveform(code, t, chip_period));
}

SampleStream synth_ranging(const PnCode& code, const RangingParams& params, double sample_rate,
                           std::int64_t n_chips) {
  if (n_chips < 1) throw Error("synth_ranging: n_chips must be >= 1");
  if (!(sample_rate > 0.0) || !(params.chip_rate > 0.0)) {
    throw Error("synth_ranging: rates must be positive");
  }
  SampleStream out;
  out.sample_rate = sample_rate;
  out.t0 = 0.0;
  const double tc = params.chip_period();
  const auto n = static_cast<std::size_t>(std::ceil(n_chips * tc * sample_rate - 1e-9));
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = ranging_phasor(code, params.m_rg, tc, out.time_of(i));
  }
  return out;
}

cd interpolate(std::span<const cd> samples, double pos) {
  const double base = std::floor(pos);
  const auto i0 = static_cast<std::int64_t>(base);
  const auto n = static_cast<std::int64_t>(samples.size());
  if (pos == base && i0 >= 0 && i0 < n) return samples[static_cast<std::size_t>(i0)];
  if (i0 - (kInterpolatorHalfTaps - 1) < 0 || i0 + kInterpolatorHalfTaps >= n) {
    throw Error("interpolate: position outside the stream support");
  }
  cd acc{};
  for (std::int64_t i = i0 - (kInterpolatorHalfTaps - 1); i <= i0 + kInterpolatorHalfTaps; ++i) {
    const double d = pos - static_cast<double>(i);
    acc += samples[static_cast<std::size_t>(i)] * (sinc(d) * blackman(d / kInterpolatorHalfTaps));
  }
  return acc;
}

SampleStream combine(const SampleStream& tm, const SampleStream& rg, double tau_rg) {
  if (!same_rate(tm.sample_rate, rg.sample_rate)) {
    throw Error("combine: sample rate mismatch");
  }
  const double fs = tm.sample_rate;
  const auto n_rg = static_cast<std::int64_t>(rg.size());
  SampleStream out;
  out.sample_rate = fs;
  bool started = false;
  for (std::size_t n = 0; n < tm.size(); ++n) {
    const double pos = (tm.time_of(n) - tau_rg - rg.t0) * fs;
    const double snapped = std::round(pos);
    const double p = std::abs(pos - snapped) < 1e-9 ? snapped : pos;
    const auto i0 = static_cast<std::int64_t>(std::floor(p));
    const bool exact = (p == std::floor(p)) && i0 >= 0 && i0 < n_rg;
    const bool inside = exact || (i0 - (kInterpolatorHalfTaps - 1) >= 0 && i0 + kInterpolatorHalfTaps < n_rg);
    if (!inside) {
      if (started) break;
      continue;
    }
    if (!started) {
      out.t0 = tm.time_of(n);
      started = true;
    }
    out.samples.push_back(tm.samples[n] * interpolate(rg.samples, p));
  }
  if (out.samples.empty()) throw Error("combine: streams do not overlap");
  return out;
}

}  // namespace tmrange
