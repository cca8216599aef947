#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "tmrange/constellation.hpp"
#include "tmrange/pn_code.hpp"

namespace tmrange {

/// Uniformly sampled complex baseband signal; sample n sits at t0 + n / sample_rate.
struct SampleStream {
  std::vector<cd> samples;
  double sample_rate = 0.0;
  double t0 = 0.0;

  std::size_t size() const { return samples.size(); }
  double time_of(std::size_t n) const { return t0 + static_cast<double>(n) / sample_rate; }
};

enum class PulseShape { Srrc, Rectangular };

/// Symbol shaping pulse sampled at `sample_rate`. taps[center] is t = 0.
/// Normalized so that sum(taps^2) = samples_per_symbol, i.e. the pulse has
/// energy T and iid unit-power symbols give unit-power output. A matched
/// filter scaled by 1/sum(taps^2) returns an isolated symbol with gain 1.
struct ShapingPulse {
  PulseShape shape = PulseShape::Srrc;
  double rolloff = 0.0;
  double symbol_period = 0.0;
  double sample_rate = 0.0;
  int span = 0;  // symbols on each side of the peak
  double scale = 1.0;
  std::vector<double> taps;
  std::size_t center = 0;

  double samples_per_symbol() const { return symbol_period * sample_rate; }
  /// Integer samples per symbol, or 0 when the ratio is fractional.
  int integer_sps() const;
  double energy() const;
  /// Continuous-time pulse value with the same normalization as the taps.
  double value_at(double t) const;
};

/// Square-root raised cosine with unit energy per symbol, g(t/T), where
/// the singular points t = 0 and |t| = T/(4 rolloff) use their limits.
double srrc_unit(double t_over_T, double rolloff);

ShapingPulse srrc_design(double rolloff, double symbol_period, double sample_rate, int span);

/// NRZ pulse covering [-T/2, T/2); needs an integer number of samples per symbol.
ShapingPulse rectangular_pulse(double symbol_period, double sample_rate);

/// sum_k a_k p(t - kT), symbol 0 at t = 0. The output covers the full
/// support of the first and last pulse, so t0 = -span * T for SRRC.
SampleStream synth_telemetry(std::span<const cd> symbols, const ShapingPulse& pulse,
                             double sample_rate);

/// Symbols indexed from `first`; reads outside the stored range are zero.
struct SymbolBuffer {
  std::int64_t first = 0;
  std::vector<cd> symbols;

  cd at(std::int64_t k) const {
    const std::int64_t i = k - first;
    if (i < 0 || i >= static_cast<std::int64_t>(symbols.size())) return {};
    return symbols[static_cast<std::size_t>(i)];
  }
  std::int64_t end() const { return first + static_cast<std::int64_t>(symbols.size()); }
  /// Drops symbols before `k`.
  void discard_before(std::int64_t k);
};

/// Streaming form of synth_telemetry on an integer-sps grid where symbol k
/// is centred on sample k * sps. Writes samples [n_begin, n_begin + out.size()).
void synthesize_samples(const ShapingPulse& pulse, const SymbolBuffer& symbols,
                        std::int64_t n_begin, std::span<cd> out);

/// Matched-filter output at the centre of symbol k on the same grid as
/// synthesize_samples(); `samples` starts at sample index `n_first`.
cd matched_filter_at(const ShapingPulse& pulse, std::span<const cd> samples,
                     std::int64_t n_first, std::int64_t k);

struct RangingParams {
  double m_rg = 0.0;       // modulation index, rad (peak phase deviation)
  double chip_rate = 0.0;  // Hz
  double tau_rg = 0.0;     // s, in [-Tc/2, Tc/2)

  double chip_period() const { return 1.0 / chip_rate; }
};

/// Throws when m_rg <= 0, tau is outside [-Tc/2, Tc/2) or Tc is an integer
/// multiple of the symbol period.
void validate_ranging(const RangingParams& params, double symbol_period);

/// Sine chip shape: sin(pi t / Tc) on [0, Tc), zero elsewhere.
double chip_pulse(double t, double chip_period);

/// Unit-peak chip waveform s(t) = sum_k c_k h(t - k Tc); the ranging phase
/// is m_rg * s(t). Chip 0 of `code` starts at t = 0.
double chip_waveform(const PnCode& code, double t, double chip_period);

/// exp(j m s(t)).
cd ranging_phasor(const PnCode& code, double m_rg, double chip_period, double t);

/// Undelayed ranging phasor over n_chips chips, t0 = 0. tau_rg is applied
/// by combine() or by the receiver, not here.
SampleStream synth_ranging(const PnCode& code, const RangingParams& params, double sample_rate,
                           std::int64_t n_chips);

/// 8-tap Blackman-windowed sinc interpolation at fractional sample
/// position `pos`. Positions whose support leaves the stream throw.
cd interpolate(std::span<const cd> samples, double pos);
inline constexpr int kInterpolatorHalfTaps = 4;

/// x_tm(t) * r(t - tau) on the telemetry grid, restricted to the samples
/// where the delayed ranging stream can be interpolated.
SampleStream combine(const SampleStream& tm, const SampleStream& rg, double tau_rg);

}  // namespace tmrange
