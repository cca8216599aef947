#pragma once

#include <complex>
#include <string>
#include <string_view>

namespace tmrange {

enum class LoopOrder { First, Second };

LoopOrder parse_loop_order(std::string_view s);
std::string to_string(LoopOrder order);

struct CtlConfig {
  double loop_bandwidth = 1500.0;  // B_L, one-sided, Hz
  double damping = 0.7071067811865476;
  double chip_rate = 3e6;  // Hz; the loop updates once per chip
  double m_rg = 0.444;
  LoopOrder order = LoopOrder::Second;
};

/// Throws unless 0 < B_L <= chip_rate / 100 and damping > 0.
void validate(const CtlConfig& cfg);

/// Proportional-plus-integral filter acting on the detector output D:
///   acc += ki * D;  v = kp * D + acc;  offset -= v   (offset in chips)
/// With D = K * eps the closed loop from detector noise to the estimate is
///   H(z) = K (kp (z - 1) + ki z) / ((z - 1)^2 + K (kp (z - 1) + ki z)).
struct LoopFilterCoefficients {
  double kp = 0.0;
  double ki = 0.0;
};

std::complex<double> closed_loop_response(const LoopFilterCoefficients& c, double detector_gain,
                                          double normalized_freq);

/// Noise bandwidth (Hz) by numerical integration of |H|^2 over [0, 1/(2T)].
double noise_bandwidth(const LoopFilterCoefficients& c, double detector_gain, double update_rate);

bool is_stable(const LoopFilterCoefficients& c, double detector_gain);

/// Coefficients whose closed loop, with detector gain `detector_gain`,
/// has noise bandwidth cfg.loop_bandwidth at one update per chip. The
/// second-order design starts from the standard (damping, B_L T) formulas
/// and is then refined against noise_bandwidth().
LoopFilterCoefficients loop_filter_design(const CtlConfig& cfg, double detector_gain);

}  // namespace tmrange
