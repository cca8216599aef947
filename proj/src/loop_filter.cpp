#include "tmrange/loop_filter.hpp"

#include <cmath>
#include <numbers>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

// Simpson's rule on [a, b] with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  return s * h / 3.0;
}

LoopFilterCoefficients scaled(double k_kp, double k_ki, double gain) {
  return {k_kp / gain, k_ki / gain};
}

LoopFilterCoefficients second_order_start(double theta, double zeta, double gain) {
  const double d = 1.0 + 2.0 * zeta * theta + theta * theta;
  return scaled(4.0 * zeta * theta / d, 4.0 * theta * theta / d, gain);
}

}  // namespace

LoopOrder parse_loop_order(std::string_view s) {
  if (s == "first" || s == "1") return LoopOrder::First;
  if (s == "second" || s == "2") return LoopOrder::Second;
  throw Error("unsupported loop order: '" + std::string(s) + "'");
}

std::string to_string(LoopOrder order) {
  return order == LoopOrder::First ? "first" : "second";
}

void validate(const CtlConfig& cfg) {
  if (!(cfg.chip_rate > 0.0)) throw Error("ctl: chip_rate must be positive");
  if (!(cfg.loop_bandwidth > 0.0)) throw Error("ctl: loop bandwidth must be positive");
  if (cfg.loop_bandwidth > cfg.chip_rate / 100.0) {
    throw Error("ctl: loop bandwidth too large for the chip update rate (B_L <= chip_rate/100)");
  }
  if (!(cfg.damping > 0.0)) throw Error("ctl: damping must be positive");
}

std::complex<double> closed_loop_response(const LoopFilterCoefficients& c, double gain,
                                          double nu) {
  const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * nu);
  if (c.ki == 0.0) return gain * c.kp / (z - 1.0 + gain * c.kp);
  const std::complex<double> f = gain * (c.kp * (z - 1.0) + c.ki * z);
  return f / ((z - 1.0) * (z - 1.0) + f);
}

bool is_stable(const LoopFilterCoefficients& c, double gain) {
  if (c.ki == 0.0) return gain * c.kp > 0.0 && gain * c.kp < 2.0;  // pole at 1 - K kp
  // z^2 + a1 z + a0 with a1 = K(kp + ki) - 2, a0 = 1 - K kp (Jury test).
  const double a1 = gain * (c.kp + c.ki) - 2.0;
  const double a0 = 1.0 - gain * c.kp;
  return std::abs(a0) < 1.0 && 1.0 + a1 + a0 > 0.0 && 1.0 - a1 + a0 > 0.0;
}

double noise_bandwidth(const LoopFilterCoefficients& c, double gain, double update_rate) {
  auto h2 = [&](double nu) { return std::norm(closed_loop_response(c, gain, nu)); };
  // |H|^2 is concentrated near DC; integrate on geometrically growing panels.
  const double k = gain * (c.kp + c.ki);
  double edge = std::max(1e-9, std::min(1e-3, 1e-3 * k));
  double total = simpson(h2, 0.0, edge, 64);
  while (edge < 0.5) {
    const double next = std::min(0.5, edge * 1.5);
    total += simpson(h2, edge, next, 64);
    edge = next;
  }
  return total * update_rate;
}

LoopFilterCoefficients loop_filter_design(const CtlConfig& cfg, double gain) {
  validate(cfg);
  if (!(gain > 0.0) || !std::isfinite(gain)) throw Error("loop_filter_design: detector gain must be positive");
  const double target = cfg.loop_bandwidth;
  const double x = cfg.loop_bandwidth / cfg.chip_rate;  // B_L T

  if (cfg.order == LoopOrder::First) {
    // H(z) = g / (z - 1 + g) has B_L T = g / (2 (2 - g)) exactly.
    const double g = 4.0 * x / (1.0 + 2.0 * x);
    const LoopFilterCoefficients c = scaled(g, 0.0, gain);
    if (!is_stable(c, gain)) throw Error("loop_filter_design: unstable loop");
    return c;
  }

  const double zeta = cfg.damping;
  auto bw_of = [&](double theta) {
    return noise_bandwidth(second_order_start(theta, zeta, gain), gain, cfg.chip_rate);
  };
  // Secant iteration on log(theta); the bandwidth is monotone in theta.
  double t0 = x / (zeta + 0.25 / zeta);
  double t1 = t0 * 1.01;
  double f0 = std::log(bw_of(t0) / target);
  double f1 = std::log(bw_of(t1) / target);
  for (int it = 0; it < 50 && std::abs(f1) > 1e-10; ++it) {
    const double l0 = std::log(t0);
    const double l1 = std::log(t1);
    const double l2 = l1 - f1 * (l1 - l0) / (f1 - f0);
    t0 = t1;
    f0 = f1;
    t1 = std::exp(l2);
    f1 = std::log(bw_of(t1) / target);
  }
  const LoopFilterCoefficients c = second_order_start(t1, zeta, gain);
  if (!is_stable(c, gain) || std::abs(f1) > 1e-6) {
    throw Error("loop_filter_design: B_L too large for stability at the chip update rate");
  }
  return c;
}

}  // namespace tmrange
