#include <doctest.h>

#include <cmath>

#include "tmrange/error.hpp"
#include "tmrange/loop_filter.hpp"

using namespace tmrange;

namespace {

// Runs the filter recursion itself on a unit impulse of the reference and
// returns R * sum(h^2) / 2, the one-sided noise bandwidth by Parseval.
double bandwidth_from_impulse_response(const LoopFilterCoefficients& c, double gain, double rate,
                                       double loop_bandwidth) {
  const auto n = static_cast<std::int64_t>(200.0 * rate / loop_bandwidth);
  double est = 0.0;
  double acc = 0.0;
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ref = i == 0 ? 1.0 : 0.0;
    const double d = gain * (est - ref);
    acc += c.ki * d;
    est -= c.kp * d + acc;
    sum += est * est;
  }
  return rate * sum / 2.0;
}

}  // namespace

TEST_CASE("designed loops realize the requested noise bandwidth") {
  for (auto order : {LoopOrder::First, LoopOrder::Second}) {
    for (double bl : {1500.0, 150.0, 30000.0}) {
      for (double gain : {0.5, 1.26}) {
        CtlConfig cfg;
        cfg.loop_bandwidth = bl;
        cfg.order = order;
        const auto c = loop_filter_design(cfg, gain);
        CAPTURE(to_string(order));
        CAPTURE(bl);
        CAPTURE(gain);
        CHECK(is_stable(c, gain));
        CHECK(noise_bandwidth(c, gain, cfg.chip_rate) == doctest::Approx(bl).epsilon(1e-4));
        CHECK(bandwidth_from_impulse_response(c, gain, cfg.chip_rate, bl) == doctest::Approx(bl).epsilon(0.02));
        if (order == LoopOrder::First) {
          CHECK(c.ki == 0.0);
        }
      }
    }
  }
}

TEST_CASE("the loop design absorbs the detector gain") {
  CtlConfig cfg;
  const auto a = loop_filter_design(cfg, 1.0);
  const auto b = loop_filter_design(cfg, 4.0);
  CHECK(b.kp * 4.0 == doctest::Approx(a.kp).epsilon(1e-6));
  CHECK(b.ki * 4.0 == doctest::Approx(a.ki).epsilon(1e-6));
}

TEST_CASE("closed loop response is unity at dc and falls off above B_L") {
  CtlConfig cfg;
  const auto c = loop_filter_design(cfg, 1.0);
  CHECK(std::abs(closed_loop_response(c, 1.0, 0.0)) == doctest::Approx(1.0));
  CHECK(std::abs(closed_loop_response(c, 1.0, 100.0 * cfg.loop_bandwidth / cfg.chip_rate)) < 0.05);
}

TEST_CASE("stability check") {
  CHECK(is_stable({0.5, 0.0}, 1.0));
  CHECK_FALSE(is_stable({2.5, 0.0}, 1.0));
  CHECK_FALSE(is_stable({-0.1, 0.0}, 1.0));
  CHECK(is_stable({0.01, 1e-5}, 1.0));
  CHECK_FALSE(is_stable({3.0, 1.0}, 1.0));
}

TEST_CASE("invalid loop settings are rejected") {
  CtlConfig cfg;
  cfg.loop_bandwidth = 0.0;
  CHECK_THROWS_AS(loop_filter_design(cfg, 1.0), Error);
  cfg.loop_bandwidth = 31000.0;
  CHECK_THROWS_AS(loop_filter_design(cfg, 1.0), Error);
  cfg.loop_bandwidth = 1500.0;
  cfg.damping = 0.0;
  CHECK_THROWS_AS(loop_filter_design(cfg, 1.0), Error);
  cfg.damping = 0.7;
  CHECK_THROWS_AS(loop_filter_design(cfg, 0.0), Error);
  CHECK_THROWS_AS(parse_loop_order("third"), Error);
  CHECK(parse_loop_order("1") == LoopOrder::First);
}
