#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "tmrange/analysis.hpp"
#include "tmrange/channel.hpp"
#include "tmrange/error.hpp"
#include "tmrange/receiver.hpp"

using namespace tmrange;

namespace {

constexpr double kRs = 4.2e6;
constexpr double kFs = 25.2e6;
constexpr double kRc = 3e6;
constexpr double kTc = 1.0 / kRc;
constexpr double kM = 0.444;

std::vector<std::uint32_t> random_labels(std::size_t n, int bits, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::vector<std::uint32_t> l(n);
  for (auto& v : l) v = bits == 0 ? 0u : static_cast<std::uint32_t>(eng() >> (64 - bits));
  return l;
}

// Telemetry times the delayed ranging phasor, evaluated analytically.
SampleStream link_signal(const Constellation& c, const ShapingPulse& p, std::span<const std::uint32_t> labels,
                         const PnCode& code, double tau) {
  const auto syms = map_labels(c, labels);
  SampleStream y = synth_telemetry(syms, p, kFs);
  for (std::size_t n = 0; n < y.size(); ++n) y.samples[n] *= ranging_phasor(code, kM, kTc, y.time_of(n) - tau);
  return y;
}

ReceiverConfig receiver_config(ReceiverMode mode, const PnCode& code, double bl = 1500.0) {
  ReceiverConfig cfg;
  cfg.constellation = build_constellation(ConstellationId::Qpsk);
  cfg.pulse = srrc_design(0.2, 1.0 / kRs, kFs, 16);
  cfg.code = code;
  cfg.ranging = RangingParams{kM, kRc, 0.0};
  cfg.ctl.loop_bandwidth = bl;
  cfg.ctl.chip_rate = kRc;
  cfg.ctl.m_rg = kM;
  cfg.mode = mode;
  cfg.sample_rate = kFs;
  return cfg;
}

// Samples of Im(exp(j m s(t - tau)) exp(-j m s(t - offset Tc))) around
// replica boundary k, and the matching window.
struct LocalWindow {
  std::vector<double> q;
  double begin = 0.0;
  double end = 0.0;
};

LocalWindow window_at(const PnCode& code, double tau, double offset, std::int64_t k) {
  const double spc = kFs / kRc;
  const double pos = (static_cast<double>(k) + offset) * spc;
  const auto first = static_cast<std::int64_t>(std::floor(pos - spc / 2)) - 2;
  const auto last = static_cast<std::int64_t>(std::ceil(pos + spc / 2)) + 2;
  LocalWindow w;
  for (std::int64_t n = first; n <= last; ++n) {
    const double t = static_cast<double>(n) / kFs;
    const cd v = ranging_phasor(code, kM, kTc, t - tau) * std::conj(ranging_phasor(code, kM, kTc, t - offset * kTc));
    w.q.push_back(v.imag());
  }
  w.begin = pos - spc / 2 - static_cast<double>(first);
  w.end = w.begin + spc;
  return w;
}

}  // namespace

TEST_CASE("receiver mode names") {
  CHECK(parse_receiver_mode("genie") == ReceiverMode::GenieAided);
  CHECK(parse_receiver_mode("end-to-end") == ReceiverMode::EndToEnd);
  CHECK(to_string(ReceiverMode::EndToEnd) == "end-to-end");
  CHECK_THROWS_AS(parse_receiver_mode("oracle"), Error);
}

TEST_CASE("ranging wipe-off with the right delay restores the telemetry") {
  const PnCode sq = generate_code(CodeKind::SquareWave, 2000, 0);
  const RangingParams rp{kM, kRc, 0.0};
  SampleStream ones;
  ones.sample_rate = kFs;
  ones.samples.assign(10000, cd(1.0, 0.0));
  const double tau = 0.23 * kTc;
  const SampleStream y = combine(ones, synth_ranging(sq, rp, kFs, 1190), tau);
  const SampleStream w = wipe_ranging(y, sq, rp, tau);
  for (const cd& v : w.samples) CHECK(std::abs(v - cd(1.0, 0.0)) < 5e-3);

  // m = 0 replica is the identity.
  const SampleStream same = wipe_ranging(y, sq, RangingParams{0.0, kRc, 0.0}, tau);
  CHECK(same.samples == y.samples);
}

TEST_CASE("half-chip misalignment leaves the expected phase residual") {
  // For the square-wave code s(t) is a sinusoid of period 2 Tc, so a Tc/2
  // shift leaves m (sin - cos) with RMS exactly m.
  const PnCode sq = generate_code(CodeKind::SquareWave, 2000, 0);
  const RangingParams rp{kM, kRc, 0.0};
  SampleStream y;
  y.sample_rate = kFs;
  for (int n = 0; n < 8400; ++n) y.samples.push_back(ranging_phasor(sq, kM, kTc, n / kFs));
  const SampleStream w = wipe_ranging(y, sq, rp, 0.5 * kTc);
  double ms = 0.0;
  for (const cd& v : w.samples) ms += std::arg(v) * std::arg(v);
  CHECK(std::sqrt(ms / static_cast<double>(w.size())) == doctest::Approx(kM).epsilon(1e-3));
}

TEST_CASE("noiseless demodulation recovers every symbol and remodulates exactly") {
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  const ShapingPulse p = srrc_design(0.2, 1.0 / kRs, kFs, 16);
  const auto labels = random_labels(400, 2, 5);
  const SampleStream x = synth_telemetry(map_labels(c, labels), p, kFs);
  for (auto mode : {ReceiverMode::EndToEnd, ReceiverMode::GenieAided}) {
    const DemodResult r = demod_remod(x, c, p, mode, labels);
    CHECK(r.labels == labels);
    CHECK(r.bits.size() == 800);
    REQUIRE(r.x_conj.size() == x.size());
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(std::abs(r.x_conj.samples[n] - std::conj(x.samples[n])) < 1e-12);
    const SampleStream flat = wipe_telemetry(x, r.x_conj);
    for (std::size_t n = 0; n < x.size(); ++n) {
      CHECK(flat.samples[n].imag() == doctest::Approx(0.0).scale(1.0));
      CHECK(flat.samples[n].real() == doctest::Approx(std::norm(x.samples[n])).scale(1.0));
    }
  }
  CHECK_THROWS_AS(demod_remod(x, c, p, ReceiverMode::GenieAided), Error);
  SampleStream shifted = x;
  shifted.t0 += 0.3 / kFs;
  CHECK_THROWS_AS(demod_remod(shifted, c, p, ReceiverMode::EndToEnd), Error);
}

TEST_CASE("genie remodulation ignores decision errors") {
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  const ShapingPulse p = srrc_design(0.2, 1.0 / kRs, kFs, 16);
  const auto labels = random_labels(300, 2, 6);
  const SampleStream x = synth_telemetry(map_labels(c, labels), p, kFs);
  const SampleStream y = add_awgn(x, NoiseSpec{n0_from_ebn0(-3.0, 1.0 / kRs, 2), 8});
  const DemodResult g = demod_remod(y, c, p, ReceiverMode::GenieAided, labels);
  CHECK(g.labels != labels);
  for (std::size_t n = 0; n < x.size(); ++n) CHECK(std::abs(g.x_conj.samples[n] - std::conj(x.samples[n])) < 1e-12);
}

TEST_CASE("qpsk hard decisions at Eb/N0 = 6 dB match Q(sqrt(2 Eb/N0))") {
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  const ShapingPulse p = srrc_design(0.2, 1.0 / kRs, kFs, 16);
  const double n0 = n0_from_ebn0(6.0, 1.0 / kRs, 2);
  std::int64_t errors = 0;
  std::int64_t bits = 0;
  for (std::uint64_t chunk = 0; chunk < 8; ++chunk) {
    const auto labels = random_labels(250000, 2, 100 + chunk);
    const SampleStream y = add_awgn(synth_telemetry(map_labels(c, labels), p, kFs), NoiseSpec{n0, 200 + chunk});
    const DemodResult r = demod_remod(y, c, p, ReceiverMode::EndToEnd);
    for (std::size_t k = 0; k < labels.size(); ++k) errors += std::popcount(labels[k] ^ r.labels[k]);
    bits += 2 * static_cast<std::int64_t>(labels.size());
  }
  const double expect = 0.5 * std::erfc(std::sqrt(std::pow(10.0, 0.6)));
  CHECK(expect == doctest::Approx(2.39e-3).epsilon(0.01));
  // About 9500 errors: 1% standard error.
  CHECK(static_cast<double>(errors) / static_cast<double>(bits) == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("telemetry wipe-off checks its inputs") {
  SampleStream a;
  a.sample_rate = kFs;
  a.samples.assign(10, cd(1.0, 1.0));
  SampleStream b = a;
  b.samples.resize(9);
  CHECK_THROWS_AS(wipe_telemetry(a, b), Error);
  b = a;
  b.sample_rate = 2 * kFs;
  CHECK_THROWS_AS(wipe_telemetry(a, b), Error);
}

TEST_CASE("window integration is exact for linear signals") {
  std::vector<double> s(40);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 + 0.5 * static_cast<double>(i);
  auto exact = [](double a, double b) { return 2.0 * (b - a) + 0.25 * (b * b - a * a); };
  for (auto [a, b] : {std::pair{0.0, 8.4}, std::pair{3.3, 11.7}, std::pair{10.5, 18.9}, std::pair{4.1, 4.3},
                      std::pair{20.0, 39.0}, std::pair{0.49, 0.51}}) {
    CAPTURE(a);
    CAPTURE(b);
    CHECK(integrate_window(s, a, b) == doctest::Approx(exact(a, b)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(integrate_window(s, 5.0, 4.0), Error);
  CHECK_THROWS_AS(integrate_window(s, -0.1, 4.0), Error);
  CHECK_THROWS_AS(integrate_window(s, 1.0, 39.5), Error);
}

TEST_CASE("window integration is additive across cell boundaries") {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s(50);
  for (auto& v : s) v = u(eng);
  for (double mid : {10.5, 12.5, 29.5}) {
    CHECK(integrate_window(s, 3.7, mid) + integrate_window(s, mid, 30.2) ==
          doctest::Approx(integrate_window(s, 3.7, 30.2)).epsilon(1e-12));
  }
}

TEST_CASE("the mid-phase detector is zero when aligned and has slope K_eps") {
  const PnCode sq = generate_code(CodeKind::SquareWave, 100, 0);
  CtlConfig cfg;
  cfg.m_rg = kM;
  const double k_eps = detector_gain(ranging_power(kM, sq));
  const ChipTrackingLoop loop = make_tracking_loop(cfg, kFs, k_eps);

  CtlState st;
  const double tau = 0.13 * kTc;
  st.code_offset = 0.13;
  st.chip_index = 40;
  LocalWindow w = window_at(sq, tau, st.code_offset, st.chip_index);
  const int d = transitions(sq)[40];
  CtlState next = ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, d);
  CHECK(next.last_error == doctest::Approx(0.0).scale(1.0));
  CHECK(next.chip_index == 41);
  CHECK(next.code_offset == doctest::Approx(0.13).epsilon(1e-12));

  // Replica 0.01 chip late: D ~ K_eps * 0.01. The small-error slope of
  // sin(m ds) is 2 m, the model slope 4 J1(m) is 2% lower at m = 0.444.
  const double eps = 0.01;
  w = window_at(sq, tau, 0.13 + eps, 40);
  next = ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, d);
  CHECK(next.last_error / eps == doctest::Approx(k_eps).epsilon(0.05));
  CHECK(next.code_offset < st.code_offset);

  // A late replica on a falling edge produces the same corrective sign.
  w = window_at(sq, tau, 0.13 + eps, 41);
  CHECK(ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, transitions(sq)[41]).last_error > 0.0);
}

TEST_CASE("a static offset decays monotonically in a first-order loop") {
  const PnCode sq = generate_code(CodeKind::SquareWave, 100, 0);
  CtlConfig cfg;
  cfg.order = LoopOrder::First;
  cfg.loop_bandwidth = kRc / 100.0;
  const ChipTrackingLoop loop = make_tracking_loop(cfg, kFs, detector_gain(ranging_power(kM, sq)));
  CtlState st;
  st.code_offset = 0.1;
  double prev = 0.1;
  for (int i = 0; i < 400; ++i) {
    const std::int64_t k = st.chip_index;
    const LocalWindow w = window_at(sq, 0.0, st.code_offset, k);
    st = ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, sq.chip(k) == sq.chip(k - 1) ? 0 : (sq.chip(k) - sq.chip(k - 1)) / 2);
    CHECK(st.code_offset <= prev);
    CHECK(st.code_offset >= 0.0);
    prev = st.code_offset;
  }
  CHECK(std::abs(st.code_offset) < 1e-4);
}

TEST_CASE("a missing transition leaves the estimate where the integrator puts it") {
  const PnCode c = make_custom_code({1, 1, 1, 1});
  CtlConfig cfg;
  const ChipTrackingLoop loop = make_tracking_loop(cfg, kFs, 1.0);
  CtlState st;
  st.code_offset = 0.2;
  const LocalWindow w = window_at(c, 0.0, 0.2, 2);
  CtlState next = ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, 0);
  CHECK(next.code_offset == 0.2);
  st.integrator = 1e-4;
  next = ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, 0);
  CHECK(next.code_offset == doctest::Approx(0.2 - 1e-4));
}

TEST_CASE("malformed detector inputs are rejected") {
  const PnCode sq = generate_code(CodeKind::SquareWave, 100, 0);
  const ChipTrackingLoop loop = make_tracking_loop(CtlConfig{}, kFs, 1.0);
  const LocalWindow w = window_at(sq, 0.0, 0.0, 5);
  CtlState st;
  CHECK_THROWS_AS(ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end}, 2), Error);
  CHECK_THROWS_AS(ctl_step(st, loop, MidPhaseWindow{w.q, w.begin, w.end - 1.0}, 1), Error);
  CHECK_THROWS_AS(ctl_step(st, loop, MidPhaseWindow{w.q, w.begin + 10.0, w.end + 10.0}, 1), Error);
}

TEST_CASE("a constant-envelope carrier without noise is tracked to the true delay") {
  const PnCode code = generate_code(CodeKind::T4B, 100, 0);
  for (double frac : {0.2, -0.45, 0.45, -0.05}) {
    ReceiverConfig cfg = receiver_config(ReceiverMode::GenieAided, code);
    cfg.constellation = make_custom_constellation({cd(1.0, 0.0)});
    cfg.pulse = rectangular_pulse(1.0 / kRs, kFs);
    cfg.demodulate = false;
    const double tau = frac * kTc;
    const std::vector<std::uint32_t> labels(36000, 0);
    const SampleStream y = link_signal(cfg.constellation, cfg.pulse, labels, code, tau);
    const ReceiverRun run = run_receiver(y, cfg, labels, tau);
    CAPTURE(frac);
    REQUIRE(run.tau_trajectory.size() > 1000);
    CHECK(run.settle_boundaries > 0);
    for (double t : run.tau_trajectory) CHECK(std::abs(wrap_chip((t - tau) / kTc)) < 1e-4);
    CHECK(run.report.n_bits == 0);  // genie without decisions reports no BER
  }
}

TEST_CASE("without noise, qpsk tracking jitter stays under the envelope self-noise floor") {
  // |x_tm|^2 fluctuates, so even the noiseless loop has a floor of
  // B_L sigma2_P Tc / 8 (about 1.5e-5 chip^2 for QPSK, roll-off 0.2, 1.5 kHz).
  const PnCode code = generate_code(CodeKind::T4B, 100, 0);
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  ReceiverConfig cfg = receiver_config(ReceiverMode::GenieAided, code);
  cfg.demodulate = false;
  const double tau = 0.2 * kTc;
  const auto labels = random_labels(600000, 2, 9);
  const SampleStream y = link_signal(c, cfg.pulse, labels, code, tau);
  const ReceiverRun run = run_receiver(y, cfg, labels, tau);
  const double floor = jitter_bound(JitterBoundInputs{ranging_power(kM, code), 0.0, 1500.0, kTc, 0.240}).bound_norm;
  CHECK(run.report.jitter_var_norm > 0.2 * floor);
  CHECK(run.report.jitter_var_norm < floor);
  for (double t : run.tau_trajectory) CHECK(std::abs(wrap_chip((t - tau) / kTc)) < 0.03);
}

TEST_CASE("noiseless end-to-end tracking decides every symbol correctly") {
  const PnCode code = generate_code(CodeKind::T4B, 100, 0);
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  ReceiverConfig cfg = receiver_config(ReceiverMode::EndToEnd, code);
  const double tau = -0.3 * kTc;
  const auto labels = random_labels(36000, 2, 10);
  const SampleStream y = link_signal(c, cfg.pulse, labels, code, tau);
  const ReceiverRun run = run_receiver(y, cfg, labels, tau);
  CHECK(run.report.n_bits > 15000);
  CHECK(run.report.ber == 0.0);
  CHECK(std::abs(wrap_chip((run.tau_trajectory.back() - tau) / kTc)) < 0.03);
  CHECK(run.report.mode == "end-to-end");
}

TEST_CASE("the genie trajectory does not depend on the processing block size") {
  const PnCode code = generate_code(CodeKind::T4B, 100, 0);
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  const auto labels = random_labels(30000, 2, 11);
  ReceiverConfig cfg = receiver_config(ReceiverMode::GenieAided, code);
  cfg.demodulate = false;
  const double tau = 0.1 * kTc;
  SampleStream y = link_signal(c, cfg.pulse, labels, code, tau);
  y = add_awgn(y, NoiseSpec{n0_from_pn0bl(30.0, ranging_power(kM, code), 1500.0), 12});
  cfg.block_symbols = 1024;
  const ReceiverRun a = run_receiver(y, cfg, labels, tau);
  cfg.block_symbols = 37;
  const ReceiverRun b = run_receiver(y, cfg, labels, tau);
  REQUIRE(a.tau_trajectory.size() == b.tau_trajectory.size());
  // Window positions are taken relative to the trimmed buffer, so only
  // rounding may differ.
  double worst = 0.0;
  for (std::size_t i = 0; i < a.tau_trajectory.size(); ++i) {
    worst = std::max(worst, std::abs(a.tau_trajectory[i] - b.tau_trajectory[i]));
  }
  CHECK(worst < 1e-9 * kTc);
  CHECK(a.report.jitter_var_norm > 0.0);
}

TEST_CASE("the receiver refuses streams shorter than the settling time") {
  const PnCode code = generate_code(CodeKind::T4B, 100, 0);
  const Constellation c = build_constellation(ConstellationId::Qpsk);
  ReceiverConfig cfg = receiver_config(ReceiverMode::GenieAided, code);
  const auto labels = random_labels(1000, 2, 13);
  const SampleStream y = link_signal(c, cfg.pulse, labels, code, 0.0);
  CHECK_THROWS_WITH_AS(run_receiver(y, cfg, labels), doctest::Contains("settling"), Error);
  CHECK_THROWS_AS(run_receiver(y, cfg), Error);
  CHECK(settling_time(cfg.ctl) == doctest::Approx(10.0 / 1500.0));
}
