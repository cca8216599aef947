#include "tmrange/receiver.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <numbers>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

constexpr double kPi = std::numbers::pi;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int transition_at(const PnCode& code, std::int64_t k) {
  return (code.chip(k) - code.chip(k - 1)) / 2;
}

// conj(exp(j m s(t - offset Tc))) on samples [n_begin, n_begin + out.size()).
void replica_conj(const PnCode& code, double m_rg, double chip_period, double sample_rate,
                  double offset_chips, std::int64_t n_begin, std::span<cd> out) {
  const double spc = chip_period * sample_rate;
  std::int64_t cached_k = std::numeric_limits<std::int64_t>::min();
  int chip = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(n_begin + static_cast<std::int64_t>(i)) / spc - offset_chips;
    const double kf = std::floor(x);
    const auto k = static_cast<std::int64_t>(kf);
    if (k != cached_k) {
      chip = code.chip(k);
      cached_k = k;
    }
    out[i] = std::polar(1.0, -m_rg * chip * std::sin(kPi * (x - kf)));
  }
}

}  // namespace

ReceiverMode parse_receiver_mode(std::string_view s) {
  if (s == "genie" || s == "genie-aided") return ReceiverMode::GenieAided;
  if (s == "end-to-end" || s == "e2e") return ReceiverMode::EndToEnd;
  throw Error("unsupported receiver mode: '" + std::string(s) + "'");
}

std::string to_string(ReceiverMode mode) {
  return mode == ReceiverMode::GenieAided ? "genie" : "end-to-end";
}

SampleStream wipe_ranging(const SampleStream& y, const PnCode& code, const RangingParams& params,
                          double tau_hat) {
  if (!std::isfinite(tau_hat)) throw Error("wipe_ranging: tau_hat must be finite");
  SampleStream out = y;
  const double tc = params.chip_period();
  for (std::size_t n = 0; n < y.size(); ++n) {
    out.samples[n] *= std::conj(ranging_phasor(code, params.m_rg, tc, y.time_of(n) - tau_hat));
  }
  return out;
}

DemodResult demod_remod(const SampleStream& x_hat, const Constellation& c, const ShapingPulse& pulse,
                        ReceiverMode mode, std::span<const std::uint32_t> truth) {
  if (mode == ReceiverMode::GenieAided && truth.empty()) {
    throw Error("demod_remod: genie mode requires the true symbols");
  }
  const int sps = pulse.integer_sps();
  if (sps == 0) throw Error("demod_remod: needs integer samples per symbol");
  const double fs = x_hat.sample_rate;
  const double n0f = x_hat.t0 * fs;
  const double n0r = std::round(n0f);
  if (std::abs(n0f - n0r) > 1e-6) throw Error("demod_remod: t = 0 must fall on a sample");
  const auto n_first = static_cast<std::int64_t>(n0r);
  const auto n_end = n_first + static_cast<std::int64_t>(x_hat.size());
  const auto center = static_cast<std::int64_t>(pulse.center);
  const auto tail = static_cast<std::int64_t>(pulse.taps.size()) - 1 - center;

  DemodResult r;
  SymbolBuffer remod;
  remod.first = 0;
  if (mode == ReceiverMode::GenieAided) {
    remod.symbols = map_labels(c, truth);
    // Decisions are still reported for symbols fully covered by the input.
  }
  // Symbols whose matched-filter support lies inside the stream.
  const std::int64_t k_lo = std::max<std::int64_t>(0, floor_div(n_first + center + sps - 1, sps));
  const std::int64_t k_hi = floor_div(n_end - 1 - tail, sps);
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    if (mode == ReceiverMode::GenieAided && k >= static_cast<std::int64_t>(truth.size())) break;
    const cd z = matched_filter_at(pulse, x_hat.samples, n_first, k);
    const std::uint32_t label = decide_index(c, z);
    r.labels.push_back(label);
    label_to_bits(label, c.bits_per_symbol, r.bits);
    if (mode == ReceiverMode::EndToEnd) {
      if (remod.symbols.empty()) remod.first = k;
      remod.symbols.push_back(c.points[label]);
    }
  }
  r.x_conj.sample_rate = fs;
  r.x_conj.t0 = x_hat.t0;
  r.x_conj.samples.resize(x_hat.size());
  synthesize_samples(pulse, remod, n_first, r.x_conj.samples);
  for (cd& v : r.x_conj.samples) v = std::conj(v);
  return r;
}

SampleStream wipe_telemetry(const SampleStream& y, const SampleStream& x_conj) {
  if (y.size() != x_conj.size()) throw Error("wipe_telemetry: length mismatch");
  if (std::abs(y.sample_rate - x_conj.sample_rate) > 1e-9 * y.sample_rate) {
    throw Error("wipe_telemetry: sample rate mismatch");
  }
  SampleStream out = y;
  for (std::size_t n = 0; n < y.size(); ++n) out.samples[n] *= x_conj.samples[n];
  return out;
}

double CtlState::tau_hat(double chip_period) const { return wrap_chip(code_offset) * chip_period; }

ChipTrackingLoop make_tracking_loop(const CtlConfig& cfg, double sample_rate, double detector_gain) {
  if (!(sample_rate > 0.0)) throw Error("tracking loop: sample rate must be positive");
  ChipTrackingLoop loop;
  loop.cfg = cfg;
  loop.sample_rate = sample_rate;
  loop.detector_gain = detector_gain;
  loop.coeffs = loop_filter_design(cfg, detector_gain);
  return loop;
}

double integrate_window(std::span<const double> s, double a, double b) {
  if (!(a <= b)) throw Error("integrate_window: reversed interval");
  const auto n = static_cast<std::int64_t>(s.size());
  if (a < 0.0 || b > static_cast<double>(n - 1)) throw Error("integrate_window: interval outside samples");
  auto value = [&](double x) {
    const auto i = std::min<std::int64_t>(static_cast<std::int64_t>(x), n - 2);
    const double f = x - static_cast<double>(i);
    return s[static_cast<std::size_t>(i)] * (1.0 - f) + s[static_cast<std::size_t>(i + 1)] * f;
  };
  // Midpoint rule on the cells [i - 1/2, i + 1/2); the partial edge cells
  // use the interpolated value at their own midpoint.
  const auto ia = static_cast<std::int64_t>(std::floor(a + 0.5));
  const auto ib = static_cast<std::int64_t>(std::floor(b + 0.5));
  if (ia == ib) return value(0.5 * (a + b)) * (b - a);
  const double ea = static_cast<double>(ia) + 0.5;
  const double eb = static_cast<double>(ib) - 0.5;
  double acc = value(0.5 * (a + ea)) * (ea - a) + value(0.5 * (eb + b)) * (b - eb);
  for (std::int64_t i = ia + 1; i < ib; ++i) acc += s[static_cast<std::size_t>(i)];
  return acc;
}

CtlState ctl_step(const CtlState& state, const ChipTrackingLoop& loop, const MidPhaseWindow& w,
                  int transition) {
  const double spc = loop.samples_per_chip();
  if (transition < -1 || transition > 1) throw Error("ctl_step: transition must be -1, 0 or +1");
  if (!(std::abs((w.end - w.begin) - spc) <= 1e-6 * spc)) {
    throw Error("ctl_step: window must span exactly one chip");
  }
  if (w.begin < 0.0 || w.end > static_cast<double>(w.samples.size()) - 1.0) {
    throw Error("ctl_step: window outside the supplied samples");
  }
  CtlState next = state;
  double d = 0.0;
  if (transition != 0) {
    d = transition * integrate_window(w.samples, w.begin, w.end) / (w.end - w.begin);
  }
  next.integrator += loop.coeffs.ki * d;
  next.code_offset -= loop.coeffs.kp * d + next.integrator;
  next.last_error = d;
  next.chip_index += 1;
  return next;
}

// ---------------------------------------------------------------------------

Receiver::Receiver(ReceiverConfig cfg, std::int64_t first_sample) : cfg_(std::move(cfg)) {
  sps_ = cfg_.pulse.integer_sps();
  if (sps_ == 0) throw Error("receiver: needs integer samples per symbol");
  if (std::abs(cfg_.pulse.sample_rate - cfg_.sample_rate) > 1e-9 * cfg_.sample_rate) {
    throw Error("receiver: pulse and stream sample rates differ");
  }
  if (cfg_.block_symbols < 1) throw Error("receiver: block_symbols must be >= 1");
  if (std::abs(cfg_.ranging.chip_rate - cfg_.ctl.chip_rate) > 1e-9 * cfg_.ctl.chip_rate) {
    throw Error("receiver: ranging and loop chip rates differ");
  }
  double gain = cfg_.detector_gain;
  if (gain <= 0.0) gain = detector_gain(ranging_power(cfg_.ranging.m_rg, cfg_.code));
  loop_ = make_tracking_loop(cfg_.ctl, cfg_.sample_rate, gain);

  center_ = static_cast<std::int64_t>(cfg_.pulse.center);
  tail_ = static_cast<std::int64_t>(cfg_.pulse.taps.size()) - 1 - center_;
  chip_period_ = cfg_.ranging.chip_period();
  spc_ = loop_.samples_per_chip();

  y_base_ = first_sample;
  received_end_ = first_sample;
  cancel_next_ = first_sample;
  q_base_ = first_sample;
  // First symbol whose matched filter lies entirely inside the stream.
  decided_end_ = floor_div(first_sample + center_ + sps_ - 1, sps_);
  symbols_.first = 0;
  truth_end_ = 0;

  state_.code_offset = cfg_.initial_tau / chip_period_;
  // First boundary whose window starts inside the stream.
  state_.chip_index =
      static_cast<std::int64_t>(std::ceil(static_cast<double>(first_sample) / spc_ + 0.5 - state_.code_offset));
  pending_trajectory_.first_boundary = state_.chip_index;
  pending_decisions_.first_symbol = decided_end_;
}

void Receiver::push_truth(std::span<const std::uint32_t> labels) {
  if (cfg_.mode != ReceiverMode::GenieAided) return;
  for (auto l : labels) {
    if (l >= cfg_.constellation.size()) throw Error("receiver: truth label out of range");
    symbols_.symbols.push_back(cfg_.constellation.points[l]);
  }
  truth_end_ += static_cast<std::int64_t>(labels.size());
}

void Receiver::push(std::span<const cd> y) {
  y_.insert(y_.end(), y.begin(), y.end());
  received_end_ += static_cast<std::int64_t>(y.size());
  const bool decide = cfg_.mode == ReceiverMode::EndToEnd || cfg_.demodulate;
  if (decide) {
    wipe_new_samples(y.size());
    decide_ready_symbols();
  }
  cancel_ready_samples();
  track();
  trim();
}

void Receiver::wipe_new_samples(std::size_t count) {
  const std::size_t old = ytm_.size();
  ytm_.resize(old + count);
  const std::int64_t n_begin = y_base_ + static_cast<std::int64_t>(old);
  replica_conj(cfg_.code, cfg_.ranging.m_rg, chip_period_, cfg_.sample_rate, state_.code_offset, n_begin,
               std::span<cd>(ytm_).subspan(old));
  for (std::size_t i = old; i < ytm_.size(); ++i) ytm_[i] *= y_[i];
}

void Receiver::decide_ready_symbols() {
  const auto& c = cfg_.constellation;
  while (decided_end_ * sps_ + tail_ < received_end_) {
    if (cfg_.mode == ReceiverMode::GenieAided && decided_end_ >= truth_end_) break;
    const cd z = matched_filter_at(cfg_.pulse, ytm_, y_base_, decided_end_);
    const std::uint32_t label = decide_index(c, z);
    if (pending_decisions_.labels.empty()) pending_decisions_.first_symbol = decided_end_;
    pending_decisions_.labels.push_back(label);
    if (cfg_.mode == ReceiverMode::EndToEnd) {
      if (symbols_.symbols.empty()) symbols_.first = decided_end_;
      symbols_.symbols.push_back(c.points[label]);
    }
    ++decided_end_;
  }
}

void Receiver::cancel_ready_samples() {
  const std::int64_t sym_end = cfg_.mode == ReceiverMode::GenieAided ? truth_end_ : decided_end_;
  // Sample n needs every symbol k <= floor((n + center) / sps).
  const std::int64_t limit = std::min(received_end_, sym_end * sps_ - center_);
  if (limit <= cancel_next_) return;
  const auto count = static_cast<std::size_t>(limit - cancel_next_);
  scratch_.resize(count);
  synthesize_samples(cfg_.pulse, symbols_, cancel_next_, scratch_);
  const std::size_t off = static_cast<std::size_t>(cancel_next_ - y_base_);
  const std::size_t q_old = q_.size();
  q_.resize(q_old + count);
  for (std::size_t i = 0; i < count; ++i) {
    const cd v = y_[off + i] * std::conj(scratch_[i]);
    q_[q_old + i] = v.imag();
  }
  cancel_next_ = limit;
}

void Receiver::track() {
  for (;;) {
    const double pos = (static_cast<double>(state_.chip_index) + state_.code_offset) * spc_;
    const double begin = pos - 0.5 * spc_ - static_cast<double>(q_base_);
    const double end = begin + spc_;
    if (begin < 0.0) {
      throw Error("receiver: tracking window fell behind the retained samples");
    }
    if (end > static_cast<double>(q_.size()) - 1.0) break;
    if (pending_trajectory_.tau_hat.empty()) pending_trajectory_.first_boundary = state_.chip_index;
    pending_trajectory_.tau_hat.push_back(state_.tau_hat(chip_period_));
    const MidPhaseWindow w{q_, begin, end};
    state_ = ctl_step(state_, loop_, w, transition_at(cfg_.code, state_.chip_index));
  }
}

void Receiver::trim() {
  constexpr std::int64_t kSlack = 1 << 15;
  // Matched filter reads from decided_end * sps - center onward.
  const bool deciding = cfg_.mode == ReceiverMode::EndToEnd || cfg_.demodulate;
  std::int64_t y_keep = cancel_next_ - 1;
  if (deciding) y_keep = std::min(y_keep, decided_end_ * sps_ - center_ - 1);
  if (y_keep - y_base_ > kSlack) {
    const auto drop = static_cast<std::size_t>(y_keep - y_base_);
    y_.erase(y_.begin(), y_.begin() + static_cast<std::ptrdiff_t>(drop));
    if (!ytm_.empty()) ytm_.erase(ytm_.begin(), ytm_.begin() + static_cast<std::ptrdiff_t>(drop));
    y_base_ = y_keep;
  }
  // Remodulation needs symbols from ceil((n - tail) / sps) for n >= cancel_next.
  symbols_.discard_before(floor_div(cancel_next_ - tail_, sps_) - 1);
  // Keep a few chips behind the next tracking window.
  const double pos = (static_cast<double>(state_.chip_index) + state_.code_offset - 4.0) * spc_;
  const auto q_keep = static_cast<std::int64_t>(std::floor(pos));
  if (q_keep - q_base_ > kSlack) {
    const auto drop = static_cast<std::size_t>(q_keep - q_base_);
    q_.erase(q_.begin(), q_.begin() + static_cast<std::ptrdiff_t>(drop));
    q_base_ = q_keep;
  }
}

Receiver::Decisions Receiver::take_decisions() {
  Decisions d = std::move(pending_decisions_);
  pending_decisions_ = {};
  pending_decisions_.first_symbol = decided_end_;
  return d;
}

Receiver::Trajectory Receiver::take_trajectory() {
  Trajectory t = std::move(pending_trajectory_);
  pending_trajectory_ = {};
  pending_trajectory_.first_boundary = state_.chip_index;
  return t;
}

double settling_time(const CtlConfig& cfg) { return 10.0 / cfg.loop_bandwidth; }

ReceiverRun run_receiver(const SampleStream& y, const ReceiverConfig& cfg,
                         std::span<const std::uint32_t> truth, std::optional<double> tau_true) {
  if (cfg.mode == ReceiverMode::GenieAided && truth.empty()) {
    throw Error("run_receiver: genie mode requires the true symbols");
  }
  validate(cfg.ctl);
  const double fs = y.sample_rate;
  const double settle = settling_time(cfg.ctl);
  if (static_cast<double>(y.size()) / fs < settle) {
    throw Error("run_receiver: stream shorter than the loop settling time 10/B_L");
  }
  const double n0f = y.t0 * fs;
  const double n0r = std::round(n0f);
  if (std::abs(n0f - n0r) > 1e-6) throw Error("run_receiver: t = 0 must fall on a sample");

  Receiver rx(cfg, static_cast<std::int64_t>(n0r));
  rx.push_truth(truth);
  const int sps = cfg.pulse.integer_sps();
  const std::size_t block = static_cast<std::size_t>(cfg.block_symbols) * static_cast<std::size_t>(sps);
  std::vector<std::uint32_t> labels;
  std::int64_t first_label = 0;
  bool have_labels = false;
  std::vector<double> traj;
  std::int64_t first_boundary = 0;
  bool have_traj = false;  // boundary indices may be negative
  for (std::size_t pos = 0; pos < y.size(); pos += block) {
    const std::size_t n = std::min(block, y.size() - pos);
    rx.push(std::span<const cd>(y.samples).subspan(pos, n));
    auto d = rx.take_decisions();
    if (!have_labels && !d.labels.empty()) {
      first_label = d.first_symbol;
      have_labels = true;
    }
    labels.insert(labels.end(), d.labels.begin(), d.labels.end());
    auto t = rx.take_trajectory();
    if (!have_traj && !t.tau_hat.empty()) {
      first_boundary = t.first_boundary;
      have_traj = true;
    }
    traj.insert(traj.end(), t.tau_hat.begin(), t.tau_hat.end());
  }

  ReceiverRun run;
  const double tc = cfg.ranging.chip_period();
  const double t_settle = y.t0 + settle;
  std::int64_t skip = 0;
  if (have_traj) {
    skip = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t_settle / tc)) - first_boundary);
    skip = std::min<std::int64_t>(skip, static_cast<std::int64_t>(traj.size()));
  }
  run.settle_boundaries = skip;
  run.tau_trajectory.assign(traj.begin() + skip, traj.end());

  auto& rep = run.report;
  rep.n_chips = static_cast<std::int64_t>(run.tau_trajectory.size());
  if (!run.tau_trajectory.empty()) {
    rep.jitter_mean_norm = jitter_about_mean(run.tau_trajectory, tc);
    rep.jitter_var_norm =
        tau_true ? jitter_estimate(run.tau_trajectory, *tau_true, tc) : rep.jitter_mean_norm;
  }

  // Labels are reported from the first decided symbol; BER after settling.
  run.labels = labels;
  for (auto l : labels) label_to_bits(l, cfg.constellation.bits_per_symbol, run.bits);
  if (!truth.empty() && have_labels) {
    const double T = cfg.pulse.symbol_period;
    const auto k0 = std::max<std::int64_t>(first_label, static_cast<std::int64_t>(std::ceil(t_settle / T)));
    std::int64_t errors = 0;
    std::int64_t bits = 0;
    for (std::int64_t k = k0; k < first_label + static_cast<std::int64_t>(labels.size()); ++k) {
      if (k >= static_cast<std::int64_t>(truth.size())) break;
      const std::uint32_t diff = labels[static_cast<std::size_t>(k - first_label)] ^ truth[static_cast<std::size_t>(k)];
      errors += std::popcount(diff);
      bits += cfg.constellation.bits_per_symbol;
    }
    rep.n_bits = bits;
    rep.ber = bits > 0 ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0;
  }
  rep.ranging_power = ranging_power(cfg.ranging.m_rg, cfg.code);
  rep.constellation = to_string(cfg.constellation.id);
  rep.rolloff = cfg.pulse.rolloff;
  rep.symbol_rate = 1.0 / cfg.pulse.symbol_period;
  rep.chip_rate = cfg.ranging.chip_rate;
  rep.sample_rate = fs;
  rep.m_rg = cfg.ranging.m_rg;
  rep.code = to_string(cfg.code.kind);
  rep.loop_bandwidth = cfg.ctl.loop_bandwidth;
  rep.loop_order = to_string(cfg.ctl.order);
  rep.damping = cfg.ctl.damping;
  rep.mode = to_string(cfg.mode);
  rep.tau_true = tau_true ? std::to_string(*tau_true) : "unknown";
  rep.trials = 1;
  return run;
}

}  // namespace tmrange
