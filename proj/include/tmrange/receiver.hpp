#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmrange/analysis.hpp"
#include "tmrange/constellation.hpp"
#include "tmrange/loop_filter.hpp"
#include "tmrange/pn_code.hpp"
#include "tmrange/waveform.hpp"

namespace tmrange {

enum class ReceiverMode { GenieAided, EndToEnd };

ReceiverMode parse_receiver_mode(std::string_view s);
std::string to_string(ReceiverMode mode);

// ---------------------------------------------------------------------------
// Cancellation stages on whole streams.

/// y(t) r*(t - tau_hat): removes the ranging phase using a locally generated
/// replica of `code` (chip 0 starting at t = 0).
SampleStream wipe_ranging(const SampleStream& y, const PnCode& code, const RangingParams& params,
                          double tau_hat);

struct DemodResult {
  std::vector<std::uint32_t> labels;  // hard decisions (empty in genie mode without demod)
  std::vector<std::uint8_t> bits;
  SampleStream x_conj;                // conj of the remodulated telemetry, same grid as the input
};

/// Matched filter, symbol-rate sampling and hard decision, then
/// re-synthesis of the telemetry from the decisions (or from `truth` in
/// genie mode). Symbol k is centred at t = kT; the input grid must place
/// t = 0 on a sample and carry an integer number of samples per symbol.
DemodResult demod_remod(const SampleStream& x_hat, const Constellation& c, const ShapingPulse& pulse,
                        ReceiverMode mode, std::span<const std::uint32_t> truth = {});

/// y(t) x*_tm(t). No envelope normalization: |x_tm|^2 averages to one in the loop.
SampleStream wipe_telemetry(const SampleStream& y, const SampleStream& x_conj);

// ---------------------------------------------------------------------------
// Chip tracking loop.

/// Estimate state. The local replica's chip boundary k sits at
/// (k + code_offset) Tc; code_offset is kept unwrapped so a slip of a whole
/// chip stays visible, tau_hat() reports it wrapped to [-Tc/2, Tc/2).
struct CtlState {
  double code_offset = 0.0;  // chips
  double integrator = 0.0;
  std::int64_t chip_index = 0;  // next boundary to process
  double last_error = 0.0;      // detector output of the last step

  double tau_hat(double chip_period) const;
};

struct ChipTrackingLoop {
  CtlConfig cfg;
  double sample_rate = 0.0;
  double detector_gain = 0.0;  // K_eps
  LoopFilterCoefficients coeffs;

  double samples_per_chip() const { return sample_rate / cfg.chip_rate; }
};

ChipTrackingLoop make_tracking_loop(const CtlConfig& cfg, double sample_rate, double detector_gain);

/// Imaginary part of the cancelled signal around one chip boundary.
/// [begin, end] are fractional positions into `samples`, one chip apart.
struct MidPhaseWindow {
  std::span<const double> samples;
  double begin = 0.0;
  double end = 0.0;
};

/// Integral over [a, b] by the midpoint rule on the sample cells
/// [i - 1/2, i + 1/2); partial edge cells take the linearly interpolated
/// value at their own midpoint. Positions are in samples.
double integrate_window(std::span<const double> samples, double a, double b);

/// Integrate-and-dump over the window, sign correction by the transition
/// d_k in {-1, 0, +1}, loop filter, NCO update. With d_k = 0 only the
/// integrator path moves the estimate.
CtlState ctl_step(const CtlState& state, const ChipTrackingLoop& loop, const MidPhaseWindow& window,
                  int transition);

// ---------------------------------------------------------------------------
// Closed-loop receiver.

struct ReceiverConfig {
  Constellation constellation;
  ShapingPulse pulse;
  PnCode code;            // local replica
  RangingParams ranging;  // m_rg and chip_rate; tau_rg is unknown to the receiver
  CtlConfig ctl;
  ReceiverMode mode = ReceiverMode::EndToEnd;
  double sample_rate = 25.2e6;
  int block_symbols = 1024;
  bool demodulate = true;  // genie mode may skip the telemetry decisions
  double initial_tau = 0.0;
  /// Detector gain K_eps; 0 derives it from the ranging power of the
  /// local replica.
  double detector_gain = 0.0;
};

/// Streaming receiver. Samples are indexed on the absolute grid
/// t_n = n / sample_rate, telemetry symbol k centred on n = k * sps.
/// Per pushed chunk: ranging wipe-off with the current estimate, matched
/// filter and decisions, remodulation and telemetry wipe-off, then one
/// tracking-loop step per chip boundary whose window is complete.
class Receiver {
 public:
  explicit Receiver(ReceiverConfig cfg, std::int64_t first_sample = 0);

  /// Genie symbols (labels), continuing the symbol index from previous calls.
  void push_truth(std::span<const std::uint32_t> labels);
  /// Next received samples, continuing the sample index.
  void push(std::span<const cd> y);

  struct Decisions {
    std::int64_t first_symbol = 0;
    std::vector<std::uint32_t> labels;
  };
  struct Trajectory {
    std::int64_t first_boundary = 0;
    std::vector<double> tau_hat;  // seconds, wrapped; estimate used at each boundary
  };
  /// Drain outputs produced since the previous call.
  Decisions take_decisions();
  Trajectory take_trajectory();

  const CtlState& state() const { return state_; }
  const ChipTrackingLoop& loop() const { return loop_; }
  const ReceiverConfig& config() const { return cfg_; }

 private:
  void wipe_new_samples(std::size_t count);
  void decide_ready_symbols();
  void cancel_ready_samples();
  void track();
  void trim();

  ReceiverConfig cfg_;
  ChipTrackingLoop loop_;
  CtlState state_;
  int sps_ = 0;
  std::int64_t center_ = 0;
  std::int64_t tail_ = 0;  // taps after the centre
  double chip_period_ = 0.0;
  double spc_ = 0.0;

  std::int64_t y_base_ = 0;
  std::vector<cd> y_;
  std::vector<cd> ytm_;
  std::int64_t received_end_ = 0;

  SymbolBuffer symbols_;  // decided (or genie) symbols used for remodulation
  std::int64_t truth_end_ = 0;
  std::int64_t decided_end_ = 0;

  std::int64_t cancel_next_ = 0;
  std::int64_t q_base_ = 0;
  std::vector<double> q_;  // Im(y x*)
  std::vector<cd> scratch_;

  Decisions pending_decisions_;
  Trajectory pending_trajectory_;
};

struct ReceiverRun {
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> bits;
  std::vector<double> tau_trajectory;  // seconds, after the settling transient
  std::int64_t settle_boundaries = 0;
  RunReport report;
};

/// Runs the closed loop over a whole received stream. Requires the stream
/// to last at least 10 / B_L. Genie mode needs `truth`; when `truth` is
/// given the report carries the BER, when `tau_true` is given the jitter is
/// measured about it (else about the trajectory mean).
ReceiverRun run_receiver(const SampleStream& y, const ReceiverConfig& cfg,
                         std::span<const std::uint32_t> truth = {},
                         std::optional<double> tau_true = std::nullopt);

/// Settling time excluded from statistics, 10 / B_L.
double settling_time(const CtlConfig& cfg);

}  // namespace tmrange
