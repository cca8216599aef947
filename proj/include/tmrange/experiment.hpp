#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tmrange/analysis.hpp"
#include "tmrange/constellation.hpp"
#include "tmrange/loop_filter.hpp"
#include "tmrange/pn_code.hpp"
#include "tmrange/receiver.hpp"
#include "tmrange/waveform.hpp"

namespace tmrange {

/// Parameters of one sweep. Defaults are the 4.2 Msym/s, 3 Mchip/s
/// operating point with QPSK, roll-off 0.2, T4B and a 1.5 kHz loop.
///
/// `constellation` also accepts "constant": a one-point alphabet with a
/// rectangular pulse, i.e. a unit-envelope telemetry carrier.
struct ExperimentConfig {
  std::string constellation = "qpsk";
  double rolloff = 0.2;
  double symbol_rate = 4.2e6;
  double chip_rate = 3e6;
  double sample_rate = 25.2e6;
  int span = 16;
  double m_rg = 0.444;
  std::string code = "t4b";
  double loop_bandwidth = 1500.0;
  std::string loop_order = "second";
  double damping = 0.7071067811865476;
  std::string mode = "genie";
  std::string axis = "pn0bl";
  std::vector<double> snr_db = {20, 25, 30, 35, 40, 45, 50};
  std::optional<double> tau_true;  // seconds; empty draws one per trial
  std::int64_t n_symbols = 0;      // per trial; 0 sizes it from B_L
  int trials = 10;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  int block_symbols = 1024;
  bool demodulate = false;  // genie mode only; end-to-end always decides
  std::string output;       // empty: stdout
  std::string format = "csv";
};

/// Sets one field from its textual value; throws naming the field.
void set_field(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` text, '#' starts a comment.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

/// Throws naming the offending field; also enforces Tc != nT.
void validate(const ExperimentConfig& cfg);

/// Symbols per trial actually simulated (resolves n_symbols = 0).
std::int64_t symbols_per_trial(const ExperimentConfig& cfg);

Constellation experiment_constellation(const ExperimentConfig& cfg);
ShapingPulse experiment_pulse(const ExperimentConfig& cfg);
CtlConfig experiment_ctl(const ExperimentConfig& cfg);

/// Noiseless transmitted signal x_tm(t) r(t - tau) over n_symbols symbols,
/// sample n at t = n / fs, symbol k centred on n = k * sps. m_rg = 0 gives
/// the telemetry alone.
SampleStream transmit_stream(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed,
                             double tau = 0.0);

/// 99% occupied bandwidth of the noiseless transmitted signal at cfg.m_rg
/// (0 allowed), one filter span trimmed from each end.
double experiment_obw(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed);

/// Monte Carlo sigma2_P of the configured telemetry.
double experiment_sigma2_p(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed);

/// Per-trial link outcome.
struct TrialResult {
  double tau_true = 0.0;
  std::int64_t n_chips = 0;  // boundaries after settling
  double sum_sq = 0.0;       // sum of wrapped ((tau_hat - tau) / Tc)^2
  double sum_err = 0.0;      // sum of the wrapped errors
  std::vector<double> batch_means;
  std::int64_t n_bits = 0;
  std::int64_t bit_errors = 0;
};

/// One trial at one sweep point: streaming transmitter, channel and
/// closed-loop receiver. Seeds depend on (seed, trial) only, so runs that
/// differ in mode or SNR share symbols, noise shape, delay and code phase.
TrialResult run_trial(const ExperimentConfig& cfg, double snr_db, int trial);

/// Noise density of a sweep point for the configured axis.
double point_n0(const ExperimentConfig& cfg, double snr_db);

/// All sweep points, aggregated over trials. Deterministic for a given
/// config regardless of the thread count.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Output.

using FieldValue = std::variant<double, std::int64_t, std::string>;

struct Record {
  std::vector<std::pair<std::string, FieldValue>> fields;

  void add(std::string key, FieldValue v) { fields.emplace_back(std::move(key), std::move(v)); }
};

enum class OutputFormat { Csv, JsonLines };

OutputFormat parse_output_format(std::string_view s);

/// Column order: snr_db, axis, jitter_var_norm, jitter_ci, jitter_bound_norm,
/// jitter_theory_norm, ber, ber_ci, ber_theory, obw_hz, n_bits, n_chips,
/// then secondary metrics and the config echo.
Record to_record(const RunReport& r);
RunReport report_from_record(const Record& rec);

/// Writes a header row (CSV) and one line per record. All records must
/// share the first record's keys.
void emit(std::ostream& os, const std::vector<Record>& records, OutputFormat fmt);
void emit_to_path(const std::string& path, const std::vector<Record>& records, OutputFormat fmt);

/// Inverse of emit(). CSV values come back as strings unless they parse
/// as numbers.
std::vector<Record> parse_records(std::string_view text, OutputFormat fmt);

}  // namespace tmrange
