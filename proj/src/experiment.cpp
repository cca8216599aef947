#include "tmrange/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tmrange/channel.hpp"
#include "tmrange/error.hpp"

namespace tmrange {

namespace {

constexpr double kPi = std::numbers::pi;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_field(std::string_view key, const std::string& why) {
  throw Error("config field '" + std::string(key) + "': " + why);
}

double to_double(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    bad_field(key, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  v = trim(v);
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec == std::errc() && res.ptr == v.data() + v.size()) return out;
  // Accept integral values written in floating notation, e.g. 1e7.
  const double d = to_double(key, v);
  if (std::floor(d) != d || std::abs(d) > 9e18) bad_field(key, "expected an integer");
  return static_cast<std::int64_t>(d);
}

bool to_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_field(key, "expected true/false");
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (!trim(token).empty()) out.push_back(to_double(key, token));
    token.clear();
  };
  for (char ch : v) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == ';') {
      flush();
    } else if (ch != '[' && ch != ']') {
      token.push_back(ch);
    }
  }
  flush();
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t next_u64(std::uint64_t seed) { return std::mt19937_64(seed)(); }

double uniform01(std::uint64_t seed) {
  return static_cast<double>(next_u64(seed) >> 11) * 0x1.0p-53;
}

bool is_constant(const ExperimentConfig& cfg) { return cfg.constellation == "constant"; }

// exp(j m s(t - tau)) on samples [n_begin, n_begin + out.size()), multiplied in.
void apply_ranging(const PnCode& code, double m_rg, double chip_rate, double fs, double tau,
                   std::int64_t n_begin, std::span<cd> out) {
  std::int64_t cached_k = std::numeric_limits<std::int64_t>::min();
  int chip = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = static_cast<double>(n_begin + static_cast<std::int64_t>(i)) / fs - tau;
    const double x = t * chip_rate;
    const double kf = std::floor(x);
    const auto k = static_cast<std::int64_t>(kf);
    if (k != cached_k) {
      chip = code.chip(k);
      cached_k = k;
    }
    out[i] *= std::polar(1.0, m_rg * chip * std::sin(kPi * (x - kf)));
  }
}

PnCode trial_code(const ExperimentConfig& cfg, std::uint64_t seed) {
  const CodeKind kind = parse_code_kind(cfg.code);
  const std::int64_t period = code_period(kind);
  const auto phase = static_cast<std::int64_t>(next_u64(seed) % static_cast<std::uint64_t>(period));
  return generate_code(kind, 2, phase);
}

double code_ranging_power(const ExperimentConfig& cfg) {
  return ranging_power(cfg.m_rg, generate_code(parse_code_kind(cfg.code), 64, 0));
}

int effective_bits(const Constellation& c) { return std::max(1, c.bits_per_symbol); }

}  // namespace

void set_field(ExperimentConfig& cfg, std::string_view key_in, std::string_view value) {
  std::string key(trim(key_in));
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v(trim(value));
  if (key == "constellation") {
    if (v != "constant") {
      try {
        parse_constellation_id(v);
      } catch (const Error& e) {
        bad_field(key, e.what());
      }
    }
    cfg.constellation = v;
  } else if (key == "rolloff") {
    cfg.rolloff = to_double(key, v);
  } else if (key == "symbol_rate") {
    cfg.symbol_rate = to_double(key, v);
  } else if (key == "chip_rate") {
    cfg.chip_rate = to_double(key, v);
  } else if (key == "sample_rate") {
    cfg.sample_rate = to_double(key, v);
  } else if (key == "span") {
    cfg.span = static_cast<int>(to_int(key, v));
  } else if (key == "m_rg") {
    cfg.m_rg = to_double(key, v);
  } else if (key == "code") {
    try {
      parse_code_kind(v);
    } catch (const Error& e) {
      bad_field(key, e.what());
    }
    cfg.code = v;
  } else if (key == "loop_bandwidth" || key == "bl") {
    cfg.loop_bandwidth = to_double(key, v);
  } else if (key == "loop_order") {
    try {
      cfg.loop_order = to_string(parse_loop_order(v));
    } catch (const Error& e) {
      bad_field(key, e.what());
    }
  } else if (key == "damping") {
    cfg.damping = to_double(key, v);
  } else if (key == "mode") {
    try {
      cfg.mode = to_string(parse_receiver_mode(v));
    } catch (const Error& e) {
      bad_field(key, e.what());
    }
  } else if (key == "axis") {
    if (v != "pn0bl" && v != "ebn0") bad_field(key, "expected pn0bl or ebn0");
    cfg.axis = v;
  } else if (key == "snr" || key == "snr_db") {
    cfg.snr_db = to_list(key, v);
  } else if (key == "tau_true" || key == "tau") {
    if (v == "random") {
      cfg.tau_true.reset();
    } else {
      cfg.tau_true = to_double(key, v);
    }
  } else if (key == "n_symbols") {
    cfg.n_symbols = to_int(key, v);
  } else if (key == "trials") {
    cfg.trials = static_cast<int>(to_int(key, v));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(to_int(key, v));
  } else if (key == "block_symbols") {
    cfg.block_symbols = static_cast<int>(to_int(key, v));
  } else if (key == "demodulate") {
    cfg.demodulate = to_bool(key, v);
  } else if (key == "output") {
    cfg.output = v;
  } else if (key == "format") {
    try {
      parse_output_format(v);
    } catch (const Error& e) {
      bad_field(key, e.what());
    }
    cfg.format = v;
  } else {
    throw Error("unknown config field '" + key + "'");
  }
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_field(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  apply_config_text(cfg, ss.str());
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (!(cfg.symbol_rate > 0.0)) bad_field("symbol_rate", "must be positive");
  if (!(cfg.chip_rate > 0.0)) bad_field("chip_rate", "must be positive");
  if (!(cfg.sample_rate > 0.0)) bad_field("sample_rate", "must be positive");
  const double sps = cfg.sample_rate / cfg.symbol_rate;
  if (std::abs(sps - std::round(sps)) > 1e-9 || sps < 4.0) {
    bad_field("sample_rate", "must be an integer multiple (>= 4) of symbol_rate");
  }
  if (!is_constant(cfg) && !(cfg.rolloff > 0.0 && cfg.rolloff <= 1.0)) {
    bad_field("rolloff", "must lie in (0, 1]");
  }
  if (cfg.span < 8) bad_field("span", "must be >= 8 symbols");
  if (!(cfg.m_rg > 0.0 && cfg.m_rg <= kPi / 2.0)) bad_field("m_rg", "must lie in (0, pi/2]");
  const double ratio = cfg.symbol_rate / cfg.chip_rate;  // Tc / T
  const double n = std::round(ratio);
  if (n >= 1.0 && std::abs(ratio - n) < 1e-9) {
    bad_field("chip_rate", "chip period is an integer multiple of the symbol period (Tc != nT is required)");
  }
  if (!(cfg.loop_bandwidth > 0.0)) bad_field("loop_bandwidth", "must be positive");
  if (cfg.loop_bandwidth > cfg.chip_rate / 100.0) bad_field("loop_bandwidth", "must be <= chip_rate/100");
  if (!(cfg.damping > 0.0)) bad_field("damping", "must be positive");
  if (cfg.snr_db.empty()) bad_field("snr", "sweep is empty");
  for (double s : cfg.snr_db) {
    if (!std::isfinite(s)) bad_field("snr", "values must be finite");
  }
  if (cfg.tau_true) {
    const double tc = 1.0 / cfg.chip_rate;
    if (!(*cfg.tau_true >= -0.5 * tc && *cfg.tau_true < 0.5 * tc)) {
      bad_field("tau_true", "must lie in [-Tc/2, Tc/2)");
    }
  }
  if (cfg.n_symbols < 0) bad_field("n_symbols", "must be >= 0");
  if (cfg.trials < 1) bad_field("trials", "must be >= 1");
  if (cfg.threads < 0) bad_field("threads", "must be >= 0");
  if (cfg.block_symbols < 1) bad_field("block_symbols", "must be >= 1");
  if (cfg.n_symbols > 0 &&
      static_cast<double>(cfg.n_symbols) / cfg.symbol_rate < 10.0 / cfg.loop_bandwidth) {
    bad_field("n_symbols", "trial shorter than the loop settling time 10/B_L");
  }
}

std::int64_t symbols_per_trial(const ExperimentConfig& cfg) {
  if (cfg.n_symbols > 0) return cfg.n_symbols;
  // Settling plus 100 / B_L seconds of measurement.
  return static_cast<std::int64_t>(std::ceil(110.0 / cfg.loop_bandwidth * cfg.symbol_rate));
}

Constellation experiment_constellation(const ExperimentConfig& cfg) {
  if (is_constant(cfg)) return make_custom_constellation({cd{1.0, 0.0}});
  return build_constellation(parse_constellation_id(cfg.constellation));
}

ShapingPulse experiment_pulse(const ExperimentConfig& cfg) {
  const double T = 1.0 / cfg.symbol_rate;
  if (is_constant(cfg)) return rectangular_pulse(T, cfg.sample_rate);
  return srrc_design(cfg.rolloff, T, cfg.sample_rate, cfg.span);
}

CtlConfig experiment_ctl(const ExperimentConfig& cfg) {
  CtlConfig c;
  c.loop_bandwidth = cfg.loop_bandwidth;
  c.damping = cfg.damping;
  c.chip_rate = cfg.chip_rate;
  c.m_rg = cfg.m_rg;
  c.order = parse_loop_order(cfg.loop_order);
  return c;
}

SampleStream transmit_stream(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed,
                             double tau) {
  if (n_symbols < 1) throw Error("transmit_stream: n_symbols must be >= 1");
  const Constellation c = experiment_constellation(cfg);
  const ShapingPulse pulse = experiment_pulse(cfg);
  const int sps = pulse.integer_sps();
  if (sps == 0) throw Error("transmit_stream: needs integer samples per symbol");
  std::mt19937_64 eng(derive_seed(seed, 0, 1));
  SymbolBuffer syms;
  syms.symbols.resize(static_cast<std::size_t>(n_symbols));
  for (auto& s : syms.symbols) {
    s = c.points[c.bits_per_symbol == 0 ? 0 : static_cast<std::size_t>(eng() >> (64 - c.bits_per_symbol))];
  }
  SampleStream out;
  out.sample_rate = cfg.sample_rate;
  out.samples.resize(static_cast<std::size_t>(n_symbols * sps));
  synthesize_samples(pulse, syms, 0, out.samples);
  if (cfg.m_rg > 0.0) {
    const PnCode code = trial_code(cfg, derive_seed(seed, 0, 4));
    apply_ranging(code, cfg.m_rg, cfg.chip_rate, cfg.sample_rate, tau, 0, out.samples);
  }
  return out;
}

double experiment_obw(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed) {
  SampleStream s = transmit_stream(cfg, n_symbols, seed);
  const ShapingPulse pulse = experiment_pulse(cfg);
  const std::size_t edge = pulse.taps.size();
  if (s.size() <= 2 * edge) throw Error("experiment_obw: too few symbols");
  s.samples.erase(s.samples.end() - static_cast<std::ptrdiff_t>(edge), s.samples.end());
  s.samples.erase(s.samples.begin(), s.samples.begin() + static_cast<std::ptrdiff_t>(edge));
  return occupied_bandwidth(s, 0.99, cfg.symbol_rate);
}

double experiment_sigma2_p(const ExperimentConfig& cfg, std::int64_t n_symbols, std::uint64_t seed) {
  Sigma2pOptions opt;
  opt.symbol_rate = cfg.symbol_rate;
  opt.sample_rate = cfg.sample_rate;
  opt.span = cfg.span;
  opt.shape = is_constant(cfg) ? PulseShape::Rectangular : PulseShape::Srrc;
  return sigma2_p(experiment_constellation(cfg), cfg.rolloff, n_symbols, seed, opt);
}

double point_n0(const ExperimentConfig& cfg, double snr_db) {
  if (cfg.axis == "pn0bl") return n0_from_pn0bl(snr_db, code_ranging_power(cfg), cfg.loop_bandwidth);
  const Constellation c = experiment_constellation(cfg);
  return n0_from_ebn0(snr_db, 1.0 / cfg.symbol_rate, effective_bits(c));
}

TrialResult run_trial(const ExperimentConfig& cfg, double snr_db, int trial) {
  const Constellation c = experiment_constellation(cfg);
  const ShapingPulse pulse = experiment_pulse(cfg);
  const CtlConfig ctl = experiment_ctl(cfg);
  const int sps = pulse.integer_sps();
  const auto center = static_cast<std::int64_t>(pulse.center);
  const auto tail = static_cast<std::int64_t>(pulse.taps.size()) - 1 - center;
  const double fs = cfg.sample_rate;
  const double tc = 1.0 / cfg.chip_rate;
  const auto t = static_cast<std::uint64_t>(trial);

  TrialResult res;
  const PnCode code = trial_code(cfg, derive_seed(cfg.seed, t, 4));
  res.tau_true = cfg.tau_true ? *cfg.tau_true : (uniform01(derive_seed(cfg.seed, t, 3)) - 0.5) * tc;
  const double n0 = point_n0(cfg, snr_db);

  ReceiverConfig rc;
  rc.constellation = c;
  rc.pulse = pulse;
  rc.code = code;
  rc.ranging = RangingParams{cfg.m_rg, cfg.chip_rate, 0.0};
  rc.ctl = ctl;
  rc.mode = parse_receiver_mode(cfg.mode);
  rc.sample_rate = fs;
  rc.block_symbols = cfg.block_symbols;
  rc.demodulate = rc.mode == ReceiverMode::EndToEnd || cfg.demodulate;
  Receiver rx(rc, 0);
  const bool genie = rc.mode == ReceiverMode::GenieAided;

  AwgnSource noise(n0, fs, derive_seed(cfg.seed, t, 2));
  std::mt19937_64 sym_eng(derive_seed(cfg.seed, t, 1));

  const std::int64_t n_sym = symbols_per_trial(cfg);
  const std::int64_t total = n_sym * sps;
  const double settle = settling_time(ctl);
  const auto k_sym_settle = static_cast<std::int64_t>(std::ceil(settle * cfg.symbol_rate));
  const auto k_chip_settle = static_cast<std::int64_t>(std::ceil(settle * cfg.chip_rate));
  // Batches long against the loop memory, for the confidence interval.
  const auto batch_len = static_cast<std::int64_t>(std::ceil(20.0 / cfg.loop_bandwidth * cfg.chip_rate));

  SymbolBuffer tx;
  std::vector<std::uint32_t> truth;
  std::int64_t truth_base = 0;
  std::int64_t generated = 0;
  std::vector<std::uint32_t> fresh;
  const auto block = static_cast<std::int64_t>(cfg.block_symbols) * sps;
  std::vector<cd> buf(static_cast<std::size_t>(block));

  CompensatedSum sum_sq;
  CompensatedSum sum_err;
  double batch_acc = 0.0;
  std::int64_t batch_fill = 0;

  for (std::int64_t n_begin = 0; n_begin < total; n_begin += block) {
    const std::int64_t n = std::min(block, total - n_begin);
    const std::int64_t need = std::min(n_sym, floor_div(n_begin + n - 1 + center, sps) + 1);
    fresh.clear();
    while (generated < need) {
      const std::uint32_t label =
          c.bits_per_symbol == 0 ? 0u : static_cast<std::uint32_t>(sym_eng() >> (64 - c.bits_per_symbol));
      fresh.push_back(label);
      truth.push_back(label);
      tx.symbols.push_back(c.points[label]);
      ++generated;
    }
    if (genie) rx.push_truth(fresh);

    const std::span<cd> out(buf.data(), static_cast<std::size_t>(n));
    synthesize_samples(pulse, tx, n_begin, out);
    apply_ranging(code, cfg.m_rg, cfg.chip_rate, fs, res.tau_true, n_begin, out);
    noise.add_to(out);
    rx.push(out);

    auto dec = rx.take_decisions();
    for (std::size_t i = 0; i < dec.labels.size(); ++i) {
      const std::int64_t k = dec.first_symbol + static_cast<std::int64_t>(i);
      if (k < k_sym_settle || k >= n_sym) continue;
      res.bit_errors += std::popcount(dec.labels[i] ^ truth[static_cast<std::size_t>(k - truth_base)]);
      res.n_bits += c.bits_per_symbol;
    }
    auto traj = rx.take_trajectory();
    for (std::size_t i = 0; i < traj.tau_hat.size(); ++i) {
      if (traj.first_boundary + static_cast<std::int64_t>(i) < k_chip_settle) continue;
      const double e = wrap_chip((traj.tau_hat[i] - res.tau_true) / tc);
      sum_sq.add(e * e);
      sum_err.add(e);
      ++res.n_chips;
      batch_acc += e * e;
      if (++batch_fill == batch_len) {
        res.batch_means.push_back(batch_acc / static_cast<double>(batch_len));
        batch_acc = 0.0;
        batch_fill = 0;
      }
    }

    tx.discard_before(floor_div(n_begin + n - tail, sps) - 1);
    // Truth is needed until the receiver has decided on it.
    const std::int64_t keep = rc.demodulate ? std::max<std::int64_t>(truth_base, dec.first_symbol +
                                                                                     static_cast<std::int64_t>(dec.labels.size()) - 1)
                                            : generated;
    if (keep - truth_base > (1 << 16)) {
      truth.erase(truth.begin(), truth.begin() + (keep - truth_base));
      truth_base = keep;
    }
  }
  res.sum_sq = sum_sq.value();
  res.sum_err = sum_err.value();
  return res;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t n_points = cfg.snr_db.size();
  const auto n_trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t n_tasks = n_points * n_trials;
  std::vector<TrialResult> results(n_tasks);

  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp<int>(threads, 1, static_cast<int>(n_tasks));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        results[i] = run_trial(cfg, cfg.snr_db[i / n_trials], static_cast<int>(i % n_trials));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_tasks;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const Constellation c = experiment_constellation(cfg);
  const double p = code_ranging_power(cfg);
  const double tc = 1.0 / cfg.chip_rate;
  const double T = 1.0 / cfg.symbol_rate;
  const double s2p = experiment_sigma2_p(cfg, 200000, derive_seed(cfg.seed, 0, 5));
  const double obw = experiment_obw(cfg, 1 << 16, derive_seed(cfg.seed, 0, 6));

  std::vector<RunReport> reports;
  for (std::size_t pi = 0; pi < n_points; ++pi) {
    RunReport r;
    r.snr_db = cfg.snr_db[pi];
    r.axis = cfg.axis;
    r.n0 = point_n0(cfg, r.snr_db);
    r.pn0bl_db = 10.0 * std::log10(p / (r.n0 * cfg.loop_bandwidth));
    r.ebn0_db = 10.0 * std::log10(T / (effective_bits(c) * r.n0));

    CompensatedSum sq, err, bmean, bmean2;
    std::int64_t chips = 0, bits = 0, errors = 0, batches = 0;
    for (std::size_t ti = 0; ti < n_trials; ++ti) {
      const TrialResult& tr = results[pi * n_trials + ti];
      sq.add(tr.sum_sq);
      err.add(tr.sum_err);
      chips += tr.n_chips;
      bits += tr.n_bits;
      errors += tr.bit_errors;
      for (double b : tr.batch_means) {
        bmean.add(b);
        bmean2.add(b * b);
        ++batches;
      }
    }
    r.n_chips = chips;
    if (chips > 0) {
      r.jitter_var_norm = sq.value() / static_cast<double>(chips);
      const double m = err.value() / static_cast<double>(chips);
      r.jitter_mean_norm = r.jitter_var_norm - m * m;
    }
    if (batches >= 2) {
      const double nb = static_cast<double>(batches);
      const double mb = bmean.value() / nb;
      const double var = std::max(0.0, (bmean2.value() - nb * mb * mb) / (nb - 1.0));
      r.jitter_ci = 1.96 * std::sqrt(var / nb);
    }
    r.n_bits = bits;
    if (bits > 0) {
      const double nb = static_cast<double>(bits);
      r.ber = static_cast<double>(errors) / nb;
      r.ber_ci = 1.96 * std::sqrt(std::max(r.ber, 1.0 / nb) * (1.0 - r.ber) / nb);
    }
    r.ber_theory = ber_theory(c, r.ebn0_db);
    const JitterBound jb = jitter_bound({p, r.n0, cfg.loop_bandwidth, tc, s2p});
    r.jitter_bound_norm = jb.bound_norm;
    r.jitter_theory_norm = jb.theory_norm;
    r.obw_hz = obw;
    r.ranging_power = p;
    r.sigma2_p = s2p;

    r.constellation = cfg.constellation;
    r.rolloff = cfg.rolloff;
    r.symbol_rate = cfg.symbol_rate;
    r.chip_rate = cfg.chip_rate;
    r.sample_rate = cfg.sample_rate;
    r.m_rg = cfg.m_rg;
    r.code = cfg.code;
    r.loop_bandwidth = cfg.loop_bandwidth;
    r.loop_order = cfg.loop_order;
    r.damping = cfg.damping;
    r.mode = cfg.mode;
    r.tau_true = cfg.tau_true ? format_double(*cfg.tau_true) : "random";
    r.trials = cfg.trials;
    r.seed = cfg.seed;
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---------------------------------------------------------------------------

OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "jsonl" || s == "json-lines" || s == "json") return OutputFormat::JsonLines;
  throw Error("unsupported output format: '" + std::string(s) + "'");
}

Record to_record(const RunReport& r) {
  Record rec;
  rec.add("snr_db", r.snr_db);
  rec.add("axis", r.axis);
  rec.add("jitter_var_norm", r.jitter_var_norm);
  rec.add("jitter_ci", r.jitter_ci);
  rec.add("jitter_bound_norm", r.jitter_bound_norm);
  rec.add("jitter_theory_norm", r.jitter_theory_norm);
  rec.add("ber", r.ber);
  rec.add("ber_ci", r.ber_ci);
  rec.add("ber_theory", r.ber_theory);
  rec.add("obw_hz", r.obw_hz);
  rec.add("n_bits", r.n_bits);
  rec.add("n_chips", r.n_chips);
  rec.add("jitter_mean_norm", r.jitter_mean_norm);
  rec.add("pn0bl_db", r.pn0bl_db);
  rec.add("ebn0_db", r.ebn0_db);
  rec.add("n0", r.n0);
  rec.add("ranging_power", r.ranging_power);
  rec.add("sigma2_p", r.sigma2_p);
  rec.add("constellation", r.constellation);
  rec.add("rolloff", r.rolloff);
  rec.add("symbol_rate", r.symbol_rate);
  rec.add("chip_rate", r.chip_rate);
  rec.add("sample_rate", r.sample_rate);
  rec.add("m_rg", r.m_rg);
  rec.add("code", r.code);
  rec.add("loop_bandwidth", r.loop_bandwidth);
  rec.add("loop_order", r.loop_order);
  rec.add("damping", r.damping);
  rec.add("mode", r.mode);
  rec.add("tau_true", r.tau_true);
  rec.add("trials", r.trials);
  rec.add("seed", static_cast<std::int64_t>(r.seed));
  return rec;
}

namespace {

const FieldValue& field(const Record& rec, const std::string& key) {
  for (const auto& [k, v] : rec.fields) {
    if (k == key) return v;
  }
  throw Error("record has no field '" + key + "'");
}

double get_double(const Record& rec, const std::string& key) {
  const FieldValue& v = field(rec, key);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw Error("record field '" + key + "' is not numeric");
}

std::int64_t get_int(const Record& rec, const std::string& key) {
  const FieldValue& v = field(rec, key);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return static_cast<std::int64_t>(*d);
  throw Error("record field '" + key + "' is not numeric");
}

std::string get_string(const Record& rec, const std::string& key) {
  const FieldValue& v = field(rec, key);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::to_string(std::get<std::int64_t>(v));
}

std::string csv_field(const FieldValue& v) {
  std::string s;
  if (const auto* d = std::get_if<double>(&v)) {
    s = format_double(*d);
  } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
    s = std::to_string(*i);
  } else {
    s = std::get<std::string>(v);
  }
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q.push_back('"');
    q.push_back(ch);
  }
  q.push_back('"');
  return q;
}

nlohmann::json to_json(const FieldValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

FieldValue from_text(const std::string& s, bool quoted) {
  if (quoted || s.empty()) return s;
  std::int64_t i = 0;
  auto ri = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ri.ec == std::errc() && ri.ptr == s.data() + s.size()) return i;
  double d = 0.0;
  auto rd = std::from_chars(s.data(), s.data() + s.size(), d);
  if (rd.ec == std::errc() && rd.ptr == s.data() + s.size()) return d;
  return s;
}

// One CSV record; handles quoted fields spanning lines.
std::vector<std::pair<std::string, bool>> csv_row(std::string_view text, std::size_t& pos) {
  std::vector<std::pair<std::string, bool>> row;
  std::string cur;
  bool quoted = false;
  bool in_quotes = false;
  while (pos < text.size()) {
    const char ch = text[pos++];
    if (in_quotes) {
      if (ch == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur.push_back('"');
          ++pos;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      in_quotes = true;
      quoted = true;
    } else if (ch == ',') {
      row.emplace_back(std::move(cur), quoted);
      cur.clear();
      quoted = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      break;
    } else {
      cur.push_back(ch);
    }
  }
  row.emplace_back(std::move(cur), quoted);
  return row;
}

}  // namespace

RunReport report_from_record(const Record& rec) {
  RunReport r;
  r.snr_db = get_double(rec, "snr_db");
  r.axis = get_string(rec, "axis");
  r.jitter_var_norm = get_double(rec, "jitter_var_norm");
  r.jitter_ci = get_double(rec, "jitter_ci");
  r.jitter_bound_norm = get_double(rec, "jitter_bound_norm");
  r.jitter_theory_norm = get_double(rec, "jitter_theory_norm");
  r.ber = get_double(rec, "ber");
  r.ber_ci = get_double(rec, "ber_ci");
  r.ber_theory = get_double(rec, "ber_theory");
  r.obw_hz = get_double(rec, "obw_hz");
  r.n_bits = get_int(rec, "n_bits");
  r.n_chips = get_int(rec, "n_chips");
  r.jitter_mean_norm = get_double(rec, "jitter_mean_norm");
  r.pn0bl_db = get_double(rec, "pn0bl_db");
  r.ebn0_db = get_double(rec, "ebn0_db");
  r.n0 = get_double(rec, "n0");
  r.ranging_power = get_double(rec, "ranging_power");
  r.sigma2_p = get_double(rec, "sigma2_p");
  r.constellation = get_string(rec, "constellation");
  r.rolloff = get_double(rec, "rolloff");
  r.symbol_rate = get_double(rec, "symbol_rate");
  r.chip_rate = get_double(rec, "chip_rate");
  r.sample_rate = get_double(rec, "sample_rate");
  r.m_rg = get_double(rec, "m_rg");
  r.code = get_string(rec, "code");
  r.loop_bandwidth = get_double(rec, "loop_bandwidth");
  r.loop_order = get_string(rec, "loop_order");
  r.damping = get_double(rec, "damping");
  r.mode = get_string(rec, "mode");
  r.tau_true = get_string(rec, "tau_true");
  r.trials = get_int(rec, "trials");
  r.seed = static_cast<std::uint64_t>(get_int(rec, "seed"));
  return r;
}

void emit(std::ostream& os, const std::vector<Record>& records, OutputFormat fmt) {
  if (records.empty()) throw Error("emit: no records");
  const auto& head = records.front().fields;
  for (const auto& rec : records) {
    bool same = rec.fields.size() == head.size();
    for (std::size_t i = 0; same && i < head.size(); ++i) same = rec.fields[i].first == head[i].first;
    if (!same) throw Error("emit: records do not share the same fields");
  }
  if (fmt == OutputFormat::Csv) {
    for (std::size_t i = 0; i < head.size(); ++i) {
      os << (i ? "," : "") << csv_field(FieldValue{head[i].first});
    }
    os << "\r\n";
    for (const auto& rec : records) {
      for (std::size_t i = 0; i < rec.fields.size(); ++i) {
        os << (i ? "," : "") << csv_field(rec.fields[i].second);
      }
      os << "\r\n";
    }
  } else {
    for (const auto& rec : records) {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (const auto& [k, v] : rec.fields) j[k] = to_json(v);
      os << j.dump() << '\n';
    }
  }
  if (!os) throw Error("emit: write failed");
}

void emit_to_path(const std::string& path, const std::vector<Record>& records, OutputFormat fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file '" + path + "'");
  emit(out, records, fmt);
  out.flush();
  if (!out) throw Error("cannot write output file '" + path + "'");
}

std::vector<Record> parse_records(std::string_view text, OutputFormat fmt) {
  std::vector<Record> out;
  if (fmt == OutputFormat::Csv) {
    std::size_t pos = 0;
    const auto header = csv_row(text, pos);
    while (pos < text.size()) {
      const auto row = csv_row(text, pos);
      if (row.size() == 1 && row[0].first.empty()) continue;
      if (row.size() != header.size()) throw Error("csv: row width differs from the header");
      Record rec;
      for (std::size_t i = 0; i < row.size(); ++i) rec.add(header[i].first, from_text(row[i].first, row[i].second));
      out.push_back(std::move(rec));
    }
    return out;
  }
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t eol = text.find('\n', start);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(start, eol - start));
    start = eol + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::ordered_json::parse(line);
    if (!j.is_object()) throw Error("json-lines: each line must be an object");
    Record rec;
    for (const auto& [k, v] : j.items()) {
      if (v.is_number_integer()) {
        rec.add(k, v.get<std::int64_t>());
      } else if (v.is_number()) {
        rec.add(k, v.get<double>());
      } else if (v.is_string()) {
        rec.add(k, v.get<std::string>());
      } else {
        throw Error("json-lines: unsupported value for '" + k + "'");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace tmrange
