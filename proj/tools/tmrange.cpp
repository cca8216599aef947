// tmrange: sweeps and tables for PN ranging with non-constant-envelope telemetry.
//
//   tmrange jitter-sweep --constellation 64apsk --bl 150 --snr 20,30,40
//   tmrange ber-sweep --snr 4,6,8 --format jsonl
//   tmrange bandwidth --m-rg 0.111,0.222,0.444 --code t2b --rolloff 0.35
//   tmrange sigma2p --constellations qpsk,16apsk --rolloffs 0.2,0.35
//   tmrange bound --pn0bl 30 --bl 1500 --sigma2p 0.24
//
// Every subcommand takes --config FILE (key = value lines) and the
// experiment fields as flags; flags override the file.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmrange/analysis.hpp"
#include "tmrange/channel.hpp"
#include "tmrange/error.hpp"
#include "tmrange/experiment.hpp"

using namespace tmrange;

namespace {

// Flag spelling -> config key. Names after a comma are aliases.
const char* const kFields[][2] = {
    {"--constellation", "constellation"},
    {"--rolloff", "rolloff"},
    {"--symbol-rate", "symbol_rate"},
    {"--chip-rate", "chip_rate"},
    {"--sample-rate", "sample_rate"},
    {"--span", "span"},
    {"--m-rg", "m_rg"},
    {"--code", "code"},
    {"--bl,--loop-bandwidth", "loop_bandwidth"},
    {"--loop-order", "loop_order"},
    {"--damping", "damping"},
    {"--mode", "mode"},
    {"--axis", "axis"},
    {"--snr,--snr-db", "snr_db"},
    {"--tau,--tau-true", "tau_true"},
    {"--n-symbols", "n_symbols"},
    {"--trials", "trials"},
    {"--seed", "seed"},
    {"--threads", "threads"},
    {"--block-symbols", "block_symbols"},
    {"--demodulate", "demodulate"},
    {"--output,-o", "output"},
    {"--format", "format"},
};

// Fields that only mean something to the sweeps.
bool sweep_only(const std::string& key) {
  for (const char* k : {"m_rg", "mode", "axis", "snr_db", "tau_true", "n_symbols", "trials", "threads",
                        "block_symbols", "demodulate"}) {
    if (key == k) return true;
  }
  return false;
}

struct Common {
  std::string config;
  std::map<std::string, std::string> fields;
};

void add_common(CLI::App* cmd, Common& c, bool sweep) {
  cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& f : kFields) {
    const std::string key = f[1];
    if (!sweep && sweep_only(key)) continue;
    cmd->add_option(f[0], c.fields[key]);
  }
}

// Subcommand defaults, then the config file, then flags.
ExperimentConfig resolve(const Common& c, const std::map<std::string, std::string>& defaults = {}) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : defaults) set_field(cfg, k, v);
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    std::stringstream text;
    text << in.rdbuf();
    if (!in) throw Error("cannot read config file " + c.config);
    apply_config_text(cfg, text.str());
  }
  for (const auto& [k, v] : c.fields) {
    if (!v.empty()) set_field(cfg, k, v);
  }
  return cfg;
}

void write(const ExperimentConfig& cfg, const std::vector<Record>& recs) {
  const OutputFormat fmt = parse_output_format(cfg.format);
  if (cfg.output.empty() || cfg.output == "-") {
    emit(std::cout, recs, fmt);
  } else {
    emit_to_path(cfg.output, recs, fmt);
  }
}

std::vector<double> parse_list(const std::string& what, const std::string& text) {
  ExperimentConfig scratch;
  try {
    set_field(scratch, "snr", text);
  } catch (const Error&) {
    throw Error("--" + what + ": expected a comma-separated list of numbers");
  }
  return scratch.snr_db;
}

int run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<Record> recs;
  for (const auto& r : run_experiment(cfg)) recs.push_back(to_record(r));
  write(cfg, recs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PN ranging jitter and telemetry BER simulator"};
  app.require_subcommand(1);

  Common jitter;
  auto* jitter_cmd = app.add_subcommand("jitter-sweep", "timing jitter against P/(N0 B_L)");
  add_common(jitter_cmd, jitter, true);

  Common ber;
  auto* ber_cmd = app.add_subcommand("ber-sweep", "end-to-end BER against Eb/N0");
  add_common(ber_cmd, ber, true);

  Common bw;
  std::string bw_m = "0,0.111,0.222,0.444,0.666";
  std::int64_t bw_symbols = 1 << 18;
  auto* bw_cmd = app.add_subcommand("bandwidth", "99% occupied bandwidth against the ranging index");
  add_common(bw_cmd, bw, false);
  bw_cmd->add_option("--m-rg", bw_m, "ranging modulation indices (0 = telemetry only)");
  bw_cmd->add_option("--symbols", bw_symbols, "symbols per estimate")->check(CLI::PositiveNumber);

  Common s2p;
  std::string s2p_const = "qpsk,8psk,16apsk,32apsk,64apsk";
  std::string s2p_roll = "0.2,0.25,0.3,0.35";
  std::int64_t s2p_symbols = 400000;
  auto* s2p_cmd = app.add_subcommand("sigma2p", "telemetry power variance table");
  add_common(s2p_cmd, s2p, false);
  s2p_cmd->add_option("--constellations", s2p_const);
  s2p_cmd->add_option("--rolloffs", s2p_roll);
  s2p_cmd->add_option("--symbols", s2p_symbols, "symbols per cell")->check(CLI::PositiveNumber);

  Common bd;
  std::optional<double> bd_p;
  std::optional<double> bd_n0;
  std::optional<double> bd_pn0bl;
  std::optional<double> bd_sigma2p;
  double bd_m = 0.444;
  auto* bd_cmd = app.add_subcommand("bound", "jitter upper bound and its thermal term");
  add_common(bd_cmd, bd, false);
  bd_cmd->add_option("--m-rg", bd_m, "ranging modulation index (sets P unless --p is given)");
  bd_cmd->add_option("--p", bd_p, "ranging power at the loop input");
  bd_cmd->add_option("--n0", bd_n0, "noise density, W/Hz");
  bd_cmd->add_option("--pn0bl", bd_pn0bl, "P/(N0 B_L) in dB (alternative to --n0)");
  bd_cmd->add_option("--sigma2p", bd_sigma2p, "telemetry power variance (default: Monte Carlo)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (jitter_cmd->parsed()) return run_sweep(resolve(jitter, {{"axis", "pn0bl"}}));
    if (ber_cmd->parsed()) {
      return run_sweep(resolve(ber, {{"axis", "ebn0"}, {"mode", "end-to-end"}, {"snr", "0,2,4,6,8,10"}}));
    }

    if (bw_cmd->parsed()) {
      ExperimentConfig cfg = resolve(bw);
      std::vector<Record> recs;
      for (double m : parse_list("m-rg", bw_m)) {
        cfg.m_rg = m;
        if (m != 0.0) validate(cfg);
        Record r;
        r.add("m_rg", m);
        r.add("obw_hz", experiment_obw(cfg, bw_symbols, cfg.seed));
        r.add("constellation", cfg.constellation);
        r.add("rolloff", cfg.rolloff);
        r.add("code", cfg.code);
        r.add("symbol_rate", cfg.symbol_rate);
        r.add("chip_rate", cfg.chip_rate);
        r.add("n_symbols", bw_symbols);
        recs.push_back(std::move(r));
      }
      write(cfg, recs);
      return 0;
    }

    if (s2p_cmd->parsed()) {
      ExperimentConfig cfg = resolve(s2p);
      std::vector<std::string> names;
      for (std::size_t pos = 0; pos <= s2p_const.size();) {
        const std::size_t end = std::min(s2p_const.find(',', pos), s2p_const.size());
        if (end > pos) names.push_back(s2p_const.substr(pos, end - pos));
        pos = end + 1;
      }
      std::vector<Record> recs;
      for (const auto& name : names) {
        for (double beta : parse_list("rolloffs", s2p_roll)) {
          set_field(cfg, "constellation", name);
          cfg.rolloff = beta;
          validate(cfg);
          Record r;
          r.add("constellation", name);
          r.add("rolloff", beta);
          r.add("sigma2_p", experiment_sigma2_p(cfg, s2p_symbols, cfg.seed));
          r.add("n_symbols", s2p_symbols);
          recs.push_back(std::move(r));
        }
      }
      write(cfg, recs);
      return 0;
    }

    if (bd_cmd->parsed()) {
      ExperimentConfig cfg = resolve(bd);
      cfg.m_rg = bd_m;
      const double p = bd_p ? *bd_p : ranging_power(bd_m, generate_code(parse_code_kind(cfg.code), 64, 0));
      if (bd_n0 && bd_pn0bl) throw Error("give either --n0 or --pn0bl, not both");
      double n0 = 0.0;
      if (bd_n0) n0 = *bd_n0;
      if (bd_pn0bl) n0 = n0_from_pn0bl(*bd_pn0bl, p, cfg.loop_bandwidth);
      const double s2 = bd_sigma2p ? *bd_sigma2p : experiment_sigma2_p(cfg, 200000, cfg.seed);
      const JitterBound b = jitter_bound({p, n0, cfg.loop_bandwidth, 1.0 / cfg.chip_rate, s2});
      Record r;
      r.add("ranging_power", p);
      r.add("n0", n0);
      r.add("pn0bl_db", n0 > 0.0 ? 10.0 * std::log10(p / (n0 * cfg.loop_bandwidth)) : INFINITY);
      r.add("loop_bandwidth", cfg.loop_bandwidth);
      r.add("chip_rate", cfg.chip_rate);
      r.add("sigma2_p", s2);
      r.add("jitter_bound_norm", b.bound_norm);
      r.add("jitter_theory_norm", b.theory_norm);
      r.add("jitter_floor_norm", b.bound_norm - b.theory_norm);
      write(cfg, {r});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "tmrange: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
