#include "tmrange/pn_code.hpp"

#include <array>
#include <string_view>

#include "tmrange/error.hpp"

namespace tmrange {

namespace {

// Component sequences, '1' -> +1 and '0' -> -1.
constexpr std::array<std::string_view, 6> kComponents = {
    "10",
    "1110010",
    "11100010110",
    "111100010011010",
    "1111010100001101100",
    "11111010110011001010000",
};

// Sign applied to each component in the vote.
constexpr std::array<int, 6> kVoteSign = {+1, +1, -1, -1, +1, -1};

constexpr std::int64_t kCompositePeriod = 2LL * 7 * 11 * 15 * 19 * 23;

int component(std::size_t i, std::int64_t phase) {
  const auto len = static_cast<std::int64_t>(kComponents[i].size());
  std::int64_t p = phase % len;
  if (p < 0) p += len;
  return kComponents[i][static_cast<std::size_t>(p)] == '1' ? 1 : -1;
}

std::int64_t wrap(std::int64_t k, std::int64_t n) {
  std::int64_t r = k % n;
  return r < 0 ? r + n : r;
}

}  // namespace

CodeKind parse_code_kind(std::string_view name) {
  if (name == "t4b") return CodeKind::T4B;
  if (name == "t2b") return CodeKind::T2B;
  if (name == "squarewave") return CodeKind::SquareWave;
  throw Error("unsupported code kind: '" + std::string(name) + "'");
}

std::string to_string(CodeKind kind) {
  switch (kind) {
    case CodeKind::T4B: return "t4b";
    case CodeKind::T2B: return "t2b";
    case CodeKind::SquareWave: return "squarewave";
    case CodeKind::Custom: return "custom";
  }
  return "custom";
}

std::int64_t code_period(CodeKind kind) {
  switch (kind) {
    case CodeKind::T4B:
    case CodeKind::T2B: return kCompositePeriod;
    case CodeKind::SquareWave: return 2;
    case CodeKind::Custom: break;
  }
  throw Error("custom codes have no intrinsic period");
}

int chip_at_phase(CodeKind kind, std::int64_t phase) {
  switch (kind) {
    case CodeKind::SquareWave: return component(0, phase);
    case CodeKind::T4B:
    case CodeKind::T2B: {
      int vote = (kind == CodeKind::T4B ? 4 : 2) * component(0, phase);
      for (std::size_t i = 1; i < kComponents.size(); ++i) {
        vote += kVoteSign[i] * component(i, phase);
      }
      return vote > 0 ? 1 : -1;
    }
    case CodeKind::Custom: break;
  }
  throw Error("chip_at_phase: custom codes are table driven");
}

int PnCode::chip(std::int64_t k) const {
  if (kind == CodeKind::Custom) {
    return chips[static_cast<std::size_t>(wrap(k, static_cast<std::int64_t>(chips.size())))];
  }
  const auto n = static_cast<std::int64_t>(chips.size());
  if (k >= 0 && k < n) return chips[static_cast<std::size_t>(k)];
  return chip_at_phase(kind, wrap(phase + k, period));
}

PnCode generate_code(CodeKind kind, std::int64_t n_chips, std::int64_t phase) {
  if (kind == CodeKind::Custom) throw Error("unsupported code kind: use make_custom_code");
  if (n_chips < 2) throw Error("generate_code: n_chips must be >= 2");
  const std::int64_t period = code_period(kind);
  if (phase < 0 || phase >= period) throw Error("generate_code: phase outside [0, period)");
  PnCode code;
  code.kind = kind;
  code.period = period;
  code.phase = phase;
  code.chips.resize(static_cast<std::size_t>(n_chips));
  for (std::int64_t i = 0; i < n_chips; ++i) {
    code.chips[static_cast<std::size_t>(i)] =
        static_cast<std::int8_t>(chip_at_phase(kind, wrap(phase + i, period)));
  }
  return code;
}

PnCode make_custom_code(std::vector<std::int8_t> chips) {
  if (chips.size() < 2) throw Error("custom code needs at least 2 chips");
  for (auto c : chips) {
    if (c != 1 && c != -1) throw Error("chips must be +1 or -1");
  }
  PnCode code;
  code.kind = CodeKind::Custom;
  code.period = static_cast<std::int64_t>(chips.size());
  code.chips = std::move(chips);
  return code;
}

std::vector<std::int8_t> transitions(const PnCode& code) {
  if (code.size() < 2) throw Error("transitions: code needs at least 2 chips");
  std::vector<std::int8_t> d(code.size());
  int prev = code.chip(-1);
  for (std::size_t k = 0; k < code.size(); ++k) {
    const int c = code.chips[k];
    d[k] = static_cast<std::int8_t>((c - prev) / 2);
    prev = c;
  }
  return d;
}

double transition_density(const PnCode& code) {
  const auto d = transitions(code);
  std::size_t n = 0;
  for (auto v : d) n += (v != 0);
  return static_cast<double>(n) / static_cast<double>(d.size());
}

}  // namespace tmrange
