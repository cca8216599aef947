#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tmrange {

enum class CodeKind { T4B, T2B, SquareWave, Custom };

CodeKind parse_code_kind(std::string_view name);
std::string to_string(CodeKind kind);

/// Period in chips of a generated code kind (T4B/T2B: 2*7*11*15*19*23).
std::int64_t code_period(CodeKind kind);

/// Ranging chip sequence. `chips` holds the generated window starting at
/// `phase`; chip() extends it to any index (periodically for Custom, by
/// direct evaluation of the component codes otherwise).
struct PnCode {
  CodeKind kind = CodeKind::Custom;
  std::int64_t period = 0;
  std::int64_t phase = 0;
  std::vector<std::int8_t> chips;

  /// Chip `k` counted from the start of the window; any sign of k works.
  int chip(std::int64_t k) const;
  std::size_t size() const { return chips.size(); }
};

/// Chip at absolute code phase for the generated kinds.
int chip_at_phase(CodeKind kind, std::int64_t phase);

/// T4B/T2B: weighted vote over the six component sequences,
///   chip = sign(w*C1 + C2 - C3 - C4 + C5 - C6),  w = 4 (T4B) or 2 (T2B),
/// with C1 the length-2 range clock (+1,-1) and C2..C6 of lengths
/// 7, 11, 15, 19, 23. The vote is never zero because the five unit terms
/// sum to an odd number.
PnCode generate_code(CodeKind kind, std::int64_t n_chips, std::int64_t phase);

PnCode make_custom_code(std::vector<std::int8_t> chips);

/// d_k = (c_k - c_{k-1}) / 2 in {-1, 0, +1}; d_0 uses the periodic
/// predecessor of the window's first chip.
std::vector<std::int8_t> transitions(const PnCode& code);

/// Fraction of chip boundaries carrying a transition over one window.
double transition_density(const PnCode& code);

}  // namespace tmrange
