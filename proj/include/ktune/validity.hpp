#ifndef KTUNE_VALIDITY_HPP
#define KTUNE_VALIDITY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ktune {

// Declarative arithmetic predicate over knob values, e.g.
// "tile_y * tile_x <= 64". Grammar:
//
//   rule := sum ('<=' | '<' | '==') sum
//   sum  := prod ('+' prod)*
//   prod := atom ('*' atom)*
//   atom := integer | knob-name | '(' sum ')'
//
// Compiled once into a postfix program; evaluation is pure and exact
// (128-bit intermediate arithmetic, no overflow for any realistic knob set).
class ValidityRule {
 public:
  ValidityRule() = default;

  /// Parses `source` against the given knob names. Throws ConfigError on a
  /// syntax error or an unknown knob name.
  static ValidityRule parse(const std::string& source, const std::vector<std::string>& knob_names);

  /// Evaluates the predicate on resolved knob values (one per knob, in knob
  /// order). Pure.
  bool evaluate(const std::vector<std::int64_t>& knob_values) const;

  /// Indices of knobs the rule mentions; only these can change its outcome.
  const std::vector<int>& referenced_knobs() const { return referenced_; }

  const std::string& source() const { return source_; }
  bool empty() const { return ops_.empty(); }

 private:
  enum class OpCode { kPushConst, kPushKnob, kAdd, kMul, kCmpLe, kCmpLt, kCmpEq };
  struct Op {
    OpCode code;
    std::int64_t arg = 0;  // constant value or knob index
  };

  std::string source_;
  std::vector<Op> ops_;  // postfix program; last op is the comparison
  std::vector<int> referenced_;
};

}  // namespace ktune

#endif  // KTUNE_VALIDITY_HPP
