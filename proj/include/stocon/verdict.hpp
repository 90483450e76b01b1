#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>

namespace stocon {

/// Outcome of checking one condition over a finite horizon.
///
/// `holds` is true exactly when no violation was recorded. `worst_margin` is
/// the smallest slack observed (negative at a violation); it is +inf when the
/// condition was never exercised. An inapplicable verdict (preconditions of
/// the check failed) never holds and carries the index that broke them.
struct ConditionVerdict {
  std::string name;
  bool holds = true;
  std::optional<std::size_t> first_violation;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::string detail;
  bool applicable = true;
  double coverage = 1.0;  // fraction of steps where the clause was exercised
};

/// Incremental accumulator for a ConditionVerdict.
class VerdictBuilder {
 public:
  explicit VerdictBuilder(std::string name) { v_.name = std::move(name); }

  /// Records a slack value at `index`. Slack below -tolerance is a
  /// violation; `tolerance` absorbs floating-point rounding only.
  void observe(std::size_t index, double margin, double tolerance = 0.0) {
    if (margin != margin) {  // NaN slack cannot certify the inequality
      violate(index, "non-finite slack");
      return;
    }
    if (margin < v_.worst_margin) v_.worst_margin = margin;
    if (margin < -tolerance) violate(index);
  }

  void violate(std::size_t index, const std::string& why = {}) {
    if (!v_.first_violation) {
      v_.first_violation = index;
      if (!why.empty()) v_.detail = why;
    }
    v_.holds = false;
  }

  void not_applicable(std::size_t index, const std::string& why) {
    v_.applicable = false;
    v_.holds = false;
    v_.first_violation = index;
    v_.detail = why;
  }

  void note(const std::string& text) {
    if (!v_.detail.empty()) v_.detail += "; ";
    v_.detail += text;
  }

  void set_coverage(double c) { v_.coverage = c; }

  ConditionVerdict finish() const { return v_; }

 private:
  ConditionVerdict v_;
};

}  // namespace stocon
