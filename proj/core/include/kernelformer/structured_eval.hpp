// Certified fast path for built specs. A spec is revalidated against the
// canonical construction for its recorded build inputs (entrywise equality
// plus margin-constant bounds); validated specs evaluate through the
// construction dataflow in O(nD) per prompt, mirroring the generic path's
// storage roundings. Anything that fails validation evaluates generically.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kernelformer/transformer.hpp"

namespace kf {

struct StructuredPlan {
  int n = 0;
  int D = 0;
  double m_small = 0;
  double m_big = 0;
  double q_diag = 0;  // stored value of the -1/h query kernel diagonal
  double k_diag = 0;  // stored value of the 1/h key kernel diagonal
};

class CompiledForward {
 public:
  // The spec must outlive this object.
  explicit CompiledForward(const TransformerSpec& spec);

  bool structured() const { return plan_.has_value(); }
  const std::string& reject_reason() const { return reason_; }

  double operator()(const Prompt& p) const;

  // H0..H5 intermediate states (structured capture when validated,
  // otherwise the generic pass).
  std::vector<Dense> states(const Prompt& p) const;

 private:
  const TransformerSpec* spec_;
  std::optional<StructuredPlan> plan_;
  std::string reason_;
};

// Convenience single-shot forward: validates, then evaluates structured or
// generic. Prefer CompiledForward when evaluating many prompts.
double forward(const TransformerSpec& spec, const Prompt& prompt);

}  // namespace kf
