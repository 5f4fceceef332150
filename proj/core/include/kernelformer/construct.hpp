// Weight compiler: pair-selector attention heads, gating and decrementing
// FFN gadgets, and the five-block network that evaluates the Gaussian
// kernel regression estimate on a prompt. All indices are 0-based.
#pragma once

#include <cstdint>
#include <string>

#include "kernelformer/transformer.hpp"

namespace kf {

struct InteractionRequest {
  int t1 = 0;           // column receiving the value
  int t2 = 0;           // column supplying the data
  int value_row = 0;    // row of the written basis vector
  SparseMat q_data;     // (d_embed-3) x d_embed
  SparseMat k_data;     // (d_embed-3) x d_embed
  int ell = 0;
  int d_embed = 0;
  double u_bound = 1.0;      // entrywise bound on the states seen
  double kappa_data = 1.0;   // entrywise bound on the data kernels
  double safety_factor = 2.0;
};

// Positional margin constant: safety_factor times the worst of the two
// activation-separation cases, enumerated over the actual column grid.
double interaction_constant(const InteractionRequest& req);

// Head that writes relu(<Q_data h_t1, K_data h_t2>) e_i into column t1 and
// exact zeros into every other column, for states bounded by u_bound with
// correct static rows.
AttentionHead build_interaction_head(const InteractionRequest& req);

enum class GateSide { ZeroRight, ZeroLeft };

// Column gate: identity on the protected side of the split, exact zeros in
// rows r1..r2 on the other side. split = count of left-side columns.
//
// Float-exact contract holds on the gate domain: nonnegative data rows,
// rows r1+1..r2 bounded by h_bound, and row r1 (the working row) zero.
FFNStack build_gating_ffn(int r1, int r2, int split, GateSide side,
                          double h_bound, int ell, int d_embed);

// Offset removal: FFN(h)+h subtracts M from rows r1..r2 exactly on columns
// k1+1..k2-1 (1-based window bounds; k1=0 or k2=ell+1 for one-sided) and is
// the exact identity elsewhere. Arbitrary real data rows are fine: the
// branch wipes them and the residual restores them.
FFNStack build_decrement_ffn(int r1, int r2, int k1, int k2, double M, int ell,
                             int d_embed);

// The five-block kernel-regression network. Weights depend only on the
// arguments; no prompt data enters.
TransformerSpec build_kernel_transformer(int n, int D, double h, double b,
                                         double R, double safety_factor = 2.0);

struct EquivResult {
  double transformer_value = 0;
  double oracle_value = 0;
  double abs_diff = 0;
  double rel_diff = 0;  // denominator max(1, |oracle|)
};

EquivResult verify_equivalence(const TransformerSpec& spec, const Prompt& p,
                               double h);

struct LemmaSuiteResult {
  bool interaction_pass = false;
  bool gating_pass = false;
  bool decrement_pass = false;
  std::string detail;

  bool all_pass() const {
    return interaction_pass && gating_pass && decrement_pass;
  }
};

// Randomized property suites for the three gadget contracts.
// inject_gating_split_bug shifts the built gate split by one while checking
// the unshifted contract (mutation hook; must make the suite fail).
LemmaSuiteResult run_lemma_suites(int trials, uint64_t seed,
                                  bool inject_gating_split_bug = false);

}  // namespace kf
