// Network containers and the generic forward pass: ReLU attention,
// masked-softmax attention, tokenwise FFN stacks, residual blocks.
// Logits and FFN row sums go through compensated dot products so that
// algebraically exact cancellations stay exact in floats.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kernelformer/matrix.hpp"
#include "kernelformer/token_matrix.hpp"

namespace kf {

enum class Activation { ReLU, SoftmaxMasked };

struct AttentionHead {
  SparseMat Q, K, V;
  Activation act = Activation::ReLU;
  std::vector<int> mask;      // 0-based columns, SoftmaxMasked only
  int softmax_query_col = -1;  // 0-based, SoftmaxMasked only

  bool operator==(const AttentionHead&) const = default;
};

struct FFNLayer {
  SparseMat W;
  std::vector<double> bias;

  bool operator==(const FFNLayer&) const = default;
};

struct FFNStack {
  std::vector<FFNLayer> layers;  // ReLU between layers, none after last
  bool residual = false;

  bool operator==(const FFNStack&) const = default;
};

struct Block {
  std::vector<AttentionHead> heads;
  FFNStack ffn;

  bool operator==(const Block&) const = default;
};

struct ArchDescriptor {
  int num_blocks = 0;      // L_T
  int max_heads = 0;       // m_T
  int d_embed = 0;
  int ell = 0;
  int max_ffn_depth = 0;   // L_FFN
  int ffn_width = 0;       // w_FFN
  double value_bound = 0;  // R
  double kappa = 0;        // max abs weight

  bool operator==(const ArchDescriptor&) const = default;
};

// Closed-form build inputs and the constants derived from them; carried
// for reporting and for fast-path revalidation of built specs.
struct BuildManifest {
  bool present = false;
  int n = 0;
  int D = 0;
  double h = 0, b = 0, R = 0;
  double safety_factor = 0;
  double m_small = 0;            // offset for the two copy stages
  double m_big = 0;              // offset for the distance and label stages
  double interaction_c[4] = {0, 0, 0, 0};
  double stage_u[4] = {0, 0, 0, 0};
  double stage_kdata[4] = {0, 0, 0, 0};

  bool operator==(const BuildManifest&) const = default;
};

struct TransformerSpec {
  std::vector<Block> blocks;
  int decoder_row = 0;  // 0-based
  int decoder_col = 0;
  ArchDescriptor arch;
  BuildManifest manifest;

  bool operator==(const TransformerSpec&) const = default;
};

// ReLU attention: column t of the result is sum_k relu(<Q h_t, K h_k>) V h_k.
Dense attention_apply(const AttentionHead& head, const TokenMatrix& H);

// Masked softmax attention: only query_col is populated; weights are a
// max-shifted softmax of the masked logits.
Dense attention_softmax_masked(const AttentionHead& head, const TokenMatrix& H,
                               int query_col);

// Applies the layer stack columnwise; adds the input back if residual.
Dense ffn_stack_apply(const FFNStack& ffn, const Dense& H);

// FFN(MHA(H) + H) + MHA(H) + H.
TokenMatrix block_apply(const Block& block, const TokenMatrix& H);

double forward(const TransformerSpec& spec, const Prompt& prompt);

// Forward keeping every intermediate state H0..H_L (for stage checks and
// state dumps). Uses the same generic path as forward.
std::vector<Dense> forward_states(const TransformerSpec& spec,
                                  const Prompt& prompt);

// Decode after running blocks generically.
double forward_generic(const TransformerSpec& spec, const Prompt& prompt);

void validate_spec_shape(const TransformerSpec& spec);

}  // namespace kf
