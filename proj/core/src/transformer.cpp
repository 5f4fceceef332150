#include "kernelformer/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "kernelformer/error.hpp"
#include "kernelformer/numerics.hpp"

namespace kf {

namespace {

void gather_col(const Dense& H, int c, std::vector<double>& out) {
  out.resize(H.rows);
  for (int r = 0; r < H.rows; ++r) out[r] = H.at(r, c);
}

// dst(:, c) = M * H(:, c) for every column.
Dense sparse_times_dense(const SparseMat& M, const Dense& H) {
  Dense out(M.rows, H.cols);
  std::vector<double> col, prod;
  for (int c = 0; c < H.cols; ++c) {
    gather_col(H, c, col);
    prod.assign(M.rows, 0.0);
    M.mul_column(col.data(), prod.data());
    for (int r = 0; r < M.rows; ++r) out.at(r, c) = prod[r];
  }
  return out;
}

void check_head_shapes(const AttentionHead& head, const TokenMatrix& H) {
  if (head.Q.rows != H.d_embed || head.Q.cols != H.d_embed ||
      head.K.rows != H.d_embed || head.K.cols != H.d_embed ||
      head.V.rows != H.d_embed || head.V.cols != H.d_embed)
    throw ParamError("attention head dimension mismatch");
}

double logit(DotAccumulator& acc, const Dense& qh, const Dense& kh, int t,
             int k) {
  acc.clear();
  for (int r = 0; r < qh.rows; ++r) acc.add_product(qh.at(r, t), kh.at(r, k));
  return acc.value();
}

}  // namespace

Dense attention_apply(const AttentionHead& head, const TokenMatrix& H) {
  check_head_shapes(head, H);
  if (head.act != Activation::ReLU)
    throw ParamError("attention_apply expects a ReLU head");
  Dense qh = sparse_times_dense(head.Q, H.m);
  Dense kh = sparse_times_dense(head.K, H.m);
  Dense vh = sparse_times_dense(head.V, H.m);
  Dense out(H.d_embed, H.ell);
  DotAccumulator acc;
  for (int t = 0; t < H.ell; ++t) {
    for (int k = 0; k < H.ell; ++k) {
      double w = relu(logit(acc, qh, kh, t, k));
      if (w == 0.0) continue;
      for (int r = 0; r < H.d_embed; ++r) out.at(r, t) += w * vh.at(r, k);
    }
  }
  return out;
}

Dense attention_softmax_masked(const AttentionHead& head, const TokenMatrix& H,
                               int query_col) {
  check_head_shapes(head, H);
  if (head.act != Activation::SoftmaxMasked)
    throw ParamError("attention_softmax_masked expects a softmax head");
  if (head.mask.empty()) throw ParamError("softmax head with empty mask");
  if (query_col < 0 || query_col >= H.ell)
    throw ParamError("softmax query column out of range");
  for (int c : head.mask)
    if (c < 0 || c >= H.ell) throw ParamError("mask column out of range");

  Dense qh = sparse_times_dense(head.Q, H.m);
  Dense kh = sparse_times_dense(head.K, H.m);
  Dense vh = sparse_times_dense(head.V, H.m);
  size_t msize = head.mask.size();
  std::vector<double> logits(msize);
  DotAccumulator acc;
  for (size_t j = 0; j < msize; ++j)
    logits[j] = logit(acc, qh, kh, query_col, head.mask[j]);
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  std::vector<double> w(msize);
  double total = 0.0;
  for (size_t j = 0; j < msize; ++j) {
    w[j] = std::exp(logits[j] - mx);
    total += w[j];
  }
  Dense out(H.d_embed, H.ell);
  for (size_t j = 0; j < msize; ++j) {
    double wt = w[j] / total;
    for (int r = 0; r < H.d_embed; ++r)
      out.at(r, query_col) += wt * vh.at(r, head.mask[j]);
  }
  return out;
}

Dense ffn_stack_apply(const FFNStack& ffn, const Dense& H) {
  if (ffn.layers.empty()) throw ParamError("FFN stack needs at least one layer");
  Dense cur = H;
  std::vector<double> col;
  DotAccumulator acc;
  for (size_t li = 0; li < ffn.layers.size(); ++li) {
    const FFNLayer& L = ffn.layers[li];
    if (L.W.rows != H.rows || L.W.cols != H.rows ||
        static_cast<int>(L.bias.size()) != H.rows)
      throw ParamError("FFN layer dimension mismatch");
    if (!L.W.sorted_unique())
      throw ParamError("FFN weights must be sorted row-major");
    bool relu_after = li + 1 < ffn.layers.size();
    Dense next(H.rows, H.cols);
    for (int c = 0; c < H.cols; ++c) {
      gather_col(cur, c, col);
      size_t idx = 0;
      for (int r = 0; r < H.rows; ++r) {
        acc.clear();
        while (idx < L.W.nnz() && static_cast<int>(L.W.ri[idx]) == r) {
          acc.add_product(L.W.v[idx], col[L.W.ci[idx]]);
          ++idx;
        }
        acc.add_term(L.bias[r]);
        double v = acc.value();
        next.at(r, c) = relu_after ? relu(v) : v;
      }
    }
    cur = std::move(next);
  }
  if (ffn.residual)
    for (size_t i = 0; i < cur.a.size(); ++i) cur.a[i] += H.a[i];
  return cur;
}

TokenMatrix block_apply(const Block& block, const TokenMatrix& H) {
  Dense mha(H.d_embed, H.ell);
  for (const AttentionHead& head : block.heads) {
    Dense part = head.act == Activation::ReLU
                     ? attention_apply(head, H)
                     : attention_softmax_masked(head, H,
                                                head.softmax_query_col);
    for (size_t i = 0; i < mha.a.size(); ++i) mha.a[i] += part.a[i];
  }
  TokenMatrix z = H;
  for (size_t i = 0; i < z.m.a.size(); ++i) z.m.a[i] += mha.a[i];
  // Block formula: FFN(z) + z. A residual-flagged stack already adds z.
  Dense f = ffn_stack_apply(block.ffn, z.m);
  TokenMatrix out = z;
  if (block.ffn.residual) {
    out.m = std::move(f);
  } else {
    for (size_t i = 0; i < out.m.a.size(); ++i) out.m.a[i] = f.a[i] + z.m.a[i];
  }
  return out;
}

void validate_spec_shape(const TransformerSpec& spec) {
  int d = spec.arch.d_embed, ell = spec.arch.ell;
  if (d < 5 || ell < 3 || ell % 2 == 0)
    throw ParamError("spec dimensions invalid");
  if (spec.decoder_row < 0 || spec.decoder_row >= d || spec.decoder_col < 0 ||
      spec.decoder_col >= ell)
    throw ParamError("decoder address out of range");
  for (const Block& b : spec.blocks) {
    for (const AttentionHead& h : b.heads) {
      if (h.Q.rows != d || h.K.rows != d || h.V.rows != d)
        throw ParamError("head dimension mismatch with spec");
      if (h.act == Activation::SoftmaxMasked && h.mask.empty())
        throw ParamError("softmax head with empty mask");
    }
    if (b.ffn.layers.empty())
      throw ParamError("block FFN needs at least one layer");
  }
}

std::vector<Dense> forward_states(const TransformerSpec& spec,
                                  const Prompt& prompt) {
  validate_spec_shape(spec);
  TokenMatrix H = embed_prompt(prompt);
  if (H.d_embed != spec.arch.d_embed || H.ell != spec.arch.ell)
    throw ParamError("prompt shape does not match spec");
  std::vector<Dense> states;
  states.reserve(spec.blocks.size() + 1);
  states.push_back(H.m);
  for (const Block& b : spec.blocks) {
    H = block_apply(b, H);
    states.push_back(H.m);
  }
  return states;
}

double forward_generic(const TransformerSpec& spec, const Prompt& prompt) {
  std::vector<Dense> states = forward_states(spec, prompt);
  return states.back().at(spec.decoder_row, spec.decoder_col);
}

}  // namespace kf
