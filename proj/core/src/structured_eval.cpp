#include "kernelformer/structured_eval.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "kernelformer/construct.hpp"
#include "kernelformer/error.hpp"
#include "kernelformer/numerics.hpp"
#include "kernelformer/token_matrix.hpp"

namespace kf {

namespace {

// Slack for prompt-bound checks; the certificate is stated for closed
// bounds and embedding arithmetic can overshoot by a few ulps.
constexpr double kBoundSlack = 1.0 + 1e-9;

std::string stage_name(size_t block_index) {
  return "stage " + std::to_string(block_index + 1);
}

void check_prompt(const Prompt& p, const StructuredPlan& plan, double b,
                  double R) {
  if (p.n < 1 || p.n != plan.n)
    throw DomainError("prompt sample count does not match the build");
  if (static_cast<int>(p.xs.size()) != p.n + 1 ||
      static_cast<int>(p.ys.size()) != p.n)
    throw DomainError("prompt arrays inconsistent with its sample count");
  for (const Point& x : p.xs) {
    if (static_cast<int>(x.size()) != plan.D)
      throw DomainError("prompt ambient dimension does not match the build");
    for (double v : x)
      if (!std::isfinite(v) || std::fabs(v) > b * kBoundSlack)
        throw DomainError("prompt coordinate outside the certified bound");
  }
  for (double y : p.ys)
    if (!std::isfinite(y) || std::fabs(y) > R * kBoundSlack)
      throw DomainError("prompt label outside the certified bound");
}

double eval_structured(const TransformerSpec& spec, const StructuredPlan& plan,
                       const Prompt& p, std::vector<Dense>* capture) {
  check_prompt(p, plan, spec.manifest.b, spec.manifest.R);
  int n = plan.n, D = plan.D;
  double m1 = plan.m_small, m3 = plan.m_big;

  // Stage 1: query coordinates arrive in every target column through the
  // offset; the decrement leaves them quantized at the offset's scale.
  std::vector<double> xt(D);
  for (int i = 0; i < D; ++i) {
    double v1 = p.xs[n][i] + m1;
    if (!(v1 > 0.0)) throw Error("stage 1 working value clipped");
    xt[i] = v1 - m1;
  }

  // Stages 2 and 3 per target column: coordinate differences, then the
  // bandwidth-scaled squared distance on the value row.
  std::vector<double> sq(n), yt(n);
  std::vector<double> diffs;
  if (capture) diffs.resize(static_cast<size_t>(D) * n);
  DotAccumulator acc;
  for (int j = 0; j < n; ++j) {
    acc.clear();
    for (int i = 0; i < D; ++i) {
      double w2 = m1 - p.xs[j][i];
      double v2 = xt[i] + w2;
      if (!(v2 > 0.0)) throw Error("stage 2 working value clipped");
      double diff = v2 - m1;
      if (capture) diffs[static_cast<size_t>(i) * n + j] = diff;
      acc.add_product(plan.q_diag * diff, plan.k_diag * diff);
    }
    acc.add_term(m3);
    double v3 = acc.value();
    if (!(v3 > 0.0)) throw Error("stage 3 working value clipped");
    sq[j] = v3 - m3;

    double v4 = p.ys[j] + m3;
    if (!(v4 > 0.0)) throw Error("stage 4 working value clipped");
    yt[j] = v4 - m3;
  }

  // Stage 5: masked softmax over the target columns, same shift, ordering
  // and rounding pattern as the generic softmax head.
  double mx = sq[0];
  for (double v : sq) mx = std::max(mx, v);
  std::vector<double> w(n);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    w[j] = std::exp(sq[j] - mx);
    total += w[j];
  }
  double out = 0.0;
  for (int j = 0; j < n; ++j) {
    double wt = w[j] / total;
    out += wt * yt[j];
  }

  if (capture) {
    capture->clear();
    TokenMatrix H0 = embed_prompt(p);
    capture->push_back(H0.m);
    Dense s = H0.m;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < D; ++i) s.at(i, n + 1 + j) = xt[i];
    capture->push_back(s);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < D; ++i)
        s.at(i, n + 1 + j) = diffs[static_cast<size_t>(i) * n + j];
    capture->push_back(s);
    for (int j = 0; j < n; ++j) s.at(D, n + 1 + j) = sq[j];
    capture->push_back(s);
    for (int j = 0; j < n; ++j) s.at(D + 1, n + 1 + j) = yt[j];
    capture->push_back(s);
    s.at(D, n) = out;
    capture->push_back(s);
  }
  return out;
}

}  // namespace

CompiledForward::CompiledForward(const TransformerSpec& spec) : spec_(&spec) {
  const BuildManifest& mf = spec.manifest;
  if (!mf.present) {
    reason_ = "no build manifest; evaluating generically";
    return;
  }
  TransformerSpec canonical;
  try {
    canonical = build_kernel_transformer(mf.n, mf.D, mf.h, mf.b, mf.R,
                                         mf.safety_factor);
  } catch (const Error& e) {
    reason_ = std::string("canonical rebuild failed: ") + e.what();
    return;
  }
  if (!(mf == canonical.manifest)) {
    reason_ = "manifest constants differ from the canonical build";
    return;
  }
  if (!(spec.arch == canonical.arch)) {
    reason_ = "architecture descriptor differs from the canonical build";
    return;
  }
  if (spec.decoder_row != canonical.decoder_row ||
      spec.decoder_col != canonical.decoder_col) {
    reason_ = "decoder address differs from the canonical build";
    return;
  }
  if (spec.blocks.size() != canonical.blocks.size()) {
    reason_ = "block count differs from the canonical build";
    return;
  }
  for (size_t k = 0; k < spec.blocks.size(); ++k) {
    if (!(spec.blocks[k] == canonical.blocks[k])) {
      reason_ = stage_name(k) + " weights differ from the canonical build";
      return;
    }
  }
  // Margin floor at unit safety factor; a build whose separation constants
  // sit below this has no suppression certificate even if its weights are
  // internally consistent.
  for (int s = 0; s < 4; ++s) {
    InteractionRequest req;
    req.q_data = SparseMat(canonical.arch.d_embed - 3, canonical.arch.d_embed);
    req.k_data = req.q_data;
    req.ell = canonical.arch.ell;
    req.d_embed = canonical.arch.d_embed;
    req.u_bound = mf.stage_u[s];
    req.kappa_data = mf.stage_kdata[s];
    req.safety_factor = 1.0;
    double floor_c = interaction_constant(req);
    if (!(mf.interaction_c[s] >= floor_c * (1.0 - 1e-12))) {
      reason_ = stage_name(s) + " margin constant below the certified floor";
      return;
    }
  }
  plan_ = StructuredPlan{mf.n, mf.D, mf.m_small, mf.m_big, -1.0 / mf.h,
                         1.0 / mf.h};
}

double CompiledForward::operator()(const Prompt& p) const {
  if (!plan_) return forward_generic(*spec_, p);
  return eval_structured(*spec_, *plan_, p, nullptr);
}

std::vector<Dense> CompiledForward::states(const Prompt& p) const {
  if (!plan_) return forward_states(*spec_, p);
  std::vector<Dense> cap;
  eval_structured(*spec_, *plan_, p, &cap);
  return cap;
}

double forward(const TransformerSpec& spec, const Prompt& prompt) {
  CompiledForward fwd(spec);
  return fwd(prompt);
}

}  // namespace kf
