#include "kernelformer/construct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "kernelformer/error.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/numerics.hpp"
#include "kernelformer/rng.hpp"
#include "kernelformer/structured_eval.hpp"

namespace kf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOverflowCap = 1e300;

// Angle of 1-based column j on the quarter arc, factored exactly as in
// the positional encoding so certification sees the stored statics.
double theta(int j, int ell) {
  return kPi * (0.5 * static_cast<double>(j) / static_cast<double>(ell));
}

void check_data_kernel(const SparseMat& m, int d, double kappa,
                       const char* name) {
  if (m.rows != d - 3 || m.cols != d)
    throw ParamError(std::string(name) + " must be (d_embed-3) x d_embed");
  if (!m.sorted_unique())
    throw ParamError(std::string(name) + " entries must be sorted row-major");
  if (m.max_abs() > kappa)
    throw ParamError(std::string(name) + " exceeds its declared bound");
}

void check_request(const InteractionRequest& req) {
  if (req.d_embed < 5) throw ParamError("interaction head needs d_embed >= 5");
  if (req.ell < 3 || req.ell % 2 == 0)
    throw ParamError("interaction head needs odd ell >= 3");
  if (req.t1 < 0 || req.t1 >= req.ell || req.t2 < 0 || req.t2 >= req.ell)
    throw ParamError("interaction columns out of range");
  if (req.value_row < 0 || req.value_row >= req.d_embed)
    throw ParamError("interaction value row out of range");
  if (!(req.u_bound > 0.0) || !(req.kappa_data > 0.0))
    throw ParamError("interaction bounds must be positive");
  if (!(req.safety_factor > 0.0))
    throw ParamError("safety factor must be positive");
  check_data_kernel(req.q_data, req.d_embed, req.kappa_data, "Q_data");
  check_data_kernel(req.k_data, req.d_embed, req.kappa_data, "K_data");
}

double interaction_constant_impl(int ell, int d_embed, double kappa_data,
                                 double u_bound, double safety_factor) {
  double d = static_cast<double>(d_embed);
  double numerator = d * d * d * d * kappa_data * kappa_data * u_bound *
                     u_bound;
  // Two separation cases; both denominators depend only on the angle gap.
  // Enumerated over the realized grid rather than the loose quadratic bound.
  double min_den = 2.0;
  for (int gap = 1; gap < ell; ++gap) {
    double c = std::cos(theta(gap, ell));
    double den_projection = 1.0 - std::fabs(c);
    double den_rotation = 1.0 - c;
    min_den = std::min(min_den, std::min(den_projection, den_rotation));
  }
  double c_val = safety_factor * numerator / min_den;
  if (!std::isfinite(c_val) || c_val > kOverflowCap)
    throw Error("interaction constant overflow; increase the bandwidth");
  return c_val;
}

AttentionHead build_interaction_head_with_c(const InteractionRequest& req,
                                            double c_val) {
  int d = req.d_embed;
  AttentionHead head;
  head.act = Activation::ReLU;
  head.Q = SparseMat(d, d);
  head.K = SparseMat(d, d);
  head.V = SparseMat(d, d);

  for (size_t i = 0; i < req.q_data.nnz(); ++i)
    head.Q.add(static_cast<int>(req.q_data.ri[i]),
               static_cast<int>(req.q_data.ci[i]), req.q_data.v[i]);
  // Rotation-dilation mapping I_{t1} onto C * I_{t2} in the position plane.
  double delta = theta(req.t2 + 1, req.ell) - theta(req.t1 + 1, req.ell);
  double cd = std::cos(delta), sd = std::sin(delta);
  head.Q.add(d - 3, d - 3, c_val * cd);
  head.Q.add(d - 3, d - 2, -c_val * sd);
  head.Q.add(d - 2, d - 3, c_val * sd);
  head.Q.add(d - 2, d - 2, c_val * cd);
  head.Q.add(d - 1, d - 1, 1.0);

  for (size_t i = 0; i < req.k_data.nnz(); ++i)
    head.K.add(static_cast<int>(req.k_data.ri[i]),
               static_cast<int>(req.k_data.ci[i]), req.k_data.v[i]);
  // Projection onto I_{t2}, and the margin constant against the ones row.
  double c2 = std::cos(theta(req.t2 + 1, req.ell));
  double s2 = std::sin(theta(req.t2 + 1, req.ell));
  head.K.add(d - 3, d - 3, c2 * c2);
  head.K.add(d - 3, d - 2, c2 * s2);
  head.K.add(d - 2, d - 3, c2 * s2);
  head.K.add(d - 2, d - 2, s2 * s2);
  head.K.add(d - 1, d - 1, -c_val);

  head.V.add(req.value_row, d - 1, 1.0);
  return head;
}

// ---- FFN gadget assembly ---------------------------------------------

struct ChannelWeights {
  double w_cos = 0, w_sin = 0, w_self = 0, bias = 0;
};

// Replicates the evaluator's compensated row sum for a channel row fed by
// (cos, sin, previous-channel) inputs.
double channel_value(const ChannelWeights& cw, double c, double s,
                     double prev) {
  DotAccumulator acc;
  acc.add_product(cw.w_self, prev);
  acc.add_product(cw.w_cos, c);
  acc.add_product(cw.w_sin, s);
  acc.add_term(cw.bias);
  return acc.value();
}

// Separator direction for the boundary between 1-based columns j and j+1;
// positive side is t <= j.
void bisector(int j, int ell, double* v0, double* v1) {
  double phi = (2.0 * static_cast<double>(j) + 1.0) * kPi /
               (4.0 * static_cast<double>(ell));
  *v0 = std::sin(phi);
  *v1 = -std::cos(phi);
}

// Left-keep indicator margin vector: positive on t <= k, negative after.
// k = 0 or k = ell degenerate to all-negative / all-positive.
void keep_left_vector(int k, int ell, double* v0, double* v1, double* margin) {
  if (k <= 0) {
    *v0 = -1.0;
    *v1 = -1.0;
    *margin = 1.0;
  } else if (k >= ell) {
    *v0 = 1.0;
    *v1 = 1.0;
    *margin = 1.0;
  } else {
    bisector(k, ell, v0, v1);
    *margin = std::sin(kPi / (4.0 * static_cast<double>(ell)));
  }
}

SparseMat identity_mat(int d) {
  SparseMat m(d, d);
  for (int r = 0; r < d; ++r) m.add(r, r, 1.0);
  return m;
}

FFNLayer passthrough_layer(int d) {
  return {identity_mat(d), std::vector<double>(d, 0.0)};
}

}  // namespace

double interaction_constant(const InteractionRequest& req) {
  check_request(req);
  return interaction_constant_impl(req.ell, req.d_embed, req.kappa_data,
                                   req.u_bound, req.safety_factor);
}

AttentionHead build_interaction_head(const InteractionRequest& req) {
  check_request(req);
  double c_val = interaction_constant_impl(req.ell, req.d_embed,
                                           req.kappa_data, req.u_bound,
                                           req.safety_factor);
  return build_interaction_head_with_c(req, c_val);
}

FFNStack build_gating_ffn(int r1, int r2, int split, GateSide side,
                          double h_bound, int ell, int d_embed) {
  int d = d_embed;
  if (d < 5) throw ParamError("gate needs d_embed >= 5");
  if (ell < 3 || ell % 2 == 0) throw ParamError("gate needs odd ell >= 3");
  if (r1 < 0 || r1 > r2 || r2 > d - 4)
    throw ParamError("gate rows must lie in the data range");
  if (split < 1 || split > ell - 1)
    throw ParamError("no separating direction: split out of range");
  if (!(h_bound > 0.0) || !std::isfinite(h_bound))
    throw ParamError("gate bound must be positive and finite");

  int row_cos = d - 3, row_sin = d - 2;
  // Positive side of the raw separator is t <= split; flip so the positive
  // side is always the protected one.
  double v0, v1, margin;
  keep_left_vector(split, ell, &v0, &v1, &margin);
  if (side == GateSide::ZeroLeft) {
    v0 = -v0;
    v1 = -v1;
  }

  double big_n = pow2_ceil(2.5 / margin + 2.0);
  for (int attempt = 0;; ++attempt) {
    if (attempt > 60) throw Error("gate margin calibration failed");
    ChannelWeights l1{-big_n * v0, -big_n * v1, 0.0, 1.0};
    bool ok = true;
    for (int t = 1; t <= ell; ++t) {
      double c = std::cos(theta(t, ell)), s = std::sin(theta(t, ell));
      bool protected_col = side == GateSide::ZeroRight ? t <= split
                                                       : t > split;
      double arg = channel_value(l1, c, s, 0.0);
      if (protected_col ? arg > -0.5 : arg < 2.0) {
        ok = false;
        break;
      }
    }
    if (ok) {
      FFNStack f;
      f.residual = false;
      // L1: raw side signal on the working row; everything else passes.
      SparseMat w1(d, d);
      std::vector<double> b1(d, 0.0);
      for (int r = 0; r < d; ++r) {
        if (r == r1) {
          w1.add(r, row_cos, l1.w_cos);
          w1.add(r, row_sin, l1.w_sin);
          b1[r] = l1.bias;
        } else {
          w1.add(r, r, 1.0);
        }
      }
      f.layers.push_back({std::move(w1), std::move(b1)});
      // L2: working row becomes the exact {0,1} protected indicator.
      SparseMat w2(d, d);
      std::vector<double> b2(d, 0.0);
      for (int r = 0; r < d; ++r) {
        if (r == r1) {
          w2.add(r, r1, -1.0);
          b2[r] = 1.0;
        } else {
          w2.add(r, r, 1.0);
        }
      }
      f.layers.push_back({std::move(w2), std::move(b2)});
      // L3: gated rows are pushed below zero unless the indicator refunds
      // the shift; the refund cancels exactly in the compensated row sum.
      SparseMat w3(d, d);
      std::vector<double> b3(d, 0.0);
      for (int r = 0; r < d; ++r) {
        if (r == r1) {
          w3.add(r, r1, -1.0);
        } else if (r > r1 && r <= r2) {
          w3.add(r, r1, h_bound);
          w3.add(r, r, 1.0);
          b3[r] = -h_bound;
        } else {
          w3.add(r, r, 1.0);
        }
      }
      f.layers.push_back({std::move(w3), std::move(b3)});
      f.layers.push_back(passthrough_layer(d));
      return f;
    }
    big_n *= 2.0;
  }
}

FFNStack build_decrement_ffn(int r1, int r2, int k1, int k2, double M, int ell,
                             int d_embed) {
  int d = d_embed;
  if (d < 5) throw ParamError("decrement needs d_embed >= 5");
  if (ell < 3 || ell % 2 == 0) throw ParamError("decrement needs odd ell >= 3");
  if (r1 < 0 || r1 > r2 || r2 > d - 4)
    throw ParamError("decrement rows must lie in the data range");
  if (k1 < 0 || k1 > ell || k2 < k1 + 1 || k2 > ell + 1)
    throw ParamError("decrement window out of range");
  if (!(M >= 0.0) || !std::isfinite(M))
    throw ParamError("decrement offset must be nonnegative and finite");

  int row_cos = d - 3, row_sin = d - 2;
  double va0, va1, ma;
  keep_left_vector(k1, ell, &va0, &va1, &ma);
  double wb0, wb1, mb;
  keep_left_vector(k2 - 1, ell, &wb0, &wb1, &mb);

  double na = pow2_ceil(2.5 / ma + 2.0);
  double nb = pow2_ceil(2.5 / mb + 2.0);
  for (int attempt = 0;; ++attempt) {
    if (attempt > 60) throw Error("decrement margin calibration failed");
    ChannelWeights l1{-na * va0, -na * va1, 0.0, 1.0};
    ChannelWeights l2{0.0, 0.0, -1.0, 1.0};
    double big = pow2_ceil(2.0 * nb + 2.0);
    ChannelWeights l3{nb * wb0, nb * wb1, -big, 0.0};
    ChannelWeights l4{0.0, 0.0, -1.0, 1.0};
    ChannelWeights l5{0.0, 0.0, -1.0, 1.0};
    bool ok = true;
    bool grow_a = false, grow_b = false;
    for (int t = 1; t <= ell; ++t) {
      double c = std::cos(theta(t, ell)), s = std::sin(theta(t, ell));
      bool in_window = t > k1 && t < k2;
      double z1 = relu(channel_value(l1, c, s, 0.0));
      double z2 = relu(channel_value(l2, c, s, z1));
      if (z2 != (t <= k1 ? 1.0 : 0.0)) {
        ok = false;
        grow_a = true;
        break;
      }
      double z3a = channel_value(l3, c, s, z2);
      if (in_window ? z3a < 1.5 : z3a > 0.0) {
        ok = false;
        grow_b = true;
        break;
      }
      double z3 = relu(z3a);
      double z4 = relu(channel_value(l4, c, s, z3));
      double z5 = relu(channel_value(l5, c, s, z4));
      if (z5 != (in_window ? 1.0 : 0.0)) {
        ok = false;
        grow_b = true;
        break;
      }
    }
    if (ok) {
      FFNStack f;
      f.residual = true;
      auto channel_layer = [&](const ChannelWeights& cw, bool keep_static) {
        SparseMat w(d, d);
        std::vector<double> b(d, 0.0);
        for (int r = 0; r < d; ++r) {
          if (r == r1) {
            if (cw.w_self != 0.0) w.add(r, r1, cw.w_self);
            if (cw.w_cos != 0.0) w.add(r, row_cos, cw.w_cos);
            if (cw.w_sin != 0.0) w.add(r, row_sin, cw.w_sin);
            b[r] = cw.bias;
          } else if (keep_static && r >= row_cos) {
            w.add(r, r, 1.0);
          }
        }
        return FFNLayer{std::move(w), std::move(b)};
      };
      f.layers.push_back(channel_layer(l1, true));
      f.layers.push_back(channel_layer(l2, true));
      f.layers.push_back(channel_layer(l3, false));
      f.layers.push_back(channel_layer(l4, false));
      f.layers.push_back(channel_layer(l5, false));
      SparseMat w6(d, d);
      std::vector<double> b6(d, 0.0);
      for (int r = r1; r <= r2; ++r) w6.add(r, r1, -M);
      f.layers.push_back({std::move(w6), std::move(b6)});
      return f;
    }
    if (grow_a) na *= 2.0;
    if (grow_b) nb *= 2.0;
  }
}

namespace {

SparseMat data_kernel(int d) { return SparseMat(d - 3, d); }

InteractionRequest stage_request(int t1, int t2, int value_row, SparseMat q,
                                 SparseMat k, int ell, int d, double u_bound,
                                 double kappa_data, double sf) {
  InteractionRequest req;
  req.t1 = t1;
  req.t2 = t2;
  req.value_row = value_row;
  req.q_data = std::move(q);
  req.k_data = std::move(k);
  req.ell = ell;
  req.d_embed = d;
  req.u_bound = u_bound;
  req.kappa_data = kappa_data;
  req.safety_factor = sf;
  return req;
}

double scan_kappa(const TransformerSpec& spec) {
  double kappa = 0.0;
  for (const auto& blk : spec.blocks) {
    for (const auto& head : blk.heads) {
      kappa = std::max(kappa, head.Q.max_abs());
      kappa = std::max(kappa, head.K.max_abs());
      kappa = std::max(kappa, head.V.max_abs());
    }
    for (const auto& layer : blk.ffn.layers) {
      kappa = std::max(kappa, layer.W.max_abs());
      for (double v : layer.bias) kappa = std::max(kappa, std::fabs(v));
    }
  }
  return kappa;
}

}  // namespace

TransformerSpec build_kernel_transformer(int n, int D, double h, double b,
                                         double R, double safety_factor) {
  if (n < 1) throw ParamError("need at least one labeled sample");
  if (D < 1) throw ParamError("ambient dimension must be positive");
  if (!(h > 0.0) || !(h < 1.0))
    throw ParamError("bandwidth must lie in (0, 1)");
  if (!(b > 0.0) || !std::isfinite(b))
    throw ParamError("coordinate bound must be positive and finite");
  if (!(R > 0.0) || !std::isfinite(R))
    throw ParamError("value bound must be positive and finite");
  if (!(safety_factor > 0.0))
    throw ParamError("safety factor must be positive");

  int d = D + 5;
  int ell = 2 * n + 1;
  int row_y = D, row_aux = D + 1;
  int col_query = n;

  double m1 = pow2_ceil(4.0 * b + 2.0);
  double growth = 4.0 * b * b * static_cast<double>(D) / (h * h);
  if (!std::isfinite(growth) || growth > kOverflowCap)
    throw Error("squared-distance range overflow; increase the bandwidth");
  double m3 = pow2_ceil(2.0 * std::max(growth, R) + 1.0);
  if (!std::isfinite(m3) || m3 > kOverflowCap)
    throw Error("offset constant overflow; increase the bandwidth");

  double floor_u = std::max(R, 1.0);
  double stage_u[4] = {std::max(b, floor_u), std::max(b, floor_u),
                       std::max(2.0 * b, floor_u),
                       std::max(growth * 1.000001, std::max(2.0 * b, floor_u))};
  double stage_kdata[4] = {std::max(1.0, m1), std::max(1.0, m1),
                           std::max(1.0 / h, m3), std::max(1.0, m3)};
  double stage_c[4];
  for (int s = 0; s < 4; ++s)
    stage_c[s] = interaction_constant_impl(ell, d, stage_kdata[s], stage_u[s],
                                           safety_factor);

  double qv = -1.0 / h, kv = 1.0 / h;
  TransformerSpec spec;
  spec.blocks.resize(5);

  // Stage 1: pull each query coordinate, shifted up, into every target slot.
  // Stage 2: subtract the matching sample coordinate the same way.
  for (int stage = 0; stage < 2; ++stage) {
    Block& blk = spec.blocks[stage];
    blk.heads.reserve(static_cast<size_t>(n) * D);
    for (int j = 0; j < n; ++j) {
      int t1 = n + 1 + j;
      int t2 = stage == 0 ? col_query : j;
      for (int i = 0; i < D; ++i) {
        SparseMat q = data_kernel(d);
        q.add(i, d - 1, stage == 0 ? 1.0 : -1.0);
        q.add(row_aux, d - 1, 1.0);
        SparseMat k = data_kernel(d);
        k.add(i, i, 1.0);
        k.add(row_aux, d - 1, m1);
        auto req = stage_request(t1, t2, i, std::move(q), std::move(k), ell, d,
                                 stage_u[stage], stage_kdata[stage],
                                 safety_factor);
        blk.heads.push_back(
            build_interaction_head_with_c(req, stage_c[stage]));
      }
    }
    blk.ffn = build_decrement_ffn(0, D - 1, n + 1, ell + 1, m1, ell, d);
  }

  // Stage 3: squared distance, scaled by the bandwidth, on the value row.
  {
    Block& blk = spec.blocks[2];
    blk.heads.reserve(n);
    for (int j = 0; j < n; ++j) {
      int t = n + 1 + j;
      SparseMat q = data_kernel(d);
      for (int a = 0; a < D; ++a) q.add(a, a, qv);
      q.add(row_aux, d - 1, 1.0);
      SparseMat k = data_kernel(d);
      for (int a = 0; a < D; ++a) k.add(a, a, kv);
      k.add(row_aux, d - 1, m3);
      auto req = stage_request(t, t, row_y, std::move(q), std::move(k), ell, d,
                               stage_u[2], stage_kdata[2], safety_factor);
      blk.heads.push_back(build_interaction_head_with_c(req, stage_c[2]));
    }
    blk.ffn = build_decrement_ffn(row_y, row_y, n + 1, ell + 1, m3, ell, d);
  }

  // Stage 4: copy each label, shifted up, onto the working row.
  {
    Block& blk = spec.blocks[3];
    blk.heads.reserve(n);
    for (int j = 0; j < n; ++j) {
      int t1 = n + 1 + j;
      SparseMat q = data_kernel(d);
      q.add(row_y, d - 1, 1.0);
      q.add(row_aux, d - 1, 1.0);
      SparseMat k = data_kernel(d);
      k.add(row_y, row_y, 1.0);
      k.add(row_aux, d - 1, m3);
      auto req = stage_request(t1, j, row_aux, std::move(q), std::move(k), ell,
                               d, stage_u[3], stage_kdata[3], safety_factor);
      blk.heads.push_back(build_interaction_head_with_c(req, stage_c[3]));
    }
    blk.ffn = build_decrement_ffn(row_aux, row_aux, n + 1, ell + 1, m3, ell, d);
  }

  // Stage 5: masked softmax over the target slots, read at the query column.
  {
    Block& blk = spec.blocks[4];
    AttentionHead head;
    head.act = Activation::SoftmaxMasked;
    head.Q = SparseMat(d, d);
    head.Q.add(row_y, d - 1, 1.0);
    head.K = SparseMat(d, d);
    head.K.add(row_y, row_y, 1.0);
    head.V = SparseMat(d, d);
    head.V.add(row_y, row_aux, 1.0);
    head.softmax_query_col = col_query;
    head.mask.resize(n);
    for (int j = 0; j < n; ++j) head.mask[j] = n + 1 + j;
    blk.heads.push_back(std::move(head));
    blk.ffn.residual = true;
    blk.ffn.layers.push_back({SparseMat(d, d), std::vector<double>(d, 0.0)});
  }

  spec.decoder_row = row_y;
  spec.decoder_col = col_query;

  spec.arch.num_blocks = 5;
  spec.arch.max_heads = n * D;
  spec.arch.d_embed = d;
  spec.arch.ell = ell;
  spec.arch.max_ffn_depth = 6;
  spec.arch.ffn_width = d;
  spec.arch.value_bound = R;
  spec.arch.kappa = scan_kappa(spec);

  double env = 1e12 * std::pow(static_cast<double>(D), 8) *
               static_cast<double>(n) * static_cast<double>(n) *
               std::pow(std::max(b, 1.0), 8) * std::pow(std::max(R, 1.0), 4) /
               std::pow(h, 8);
  if (!(spec.arch.kappa <= env))
    throw Error("construction weights exceed the certified envelope");

  spec.manifest.present = true;
  spec.manifest.n = n;
  spec.manifest.D = D;
  spec.manifest.h = h;
  spec.manifest.b = b;
  spec.manifest.R = R;
  spec.manifest.safety_factor = safety_factor;
  spec.manifest.m_small = m1;
  spec.manifest.m_big = m3;
  for (int s = 0; s < 4; ++s) {
    spec.manifest.interaction_c[s] = stage_c[s];
    spec.manifest.stage_u[s] = stage_u[s];
    spec.manifest.stage_kdata[s] = stage_kdata[s];
  }
  return spec;
}

namespace {

std::string fail_at(const char* suite, int trial, int row, int col) {
  return std::string(suite) + " trial " + std::to_string(trial) + " at (" +
         std::to_string(row) + ", " + std::to_string(col) + ")";
}

Dense conforming_state(int d, int ell, Rng& rng, double lo, double hi) {
  Dense H(d, ell);
  for (int c = 0; c < ell; ++c) {
    for (int r = 0; r <= d - 4; ++r) H.at(r, c) = rng.uniform(lo, hi);
    H.at(d - 3, c) = std::cos(theta(c + 1, ell));
    H.at(d - 2, c) = std::sin(theta(c + 1, ell));
    H.at(d - 1, c) = 1.0;
  }
  return H;
}

bool interaction_trial(int trial, uint64_t seed, std::string* detail) {
  Rng rng(derive_seed(seed, 1000 + static_cast<uint64_t>(trial)));
  int ell = 2 * (1 + trial % 12) + 1;
  int d = 5 + trial % 9;
  double kappa = std::exp(rng.uniform(0.0, 3.0));
  double u_bound = std::exp(rng.uniform(0.0, 1.4));
  int t1 = static_cast<int>(rng.uniform01() * ell) % ell;
  int t2 = static_cast<int>(rng.uniform01() * ell) % ell;
  int value_row = static_cast<int>(rng.uniform01() * d) % d;

  auto random_kernel = [&] {
    SparseMat m(d - 3, d);
    for (int r = 0; r < d - 3; ++r)
      for (int c = 0; c < d; ++c)
        if (rng.uniform01() < 0.25) m.add(r, c, rng.uniform(-kappa, kappa));
    return m;
  };
  auto req = stage_request(t1, t2, value_row, random_kernel(), random_kernel(),
                           ell, d, u_bound, kappa, 2.0);
  AttentionHead head = build_interaction_head(req);
  double c_val = interaction_constant(req);

  TokenMatrix tm;
  tm.D = d - 5;
  tm.n = (ell - 1) / 2;
  tm.d_embed = d;
  tm.ell = ell;
  tm.m = conforming_state(d, ell, rng, -u_bound, u_bound);
  const Dense& H = tm.m;
  Dense out = attention_apply(head, tm);

  // Independent target: plain data logit in extended precision.
  long double dot = 0.0L;
  for (int r = 0; r < d - 3; ++r) {
    long double qr = 0.0L, kr = 0.0L;
    for (size_t e = 0; e < req.q_data.nnz(); ++e)
      if (static_cast<int>(req.q_data.ri[e]) == r)
        qr += static_cast<long double>(req.q_data.v[e]) *
              H.at(static_cast<int>(req.q_data.ci[e]), t1);
    for (size_t e = 0; e < req.k_data.nnz(); ++e)
      if (static_cast<int>(req.k_data.ri[e]) == r)
        kr += static_cast<long double>(req.k_data.v[e]) *
              H.at(static_cast<int>(req.k_data.ci[e]), t2);
    dot += qr * kr;
  }
  double expected = relu(static_cast<double>(dot));
  double budget =
      64.0 * kEps * c_val + 1e-9 * std::max(1.0, std::fabs(expected));

  for (int c = 0; c < ell; ++c) {
    for (int r = 0; r < d; ++r) {
      double got = out.at(r, c);
      if (c == t1 && r == value_row) {
        if (std::fabs(got - expected) > budget) {
          *detail = fail_at("interaction", trial, r, c) + ": value off target";
          return false;
        }
      } else if (got != 0.0) {
        *detail = fail_at("interaction", trial, r, c) + ": leakage";
        return false;
      }
    }
  }
  return true;
}

bool gating_trial(int trial, uint64_t seed, bool inject_bug,
                  std::string* detail) {
  Rng rng(derive_seed(seed, 2000 + static_cast<uint64_t>(trial)));
  int ell = 2 * (1 + trial % 12) + 1;
  int d = 6 + trial % 8;
  int r1 = static_cast<int>(rng.uniform01() * (d - 4)) % (d - 4);
  int r2 = r1 + 1 +
           static_cast<int>(rng.uniform01() * (d - 4 - r1)) % (d - 4 - r1);
  int split = 1 + static_cast<int>(rng.uniform01() * (ell - 1)) % (ell - 1);
  GateSide side = trial % 2 == 0 ? GateSide::ZeroRight : GateSide::ZeroLeft;
  double h_bound = std::exp(rng.uniform(0.0, 4.0));

  int built_split = split;
  if (inject_bug) built_split = split == ell - 1 ? split - 1 : split + 1;
  FFNStack gate = build_gating_ffn(r1, r2, built_split, side, h_bound, ell, d);

  Dense H = conforming_state(d, ell, rng, 0.0, 10.0);
  for (int c = 0; c < ell; ++c) {
    H.at(r1, c) = 0.0;
    for (int r = r1 + 1; r <= r2; ++r) H.at(r, c) = rng.uniform(0.0, h_bound);
  }
  Dense out = ffn_stack_apply(gate, H);

  for (int c = 0; c < ell; ++c) {
    int t = c + 1;
    bool protected_col = side == GateSide::ZeroRight ? t <= split : t > split;
    for (int r = 0; r < d; ++r) {
      double want = protected_col || r < r1 || r > r2 ? H.at(r, c) : 0.0;
      if (out.at(r, c) != want) {
        *detail = fail_at("gating", trial, r, c) +
                  (protected_col ? ": protected column changed"
                                 : ": gated cell not cleared");
        return false;
      }
    }
  }
  return true;
}

bool decrement_trial(int trial, uint64_t seed, std::string* detail) {
  Rng rng(derive_seed(seed, 3000 + static_cast<uint64_t>(trial)));
  int ell = 2 * (1 + trial % 12) + 1;
  int d = 5 + trial % 9;
  int r1 = static_cast<int>(rng.uniform01() * (d - 3)) % (d - 3);
  int r2 = r1 + static_cast<int>(rng.uniform01() * (d - 3 - r1)) % (d - 3 - r1);
  int k1 = static_cast<int>(rng.uniform01() * (ell + 1)) % (ell + 1);
  int k2 = k1 + 1 +
           static_cast<int>(rng.uniform01() * (ell + 1 - k1)) % (ell + 1 - k1);
  double m_off = trial % 7 == 0 ? 0.0 : std::ldexp(1.0, trial % 24 - 3);

  FFNStack dec = build_decrement_ffn(r1, r2, k1, k2, m_off, ell, d);

  Dense H = conforming_state(d, ell, rng, -100.0, 100.0);
  if (m_off > 0.0) {
    for (int c = 0; c < ell; ++c) {
      int t = c + 1;
      if (t > k1 && t < k2)
        for (int r = r1; r <= r2; ++r)
          H.at(r, c) = rng.uniform(0.5 * m_off, 2.0 * m_off);
    }
  }
  Dense out = ffn_stack_apply(dec, H);

  for (int c = 0; c < ell; ++c) {
    int t = c + 1;
    bool in_window = t > k1 && t < k2;
    for (int r = 0; r < d; ++r) {
      bool hit = in_window && r >= r1 && r <= r2 && m_off > 0.0;
      double want = hit ? H.at(r, c) - m_off : H.at(r, c);
      if (out.at(r, c) != want) {
        *detail = fail_at("decrement", trial, r, c) +
                  (hit ? ": shift not exact" : ": cell disturbed");
        return false;
      }
    }
  }
  return true;
}

}  // namespace

LemmaSuiteResult run_lemma_suites(int trials, uint64_t seed,
                                  bool inject_gating_split_bug) {
  if (trials < 1) throw ParamError("need at least one trial");
  LemmaSuiteResult res;
  res.interaction_pass = true;
  res.gating_pass = true;
  res.decrement_pass = true;
  std::string detail;
  for (int t = 0; t < trials && res.interaction_pass; ++t)
    res.interaction_pass = interaction_trial(t, seed, &detail);
  for (int t = 0; t < trials && res.gating_pass; ++t)
    res.gating_pass = gating_trial(t, seed, inject_gating_split_bug, &detail);
  for (int t = 0; t < trials && res.decrement_pass; ++t)
    res.decrement_pass = decrement_trial(t, seed, &detail);
  res.detail = res.all_pass() ? "all suites passed" : detail;
  return res;
}

EquivResult verify_equivalence(const TransformerSpec& spec,
                               const Prompt& prompt, double h) {
  CompiledForward fwd(spec);
  EquivResult res;
  res.transformer_value = fwd(prompt);
  res.oracle_value = nw_estimate(prompt, Bandwidth(h));
  res.abs_diff = std::fabs(res.transformer_value - res.oracle_value);
  res.rel_diff = res.abs_diff / std::max(1.0, std::fabs(res.oracle_value));
  return res;
}

}  // namespace kf
