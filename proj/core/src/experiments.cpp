#include "kernelformer/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "kernelformer/construct.hpp"
#include "kernelformer/error.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/rng.hpp"
#include "kernelformer/structured_eval.hpp"

namespace kf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

uint64_t chain(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return derive_seed(derive_seed(derive_seed(seed, a), b), c);
}

// Largest magnitude any embedded coordinate can take; random frames mix
// base coordinates, so this is the point norm, not the per-axis bound.
double embedded_bound(const Manifold& m) {
  return m.kind == ManifoldKind::CliffordTorus2 ? m.radius * std::sqrt(2.0)
                                                : m.radius;
}

std::string format_value(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void check_increasing(const std::vector<int>& g, const char* what) {
  if (g.empty()) throw ParamError(std::string(what) + " must be nonempty");
  for (size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 1) throw ParamError(std::string(what) + " entries must be >= 1");
    if (i > 0 && g[i] <= g[i - 1])
      throw ParamError(std::string(what) + " must be strictly increasing");
  }
}

struct MeanStderr {
  double mean = 0;
  double se = 0;
};

MeanStderr summarize(const std::vector<double>& v) {
  MeanStderr s;
  size_t k = v.size();
  if (k == 0) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(k);
  if (k < 2) return s;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(ss / (static_cast<double>(k) * static_cast<double>(k - 1)));
  return s;
}

// Each query point carries its own cone apex so the task attains its
// modulus of continuity at the query; apex levels are drawn from the
// lower half of the range, so the apex cone is the active branch for a
// constant majority of queries regardless of bandwidth.
void add_query_apexes(HolderFunction& f, const std::vector<Point>& pts,
                      size_t first, double R, uint64_t seed) {
  Rng rng(seed);
  for (size_t i = first; i < pts.size(); ++i) {
    f.anchors.push_back(pts[i]);
    f.offsets.push_back(rng.uniform(-R, 0.0));
  }
}

struct SharedTask {
  HolderFunction f;
  std::vector<Point> base;  // n + queries base points, queries last
  std::vector<double> labels;
  std::vector<double> hidden;
};

SharedTask make_shared_task(const Manifold& m, const ExperimentConfig& cfg,
                            int n, uint64_t task_seed) {
  SharedTask st;
  st.base =
      sample_uniform(m, n + cfg.queries_per_task, derive_seed(task_seed, 2));
  st.f = make_holder_function(m, cfg.holder_scale, cfg.alpha, cfg.value_bound,
                              cfg.anchors, derive_seed(task_seed, 1));
  add_query_apexes(st.f, st.base, static_cast<size_t>(n), cfg.value_bound,
                   derive_seed(task_seed, 5));
  st.labels.resize(n);
  for (int i = 0; i < n; ++i) st.labels[i] = eval_holder(m, st.f, st.base[i]);
  st.hidden.resize(cfg.queries_per_task);
  for (int q = 0; q < cfg.queries_per_task; ++q)
    st.hidden[q] = eval_holder(m, st.f, st.base[n + q]);
  return st;
}

// Mean squared error of the compiled network against hidden labels over
// the task's query points, reusing the embedded sample block.
double task_sse(const CompiledForward& fwd, const SharedTask& st,
                const IsometricEmbedding& e, int n, int queries) {
  Prompt p;
  p.n = n;
  p.xs.resize(n + 1);
  p.ys = st.labels;
  for (int i = 0; i < n; ++i) p.xs[i] = embed_ambient(e, st.base[i]);
  double sse = 0.0;
  for (int q = 0; q < queries; ++q) {
    p.xs[n] = embed_ambient(e, st.base[n + q]);
    p.hidden_label = st.hidden[q];
    double diff = fwd(p) - p.hidden_label;
    sse += diff * diff;
  }
  return sse;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  Manifold m{cfg.manifold, cfg.radius};
  if (!(cfg.radius > 0.0) || !std::isfinite(cfg.radius))
    throw ParamError("radius must be positive and finite");
  if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0)
    throw ParamError("alpha must lie in (0, 1]");
  if (!(cfg.holder_scale > 0.0))
    throw ParamError("holder_scale must be positive");
  if (!(cfg.value_bound > 0.0)) throw ParamError("value_bound must be positive");
  if (cfg.anchors < 1) throw ParamError("anchors must be >= 1");
  if (cfg.ambient_dim < m.base_ambient_dim())
    throw ParamError("ambient_dim below the manifold's base dimension");
  check_increasing(cfg.n_grid, "n_grid");
  check_increasing(cfg.variance_n_grid, "variance_n_grid");
  check_increasing(cfg.d_grid, "d_grid");
  if (cfg.h_grid.empty()) throw ParamError("h_grid must be nonempty");
  for (size_t i = 0; i < cfg.h_grid.size(); ++i) {
    if (!(cfg.h_grid[i] > 0.0) || !(cfg.h_grid[i] < 1.0))
      throw ParamError("h_grid entries must lie in (0, 1)");
    if (i > 0 && cfg.h_grid[i] >= cfg.h_grid[i - 1])
      throw ParamError("h_grid must be strictly decreasing");
  }
  if (cfg.tasks_per_point < 8) throw ParamError("tasks_per_point must be >= 8");
  if (cfg.queries_per_task < 1)
    throw ParamError("queries_per_task must be >= 1");
  if (cfg.mc_samples < 1000) throw ParamError("mc_samples must be >= 1000");
  if (!(cfg.fixed_h > 0.0) || !(cfg.fixed_h < 1.0))
    throw ParamError("fixed_h must lie in (0, 1)");
  if (cfg.fixed_n < 1) throw ParamError("fixed_n must be >= 1");
  if (!(cfg.safety_factor > 0.0))
    throw ParamError("safety_factor must be positive");
}

SlopeFit fit_loglog_slope(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  // Two-sided 97.5% Student quantiles for 1..30 degrees of freedom.
  static const double kT[30] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  size_t m = xs.size();
  if (m != ys.size() || m < 4)
    throw ParamError("slope fit needs >= 4 matched points");
  std::vector<double> lx(m), ly(m);
  for (size_t i = 0; i < m; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw DomainError("slope fit needs positive data");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("slope fit abscissae are degenerate");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (size_t i = 0; i < m; ++i) {
    double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    rss += r * r;
  }
  size_t dof = m - 2;
  double t = dof <= 30 ? kT[dof - 1] : 1.96;
  fit.half_width = t * std::sqrt(rss / static_cast<double>(dof) / sxx);
  return fit;
}

ExperimentReport run_equivalence_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Manifold m{cfg.manifold, cfg.radius};
  ExperimentReport rep;
  rep.name = "equivalence";
  rep.pass = true;
  double worst_all = 0.0;
  for (size_t pi = 0; pi < cfg.n_grid.size(); ++pi) {
    int n = cfg.n_grid[pi];
    double h = bandwidth_for(n, cfg.alpha, m.intrinsic_dim()).h;
    TransformerSpec spec =
        build_kernel_transformer(n, cfg.ambient_dim, h, embedded_bound(m),
                                 cfg.value_bound, cfg.safety_factor);
    CompiledForward fwd(spec);
    bool validated = fwd.structured();
    double worst = kInf;
    // Generic evaluation of an unvalidated build is only affordable (and
    // only informative) at small scale.
    if (validated || n <= 32) {
      worst = 0.0;
      for (int task = 0; task < cfg.tasks_per_point; ++task) {
        uint64_t st = chain(cfg.seed, 10, pi, static_cast<uint64_t>(task));
        HolderFunction f =
            make_holder_function(m, cfg.holder_scale, cfg.alpha,
                                 cfg.value_bound, cfg.anchors,
                                 derive_seed(st, 1));
        IsometricEmbedding e = make_embedding(
            cfg.ambient_dim, m.base_ambient_dim(), derive_seed(st, 2));
        Prompt p = generate_task(m, e, f, n, derive_seed(st, 3));
        double tv = fwd(p);
        double ov = nw_estimate(p, Bandwidth(h));
        double rel = std::fabs(tv - ov) / std::max(1.0, std::fabs(ov));
        worst = std::max(worst, rel);
      }
    }
    rep.rows.push_back({"n=" + std::to_string(n), static_cast<double>(n),
                        worst, 0.0, validated ? 1.0 : 0.0});
    if (!validated) {
      rep.pass = false;
      if (rep.detail.empty())
        rep.detail = "n=" + std::to_string(n) + ": " + fwd.reject_reason();
    } else if (!(worst <= 1e-9)) {
      rep.pass = false;
      if (rep.detail.empty())
        rep.detail = "n=" + std::to_string(n) + ": relative gap " +
                     format_value(worst) + " exceeds 1e-9";
    }
    if (worst < kInf) worst_all = std::max(worst_all, worst);
  }
  if (rep.detail.empty())
    rep.detail = "worst relative gap " + format_value(worst_all);
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_rate_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Manifold m{cfg.manifold, cfg.radius};
  ExperimentReport rep;
  rep.name = "rate";
  bool all_valid = true;
  std::vector<double> gx, gy;
  for (size_t pi = 0; pi < cfg.n_grid.size(); ++pi) {
    int n = cfg.n_grid[pi];
    double h = bandwidth_for(n, cfg.alpha, m.intrinsic_dim()).h;
    TransformerSpec spec =
        build_kernel_transformer(n, cfg.ambient_dim, h, embedded_bound(m),
                                 cfg.value_bound, cfg.safety_factor);
    CompiledForward fwd(spec);
    if (!fwd.structured()) {
      all_valid = false;
      if (rep.detail.empty())
        rep.detail = "n=" + std::to_string(n) + ": " + fwd.reject_reason();
    }
    std::vector<double> per_task(static_cast<size_t>(cfg.tasks_per_point));
    for (int task = 0; task < cfg.tasks_per_point; ++task) {
      uint64_t ts = chain(cfg.seed, 20, pi, static_cast<uint64_t>(task));
      SharedTask stk = make_shared_task(m, cfg, n, ts);
      IsometricEmbedding e = make_embedding(
          cfg.ambient_dim, m.base_ambient_dim(), derive_seed(ts, 3));
      per_task[static_cast<size_t>(task)] =
          task_sse(fwd, stk, e, n, cfg.queries_per_task) /
          cfg.queries_per_task;
    }
    MeanStderr ms = summarize(per_task);
    rep.rows.push_back({"n=" + std::to_string(n), static_cast<double>(n),
                        ms.mean, ms.se, fwd.structured() ? 1.0 : 0.0});
    gx.push_back(static_cast<double>(n));
    gy.push_back(ms.mean);
  }
  rep.fit = fit_loglog_slope(gx, gy);
  double expected =
      -2.0 * cfg.alpha / (2.0 * cfg.alpha + m.intrinsic_dim());
  int inversions = 0;
  for (size_t i = 1; i < gy.size(); ++i)
    if (gy[i] > gy[i - 1]) ++inversions;
  bool slope_ok = rep.fit->slope >= expected - 0.15 &&
                  rep.fit->slope <= expected + 0.15;
  rep.pass = all_valid && slope_ok && inversions <= 1;
  if (rep.detail.empty()) {
    rep.detail = "slope " + format_value(rep.fit->slope) + " (expected " +
                 format_value(expected) + " +- 0.15), " +
                 std::to_string(inversions) + " inversions";
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_bias_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Manifold m{cfg.manifold, cfg.radius};
  ExperimentReport rep;
  rep.name = "bias";
  for (double h : cfg.h_grid)
    if (!(h < 0.5 * m.reach()))
      throw ParamError("bias h grid must stay below half the manifold reach");
  std::vector<double> gx, gy;
  for (size_t pi = 0; pi < cfg.h_grid.size(); ++pi) {
    double h = cfg.h_grid[pi];
    std::vector<double> per_task(static_cast<size_t>(cfg.tasks_per_point));
    for (int task = 0; task < cfg.tasks_per_point; ++task) {
      uint64_t ts = chain(cfg.seed, 30, pi, static_cast<uint64_t>(task));
      HolderFunction f =
          make_holder_function(m, cfg.holder_scale, cfg.alpha, cfg.value_bound,
                               cfg.anchors, derive_seed(ts, 1));
      IsometricEmbedding e = make_embedding(
          cfg.ambient_dim, m.base_ambient_dim(), derive_seed(ts, 2));
      std::vector<Point> q = sample_uniform(m, 1, derive_seed(ts, 3));
      add_query_apexes(f, q, 0, cfg.value_bound, derive_seed(ts, 5));
      double fq = eval_holder(m, f, q[0]);
      double iv =
          integral_estimate_mc(m, e, f, embed_ambient(e, q[0]), Bandwidth(h),
                               cfg.mc_samples, derive_seed(ts, 4));
      per_task[static_cast<size_t>(task)] = std::fabs(iv - fq);
    }
    MeanStderr ms = summarize(per_task);
    rep.rows.push_back({"h=" + format_value(h), h, ms.mean, ms.se, 0.0});
    gx.push_back(h);
    gy.push_back(ms.mean);
  }
  rep.fit = fit_loglog_slope(gx, gy);
  rep.pass = rep.fit->slope >= cfg.alpha - 0.25 &&
             rep.fit->slope <= cfg.alpha + 0.25;
  rep.detail = "slope " + format_value(rep.fit->slope) + " (expected " +
               format_value(cfg.alpha) + " +- 0.25)";
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_variance_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Manifold m{cfg.manifold, cfg.radius};
  ExperimentReport rep;
  rep.name = "variance";
  Bandwidth bw(cfg.fixed_h);
  std::vector<double> gx, gy;
  for (size_t pi = 0; pi < cfg.variance_n_grid.size(); ++pi) {
    int n = cfg.variance_n_grid[pi];
    std::vector<double> per_task(static_cast<size_t>(cfg.tasks_per_point));
    for (int task = 0; task < cfg.tasks_per_point; ++task) {
      uint64_t ts = chain(cfg.seed, 40, pi, static_cast<uint64_t>(task));
      HolderFunction f =
          make_holder_function(m, cfg.holder_scale, cfg.alpha, cfg.value_bound,
                               cfg.anchors, derive_seed(ts, 1));
      IsometricEmbedding e = make_embedding(
          cfg.ambient_dim, m.base_ambient_dim(), derive_seed(ts, 2));
      Prompt p = generate_task(m, e, f, n, derive_seed(ts, 3));
      double nw = nw_estimate(p, bw);
      double iv = integral_estimate_mc(m, e, f, p.xs[n], bw, cfg.mc_samples,
                                       derive_seed(ts, 4));
      per_task[static_cast<size_t>(task)] = std::fabs(nw - iv);
    }
    MeanStderr ms = summarize(per_task);
    rep.rows.push_back({"n=" + std::to_string(n), static_cast<double>(n),
                        ms.mean, ms.se, 0.0});
    gx.push_back(static_cast<double>(n));
    gy.push_back(ms.mean);
  }
  rep.fit = fit_loglog_slope(gx, gy);
  rep.pass = rep.fit->slope >= -0.6 && rep.fit->slope <= -0.4;
  rep.detail = "slope " + format_value(rep.fit->slope) +
               " (expected -0.5 +- 0.1)";
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_ambient_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Manifold m{cfg.manifold, cfg.radius};
  ExperimentReport rep;
  rep.name = "ambient";
  for (int d : cfg.d_grid)
    if (d < m.base_ambient_dim())
      throw ParamError("d_grid entry below the manifold's base dimension");
  int n = cfg.fixed_n;
  double h = bandwidth_for(n, cfg.alpha, m.intrinsic_dim()).h;
  bool all_valid = true;
  double mse_min = kInf, mse_max = 0.0;
  for (size_t pi = 0; pi < cfg.d_grid.size(); ++pi) {
    int D = cfg.d_grid[pi];
    TransformerSpec spec = build_kernel_transformer(
        n, D, h, embedded_bound(m), cfg.value_bound, cfg.safety_factor);
    CompiledForward fwd(spec);
    if (!fwd.structured()) {
      all_valid = false;
      if (rep.detail.empty())
        rep.detail = "D=" + std::to_string(D) + ": " + fwd.reject_reason();
    }
    std::vector<double> per_task(static_cast<size_t>(cfg.tasks_per_point));
    for (int task = 0; task < cfg.tasks_per_point; ++task) {
      // Base data and task function shared across dimensions; only the
      // frame depends on (dimension, task).
      uint64_t ts = chain(cfg.seed, 50, 0, static_cast<uint64_t>(task));
      SharedTask stk = make_shared_task(m, cfg, n, ts);
      IsometricEmbedding e =
          make_embedding(D, m.base_ambient_dim(),
                         chain(cfg.seed, 51, pi, static_cast<uint64_t>(task)));
      per_task[static_cast<size_t>(task)] =
          task_sse(fwd, stk, e, n, cfg.queries_per_task) /
          cfg.queries_per_task;
    }
    MeanStderr ms = summarize(per_task);
    rep.rows.push_back({"D=" + std::to_string(D), static_cast<double>(D),
                        ms.mean, ms.se, spec.arch.kappa});
    mse_min = std::min(mse_min, ms.mean);
    mse_max = std::max(mse_max, ms.mean);
  }
  double ratio = mse_min > 0.0 ? mse_max / mse_min : kInf;

  // Rotation invariance: one task, one build, two frames.
  int d0 = cfg.d_grid[0];
  TransformerSpec spec0 = build_kernel_transformer(
      n, d0, h, embedded_bound(m), cfg.value_bound, cfg.safety_factor);
  CompiledForward fwd0(spec0);
  uint64_t ts = chain(cfg.seed, 50, 0, 0);
  SharedTask stk = make_shared_task(m, cfg, n, ts);
  double frame_gap = 0.0;
  {
    Prompt p;
    p.n = n;
    p.xs.resize(n + 1);
    p.ys = stk.labels;
    double v[2];
    for (int which = 0; which < 2; ++which) {
      IsometricEmbedding e = make_embedding(
          d0, m.base_ambient_dim(),
          chain(cfg.seed, 52, 0, static_cast<uint64_t>(which)));
      for (int i = 0; i <= n; ++i) p.xs[i] = embed_ambient(e, stk.base[i]);
      v[which] = fwd0(p);
    }
    frame_gap = std::fabs(v[0] - v[1]);
  }
  rep.rows.push_back({"frame-check", 0.0, frame_gap, 0.0, 0.0});

  rep.pass = all_valid && ratio <= 1.2 && frame_gap <= 1e-10;
  if (rep.detail.empty())
    rep.detail = "mse ratio " + format_value(ratio) + " (limit 1.2), frame gap " +
                 format_value(frame_gap) + " (limit 1e-10)";
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = "label,x,value,stderr,aux\n";
  char buf[192];
  for (const ReportRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n",
                  r.label.c_str(), r.x, r.value, r.stderr_value, r.aux);
    out += buf;
  }
  return out;
}

std::string report_json(const ExperimentConfig& cfg,
                        const ExperimentReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["config"] = {{"manifold", Manifold{cfg.manifold, cfg.radius}.name()},
                 {"radius", cfg.radius},
                 {"ambient_dim", cfg.ambient_dim},
                 {"alpha", cfg.alpha},
                 {"holder_scale", cfg.holder_scale},
                 {"value_bound", cfg.value_bound},
                 {"anchors", cfg.anchors},
                 {"seed", cfg.seed},
                 {"n_grid", cfg.n_grid},
                 {"h_grid", cfg.h_grid},
                 {"d_grid", cfg.d_grid},
                 {"variance_n_grid", cfg.variance_n_grid},
                 {"tasks_per_point", cfg.tasks_per_point},
                 {"queries_per_task", cfg.queries_per_task},
                 {"mc_samples", cfg.mc_samples},
                 {"fixed_h", cfg.fixed_h},
                 {"fixed_n", cfg.fixed_n},
                 {"safety_factor", cfg.safety_factor}};
  j["rows"] = nlohmann::json::array();
  for (const ReportRow& r : report.rows)
    j["rows"].push_back({{"label", r.label},
                         {"x", r.x},
                         {"value", r.value},
                         {"stderr", r.stderr_value},
                         {"aux", r.aux}});
  if (report.fit) {
    j["fit"] = {{"slope", report.fit->slope},
                {"intercept", report.fit->intercept},
                {"half_width", report.fit->half_width}};
  } else {
    j["fit"] = nullptr;
  }
  j["pass"] = report.pass;
  j["detail"] = report.detail;
  j["timing"] = {{"wall_seconds", report.wall_seconds}};
  return j.dump(2) + "\n";
}

void write_report_files(const ExperimentConfig& cfg,
                        const ExperimentReport& report) {
  if (cfg.out_dir.empty()) return;
  std::filesystem::create_directories(cfg.out_dir);
  for (const char* ext : {".csv", ".json"}) {
    std::string path = cfg.out_dir + "/" + report.name + ext;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << (ext[1] == 'c' ? report_csv(report) : report_json(cfg, report));
  }
}

}  // namespace kf
