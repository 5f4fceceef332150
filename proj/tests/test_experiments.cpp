#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "kernelformer/error.hpp"
#include "kernelformer/experiments.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/manifold.hpp"
#include "kernelformer/rng.hpp"

using namespace kf;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.ambient_dim = 5;
  cfg.n_grid = {4, 8, 16, 32};
  cfg.tasks_per_point = 8;
  cfg.queries_per_task = 2;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("loglog fitter recovers exact and noisy power laws") {
  std::vector<double> xs = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> sq(xs.size()), flat(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    sq[i] = xs[i] * xs[i];
    flat[i] = 3.0;
  }

  SlopeFit f2 = fit_loglog_slope(xs, sq);
  CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f2.intercept == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(f2.half_width >= 0.0);

  SlopeFit f0 = fit_loglog_slope(xs, flat);
  CHECK(f0.slope == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(std::exp(f0.intercept) == doctest::Approx(3.0).epsilon(1e-12));

  // 1% multiplicative noise barely moves an 8-point slope.
  Rng rng(424242);
  std::vector<double> nx(8), ny(8);
  for (int i = 0; i < 8; ++i) {
    nx[i] = std::pow(2.0, i);
    ny[i] = 3.0 * std::pow(nx[i], -2.0 / 3.0) * (1.0 + 0.01 * rng.uniform(-1.0, 1.0));
  }
  SlopeFit fn = fit_loglog_slope(nx, ny);
  CHECK(std::fabs(fn.slope - (-0.667)) <= 0.05);
}

TEST_CASE("loglog fitter rejects bad inputs") {
  CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3}, {1, 2, 3}), ParamError);
  CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3, 4}, {1, 2, 3}), ParamError);
  CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3, 0}, {1, 2, 3, 4}), DomainError);
  CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3, 4}, {1, 2, -3, 4}), DomainError);
  CHECK_THROWS_AS(fit_loglog_slope({2, 2, 2, 2}, {1, 2, 3, 4}), DomainError);
}

TEST_CASE("config validation rejects malformed grids and budgets") {
  CHECK_NOTHROW(validate(ExperimentConfig{}));

  ExperimentConfig cfg;
  cfg.h_grid = {0.1, 0.2};
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.n_grid = {16, 16, 32};
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.tasks_per_point = 4;
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.mc_samples = 500;
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.ambient_dim = 1;
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.fixed_h = 0.0;
  CHECK_THROWS_AS(validate(cfg), ParamError);

  cfg = ExperimentConfig{};
  cfg.safety_factor = 0.0;
  CHECK_THROWS_AS(validate(cfg), ParamError);
}

TEST_CASE("reports are bit-reproducible from config and seed") {
  ExperimentConfig cfg = tiny_config();
  ExperimentReport a = run_rate_suite(cfg);
  ExperimentReport b = run_rate_suite(cfg);

  CHECK(report_csv(a) == report_csv(b));

  nlohmann::json ja = nlohmann::json::parse(report_json(cfg, a));
  nlohmann::json jb = nlohmann::json::parse(report_json(cfg, b));
  ja.erase("timing");
  jb.erase("timing");
  CHECK(ja == jb);

  // The echoed config makes the report self-describing.
  nlohmann::json jc = nlohmann::json::parse(report_json(cfg, a));
  REQUIRE(jc.contains("config"));
  CHECK(jc["config"]["seed"] == 7);
  CHECK(jc["config"]["manifold"] == "circle");
  CHECK(jc.contains("timing"));
}

TEST_CASE("equivalence suite passes on a small grid") {
  ExperimentConfig cfg = tiny_config();
  ExperimentReport rep = run_equivalence_suite(cfg);
  CHECK(rep.pass);
  REQUIRE_FALSE(rep.rows.empty());
  for (const ReportRow& r : rep.rows) CHECK(r.value <= 1e-9);
}

TEST_CASE("finite-sample deviation follows the bandwidth power law") {
  // One decade of h at fixed n: deviation times h^{d/2} stays in a
  // factor-2 band (circle: d = 1). Labels carry additive noise so the
  // deviation scale is bandwidth-independent; noiseless labels would
  // shrink the local spread with h and tilt the law by the smoothness.
  Manifold m{ManifoldKind::Circle, 1.0};
  const int n = 512, tasks = 24, queries = 4, mc = 20000;
  const std::vector<double> hs = {0.4, 0.2, 0.1, 0.05};

  std::vector<double> normalized;
  for (double h : hs) {
    double total = 0;
    int count = 0;
    for (int t = 0; t < tasks; ++t) {
      uint64_t s = 9000 + 10 * static_cast<uint64_t>(t);
      HolderFunction f = make_holder_function(m, 1.0, 1.0, 1.0, 5, s);
      IsometricEmbedding e = make_embedding(5, 2, s + 1);
      Prompt p = generate_task(m, e, f, n, s + 2);
      Rng noise(s + 19);
      for (int i = 0; i < n; ++i) p.ys[i] += noise.uniform(-0.3, 0.3);
      for (int q = 0; q < queries; ++q) {
        Prompt pq = p;
        if (q > 0) {
          Prompt fresh = generate_task(m, e, f, n, s + 3 + q);
          pq.xs[n] = fresh.xs[n];
        }
        double nw = nw_estimate(pq, Bandwidth(h));
        double iv = integral_estimate_mc(m, e, f, pq.xs[n], Bandwidth(h), mc,
                                         s + 7 + q);
        total += std::fabs(nw - iv);
        ++count;
      }
    }
    normalized.push_back((total / count) * std::sqrt(h));
  }

  double lo = normalized[0], hi = normalized[0];
  for (double v : normalized) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CAPTURE(normalized[0]);
  CAPTURE(normalized[1]);
  CAPTURE(normalized[2]);
  CAPTURE(normalized[3]);
  CHECK(hi / lo <= 2.0);
}

TEST_CASE("huge-sample deviation sinks below the oracle's own error") {
  Manifold m{ManifoldKind::Circle, 1.0};
  const int n = 1 << 14, mc = 5000;
  const Bandwidth h(0.3);
  HolderFunction f = make_holder_function(m, 1.0, 1.0, 1.0, 5, 7100);
  IsometricEmbedding e = make_embedding(5, 2, 7101);
  Prompt p = generate_task(m, e, f, n, 7102);

  double dev_sum = 0, se_sum = 0;
  const int queries = 8;
  for (int q = 0; q < queries; ++q) {
    Prompt pq = p;
    if (q > 0) {
      Prompt fresh = generate_task(m, e, f, 4, 7110 + q);
      pq.xs[n] = fresh.xs[4];
    }
    uint64_t seed = 7200 + q;
    double iv = integral_estimate_mc(m, e, f, pq.xs[n], h, mc, seed);
    dev_sum += std::fabs(nw_estimate(pq, h) - iv);

    // Mirror the estimator's sampling to get its delta-method error.
    std::vector<Point> base = sample_uniform(m, mc, seed);
    double num = 0, den = 0;
    std::vector<double> w(mc), fv(mc);
    for (int i = 0; i < mc; ++i) {
      Point amb = embed_ambient(e, base[i]);
      double s = 0;
      for (size_t k = 0; k < amb.size(); ++k)
        s += (amb[k] - pq.xs[n][k]) * (amb[k] - pq.xs[n][k]);
      w[i] = std::exp(-s / (h.h * h.h));
      fv[i] = eval_holder(m, f, base[i]);
      num += w[i] * fv[i];
      den += w[i];
    }
    double r = num / den;
    CHECK(iv == doctest::Approx(r).epsilon(1e-9));
    double var = 0;
    for (int i = 0; i < mc; ++i)
      var += w[i] * w[i] * (fv[i] - r) * (fv[i] - r);
    se_sum += std::sqrt(var) / den;
  }
  CAPTURE(dev_sum / queries);
  CAPTURE(se_sum / queries);
  CHECK(dev_sum / queries <= 2.0 * se_sum / queries);
}

TEST_CASE("ambient sweep keeps error flat while weights grow") {
  ExperimentConfig cfg = tiny_config();
  cfg.fixed_n = 32;
  cfg.d_grid = {3, 10, 30};
  cfg.ambient_dim = 3;
  ExperimentReport rep = run_ambient_suite(cfg);
  CHECK(rep.pass);

  double last_kappa = 0, lo = 0, hi = 0;
  int seen = 0;
  for (const ReportRow& r : rep.rows) {
    if (r.label.rfind("D=", 0) != 0) continue;
    CHECK(r.aux > last_kappa);
    last_kappa = r.aux;
    if (seen == 0) {
      lo = hi = r.value;
    } else {
      lo = std::min(lo, r.value);
      hi = std::max(hi, r.value);
    }
    ++seen;
  }
  CHECK(seen == 3);
  CHECK(hi / lo <= 1.2);

  bool frame_row = false;
  for (const ReportRow& r : rep.rows)
    if (r.label == "frame-check") {
      frame_row = true;
      CHECK(r.value <= 1e-10);
    }
  CHECK(frame_row);
}
