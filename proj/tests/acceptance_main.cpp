// Release gate: seven end-to-end criteria, one PASS/FAIL line each.
// Usage: acceptance [k]   (k in 1..7; no argument runs all)
// A criterion fails if its check fails or its wall budget is exceeded.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "kernelformer/construct.hpp"
#include "kernelformer/error.hpp"
#include "kernelformer/experiments.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/manifold.hpp"
#include "kernelformer/rng.hpp"
#include "kernelformer/serialize.hpp"
#include "kernelformer/structured_eval.hpp"

using namespace kf;

namespace {

using Clock = std::chrono::steady_clock;

// Entrywise bound on embedded coordinates; orthonormal frames mix axes,
// so the norm bound governs.
double embedded_bound(const Manifold& m) {
  return m.kind == ManifoldKind::CliffordTorus2 ? m.radius * std::sqrt(2.0)
                                                : m.radius;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Criterion 1: network output agrees with the direct estimator to 1e-9
// relative on 1000+ random prompts across all manifolds and sizes.
Outcome criterion_equivalence() {
  const std::vector<Manifold> mfds = {{ManifoldKind::Circle, 1.0},
                                      {ManifoldKind::Sphere2, 1.0},
                                      {ManifoldKind::CliffordTorus2, 1.0}};
  const int ns[] = {4, 16, 64, 256, 1024, 2048};
  const int Ds[] = {5, 10, 30, 100};
  const int prompts_per_cell = 14;

  double worst = 0;
  long prompts = 0;
  uint64_t salt = 0;
  for (const Manifold& m : mfds) {
    for (int n : ns) {
      double h = bandwidth_for(n, 1.0, m.intrinsic_dim()).h;
      for (int D : Ds) {
        TransformerSpec spec =
            build_kernel_transformer(n, D, h, embedded_bound(m), 1.0);
        CompiledForward fwd(spec);
        if (!fwd.structured())
          return {false, "spec failed validation: " + fwd.reject_reason()};
        for (int t = 0; t < prompts_per_cell; ++t) {
          ++salt;
          uint64_t s = derive_seed(1000, salt);
          HolderFunction f =
              make_holder_function(m, 1.0, 1.0, 1.0, 5, derive_seed(s, 1));
          IsometricEmbedding e =
              make_embedding(D, m.base_ambient_dim(), derive_seed(s, 2));
          Prompt p = generate_task(m, e, f, n, derive_seed(s, 3));
          EquivResult r = verify_equivalence(spec, p, h);
          if (r.rel_diff > worst) worst = r.rel_diff;
          ++prompts;
        }
      }
    }
  }
  bool ok = prompts >= 1000 && worst <= 1e-9;
  return {ok, fmt("%.0f prompts, worst rel diff %.3g (tol 1e-9)",
                  static_cast<double>(prompts), worst)};
}

// Criterion 2: the three gadget contracts hold on 1000 random trials each.
Outcome criterion_lemmas() {
  LemmaSuiteResult r = run_lemma_suites(1000, 424242);
  std::string d = r.detail.empty() ? "1000 trials per gadget, all exact"
                                   : r.detail;
  return {r.all_pass(), d};
}

// Criterion 3: excess-error slope bands on circle and sphere.
Outcome criterion_rate() {
  ExperimentConfig cfg;
  ExperimentReport circle = run_rate_suite(cfg);
  cfg.manifold = ManifoldKind::Sphere2;
  ExperimentReport sphere = run_rate_suite(cfg);
  double sc = circle.fit ? circle.fit->slope : 0;
  double ss = sphere.fit ? sphere.fit->slope : 0;
  bool ok = circle.pass && sphere.pass && sc >= -0.82 && sc <= -0.52 &&
            ss >= -0.65 && ss <= -0.35;
  return {ok, fmt("circle slope %.4f in [-0.82,-0.52], sphere %.4f in "
                  "[-0.65,-0.35]",
                  sc, ss)};
}

// Criterion 4: smoothing-bias slope matches the smoothness exponent.
Outcome criterion_bias() {
  ExperimentConfig cfg;
  ExperimentReport a1 = run_bias_suite(cfg);
  cfg.alpha = 0.5;
  ExperimentReport a05 = run_bias_suite(cfg);
  double s1 = a1.fit ? a1.fit->slope : 0;
  double s05 = a05.fit ? a05.fit->slope : 0;
  bool ok = a1.pass && a05.pass && std::fabs(s1 - 1.0) <= 0.25 &&
            std::fabs(s05 - 0.5) <= 0.25;
  return {ok, fmt("slope %.4f at alpha 1.0, %.4f at alpha 0.5 (tol 0.25)",
                  s1, s05)};
}

// Criterion 5: sampling-noise slope in the sample count is -1/2.
Outcome criterion_variance() {
  ExperimentConfig cfg;
  ExperimentReport rep = run_variance_suite(cfg);
  double s = rep.fit ? rep.fit->slope : 0;
  bool ok = rep.pass && std::fabs(s - (-0.5)) <= 0.1;
  return {ok, fmt("slope %.4f (want -0.5 +- 0.1)", s)};
}

// Criterion 6: error is flat across ambient dimension and frame changes.
Outcome criterion_ambient() {
  ExperimentConfig cfg;
  ExperimentReport rep = run_ambient_suite(cfg);
  double lo = 0, hi = 0, frame = 1;
  int seen = 0;
  for (const ReportRow& r : rep.rows) {
    if (r.label.rfind("D=", 0) == 0) {
      if (seen == 0) lo = hi = r.value;
      lo = std::min(lo, r.value);
      hi = std::max(hi, r.value);
      ++seen;
    } else if (r.label == "frame-check") {
      frame = r.value;
    }
  }
  bool ok = rep.pass && seen == 4 && hi / lo <= 1.2 && frame <= 1e-10;
  return {ok, fmt("MSE ratio %.4f (tol 1.2), frame gap %.3g (tol 1e-10)",
                  hi / lo, frame)};
}

// Criterion 7: builds are universal: weights depend only on the size
// parameters, and specs built before any prompt exists verify on all of
// them afterwards.
Outcome criterion_universality() {
  struct Cell {
    int n, D;
    ManifoldKind kind;
  };
  const std::vector<Cell> cells = {{64, 10, ManifoldKind::Circle},
                                   {16, 5, ManifoldKind::Sphere2}};
  double worst = 0;
  for (const Cell& c : cells) {
    Manifold m{c.kind, 1.0};
    double h = bandwidth_for(c.n, 1.0, m.intrinsic_dim()).h;
    double b = embedded_bound(m);
    TransformerSpec first = build_kernel_transformer(c.n, c.D, h, b, 1.0);
    TransformerSpec second = build_kernel_transformer(c.n, c.D, h, b, 1.0);
    if (!(first == second)) return {false, "repeated builds differ in memory"};
    if (spec_to_string(first) != spec_to_string(second))
      return {false, "repeated builds serialize differently"};

    // Prompts are drawn only now, after the weights are frozen.
    for (uint64_t t = 0; t < 50; ++t) {
      uint64_t s = derive_seed(7000 + c.n, t);
      HolderFunction f =
          make_holder_function(m, 1.0, 1.0, 1.0, 5, derive_seed(s, 1));
      IsometricEmbedding e =
          make_embedding(c.D, m.base_ambient_dim(), derive_seed(s, 2));
      Prompt p = generate_task(m, e, f, c.n, derive_seed(s, 3));
      EquivResult r = verify_equivalence(first, p, h);
      if (r.rel_diff > worst) worst = r.rel_diff;
    }
  }
  bool ok = worst <= 1e-9;
  return {ok, fmt("identical bytes; 100 post-build prompts, worst rel diff "
                  "%.3g (tol 1e-9)",
                  worst)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "forward equivalence", 300, criterion_equivalence},
    {2, "gadget lemma suites", 60, criterion_lemmas},
    {3, "convergence rate bands", 900, criterion_rate},
    {4, "bias scaling", 600, criterion_bias},
    {5, "variance scaling", 600, criterion_variance},
    {6, "ambient robustness", 300, criterion_ambient},
    {7, "build universality", 600, criterion_universality},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc == 2) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > 7) {
      std::fprintf(stderr, "usage: %s [criterion 1..7]\n", argv[0]);
      return 2;
    }
  } else if (argc > 2) {
    std::fprintf(stderr, "usage: %s [criterion 1..7]\n", argv[0]);
    return 2;
  }

  bool all_ok = true;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    Outcome out;
    auto t0 = Clock::now();
    try {
      out = c.run();
    } catch (const Error& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs > c.budget_s) {
      out.ok = false;
      out.detail += fmt(" [over budget: %.1fs > %.0fs]", secs, c.budget_s);
    }
    std::printf("criterion %d (%s): %s (%s; %.1fs)\n", c.id, c.name,
                out.ok ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.ok) all_ok = false;
  }
  return all_ok ? 0 : 1;
}
