// Command-line front end: equivalence verification, scaling studies, and
// the gadget property suites. Exit codes: 0 all checks passed, 1 a
// scientific check failed, 2 usage or configuration error.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kernelformer/construct.hpp"
#include "kernelformer/error.hpp"
#include "kernelformer/experiments.hpp"
#include "kernelformer/kernel.hpp"
#include "kernelformer/rng.hpp"
#include "kernelformer/structured_eval.hpp"

namespace {

using kf::ExperimentConfig;
using kf::ExperimentReport;

void apply_config_file(const std::string& path, ExperimentConfig* cfg,
                       std::string* out_dir) {
  std::ifstream f(path);
  if (!f) throw kf::ParamError("cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (!j.is_object()) throw kf::ParamError("config root must be an object");
  for (const auto& [key, val] : j.items()) {
    if (key == "manifold")
      cfg->manifold = kf::parse_manifold(val.get<std::string>(), 1.0).kind;
    else if (key == "radius")
      cfg->radius = val.get<double>();
    else if (key == "ambient_dim")
      cfg->ambient_dim = val.get<int>();
    else if (key == "alpha")
      cfg->alpha = val.get<double>();
    else if (key == "holder_scale")
      cfg->holder_scale = val.get<double>();
    else if (key == "value_bound")
      cfg->value_bound = val.get<double>();
    else if (key == "anchors")
      cfg->anchors = val.get<int>();
    else if (key == "seed")
      cfg->seed = val.get<uint64_t>();
    else if (key == "n_grid")
      cfg->n_grid = val.get<std::vector<int>>();
    else if (key == "h_grid")
      cfg->h_grid = val.get<std::vector<double>>();
    else if (key == "d_grid")
      cfg->d_grid = val.get<std::vector<int>>();
    else if (key == "variance_n_grid")
      cfg->variance_n_grid = val.get<std::vector<int>>();
    else if (key == "tasks_per_point")
      cfg->tasks_per_point = val.get<int>();
    else if (key == "queries_per_task")
      cfg->queries_per_task = val.get<int>();
    else if (key == "mc_samples")
      cfg->mc_samples = val.get<int>();
    else if (key == "fixed_h")
      cfg->fixed_h = val.get<double>();
    else if (key == "fixed_n")
      cfg->fixed_n = val.get<int>();
    else if (key == "safety_factor")
      cfg->safety_factor = val.get<double>();
    else if (key == "out")
      *out_dir = val.get<std::string>();
    else
      throw kf::ParamError("unknown config key: " + key);
  }
}

void print_report(const ExperimentReport& rep) {
  std::printf("%s: %s\n", rep.name.c_str(), rep.pass ? "PASS" : "FAIL");
  for (const kf::ReportRow& r : rep.rows)
    std::printf("  %-14s value=%-14.6g stderr=%-12.6g aux=%.6g\n",
                r.label.c_str(), r.value, r.stderr_value, r.aux);
  if (rep.fit)
    std::printf("  slope %.4f +- %.4f\n", rep.fit->slope,
                rep.fit->half_width);
  std::printf("  %s\n", rep.detail.c_str());
  std::printf("  wall %.2fs\n", rep.wall_seconds);
}

void dump_stage_states(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty())
    throw kf::ParamError("--dump-stages needs --out");
  kf::Manifold m{cfg.manifold, cfg.radius};
  int n = cfg.n_grid.front();
  double h = kf::bandwidth_for(n, cfg.alpha, m.intrinsic_dim()).h;
  double bound = cfg.radius * (m.kind == kf::ManifoldKind::CliffordTorus2
                                   ? std::sqrt(2.0)
                                   : 1.0);
  kf::TransformerSpec spec = kf::build_kernel_transformer(
      n, cfg.ambient_dim, h, bound, cfg.value_bound, cfg.safety_factor);
  kf::CompiledForward fwd(spec);
  uint64_t st = kf::derive_seed(
      kf::derive_seed(kf::derive_seed(cfg.seed, 10), 0), 0);
  kf::HolderFunction f =
      kf::make_holder_function(m, cfg.holder_scale, cfg.alpha, cfg.value_bound,
                               cfg.anchors, kf::derive_seed(st, 1));
  kf::IsometricEmbedding e = kf::make_embedding(
      cfg.ambient_dim, m.base_ambient_dim(), kf::derive_seed(st, 2));
  kf::Prompt p = kf::generate_task(m, e, f, n, kf::derive_seed(st, 3));
  std::vector<kf::Dense> states = fwd.states(p);
  std::string dir = cfg.out_dir + "/stages";
  std::filesystem::create_directories(dir);
  for (size_t k = 0; k < states.size(); ++k) {
    std::string path = dir + "/H" + std::to_string(k) + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kf::Error("cannot write " + path);
    char buf[48];
    for (int r = 0; r < states[k].rows; ++r) {
      for (int c = 0; c < states[k].cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", states[k].at(r, c));
        out << buf << (c + 1 < states[k].cols ? "," : "\n");
      }
    }
  }
  std::printf("stage states for n=%d written to %s\n", n, dir.c_str());
}

int finish_suite(const ExperimentConfig& cfg, const ExperimentReport& rep) {
  print_report(rep);
  kf::write_report_files(cfg, rep);
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-regression transformer toolkit"};
  app.require_subcommand(1);

  ExperimentConfig flag_cfg;  // staging area for command-line values
  std::string config_path, out_dir, manifold_name, which = "rate";
  bool dump_stages = false, inject_bug = false;
  int trials = 1000;
  uint64_t lemma_seed = 20260823;

  struct Shared {
    CLI::Option *manifold, *radius, *ambient, *alpha, *holder, *value, *anch,
        *seed, *ngrid, *hgrid, *dgrid, *vgrid, *tasks, *queries, *mc, *fh, *fn,
        *sf, *out, *config;
  };
  auto add_shared = [&](CLI::App* sub) {
    Shared s;
    s.config = sub->add_option("--config", config_path,
                               "JSON config file; flags override it");
    s.manifold =
        sub->add_option("--manifold", manifold_name, "circle, sphere or torus");
    s.radius = sub->add_option("--radius", flag_cfg.radius, "manifold radius");
    s.ambient =
        sub->add_option("--ambient-dim", flag_cfg.ambient_dim, "embedding dimension");
    s.alpha = sub->add_option("--alpha", flag_cfg.alpha, "task smoothness in (0,1]");
    s.holder = sub->add_option("--holder-scale", flag_cfg.holder_scale,
                               "task function scale");
    s.value = sub->add_option("--value-bound", flag_cfg.value_bound, "label range");
    s.anch = sub->add_option("--anchors", flag_cfg.anchors, "pieces per task");
    s.seed = sub->add_option("--seed", flag_cfg.seed, "base random seed");
    s.ngrid = sub->add_option("--n-grid", flag_cfg.n_grid, "sample counts")
                  ->delimiter(',');
    s.hgrid = sub->add_option("--h-grid", flag_cfg.h_grid, "bandwidth grid")
                  ->delimiter(',');
    s.dgrid = sub->add_option("--d-grid", flag_cfg.d_grid, "ambient dimensions")
                  ->delimiter(',');
    s.vgrid = sub->add_option("--variance-n-grid", flag_cfg.variance_n_grid,
                              "sample counts for the noise study")
                  ->delimiter(',');
    s.tasks = sub->add_option("--tasks", flag_cfg.tasks_per_point,
                              "tasks per grid point");
    s.queries = sub->add_option("--queries", flag_cfg.queries_per_task,
                                "queries per task");
    s.mc = sub->add_option("--mc-samples", flag_cfg.mc_samples,
                           "Monte Carlo samples for population estimates");
    s.fh = sub->add_option("--fixed-h", flag_cfg.fixed_h,
                           "bandwidth for the noise study");
    s.fn = sub->add_option("--fixed-n", flag_cfg.fixed_n,
                           "sample count for the ambient study");
    s.sf = sub->add_option("--safety-factor", flag_cfg.safety_factor,
                           "margin multiplier for built networks");
    s.out = sub->add_option("--out", out_dir, "output directory for reports");
    return s;
  };

  CLI::App* verify =
      app.add_subcommand("verify", "built network vs reference estimator");
  Shared vs = add_shared(verify);
  verify->add_flag("--dump-stages", dump_stages,
                   "write per-block state matrices for one prompt");

  CLI::App* rates = app.add_subcommand("rates", "scaling studies");
  Shared rs = add_shared(rates);
  rates->add_option("--which", which, "rate, bias, variance or ambient")
      ->check(CLI::IsMember({"rate", "bias", "variance", "ambient"}));

  CLI::App* lemmas =
      app.add_subcommand("lemmas", "gadget contract property suites");
  lemmas->add_option("--trials", trials, "trials per suite");
  lemmas->add_option("--seed", lemma_seed, "base random seed");
  lemmas
      ->add_flag("--inject-gating-split-bug", inject_bug,
                 "shift the built gate split by one (self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == lemmas) {
      kf::LemmaSuiteResult res =
          kf::run_lemma_suites(trials, lemma_seed, inject_bug);
      std::printf("interaction: %s\n", res.interaction_pass ? "PASS" : "FAIL");
      std::printf("gating:      %s\n", res.gating_pass ? "PASS" : "FAIL");
      std::printf("decrement:   %s\n", res.decrement_pass ? "PASS" : "FAIL");
      std::printf("%s\n", res.detail.c_str());
      return res.all_pass() ? 0 : 1;
    }

    const Shared& s = sub == verify ? vs : rs;
    // Config file first, then every flag present on the command line.
    ExperimentConfig cfg;
    std::string cfg_out;
    if (s.config->count() > 0) apply_config_file(config_path, &cfg, &cfg_out);
    if (s.manifold->count() > 0)
      cfg.manifold = kf::parse_manifold(manifold_name, 1.0).kind;
    if (s.radius->count() > 0) cfg.radius = flag_cfg.radius;
    if (s.ambient->count() > 0) cfg.ambient_dim = flag_cfg.ambient_dim;
    if (s.alpha->count() > 0) cfg.alpha = flag_cfg.alpha;
    if (s.holder->count() > 0) cfg.holder_scale = flag_cfg.holder_scale;
    if (s.value->count() > 0) cfg.value_bound = flag_cfg.value_bound;
    if (s.anch->count() > 0) cfg.anchors = flag_cfg.anchors;
    if (s.seed->count() > 0) cfg.seed = flag_cfg.seed;
    if (s.ngrid->count() > 0) cfg.n_grid = flag_cfg.n_grid;
    if (s.hgrid->count() > 0) cfg.h_grid = flag_cfg.h_grid;
    if (s.dgrid->count() > 0) cfg.d_grid = flag_cfg.d_grid;
    if (s.vgrid->count() > 0) cfg.variance_n_grid = flag_cfg.variance_n_grid;
    if (s.tasks->count() > 0) cfg.tasks_per_point = flag_cfg.tasks_per_point;
    if (s.queries->count() > 0) cfg.queries_per_task = flag_cfg.queries_per_task;
    if (s.mc->count() > 0) cfg.mc_samples = flag_cfg.mc_samples;
    if (s.fh->count() > 0) cfg.fixed_h = flag_cfg.fixed_h;
    if (s.fn->count() > 0) cfg.fixed_n = flag_cfg.fixed_n;
    if (s.sf->count() > 0) cfg.safety_factor = flag_cfg.safety_factor;
    cfg.out_dir = s.out->count() > 0 ? out_dir : cfg_out;
    kf::validate(cfg);

    if (sub == verify) {
      int code = finish_suite(cfg, kf::run_equivalence_suite(cfg));
      if (dump_stages) dump_stage_states(cfg);
      return code;
    }
    ExperimentReport rep;
    if (which == "rate")
      rep = kf::run_rate_suite(cfg);
    else if (which == "bias")
      rep = kf::run_bias_suite(cfg);
    else if (which == "variance")
      rep = kf::run_variance_suite(cfg);
    else
      rep = kf::run_ambient_suite(cfg);
    return finish_suite(cfg, rep);
  } catch (const kf::ParamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const kf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
}
