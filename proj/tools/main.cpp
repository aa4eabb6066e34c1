#include "motiv/clustering.hpp"
#include "motiv/estimation.hpp"
#include "motiv/fisher.hpp"
#include "motiv/grn.hpp"
#include "motiv/io.hpp"
#include "motiv/posterior.hpp"
#include "motiv/simgen.hpp"
#include "motiv/workspace.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using motiv::Matrix;
using motiv::Vector;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  fs::path out = ".";
};

class StageLog {
 public:
  void start(const std::string& stage) {
    stage_ = stage;
    t0_ = std::chrono::steady_clock::now();
  }
  void finish() {
    const auto dt = std::chrono::steady_clock::now() - t0_;
    lines_.push_back(
        "stage_ms\t" + stage_ + "\t" +
        std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(dt).count()));
  }
  void note(const std::string& key, const std::string& value) {
    lines_.push_back(key + "\t" + value);
  }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    for (const auto& l : lines_) out << l << '\n';
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::string> lines_;
};

/// Removes everything this run managed to write when a stage fails.
struct OutputGuard {
  std::vector<fs::path> created;
  bool armed = true;
  void track(const fs::path& p) { created.push_back(p); }
  void disarm() { armed = false; }
  ~OutputGuard() {
    if (!armed) {
      return;
    }
    for (const auto& p : created) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

struct FitFlags {
  fs::path expression, loadings, groups;
  bool promoter_variance = false;
  bool no_motif_variance = false;
  int clusters = 0;
  bool tune_snr = false;
};

int cmd_fit(const GlobalOpts& g, const FitFlags& f) {
  StageLog log;
  OutputGuard guard;
  fs::create_directories(g.out);

  log.start("load");
  motiv::ExpressionDataset dataset = motiv::load_dataset(f.expression, f.groups);
  motiv::MotifLoadings loadings = motiv::load_loadings(f.loadings, dataset);
  log.finish();

  motiv::OptimizerConfig cfg;
  motiv::ModelParams params;

  Vector k_scale;
  if (f.promoter_variance) {
    log.start("promoter_variance");
    params.promoter_var = motiv::estimate_promoter_variances(dataset, loadings, cfg);
    k_scale = params.promoter_var.cwiseMax(1e-12).cwiseSqrt();
    dataset.values.array().colwise() /= k_scale.array();
    loadings.values.array().colwise() /= k_scale.array();
    log.finish();
  }

  if (f.clusters > 0) {
    log.start("cluster");
    auto res = motiv::hard_cluster(loadings, f.clusters, g.seed, f.no_motif_variance);
    std::vector<std::string> cluster_col(loadings.motif_ids.size());
    for (size_t j = 0; j < loadings.motif_ids.size(); ++j) {
      cluster_col[j] = res.reduced.motif_ids[static_cast<size_t>(res.assignment[j])];
    }
    motiv::write_two_columns(loadings.motif_ids, cluster_col, "motif_id", "cluster_id",
                             g.out / "clusters.tsv");
    guard.track(g.out / "clusters.tsv");
    loadings = std::move(res.reduced);
    log.finish();
  }

  log.start("workspace");
  motiv::FitWorkspace ws = motiv::build_workspace(dataset, loadings);
  log.finish();
  log.note("rank", std::to_string(ws.rank));

  log.start("noise_variance");
  params.sigma = motiv::estimate_D(ws, cfg);
  log.finish();

  log.start("promoter_means");
  params.mu_p = motiv::estimate_mu_p(ws, params.sigma);
  log.finish();

  log.start("motif_variance");
  auto sg = motiv::estimate_sigma_G(ws, params.sigma, cfg, !f.no_motif_variance);
  params.tau = sg.tau;
  params.nu = sg.nu;
  params.fixed_index = sg.fixed_index;
  log.finish();
  log.note("motif_variance_iterations", std::to_string(sg.info.iterations));
  log.note("motif_variance_objective", motiv::format_double(sg.info.value));
  log.note("motif_variance_grad_norm", motiv::format_double(sg.info.grad_norm));

  log.start("motif_means");
  auto mm = motiv::estimate_mu_m(ws, params);
  params.mu_m = mm.mu_m;
  log.finish();

  if (f.tune_snr) {
    log.start("tune_snr");
    params.snr = motiv::tune_snr(ws, params, motiv::default_snr_grid(), 5, g.seed);
    log.finish();
    log.note("snr", motiv::format_double(*params.snr));
  }

  log.start("activities");
  motiv::PosteriorActivities posterior = motiv::map_activities(ws, params, g.threads);
  log.finish();

  log.start("tests");
  std::optional<motiv::FimResult> fim;
  if (!f.no_motif_variance) {
    fim = motiv::assemble_fim(motiv::fim_tau_block(ws, params), motiv::fim_nu_block(ws, params),
                              motiv::fim_mixed_block(ws, params), params.fixed_index);
  }
  motiv::TestOptions topts;
  topts.seed = g.seed;
  topts.threads = g.threads;
  motiv::MotifTests tests = motiv::run_tests(posterior, params, fim ? &*fim : nullptr, mm.info,
                                             loadings.motif_ids, dataset.group_labels, topts);
  log.finish();

  if (f.promoter_variance) {
    // Report promoter means in the original expression units.
    params.mu_p = params.mu_p.cwiseProduct(k_scale);
  }

  log.start("save");
  motiv::save_fit({params, posterior, tests}, g.out);
  for (const char* name : {"params.txt", "activities.tsv", "tests.tsv"}) guard.track(g.out / name);
  for (const auto& l : dataset.group_labels) guard.track(g.out / ("posterior_cov_" + l + ".tsv"));
  log.finish();

  log.write(g.out / "runlog.txt");
  guard.disarm();
  return 0;
}

/// Table-row presets of the synthetic benchmark configurations; explicit
/// flags override preset fields.
void apply_table_row(const std::string& row, motiv::GeneratorConfig& cfg) {
  cfg.m = 100;
  cfg.p = 5000;
  cfg.s = 20;
  cfg.variance_ratio = 0.1;
  if (row == "A") {
    // p swept externally
  } else if (row == "B" || row == "C" || row == "D") {
    // s / variance_ratio / zm_frac swept externally
  } else if (row == "E") {
    cfg.sigma_het = true;
    cfg.sigma_var = 1.0;
  } else if (row == "F") {
    cfg.s_het = true;
    cfg.s_var_max = 4.0;
  } else if (row == "G") {
    cfg.s_het = true;
    cfg.s_var_max = 2.0;
  } else if (row == "H" || row == "I" || row == "J" || row == "K") {
    cfg.s_het_sample = true;
    cfg.s_var_max = 2.5;
    cfg.s_sample_var = row == "K" ? 0.2 : 0.1;
    if (row == "I") cfg.s = 32;
    if (row == "J") cfg.s = 128;
    if (row == "K") {
      cfg.sigma_het = true;
      cfg.sigma_var = 4.0;
      cfg.zm_frac = 0.2;
    }
  } else {
    throw std::runtime_error("unknown table row: " + row);
  }
}

int cmd_generate(const GlobalOpts& g, motiv::GeneratorConfig cfg) {
  cfg.seed = g.seed;
  auto data = motiv::generate(cfg);
  motiv::write_generated(data, cfg, g.out);
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const fs::path& fit_dir, const fs::path& data_dir,
                 bool append) {
  auto fit = motiv::load_fit(fit_dir);
  auto dataset = motiv::load_dataset(data_dir / "expression.tsv", data_dir / "groups.tsv");
  auto loadings = motiv::load_loadings(data_dir / "loadings.tsv", dataset);
  const fs::path truth_dir = data_dir / "truth";
  if (!fs::exists(truth_dir)) {
    throw std::runtime_error("missing truth directory: " + truth_dir.string());
  }
  auto truth = motiv::read_truth(truth_dir);
  auto cfg = motiv::read_manifest(data_dir / "manifest.txt");

  auto metrics = motiv::evaluate(dataset, loadings, fit.params, fit.posterior.mean, truth, 0.1,
                                 cfg.seed);

  fs::create_directories(g.out);
  const fs::path out_path = g.out / "metrics.tsv";
  const bool write_header = !append || !fs::exists(out_path);
  std::ofstream out(out_path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path.string());
  if (write_header) {
    out << "p\ts\tm\tvariance_ratio\tzm_frac\tseed\tpredictive_pcc\tactivity_pcc"
        << "\tmape_sigma\tmape_nu\tpcc_promoter_var\n";
  }
  out << cfg.p << '\t' << cfg.s << '\t' << cfg.m << '\t'
      << motiv::format_double(cfg.variance_ratio) << '\t' << motiv::format_double(cfg.zm_frac)
      << '\t' << cfg.seed << '\t' << motiv::format_double(metrics.predictive_pcc) << '\t'
      << motiv::format_double(metrics.activity_pcc) << '\t'
      << motiv::format_double(metrics.mape_sigma) << '\t' << motiv::format_double(metrics.mape_nu)
      << '\t'
      << (metrics.pcc_promoter_var ? motiv::format_double(*metrics.pcc_promoter_var)
                                   : std::string("nan"))
      << '\n';
  return 0;
}

int cmd_grn(const GlobalOpts& g, const fs::path& expression, const fs::path& loadings_path,
            const fs::path& groups, const fs::path& fit_dir, double prior) {
  auto dataset = motiv::load_dataset(expression, groups);
  auto loadings = motiv::load_loadings(loadings_path, dataset);
  auto fit = motiv::load_fit(fit_dir);
  auto records =
      motiv::grn_scores(dataset, loadings, fit.params, fit.posterior, prior, g.threads);
  fs::create_directories(g.out);
  motiv::write_grn(records, dataset, loadings, g.out / "grn.tsv");
  return 0;
}

int cmd_baseline(const GlobalOpts& g, const fs::path& expression, const fs::path& loadings_path,
                 const fs::path& groups, double ridge) {
  auto dataset = motiv::load_dataset(expression, groups);
  auto loadings = motiv::load_loadings(loadings_path, dataset);
  Matrix activities;
  double used = ridge;
  if (ridge > 0.0) {
    activities = motiv::mara_baseline(dataset, loadings, ridge);
  } else {
    auto res = motiv::mara_baseline_cv(dataset, loadings, 5, g.seed);
    activities = res.first;
    used = res.second;
  }
  fs::create_directories(g.out);
  motiv::NamedMatrix out{activities, loadings.motif_ids, dataset.sample_ids, "motif_id"};
  motiv::write_named_matrix(out, g.out / "baseline_activities.tsv");
  std::ofstream log(g.out / "baseline_log.txt");
  log << "ridge\t" << motiv::format_double(used) << '\n';
  return 0;
}

int cmd_cluster(const GlobalOpts& g, const fs::path& expression, const fs::path& loadings_path,
                const fs::path& groups, int clusters, bool unit_scale) {
  auto dataset = motiv::load_dataset(expression, groups);
  auto loadings = motiv::load_loadings(loadings_path, dataset);
  auto res = motiv::hard_cluster(loadings, clusters, g.seed, unit_scale);
  fs::create_directories(g.out);
  std::vector<std::string> cluster_col(loadings.motif_ids.size());
  for (size_t j = 0; j < loadings.motif_ids.size(); ++j) {
    cluster_col[j] = res.reduced.motif_ids[static_cast<size_t>(res.assignment[j])];
  }
  motiv::write_two_columns(loadings.motif_ids, cluster_col, "motif_id", "cluster_id",
                           g.out / "clusters.tsv");
  motiv::NamedMatrix reduced{res.reduced.values, dataset.promoter_ids, res.reduced.motif_ids};
  motiv::write_named_matrix(reduced, g.out / "loadings_clustered.tsv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motif activity estimation from promoter expression"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "seed for all randomized steps");
  app.add_option("--threads", g.threads, "worker threads for parallel sections");
  app.add_option("--out", g.out, "output directory");

  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "estimate the full model and motif activities");
  fit_cmd->add_option("--expression", fit.expression, "expression TSV")->required();
  fit_cmd->add_option("--loadings", fit.loadings, "motif loading TSV")->required();
  fit_cmd->add_option("--groups", fit.groups, "sample-to-group TSV")->required();
  fit_cmd->add_flag("--promoter-variance", fit.promoter_variance,
                    "estimate per-promoter variances first and rescale");
  fit_cmd->add_flag("--no-motif-variance", fit.no_motif_variance,
                    "hold the motif variances at one (identity prior)");
  fit_cmd->add_option("--clusters", fit.clusters, "reduce motifs to this many clusters");
  fit_cmd->add_flag("--tune-snr", fit.tune_snr, "cross-validate the signal-to-noise ratio");

  motiv::GeneratorConfig gen;
  std::string table_row;
  auto* gen_cmd = app.add_subcommand("generate", "draw a synthetic benchmark dataset");
  gen_cmd->add_option("--table-row", table_row, "benchmark configuration preset (A..K)");
  auto* popt = gen_cmd->add_option("--p", gen.p, "promoters");
  auto* sopt = gen_cmd->add_option("--s", gen.s, "samples");
  auto* mopt = gen_cmd->add_option("--m", gen.m, "motifs");
  auto* vropt = gen_cmd->add_option("--variance-ratio", gen.variance_ratio,
                                    "expected motif share of the variance");
  auto* zmopt = gen_cmd->add_option("--zm-frac", gen.zm_frac, "fraction of inactive motifs");
  auto* shopt = gen_cmd->add_flag("--sigma-het", gen.sigma_het, "heterogeneous motif variances");
  auto* svopt = gen_cmd->add_option("--sigma-var", gen.sigma_var, "motif variance log-spread");
  auto* khopt = gen_cmd->add_flag("--s-het", gen.s_het, "heterogeneous promoter variances");
  auto* kmopt = gen_cmd->add_option("--s-var-max", gen.s_var_max, "promoter variance upper bound");
  auto* hsopt = gen_cmd->add_flag("--s-het-sample", gen.s_het_sample,
                                  "per-sample promoter variances (misspecified)");
  auto* hvopt = gen_cmd->add_option("--s-sample-var", gen.s_sample_var,
                                    "per-sample variance log-spread");
  auto* gopt = gen_cmd->add_option("--groups", gen.groups, "sample groups (0 = default split)");

  fs::path eval_fit, eval_data;
  bool eval_append = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a fit against generator ground truth");
  eval_cmd->add_option("--fit", eval_fit, "fit output directory")->required();
  eval_cmd->add_option("--data", eval_data, "generated dataset directory")->required();
  eval_cmd->add_flag("--append", eval_append, "append to metrics.tsv instead of rewriting");

  fs::path grn_expr, grn_load, grn_groups, grn_fit;
  double grn_prior = 0.5;
  auto* grn_cmd = app.add_subcommand("grn", "per-promoter motif effect probabilities");
  grn_cmd->add_option("--expression", grn_expr, "expression TSV")->required();
  grn_cmd->add_option("--loadings", grn_load, "motif loading TSV")->required();
  grn_cmd->add_option("--groups", grn_groups, "sample-to-group TSV")->required();
  grn_cmd->add_option("--fit", grn_fit, "fit output directory")->required();
  grn_cmd->add_option("--prior", grn_prior, "prior probability of a motif effect");

  fs::path base_expr, base_load, base_groups;
  double base_ridge = 0.0;
  auto* base_cmd = app.add_subcommand("baseline", "classic double-centered ridge activities");
  base_cmd->add_option("--expression", base_expr, "expression TSV")->required();
  base_cmd->add_option("--loadings", base_load, "motif loading TSV")->required();
  base_cmd->add_option("--groups", base_groups, "sample-to-group TSV")->required();
  base_cmd->add_option("--ridge", base_ridge, "fixed ridge weight (default: cross-validated)");

  fs::path cl_expr, cl_load, cl_groups;
  int cl_count = 0;
  bool cl_unit = false;
  auto* cl_cmd = app.add_subcommand("cluster", "hard-cluster motifs and emit reduced loadings");
  cl_cmd->add_option("--expression", cl_expr, "expression TSV")->required();
  cl_cmd->add_option("--loadings", cl_load, "motif loading TSV")->required();
  cl_cmd->add_option("--groups", cl_groups, "sample-to-group TSV")->required();
  cl_cmd->add_option("--clusters", cl_count, "cluster count")->required();
  cl_cmd->add_flag("--unit-scale", cl_unit, "scale cluster columns by 1/sqrt(size)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit_cmd) return cmd_fit(g, fit);
    if (*gen_cmd) {
      if (!table_row.empty()) {
        motiv::GeneratorConfig preset;
        apply_table_row(table_row, preset);
        // Explicit flags override the preset.
        if (!*popt) gen.p = preset.p;
        if (!*sopt) gen.s = preset.s;
        if (!*mopt) gen.m = preset.m;
        if (!*vropt) gen.variance_ratio = preset.variance_ratio;
        if (!*zmopt) gen.zm_frac = preset.zm_frac;
        if (!*shopt) gen.sigma_het = preset.sigma_het;
        if (!*svopt) gen.sigma_var = preset.sigma_var;
        if (!*khopt) gen.s_het = preset.s_het;
        if (!*kmopt) gen.s_var_max = preset.s_var_max;
        if (!*hsopt) gen.s_het_sample = preset.s_het_sample;
        if (!*hvopt) gen.s_sample_var = preset.s_sample_var;
        if (!*gopt) gen.groups = preset.groups;
      }
      return cmd_generate(g, gen);
    }
    if (*eval_cmd) return cmd_evaluate(g, eval_fit, eval_data, eval_append);
    if (*grn_cmd) return cmd_grn(g, grn_expr, grn_load, grn_groups, grn_fit, grn_prior);
    if (*base_cmd) return cmd_baseline(g, base_expr, base_load, base_groups, base_ridge);
    if (*cl_cmd) return cmd_cluster(g, cl_expr, cl_load, cl_groups, cl_count, cl_unit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
