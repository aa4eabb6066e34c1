#include "motiv/simgen.hpp"

#include "motiv/io.hpp"
#include "motiv/rng.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace motiv {

namespace fs = std::filesystem;

void GeneratorConfig::validate() const {
  if (p < 2 || s < 2 || m < 1) throw std::invalid_argument("generator needs p >= 2, s >= 2, m >= 1");
  if (variance_ratio <= 0.0 || variance_ratio >= 1.0) {
    throw std::invalid_argument("variance_ratio must lie in (0, 1)");
  }
  if (zm_frac < 0.0 || zm_frac > 1.0) throw std::invalid_argument("zm_frac must lie in [0, 1]");
  if (groups < 0 || groups > s) throw std::invalid_argument("invalid group count");
}

int GeneratorConfig::effective_groups() const {
  if (groups > 0) return groups;
  return s >= 8 ? 4 : 2;
}

GeneratedData generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::derive(cfg.seed, 0x67656e00));

  const int p = cfg.p, s = cfg.s, m = cfg.m;
  const int g = cfg.effective_groups();

  GeneratedData out;

  // Group layout: contiguous blocks, as equal as possible.
  out.dataset.group_of.resize(static_cast<size_t>(s));
  out.dataset.group_sizes.assign(static_cast<size_t>(g), 0);
  for (int i = 0; i < s; ++i) {
    const int a = std::min(g - 1, i * g / s);
    out.dataset.group_of[static_cast<size_t>(i)] = a;
    ++out.dataset.group_sizes[static_cast<size_t>(a)];
  }
  for (int a = 0; a < g; ++a) out.dataset.group_labels.push_back("g" + std::to_string(a));

  // Parameter draws. Order is fixed and documented by the manifest format;
  // changing it would silently break seed reproducibility.
  ModelParams& truth = out.truth;
  truth.sigma.resize(g);
  truth.nu.resize(g);
  for (int a = 0; a < g; ++a) truth.sigma[a] = rng.uniform(1.0, 2.5);
  for (int a = 0; a < g; ++a) truth.nu[a] = rng.uniform(0.1, 2.0);

  truth.tau = Vector::Ones(m);
  if (cfg.sigma_het) {
    for (int j = 0; j < m; ++j) truth.tau[j] = rng.lognormal(0.0, cfg.sigma_var);
  }
  const int n_zero = static_cast<int>(cfg.zm_frac * m);
  if (std::abs(cfg.zm_frac * m - n_zero) > 1e-9) {
    warn("zm_frac * m is not integral; rounding down to " + std::to_string(n_zero) + " inactive motifs");
  }

  truth.mu_p.resize(p);
  for (int i = 0; i < p; ++i) truth.mu_p[i] = rng.normal();
  out.mu_n_true.resize(s);
  for (int i = 0; i < s; ++i) out.mu_n_true[i] = rng.normal();
  truth.mu_m.resize(m);
  for (int j = 0; j < m; ++j) truth.mu_m[j] = rng.normal();

  out.loadings.values.resize(p, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < p; ++i) out.loadings.values(i, j) = rng.uniform(0.1, 1.1);
  }

  // Inactive motifs: no variance and no mean effect.
  for (int j = 0; j < n_zero; ++j) {
    truth.tau[j] = 0.0;
    truth.mu_m[j] = 0.0;
  }

  Vector k_base = Vector::Ones(p);
  if (cfg.s_het || cfg.s_het_sample) {
    for (int i = 0; i < p; ++i) k_base[i] = rng.uniform(0.1, cfg.s_var_max);
    if (cfg.s_het) truth.promoter_var = k_base;
  }
  out.sample_var.resize(p, s);
  if (cfg.s_het_sample) {
    for (int i = 0; i < p; ++i) {
      for (int t = 0; t < s; ++t) out.sample_var(i, t) = rng.lognormal(k_base[i], cfg.s_sample_var);
    }
  } else {
    for (int t = 0; t < s; ++t) out.sample_var.col(t) = k_base;
  }

  // Rescale the noise variances so the expected share of variance carried by
  // the motif term matches variance_ratio analytically.
  {
    double bsum = 0.0;
    for (int j = 0; j < m; ++j) {
      bsum += truth.tau[j] * out.loadings.values.col(j).squaredNorm();
    }
    double nu_mean = 0.0;
    for (int t = 0; t < s; ++t) nu_mean += truth.nu[out.dataset.group_of[static_cast<size_t>(t)]];
    nu_mean /= s;
    const double v_signal = bsum / p * nu_mean;

    double v_noise = 0.0;
    for (int t = 0; t < s; ++t) {
      v_noise += out.sample_var.col(t).mean() * truth.sigma[out.dataset.group_of[static_cast<size_t>(t)]];
    }
    v_noise /= s;
    const double c = v_signal * (1.0 - cfg.variance_ratio) / (cfg.variance_ratio * v_noise);
    truth.sigma *= c;
  }

  // Activities and noise.
  out.u_true.resize(m, s);
  for (int t = 0; t < s; ++t) {
    const double nu = truth.nu[out.dataset.group_of[static_cast<size_t>(t)]];
    for (int j = 0; j < m; ++j) {
      out.u_true(j, t) = truth.mu_m[j] + std::sqrt(nu * truth.tau[j]) * rng.normal();
    }
  }

  Matrix& y = out.dataset.values;
  y.resize(p, s);
  for (int t = 0; t < s; ++t) {
    const double sigma = truth.sigma[out.dataset.group_of[static_cast<size_t>(t)]];
    for (int i = 0; i < p; ++i) {
      y(i, t) = std::sqrt(out.sample_var(i, t) * sigma) * rng.normal();
    }
  }
  y.noalias() += out.loadings.values * out.u_true;
  y.colwise() += truth.mu_p;
  y.rowwise() += out.mu_n_true.transpose();

  out.dataset.promoter_ids.resize(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) out.dataset.promoter_ids[static_cast<size_t>(i)] = "p" + std::to_string(i);
  out.dataset.sample_ids.resize(static_cast<size_t>(s));
  for (int t = 0; t < s; ++t) out.dataset.sample_ids[static_cast<size_t>(t)] = "s" + std::to_string(t);
  out.loadings.motif_ids.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) out.loadings.motif_ids[static_cast<size_t>(j)] = "m" + std::to_string(j);

  out.dataset.validate();
  return out;
}

namespace {

void write_manifest(const GeneratorConfig& cfg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << "p\t" << cfg.p << '\n'
      << "s\t" << cfg.s << '\n'
      << "m\t" << cfg.m << '\n'
      << "variance_ratio\t" << format_double(cfg.variance_ratio) << '\n'
      << "zm_frac\t" << format_double(cfg.zm_frac) << '\n'
      << "sigma_het\t" << (cfg.sigma_het ? 1 : 0) << '\n'
      << "sigma_var\t" << format_double(cfg.sigma_var) << '\n'
      << "s_het\t" << (cfg.s_het ? 1 : 0) << '\n'
      << "s_var_max\t" << format_double(cfg.s_var_max) << '\n'
      << "s_het_sample\t" << (cfg.s_het_sample ? 1 : 0) << '\n'
      << "s_sample_var\t" << format_double(cfg.s_sample_var) << '\n'
      << "groups\t" << cfg.effective_groups() << '\n'
      << "seed\t" << cfg.seed << '\n';
}

}  // namespace

void write_generated(const GeneratedData& data, const GeneratorConfig& cfg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "truth", ec);
  if (ec) throw std::runtime_error("cannot create directory: " + dir.string());

  NamedMatrix expr{data.dataset.values, data.dataset.promoter_ids, data.dataset.sample_ids};
  write_named_matrix(expr, dir / "expression.tsv");

  NamedMatrix loadings{data.loadings.values, data.dataset.promoter_ids, data.loadings.motif_ids};
  write_named_matrix(loadings, dir / "loadings.tsv");

  std::vector<std::string> labels(data.dataset.sample_ids.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    labels[i] = data.dataset.group_labels[static_cast<size_t>(data.dataset.group_of[i])];
  }
  write_two_columns(data.dataset.sample_ids, labels, "sample_id", "group", dir / "groups.tsv");

  write_manifest(cfg, dir / "manifest.txt");

  {
    std::ofstream out(dir / "truth" / "params.txt");
    auto write_vec = [&](const std::string& key, const Vector& v) {
      out << key;
      for (Eigen::Index i = 0; i < v.size(); ++i) out << '\t' << format_double(v[i]);
      out << '\n';
    };
    write_vec("sigma", data.truth.sigma);
    write_vec("nu", data.truth.nu);
    write_vec("tau", data.truth.tau);
    write_vec("mu_p", data.truth.mu_p);
    write_vec("mu_m", data.truth.mu_m);
    write_vec("mu_n", data.mu_n_true);
    if (data.truth.promoter_var.size() > 0) write_vec("promoter_var", data.truth.promoter_var);
  }
  NamedMatrix u{data.u_true, data.loadings.motif_ids, data.dataset.sample_ids};
  write_named_matrix(u, dir / "truth" / "activities.tsv");
}

GeneratorConfig read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  GeneratorConfig cfg;
  std::string key;
  std::unordered_map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  auto num = [&](const std::string& k, double fallback) {
    auto it = kv.find(k);
    return it == kv.end() ? fallback : parse_double(it->second, path.string());
  };
  cfg.p = static_cast<int>(num("p", cfg.p));
  cfg.s = static_cast<int>(num("s", cfg.s));
  cfg.m = static_cast<int>(num("m", cfg.m));
  cfg.variance_ratio = num("variance_ratio", cfg.variance_ratio);
  cfg.zm_frac = num("zm_frac", cfg.zm_frac);
  cfg.sigma_het = num("sigma_het", 0) != 0;
  cfg.sigma_var = num("sigma_var", cfg.sigma_var);
  cfg.s_het = num("s_het", 0) != 0;
  cfg.s_var_max = num("s_var_max", cfg.s_var_max);
  cfg.s_het_sample = num("s_het_sample", 0) != 0;
  cfg.s_sample_var = num("s_sample_var", cfg.s_sample_var);
  cfg.groups = static_cast<int>(num("groups", 0));
  cfg.seed = static_cast<uint64_t>(num("seed", 0));
  return cfg;
}

GroundTruth read_truth(const fs::path& dir) {
  GroundTruth truth;
  std::ifstream in(dir / "params.txt");
  if (!in) throw std::runtime_error("cannot open truth parameters in " + dir.string());
  std::string line;
  std::unordered_map<std::string, Vector> kv;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() < 2) continue;
    Vector v(static_cast<Eigen::Index>(cells.size() - 1));
    for (size_t i = 1; i < cells.size(); ++i) {
      v[static_cast<Eigen::Index>(i - 1)] = parse_double(cells[i], "truth/params.txt");
    }
    kv[cells[0]] = std::move(v);
  }
  truth.params.sigma = kv.at("sigma");
  truth.params.nu = kv.at("nu");
  truth.params.tau = kv.at("tau");
  truth.params.mu_p = kv.at("mu_p");
  truth.params.mu_m = kv.at("mu_m");
  if (kv.count("promoter_var")) truth.params.promoter_var = kv.at("promoter_var");
  truth.u_true = read_named_matrix(dir / "activities.tsv").values;
  return truth;
}

}  // namespace motiv
