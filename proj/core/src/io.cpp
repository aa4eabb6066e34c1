#include "motiv/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace motiv {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  return out;
}

void write_vector_line(std::ofstream& out, const std::string& key, const Vector& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << '\t' << format_double(v[i]);
  out << '\n';
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw std::runtime_error("non-numeric cell '" + s + "' in " + context);
  }
  return v;
}

NamedMatrix read_named_matrix(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("empty file: " + path.string());
  NamedMatrix m;
  auto header = split_tab(lines[0]);
  if (header.empty()) throw std::runtime_error("missing header in " + path.string());
  m.id_header = header[0];
  m.col_ids.assign(header.begin() + 1, header.end());
  const size_t ncols = m.col_ids.size();
  const size_t nrows = lines.size() - 1;
  m.values.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
  m.row_ids.reserve(nrows);
  for (size_t r = 0; r < nrows; ++r) {
    auto cells = split_tab(lines[r + 1]);
    if (cells.size() != ncols + 1) {
      throw std::runtime_error("row '" + cells[0] + "' in " + path.string() +
                               " has " + std::to_string(cells.size() - 1) +
                               " cells, expected " + std::to_string(ncols));
    }
    m.row_ids.push_back(cells[0]);
    for (size_t c = 0; c < ncols; ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(cells[c + 1], path.string());
    }
  }
  return m;
}

void write_named_matrix(const NamedMatrix& m, const fs::path& path) {
  auto out = open_out(path);
  out << m.id_header;
  for (const auto& c : m.col_ids) out << '\t' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    out << m.row_ids[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      out << '\t' << format_double(m.values(r, c));
    }
    out << '\n';
  }
}

void write_two_columns(const std::vector<std::string>& left,
                       const std::vector<std::string>& right,
                       const std::string& left_header,
                       const std::string& right_header,
                       const fs::path& path) {
  auto out = open_out(path);
  out << left_header << '\t' << right_header << '\n';
  for (size_t i = 0; i < left.size(); ++i) {
    out << left[i] << '\t' << right[i] << '\n';
  }
}

ExpressionDataset load_dataset(const fs::path& expression_path, const fs::path& groups_path) {
  NamedMatrix expr = read_named_matrix(expression_path);

  ExpressionDataset ds;
  ds.values = std::move(expr.values);
  ds.promoter_ids = std::move(expr.row_ids);
  ds.sample_ids = std::move(expr.col_ids);

  auto lines = read_lines(groups_path);
  if (lines.empty()) throw std::runtime_error("empty groups file: " + groups_path.string());
  std::unordered_map<std::string, std::string> group_of_sample;
  size_t first = 0;
  {
    // Header row is optional; treat the first line as a header when it names
    // no known sample.
    auto cells = split_tab(lines[0]);
    if (cells.size() == 2 &&
        std::find(ds.sample_ids.begin(), ds.sample_ids.end(), cells[0]) == ds.sample_ids.end()) {
      first = 1;
    }
  }
  for (size_t i = first; i < lines.size(); ++i) {
    auto cells = split_tab(lines[i]);
    if (cells.size() != 2) {
      throw std::runtime_error("groups file line " + std::to_string(i + 1) +
                               " must have two tab-separated columns");
    }
    if (!group_of_sample.emplace(cells[0], cells[1]).second) {
      throw std::runtime_error("duplicate sample id in groups file: " + cells[0]);
    }
  }

  std::unordered_map<std::string, int> group_index;
  ds.group_of.resize(ds.sample_ids.size());
  for (size_t s = 0; s < ds.sample_ids.size(); ++s) {
    auto it = group_of_sample.find(ds.sample_ids[s]);
    if (it == group_of_sample.end()) {
      throw std::runtime_error("sample '" + ds.sample_ids[s] + "' missing from groups file");
    }
    auto ins = group_index.emplace(it->second, static_cast<int>(group_index.size()));
    if (ins.second) {
      ds.group_labels.push_back(it->second);
      ds.group_sizes.push_back(0);
    }
    ds.group_of[s] = ins.first->second;
    ++ds.group_sizes[static_cast<size_t>(ins.first->second)];
  }

  ds.validate();

  for (int i = 0; i < ds.n_promoters(); ++i) {
    const double mean = ds.values.row(i).mean();
    if ((ds.values.row(i).array() - mean).abs().maxCoeff() == 0.0) {
      warn("promoter '" + ds.promoter_ids[static_cast<size_t>(i)] +
           "' has zero variance across samples");
    }
  }
  return ds;
}

MotifLoadings load_loadings(const fs::path& path, const ExpressionDataset& dataset) {
  NamedMatrix raw = read_named_matrix(path);

  std::unordered_map<std::string, Eigen::Index> row_of;
  for (size_t i = 0; i < raw.row_ids.size(); ++i) {
    if (!row_of.emplace(raw.row_ids[i], static_cast<Eigen::Index>(i)).second) {
      throw std::runtime_error("duplicate promoter id in loadings: " + raw.row_ids[i]);
    }
  }

  MotifLoadings loadings;
  loadings.motif_ids = std::move(raw.col_ids);
  loadings.values.resize(dataset.n_promoters(), raw.values.cols());
  for (int i = 0; i < dataset.n_promoters(); ++i) {
    auto it = row_of.find(dataset.promoter_ids[static_cast<size_t>(i)]);
    if (it == row_of.end()) {
      throw std::runtime_error("promoter '" + dataset.promoter_ids[static_cast<size_t>(i)] +
                               "' missing from loadings");
    }
    loadings.values.row(i) = raw.values.row(it->second);
  }
  if (raw.values.rows() != dataset.values.rows()) {
    throw std::runtime_error("unknown promoter ids present in loadings file");
  }
  loadings.validate();
  return loadings;
}

void save_fit(const FitOutputs& fit, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory: " + dir.string());

  const ModelParams& p = fit.params;
  {
    auto out = open_out(dir / "params.txt");
    out << "format\tmotiv-fit-1\n";
    out << "groups";
    for (const auto& l : fit.tests.group_labels) out << '\t' << l;
    out << '\n';
    write_vector_line(out, "sigma", p.sigma);
    write_vector_line(out, "nu", p.nu);
    write_vector_line(out, "tau", p.tau);
    write_vector_line(out, "mu_p", p.mu_p);
    write_vector_line(out, "mu_m", p.mu_m);
    if (p.promoter_var.size() > 0) write_vector_line(out, "promoter_var", p.promoter_var);
    if (p.snr) out << "snr\t" << format_double(*p.snr) << '\n';
    out << "fixed_index\t" << p.fixed_index << '\n';
  }

  NamedMatrix act;
  act.values = fit.posterior.mean;
  act.row_ids = fit.tests.motif_ids;
  act.col_ids = fit.tests.group_labels;
  write_named_matrix(act, dir / "activities.tsv");

  {
    auto out = open_out(dir / "tests.tsv");
    const MotifTests& t = fit.tests;
    out << "motif_id\ttau_hat\ttau_z\ttau_p\tmu_m_hat\tmu_m_se\tmu_m_p"
        << "\tanova_chi2\tanova_p\tofftest_p";
    for (const auto& l : t.group_labels) out << "\tactivity_" << l;
    for (const auto& l : t.group_labels) out << "\tz_" << l;
    out << '\n';
    for (Eigen::Index i = 0; i < t.activity.rows(); ++i) {
      out << t.motif_ids[static_cast<size_t>(i)]
          << '\t' << format_double(t.tau_hat[i]) << '\t' << format_double(t.tau_z[i])
          << '\t' << format_double(t.tau_p[i]) << '\t' << format_double(t.mu_m_hat[i])
          << '\t' << format_double(t.mu_m_se[i]) << '\t' << format_double(t.mu_m_p[i])
          << '\t' << format_double(t.anova_chi2[i]) << '\t' << format_double(t.anova_p[i])
          << '\t' << format_double(t.offtest_p[i]);
      for (Eigen::Index a = 0; a < t.activity.cols(); ++a) out << '\t' << format_double(t.activity(i, a));
      for (Eigen::Index a = 0; a < t.zscore.cols(); ++a) out << '\t' << format_double(t.zscore(i, a));
      out << '\n';
    }
  }

  for (size_t a = 0; a < fit.posterior.covariance.size(); ++a) {
    NamedMatrix cov;
    cov.values = fit.posterior.covariance[a];
    cov.row_ids = fit.tests.motif_ids;
    cov.col_ids = fit.tests.motif_ids;
    write_named_matrix(cov, dir / ("posterior_cov_" + fit.tests.group_labels[a] + ".tsv"));
  }
}

FitOutputs load_fit(const fs::path& dir) {
  FitOutputs fit;
  auto lines = read_lines(dir / "params.txt");
  std::unordered_map<std::string, std::vector<std::string>> kv;
  for (const auto& line : lines) {
    auto cells = split_tab(line);
    kv[cells[0]] = std::vector<std::string>(cells.begin() + 1, cells.end());
  }
  auto get_vector = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("params.txt missing key: " + key);
    Vector v(static_cast<Eigen::Index>(it->second.size()));
    for (size_t i = 0; i < it->second.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = parse_double(it->second[i], "params.txt:" + key);
    }
    return v;
  };

  fit.params.sigma = get_vector("sigma");
  fit.params.nu = get_vector("nu");
  fit.params.tau = get_vector("tau");
  fit.params.mu_p = get_vector("mu_p");
  fit.params.mu_m = get_vector("mu_m");
  if (kv.count("promoter_var")) fit.params.promoter_var = get_vector("promoter_var");
  if (kv.count("snr")) fit.params.snr = parse_double(kv["snr"][0], "params.txt:snr");
  if (kv.count("fixed_index")) {
    fit.params.fixed_index = static_cast<int>(parse_double(kv["fixed_index"][0], "params.txt"));
  }
  fit.tests.group_labels = kv.count("groups") ? kv["groups"] : std::vector<std::string>{};

  NamedMatrix act = read_named_matrix(dir / "activities.tsv");
  fit.posterior.mean = act.values;
  fit.tests.motif_ids = act.row_ids;

  {
    auto tl = read_lines(dir / "tests.tsv");
    const size_t g = fit.tests.group_labels.size();
    const Eigen::Index m = fit.posterior.mean.rows();
    MotifTests& t = fit.tests;
    t.tau_hat.resize(m); t.tau_z.resize(m); t.tau_p.resize(m);
    t.mu_m_hat.resize(m); t.mu_m_se.resize(m); t.mu_m_p.resize(m);
    t.anova_chi2.resize(m); t.anova_p.resize(m); t.offtest_p.resize(m);
    t.activity.resize(m, static_cast<Eigen::Index>(g));
    t.zscore.resize(m, static_cast<Eigen::Index>(g));
    for (Eigen::Index i = 0; i < m; ++i) {
      auto cells = split_tab(tl[static_cast<size_t>(i) + 1]);
      size_t c = 1;
      auto next = [&]() { return parse_double(cells[c++], "tests.tsv"); };
      t.tau_hat[i] = next(); t.tau_z[i] = next(); t.tau_p[i] = next();
      t.mu_m_hat[i] = next(); t.mu_m_se[i] = next(); t.mu_m_p[i] = next();
      t.anova_chi2[i] = next(); t.anova_p[i] = next(); t.offtest_p[i] = next();
      for (size_t a = 0; a < g; ++a) t.activity(i, static_cast<Eigen::Index>(a)) = next();
      for (size_t a = 0; a < g; ++a) t.zscore(i, static_cast<Eigen::Index>(a)) = next();
    }
    fit.posterior.zscores = t.zscore;
    fit.posterior.anova_stat = t.anova_chi2;
    fit.posterior.anova_pvalue = t.anova_p;
    fit.posterior.offtest_pvalue = t.offtest_p;
  }

  for (const auto& label : fit.tests.group_labels) {
    NamedMatrix cov = read_named_matrix(dir / ("posterior_cov_" + label + ".tsv"));
    fit.posterior.covariance.push_back(cov.values);
  }
  return fit;
}

}  // namespace motiv
