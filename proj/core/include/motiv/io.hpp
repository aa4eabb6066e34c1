#pragma once

#include "motiv/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace motiv {

/// Loads an expression TSV (header `id\t<sample...>`, one promoter per row)
/// together with a two-column `sample_id\tgroup` file. Group labels are
/// mapped to dense 0-based indices in first-appearance order.
///
/// Throws on dimension mismatches, duplicate ids, non-numeric cells, and
/// samples missing from the groups file. Promoters with zero variance
/// across samples are accepted with a warning.
ExpressionDataset load_dataset(const std::filesystem::path& expression_path,
                               const std::filesystem::path& groups_path);

/// Loads a promoter-by-motif loading TSV and permutes its rows into the
/// dataset's promoter order. Entries must be non-negative; every dataset
/// promoter must be present.
MotifLoadings load_loadings(const std::filesystem::path& path,
                            const ExpressionDataset& dataset);

/// Everything a completed fit writes to disk.
struct FitOutputs {
  ModelParams params;
  PosteriorActivities posterior;
  MotifTests tests;
};

/// Writes params.txt, activities.tsv, tests.tsv and posterior_cov_<g>.tsv
/// into `dir` (created recursively if missing). Numeric output uses 17
/// significant digits so load_fit round-trips bit-exactly.
void save_fit(const FitOutputs& fit, const std::filesystem::path& dir);

FitOutputs load_fit(const std::filesystem::path& dir);

// Low-level TSV helpers shared by the fit writer, the generator and the CLI.

struct NamedMatrix {
  Matrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::string id_header = "id";
};

void write_named_matrix(const NamedMatrix& m, const std::filesystem::path& path);
NamedMatrix read_named_matrix(const std::filesystem::path& path);

void write_two_columns(const std::vector<std::string>& left,
                       const std::vector<std::string>& right,
                       const std::string& left_header,
                       const std::string& right_header,
                       const std::filesystem::path& path);

/// Formats a double with 17 significant digits (exact round trip).
std::string format_double(double x);
double parse_double(const std::string& s, const std::string& context);

}  // namespace motiv
