#include "motiv/types.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace motiv {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

void check_unique(const std::vector<std::string>& ids, const std::string& kind) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw std::runtime_error("duplicate " + kind + " id: " + id);
    }
  }
}

}  // namespace

std::vector<std::vector<int>> ExpressionDataset::samples_by_group() const {
  std::vector<std::vector<int>> members(group_sizes.size());
  for (int i = 0; i < static_cast<int>(group_of.size()); ++i) {
    members[static_cast<size_t>(group_of[i])].push_back(i);
  }
  return members;
}

void ExpressionDataset::validate() const {
  require(values.rows() == static_cast<Eigen::Index>(promoter_ids.size()),
          "promoter id count does not match expression rows");
  require(values.cols() == static_cast<Eigen::Index>(sample_ids.size()),
          "sample id count does not match expression columns");
  require(group_of.size() == sample_ids.size(),
          "group assignment count does not match sample count");
  require(group_labels.size() == group_sizes.size(),
          "group label count does not match group count");
  check_unique(promoter_ids, "promoter");
  check_unique(sample_ids, "sample");

  const int g = n_groups();
  require(g >= 1, "dataset has no groups");
  std::vector<int> counts(static_cast<size_t>(g), 0);
  for (int gi : group_of) {
    require(gi >= 0 && gi < g, "group index out of range");
    ++counts[static_cast<size_t>(gi)];
  }
  int total = 0;
  for (int a = 0; a < g; ++a) {
    require(counts[static_cast<size_t>(a)] == group_sizes[static_cast<size_t>(a)],
            "group sizes inconsistent with assignments");
    require(group_sizes[static_cast<size_t>(a)] > 0,
            "group '" + group_labels[static_cast<size_t>(a)] + "' is empty");
    total += group_sizes[static_cast<size_t>(a)];
  }
  require(total == n_samples(), "group sizes do not sum to sample count");
  require(values.allFinite(), "expression matrix contains non-finite values");
}

void MotifLoadings::validate() const {
  require(values.cols() == static_cast<Eigen::Index>(motif_ids.size()),
          "motif id count does not match loading columns");
  check_unique(motif_ids, "motif");
  require(values.allFinite(), "loading matrix contains non-finite values");
  if ((values.array() < 0.0).any()) {
    throw std::runtime_error("negative loading");
  }
  if (values.size() == 0 || values.cwiseAbs().maxCoeff() == 0.0) {
    throw std::runtime_error("loading matrix is all-zero");
  }
}

void warn(const std::string& message) {
  std::cerr << "warning: " << message << "\n";
}

}  // namespace motiv
