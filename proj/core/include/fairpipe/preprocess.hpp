#pragma once

#include <map>
#include <optional>
#include <variant>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpipe/json_util.hpp"
#include "fairpipe/tabular.hpp"

namespace fairpipe {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Numeric design matrix with labels y and binary group membership a.
struct DesignMatrix {
  RowMatrix features;
  Eigen::VectorXd labels;  // {0,1}
  Eigen::VectorXd groups;  // {0,1}; 1 = privileged
  std::vector<std::string> feature_names;
  /// Source-table row of each matrix row (rows with a masked target are dropped).
  std::vector<std::size_t> source_rows;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
};

struct NumericTransform {
  std::string column;
  std::map<std::string, double> group_means;  // keyed by raw sensitive value
  double global_mean = 0.0;
  double mean = 0.0;  // of the imputed training column
  double std = 0.0;   // population; 0 means the column normalizes to 0
};

struct CategoricalTransform {
  std::string column;
  std::map<std::string, std::string> group_modes;
  std::string global_mode;
  std::vector<std::string> vocabulary;  // descending frequency, token asc on ties
};

struct RecipeOptions {
  std::optional<std::string> positive_label;
  std::optional<std::string> privileged_group;
  bool include_sensitive = false;
};

struct Recipe {
  std::string sensitive;
  std::string target;
  std::string positive_label;
  std::string negative_label;
  std::string privileged_group;
  bool include_sensitive = false;
  std::vector<std::pair<std::string, ColumnKind>> schema;
  /// One entry per feature column, in table order.
  std::vector<std::variant<NumericTransform, CategoricalTransform>> transforms;

  std::vector<std::string> feature_names() const;
  std::string fingerprint() const;
};

/// Fits imputation, encoding and normalization statistics on the training
/// split. Throws NonBinaryTarget, SingleGroup, UnknownColumn.
Recipe fit_recipe(const Table& train, const std::string& sensitive, const std::string& target,
                  const RecipeOptions& options = {});

/// Throws SchemaMismatch when a recipe column is absent or changed kind.
DesignMatrix apply_recipe(const Table& t, const Recipe& r);

Json to_json(const Recipe& r);
Recipe recipe_from_json(const Json& j);

}  // namespace fairpipe
