#ifndef QUANTSEL_DATASET_HPP
#define QUANTSEL_DATASET_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace quantsel {

// Affine map raw -> standardized: x_std = (x - mean) / scale.
struct ColumnScaling {
  double mean = 0.0;
  double scale = 1.0;
};

// Design matrix with response. When an intercept is requested, column 1
// is all ones and every numeric (non-binary) covariate is centered and
// scaled to mean zero, standard deviation 0.5. Binary {0,1} columns pass
// through untouched. Immutable after construction.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;  // n x p
  std::vector<std::string> column_names;        // length p
  std::vector<ColumnScaling> standardization;   // length p
  bool has_intercept = true;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  // Inverse of the column standardization, applied row-wise.
  Eigen::MatrixXd raw_matrix() const;

  // Map coefficients on the standardized design to the raw scale; the
  // intercept absorbs the centering shifts. Identity when has_intercept is
  // false (no standardization was applied).
  Eigen::VectorXd destandardize_coefficients(const Eigen::VectorXd& delta) const;

  // Standardize new raw covariate rows (without intercept column) with this
  // dataset's recorded parameters; prepends the intercept when present.
  Eigen::MatrixXd standardize_new(const Eigen::MatrixXd& raw_covariates) const;
};

// Core constructor shared by the loaders: `raw` holds the covariate columns
// without an intercept. Checks full column rank (singular values above
// 1e-8 of the largest) and n >= p.
Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd raw,
                     std::vector<std::string> names, bool intercept);

// CSV ingestion per the format in the README: header row, all cells numeric.
Dataset load_csv(const std::string& path, const std::string& response_col,
                 bool intercept = true);

// Deterministic row partition. The train split is re-standardized from its
// own rows; the test split reuses the train parameters, so its column means
// are in general nonzero. The test split skips the rank check.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d,
                                             Eigen::Index n_test,
                                             std::uint64_t seed);

}  // namespace quantsel

#endif  // QUANTSEL_DATASET_HPP
