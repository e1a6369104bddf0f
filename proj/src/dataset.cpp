#include "quantsel/dataset.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "quantsel/csv.hpp"
#include "quantsel/errors.hpp"
#include "quantsel/rng.hpp"

namespace quantsel {

namespace {

bool is_binary(const Eigen::VectorXd& col) {
  return (col.array() == 0.0 || col.array() == 1.0).all();
}

bool is_constant(const Eigen::VectorXd& col) {
  return (col.array() == col[0]).all();
}

void check_rank(const Eigen::MatrixXd& X,
                const std::vector<std::string>& names, bool intercept) {
  if (X.rows() < X.cols()) {
    throw InputError("dataset: n = " + std::to_string(X.rows()) +
                     " rows < p = " + std::to_string(X.cols()) + " columns");
  }
  for (Eigen::Index j = intercept ? 1 : 0; j < X.cols(); ++j) {
    if (is_constant(X.col(j))) {
      throw InputError("dataset: constant column collides with intercept (" +
                       names[std::size_t(j)] + ")");
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X);
  const auto& sv = svd.singularValues();
  const double tol = 1e-8 * sv[0];
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) ++rank;
  }
  if (rank < X.cols()) {
    throw InputError("dataset: design matrix is rank deficient (rank " +
                     std::to_string(rank) + " of " + std::to_string(X.cols()) +
                     " columns)");
  }
}

}  // namespace

Eigen::MatrixXd Dataset::raw_matrix() const {
  Eigen::MatrixXd raw = X;
  for (Eigen::Index j = 0; j < p(); ++j) {
    const auto& s = standardization[std::size_t(j)];
    raw.col(j) = X.col(j) * s.scale + Eigen::VectorXd::Constant(n(), s.mean);
  }
  return raw;
}

Eigen::VectorXd Dataset::destandardize_coefficients(
    const Eigen::VectorXd& delta) const {
  if (delta.size() != p()) {
    throw InputError("destandardize_coefficients: length mismatch");
  }
  if (!has_intercept) return delta;
  Eigen::VectorXd raw = delta;
  double shift = 0.0;
  for (Eigen::Index j = 1; j < p(); ++j) {
    const auto& s = standardization[std::size_t(j)];
    raw[j] = delta[j] / s.scale;
    shift += delta[j] * s.mean / s.scale;
  }
  raw[0] = delta[0] - shift;
  return raw;
}

Eigen::MatrixXd Dataset::standardize_new(
    const Eigen::MatrixXd& raw_covariates) const {
  const Eigen::Index offset = has_intercept ? 1 : 0;
  if (raw_covariates.cols() != p() - offset) {
    throw InputError("standardize_new: column count mismatch");
  }
  Eigen::MatrixXd out(raw_covariates.rows(), p());
  if (has_intercept) out.col(0).setOnes();
  for (Eigen::Index j = offset; j < p(); ++j) {
    const auto& s = standardization[std::size_t(j)];
    out.col(j) = (raw_covariates.col(j - offset).array() - s.mean) / s.scale;
  }
  return out;
}

Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd raw,
                     std::vector<std::string> names, bool intercept) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index q = raw.cols();
  if (y.size() != n) throw InputError("dataset: response length mismatch");
  if (names.size() != std::size_t(q)) {
    throw InputError("dataset: column name count mismatch");
  }
  if (!y.allFinite() || !raw.allFinite()) {
    throw InputError("dataset: non-finite values present");
  }

  Dataset d;
  d.y = std::move(y);
  d.has_intercept = intercept;
  const Eigen::Index p = q + (intercept ? 1 : 0);
  d.X.resize(n, p);
  d.column_names.reserve(std::size_t(p));
  d.standardization.assign(std::size_t(p), ColumnScaling{});
  Eigen::Index out = 0;
  if (intercept) {
    d.X.col(0).setOnes();
    d.column_names.push_back("intercept");
    out = 1;
  }
  for (Eigen::Index j = 0; j < q; ++j, ++out) {
    d.column_names.push_back(names[std::size_t(j)]);
    const Eigen::VectorXd col = raw.col(j);
    if (!intercept || is_binary(col)) {
      d.X.col(out) = col;
      continue;
    }
    if (is_constant(col)) {
      throw InputError("dataset: constant column collides with intercept (" +
                       names[std::size_t(j)] + ")");
    }
    const double mean = col.mean();
    const double sd =
        std::sqrt((col.array() - mean).square().sum() / double(n - 1));
    const double scale = 2.0 * sd;  // standardized sd = 0.5
    d.X.col(out) = (col.array() - mean) / scale;
    d.standardization[std::size_t(out)] = ColumnScaling{mean, scale};
  }
  check_rank(d.X, d.column_names, intercept);
  return d;
}

Dataset load_csv(const std::string& path, const std::string& response_col,
                 bool intercept) {
  const csv::Table table = csv::read_file(path);
  const int yc = table.column(response_col);
  if (yc < 0) {
    throw InputError("load_csv: response column '" + response_col +
                     "' not found in " + path);
  }
  const Eigen::Index n = Eigen::Index(table.rows.size());
  const Eigen::Index q = Eigen::Index(table.header.size()) - 1;
  if (n == 0) throw InputError("load_csv: no data rows in " + path);

  Eigen::VectorXd y(n);
  Eigen::MatrixXd raw(n, q);
  std::vector<std::string> names;
  names.reserve(std::size_t(q));
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (int(j) != yc) names.push_back(table.header[j]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[std::size_t(i)];
    Eigen::Index out = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      double v;
      try {
        v = csv::to_number(row[j]);
      } catch (const std::exception& e) {
        throw InputError("load_csv: row " + std::to_string(i + 2) +
                         ", column '" + table.header[j] + "': " + e.what());
      }
      if (int(j) == yc) {
        y[i] = v;
      } else {
        raw(i, out++) = v;
      }
    }
  }
  return make_dataset(std::move(y), std::move(raw), std::move(names),
                      intercept);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d,
                                             Eigen::Index n_test,
                                             std::uint64_t seed) {
  const Eigen::Index n = d.n();
  if (n_test <= 0 || n_test >= n) {
    throw InputError("train_test_split: n_test must lie in (0, n)");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  Rng rng(seed, Stream::split);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = Eigen::Index(rng.below(std::uint64_t(i) + 1));
    std::swap(order[std::size_t(i)], order[std::size_t(j)]);
  }
  std::vector<Eigen::Index> test_rows(order.begin(), order.begin() + n_test);
  std::vector<Eigen::Index> train_rows(order.begin() + n_test, order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Eigen::MatrixXd raw = d.raw_matrix();
  const Eigen::Index offset = d.has_intercept ? 1 : 0;
  auto take = [&](const std::vector<Eigen::Index>& rows, Eigen::VectorXd& yy,
                  Eigen::MatrixXd& xx) {
    yy.resize(Eigen::Index(rows.size()));
    xx.resize(Eigen::Index(rows.size()), d.p() - offset);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      yy[Eigen::Index(i)] = d.y[rows[i]];
      xx.row(Eigen::Index(i)) = raw.row(rows[i]).tail(d.p() - offset);
    }
  };

  Eigen::VectorXd y_train, y_test;
  Eigen::MatrixXd x_train, x_test;
  take(train_rows, y_train, x_train);
  take(test_rows, y_test, x_test);

  std::vector<std::string> names(d.column_names.begin() + offset,
                                 d.column_names.end());
  Dataset train =
      make_dataset(std::move(y_train), x_train, names, d.has_intercept);

  Dataset test;
  test.y = std::move(y_test);
  test.has_intercept = d.has_intercept;
  test.column_names = d.column_names;
  test.standardization = train.standardization;
  test.X = train.standardize_new(x_test);
  return {std::move(train), std::move(test)};
}

}  // namespace quantsel
