#include "quantsel/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "quantsel/errors.hpp"
#include "quantsel/normal.hpp"

namespace quantsel {

Eigen::VectorXd GroundTruth::beta_star(double tau) const {
  return xi_star + inverse_normal_cdf(tau) * gamma_star;
}

std::vector<int> GroundTruth::active_set(double tau) const {
  const Eigen::VectorXd beta = beta_star(tau);
  std::vector<int> active;
  for (Eigen::Index j = 1; j < p(); ++j) {
    if (std::abs(beta[j]) > 1e-12) active.push_back(int(j) + 1);
  }
  return active;
}

std::pair<std::vector<int>, int> make_indices(Eigen::Index p) {
  if (p < 6) throw InputError("make_indices: p must be >= 6");
  std::vector<int> seq;
  for (Eigen::Index j = 0; j <= p / 4; ++j) {
    const Eigen::Index idx = 2 + 4 * j;
    if (idx <= p) seq.push_back(int(idx));
  }
  // floored median; even-length sequences take the midpoint of the two
  // central elements.
  const std::size_t len = seq.size();
  double median;
  if (len % 2 == 1) {
    median = seq[len / 2];
  } else {
    median = 0.5 * (seq[len / 2 - 1] + seq[len / 2]);
  }
  const int het = int(std::floor(median));
  std::vector<int> hom;
  for (int idx : seq) {
    if (idx != het) hom.push_back(idx);
  }
  return {hom, het};
}

Eigen::MatrixXd gen_covariates(Eigen::Index n, Eigen::Index p, double rho,
                               std::uint64_t seed, std::uint64_t stream) {
  if (std::abs(rho) >= 1.0) {
    throw InputError("gen_covariates: |rho| must be < 1");
  }
  Rng rng(seed, stream);
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = 0.0;
    for (Eigen::Index j = 1; j < p; ++j) {
      // AR(1) recursion realizes the rho^{|l-j|} Gaussian copula exactly.
      z = (j == 1) ? rng.normal() : rho * z + innovation * rng.normal();
      X(i, j) = normal_cdf(z);
    }
  }
  return X;
}

double solve_h(const Eigen::VectorXd& xi_star, const Eigen::MatrixXd& X,
               double het_ratio) {
  if (!(het_ratio > 0.0)) throw InputError("solve_h: het_ratio must be > 0");
  const Eigen::VectorXd loc = X * xi_star;
  const double mean = loc.mean();
  const double var =
      (loc.array() - mean).square().sum() / double(loc.size() - 1);
  if (!(var > 0.0)) throw NumericalError("solve_h: zero location variance");
  return var / het_ratio;
}

GroundTruth make_truth(const Eigen::MatrixXd& X, double het_ratio) {
  const Eigen::Index p = X.cols();
  auto [hom, het] = make_indices(p);
  GroundTruth truth;
  truth.hom = hom;
  truth.het = het;
  truth.het_ratio = het_ratio;
  truth.xi_star = Eigen::VectorXd::Zero(p);
  truth.gamma_star = Eigen::VectorXd::Zero(p);
  truth.xi_star[0] = 2.0;
  truth.gamma_star[0] = 1.0;
  for (int j : hom) truth.xi_star[j - 1] = 2.0;
  truth.h = solve_h(truth.xi_star, X, het_ratio);
  truth.gamma_star[het - 1] = truth.h;
  return truth;
}

Eigen::VectorXd gen_response(const Eigen::MatrixXd& X,
                             const GroundTruth& truth, std::uint64_t seed,
                             std::uint64_t stream) {
  if (X.cols() != truth.p()) throw InputError("gen_response: p mismatch");
  const Eigen::VectorXd location = X * truth.xi_star;
  const Eigen::VectorXd scale = X * truth.gamma_star;
  if ((scale.array() <= 0.0).any()) {
    throw NumericalError(
        "gen_response: non-positive scale row, the process is ill-posed");
  }
  Rng rng(seed, stream);
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    y[i] = location[i] + scale[i] * rng.normal();
  }
  return y;
}

double check_loss(double y, double pred, double tau) {
  const double diff = y - pred;
  return diff * (tau - (diff < 0.0 ? 1.0 : 0.0));
}

MetricReport metrics(const Eigen::VectorXd& pred, const GroundTruth& truth,
                     const Eigen::VectorXd& y_test,
                     const Eigen::MatrixXd& x_test, double tau) {
  const Eigen::Index n = pred.size();
  if (y_test.size() != n || x_test.rows() != n) {
    throw InputError("metrics: shape mismatch");
  }
  const Eigen::VectorXd q_true = x_test * truth.beta_star(tau);
  MetricReport report;
  report.mse = (q_true - pred).squaredNorm() / double(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    report.check += check_loss(y_test[i], pred[i], tau);
    if (y_test[i] <= pred[i]) report.calib += 1.0;
  }
  report.check /= double(n);
  report.calib /= double(n);
  return report;
}

std::pair<double, double> selection_metrics(const SubsetMask& selected,
                                            const GroundTruth& truth,
                                            double tau) {
  const std::vector<int> active = truth.active_set(tau);
  int tp = 0, fn = 0, tn = 0, fp = 0;
  for (Eigen::Index j = 2; j <= truth.p(); ++j) {
    const bool is_active =
        std::binary_search(active.begin(), active.end(), int(j));
    const bool is_selected = selected.contains(int(j));
    if (is_active) {
      is_selected ? ++tp : ++fn;
    } else {
      is_selected ? ++fp : ++tn;
    }
  }
  const double tpr = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 1.0;
  const double tnr = (tn + fp) > 0 ? double(tn) / double(tn + fp) : 1.0;
  return {tpr, tnr};
}

double non_crossing_rate(const Eigen::VectorXd& pred_lo,
                         const Eigen::VectorXd& pred_hi) {
  if (pred_lo.size() != pred_hi.size()) {
    throw InputError("non_crossing_rate: length mismatch");
  }
  return double((pred_lo.array() < pred_hi.array()).count()) /
         double(pred_lo.size());
}

}  // namespace quantsel
