#include "quantsel/decision.hpp"

#include <algorithm>
#include <cmath>

#include "quantsel/errors.hpp"

namespace quantsel {

SubsetMask::SubsetMask(std::vector<int> idx) : indices(std::move(idx)) {
  std::sort(indices.begin(), indices.end());
  const auto last = std::unique(indices.begin(), indices.end());
  if (last != indices.end()) {
    throw InputError("SubsetMask: duplicate indices");
  }
  if (!indices.empty() && indices.front() < 1) {
    throw InputError("SubsetMask: indices are 1-based");
  }
}

SubsetMask SubsetMask::full(int p) {
  std::vector<int> idx(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) idx[std::size_t(j)] = j + 1;
  return SubsetMask(std::move(idx));
}

bool SubsetMask::contains(int j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

bool SubsetMask::contains_all(const SubsetMask& other) const {
  return std::includes(indices.begin(), indices.end(), other.indices.begin(),
                       other.indices.end());
}

std::string SubsetMask::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(indices[i]);
  }
  return out;
}

Eigen::VectorXd OptimalAction::coefficients() const {
  Eigen::VectorXd coef(subset.size());
  for (int i = 0; i < subset.size(); ++i) {
    coef[i] = delta[subset.indices[std::size_t(i)] - 1];
  }
  return coef;
}

SubsetSolver::SubsetSolver(const Eigen::MatrixXd& X, SubsetMask subset)
    : subset_(std::move(subset)) {
  if (subset_.empty()) throw InputError("SubsetSolver: empty subset");
  if (subset_.indices.back() > X.cols()) {
    throw InputError("SubsetSolver: subset index exceeds column count");
  }
  xs_.resize(X.rows(), subset_.size());
  for (int i = 0; i < subset_.size(); ++i) {
    xs_.col(i) = X.col(subset_.indices[std::size_t(i)] - 1);
  }

  // Rank screen before the unpivoted factorization used for solving.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted(xs_);
  pivoted.setThreshold(1e-10);
  if (pivoted.rank() < xs_.cols()) {
    std::string cols;
    const auto& perm = pivoted.colsPermutation().indices();
    for (Eigen::Index k = pivoted.rank(); k < xs_.cols(); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(subset_.indices[std::size_t(perm[k])]);
    }
    throw NumericalError("subset design is rank deficient; dependent columns: " +
                         cols);
  }
  qr_.compute(xs_);
}

Eigen::VectorXd SubsetSolver::solve(const Eigen::VectorXd& rhs) const {
  return qr_.solve(rhs);
}

Eigen::MatrixXd SubsetSolver::solve_columns(const Eigen::MatrixXd& rhs) const {
  return qr_.solve(rhs);
}

Eigen::VectorXd SubsetSolver::expand(const Eigen::VectorXd& coef,
                                     Eigen::Index p) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < subset_.size(); ++i) {
    full[subset_.indices[std::size_t(i)] - 1] = coef[i];
  }
  return full;
}

std::shared_ptr<const SubsetSolver> SubsetSolverCache::get(
    const SubsetMask& subset) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = cache_.find(subset.indices);
    if (it != cache_.end()) return it->second;
  }
  auto solver = std::make_shared<const SubsetSolver>(x_, subset);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(subset.indices, std::move(solver)).first->second;
}

std::size_t SubsetSolverCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

OptimalAction optimal_action(const Eigen::VectorXd& qhat,
                             const Eigen::MatrixXd& X, const SubsetMask& S,
                             double tau) {
  if (qhat.size() != X.rows()) {
    throw InputError("optimal_action: response length mismatch");
  }
  const SubsetSolver solver(X, S);
  const Eigen::VectorXd coef = solver.solve(qhat);
  OptimalAction action;
  action.tau = tau;
  action.subset = S;
  action.delta = solver.expand(coef, X.cols());
  action.expected_loss = (qhat - X * action.delta).squaredNorm();
  return action;
}

PosteriorAction posterior_action(const QuantileDraws& qd,
                                 const Eigen::MatrixXd& X,
                                 const SubsetMask& S) {
  if (qd.q.cols() != X.rows()) {
    throw InputError("posterior_action: dimension mismatch");
  }
  const SubsetSolver solver(X, S);
  PosteriorAction pa;
  pa.tau = qd.tau;
  pa.subset = S;
  pa.draws = solver.solve_columns(qd.q.transpose()).transpose();
  return pa;
}

double type7_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InputError("type7_quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = prob * double(values.size() - 1);
  const auto lo = std::size_t(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - double(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<std::pair<double, double>> credible_interval(
    const PosteriorAction& pa, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InputError("credible_interval: level must lie in (0,1)");
  }
  const double alpha = 0.5 * (1.0 - level);
  std::vector<std::pair<double, double>> out;
  out.reserve(std::size_t(pa.draws.cols()));
  for (Eigen::Index j = 0; j < pa.draws.cols(); ++j) {
    std::vector<double> col(pa.draws.col(j).data(),
                            pa.draws.col(j).data() + pa.draws.rows());
    const double lo = type7_quantile(col, alpha);
    const double hi = type7_quantile(std::move(col), 1.0 - alpha);
    out.emplace_back(lo, hi);
  }
  return out;
}

double expected_loss(const QuantileDraws& qd, const Eigen::MatrixXd& X,
                     const OptimalAction& action) {
  if (qd.q.cols() != X.rows() || action.delta.size() != X.cols()) {
    throw InputError("expected_loss: dimension mismatch");
  }
  const Eigen::VectorXd fitted = X * action.delta;
  double total = 0.0;
  for (Eigen::Index m = 0; m < qd.q.rows(); ++m) {
    total += (qd.q.row(m).transpose() - fitted).squaredNorm();
  }
  return total / double(qd.q.rows());
}

double rss(const Eigen::VectorXd& qhat, const Eigen::MatrixXd& X,
           const OptimalAction& action) {
  return (qhat - X * action.delta).squaredNorm();
}

namespace {
void check_anchor(double anchor, double scale, Eigen::Index m) {
  if (anchor <= 1e-12 * std::max(1.0, scale)) {
    throw NumericalError(
        "zero anchor loss: posterior draw " + std::to_string(m + 1) +
        " is degenerate at the fitted quantiles");
  }
}
}  // namespace

Eigen::VectorXd d_s_draws(const QuantileDraws& qd, const Eigen::MatrixXd& X,
                          const OptimalAction& action) {
  const Eigen::Index m_draws = qd.q.rows();
  const Eigen::VectorXd qhat = fitted_quantiles(qd);
  const Eigen::VectorXd fitted = X * action.delta;
  Eigen::VectorXd d(m_draws);
  for (Eigen::Index m = 0; m < m_draws; ++m) {
    const Eigen::VectorXd row = qd.q.row(m);
    const double loss_s = (row - fitted).squaredNorm();
    const double loss_anchor = (row - qhat).squaredNorm();
    check_anchor(loss_anchor, row.squaredNorm(), m);
    d[m] = 100.0 * (loss_s - loss_anchor) / loss_anchor;
  }
  return d;
}

DrawLossCache::DrawLossCache(const QuantileDraws& qd,
                             const Eigen::MatrixXd& X) {
  qhat_ = fitted_quantiles(qd);
  draw_sq_ = qd.q.rowwise().squaredNorm();
  cross_.noalias() = qd.q * X;
  gram_.noalias() = X.transpose() * X;
  const Eigen::VectorXd qq = qd.q * qhat_;
  anchor_ = draw_sq_ - 2.0 * qq +
            Eigen::VectorXd::Constant(qd.q.rows(), qhat_.squaredNorm());
  anchor_ = anchor_.cwiseMax(0.0);
}

Eigen::VectorXd DrawLossCache::subset_losses(
    const OptimalAction& action) const {
  const double quad = action.delta.dot(gram_ * action.delta);
  Eigen::VectorXd losses =
      draw_sq_ - 2.0 * (cross_ * action.delta) +
      Eigen::VectorXd::Constant(draw_sq_.size(), quad);
  return losses.cwiseMax(0.0);
}

Eigen::VectorXd DrawLossCache::d_s(const OptimalAction& action) const {
  const Eigen::VectorXd losses = subset_losses(action);
  Eigen::VectorXd d(losses.size());
  for (Eigen::Index m = 0; m < losses.size(); ++m) {
    check_anchor(anchor_[m], draw_sq_[m], m);
    double numer = losses[m] - anchor_[m];
    // The expanded Gram form rounds at the scale of the draw norms; exact
    // loss ties must stay on the weak side of D <= 0.
    if (std::abs(numer) <= 1e-10 * anchor_[m]) numer = 0.0;
    d[m] = 100.0 * numer / anchor_[m];
  }
  return d;
}

}  // namespace quantsel
