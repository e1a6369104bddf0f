#ifndef QUANTSEL_DECISION_HPP
#define QUANTSEL_DECISION_HPP

#include <Eigen/Core>
#include <Eigen/QR>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "quantsel/lls.hpp"

namespace quantsel {

// Ordered set of active covariate indices, 1-based; index 1 is the intercept
// column and its membership is explicit.
struct SubsetMask {
  std::vector<int> indices;

  SubsetMask() = default;
  explicit SubsetMask(std::vector<int> idx);
  static SubsetMask full(int p);

  int size() const { return int(indices.size()); }
  bool empty() const { return indices.empty(); }
  bool contains(int j) const;
  bool contains_all(const SubsetMask& other) const;
  std::string to_string() const;  // e.g. "1;3;5"

  friend bool operator==(const SubsetMask&, const SubsetMask&) = default;
  // lexicographic on the index lists
  friend bool operator<(const SubsetMask& a, const SubsetMask& b) {
    return a.indices < b.indices;
  }
};

// Least-squares projection of the posterior mean quantiles onto X_S; delta
// is reported on the full coordinate system with zeros off the subset.
// expected_loss holds the residual sum of squares of qhat on X_S, which
// equals the posterior expected quantile-focused loss up to a subset-
// independent additive constant (the anchor term).
struct OptimalAction {
  double tau = 0.5;
  SubsetMask subset;
  Eigen::VectorXd delta;
  double expected_loss = 0.0;

  Eigen::VectorXd coefficients() const;  // restricted to the subset, |S|
};

// The same projection applied draw by draw; row m holds the coefficients of
// draw m restricted to the subset.
struct PosteriorAction {
  double tau = 0.5;
  SubsetMask subset;
  Eigen::MatrixXd draws;  // M x |S|
};

// Thin QR of X_S, reusable across right-hand sides. Throws NumericalError
// naming the offending columns when X_S is rank deficient.
class SubsetSolver {
 public:
  SubsetSolver(const Eigen::MatrixXd& X, SubsetMask subset);

  const SubsetMask& subset() const { return subset_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  // one solution per column of rhs
  Eigen::MatrixXd solve_columns(const Eigen::MatrixXd& rhs) const;
  // scatter coefficients back to the full coordinate system
  Eigen::VectorXd expand(const Eigen::VectorXd& coef, Eigen::Index p) const;

 private:
  SubsetMask subset_;
  Eigen::MatrixXd xs_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

// Memoized subset factorizations for one design matrix, shared across
// quantiles and guarded for concurrent lookups. The factor depends only on
// the column subset, so reuse never changes a result.
class SubsetSolverCache {
 public:
  explicit SubsetSolverCache(const Eigen::MatrixXd& X) : x_(X) {}
  SubsetSolverCache(const SubsetSolverCache&) = delete;

  std::shared_ptr<const SubsetSolver> get(const SubsetMask& subset);
  std::size_t size() const;

 private:
  const Eigen::MatrixXd& x_;
  mutable std::mutex mutex_;
  std::map<std::vector<int>, std::shared_ptr<const SubsetSolver>> cache_;
};

OptimalAction optimal_action(const Eigen::VectorXd& qhat,
                             const Eigen::MatrixXd& X, const SubsetMask& S,
                             double tau);

PosteriorAction posterior_action(const QuantileDraws& qd,
                                 const Eigen::MatrixXd& X,
                                 const SubsetMask& S);

// Equal-tailed interval per coefficient from type-7 interpolated empirical
// quantiles of the posterior-action draws; pairs are ordered as the subset.
std::vector<std::pair<double, double>> credible_interval(
    const PosteriorAction& pa, double level);

// Type-7 (linear interpolation) empirical quantile; modifies its copy.
double type7_quantile(std::vector<double> values, double prob);

// Posterior expected quantile-focused loss of an action: the Monte Carlo
// mean over draws of the full squared-error sum.
double expected_loss(const QuantileDraws& qd, const Eigen::MatrixXd& X,
                     const OptimalAction& action);

// Residual sum of squares of qhat against the action's predictions; subset
// comparisons of expected losses reduce to differences of these.
double rss(const Eigen::VectorXd& qhat, const Eigen::MatrixXd& X,
           const OptimalAction& action);

// Per-draw percent increase in loss over the model-based fitted quantiles:
//   D[m] = 100 (L_S(theta^m) - L_qhat(theta^m)) / L_qhat(theta^m).
// Throws NumericalError("zero anchor loss") when the posterior is degenerate
// at the fitted quantiles.
Eigen::VectorXd d_s_draws(const QuantileDraws& qd, const Eigen::MatrixXd& X,
                          const OptimalAction& action);

// Caches shared across many subsets evaluated against the same draws: the
// per-draw losses expand into Gram products, so each subset costs O(M|S|)
// instead of O(Mn).
class DrawLossCache {
 public:
  DrawLossCache(const QuantileDraws& qd, const Eigen::MatrixXd& X);

  const Eigen::VectorXd& qhat() const { return qhat_; }
  const Eigen::VectorXd& anchor_losses() const { return anchor_; }
  Eigen::VectorXd subset_losses(const OptimalAction& action) const;
  Eigen::VectorXd d_s(const OptimalAction& action) const;

 private:
  Eigen::VectorXd qhat_;
  Eigen::VectorXd draw_sq_;     // a_m = ||q_m||^2
  Eigen::MatrixXd cross_;       // q X, M x p
  Eigen::MatrixXd gram_;        // X'X
  Eigen::VectorXd anchor_;      // per-draw loss of qhat itself
};

}  // namespace quantsel

#endif  // QUANTSEL_DECISION_HPP
