#ifndef QUANTSEL_SIMULATION_HPP
#define QUANTSEL_SIMULATION_HPP

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "quantsel/decision.hpp"
#include "quantsel/rng.hpp"

namespace quantsel {

struct SimConfig {
  Eigen::Index n = 500;
  Eigen::Index p = 20;       // including the intercept column
  double het_ratio = 1.0;    // var(X xi*) / gamma*_het
  double rho = 0.5;          // copula correlation base, rho^{|l-j|}
  std::uint64_t seed = 1;
  Eigen::Index n_test = 1000;
};

// Truth of the synthetic location-scale process
//   y = x'xi* + (x'gamma*) eps,  eps ~ N(0,1),
// whose conditional quantiles are linear: beta*_j(tau) = xi*_j +
// Phi^{-1}(tau) gamma*_j with beta*_1(tau) = 2 + Phi^{-1}(tau).
struct GroundTruth {
  Eigen::VectorXd xi_star;
  Eigen::VectorXd gamma_star;
  std::vector<int> hom;  // 1-based covariate indices with constant effect 2
  int het = 0;           // 1-based index carrying the heteroscedastic effect
  double h = 0.0;        // gamma*_het
  double het_ratio = 1.0;

  Eigen::Index p() const { return xi_star.size(); }
  Eigen::VectorXd beta_star(double tau) const;
  // covariates j >= 2 with beta*_j(tau) nonzero (tolerance 1e-12)
  std::vector<int> active_set(double tau) const;
};

// Every fourth index 2 + 4j capped at p; het is the floored median of the
// sequence and hom the sequence without its median.
std::pair<std::vector<int>, int> make_indices(Eigen::Index p);

// Rows i.i.d. from a Gaussian copula with uniform marginals and correlation
// rho^{|l-j|} across the p-1 covariates; column 1 is the intercept.
Eigen::MatrixXd gen_covariates(Eigen::Index n, Eigen::Index p, double rho,
                               std::uint64_t seed,
                               std::uint64_t stream = substream(
                                   Stream::covariates));

// h = sample var(X xi*) / het_ratio over the realized design.
double solve_h(const Eigen::VectorXd& xi_star, const Eigen::MatrixXd& X,
               double het_ratio);

GroundTruth make_truth(const Eigen::MatrixXd& X, double het_ratio);

// Draws the response; the row scales x'gamma* are checked positive.
Eigen::VectorXd gen_response(const Eigen::MatrixXd& X,
                             const GroundTruth& truth, std::uint64_t seed,
                             std::uint64_t stream = substream(Stream::noise));

struct MetricReport {
  double mse = 0.0;    // against the ground-truth quantile surface
  double check = 0.0;  // average check loss against observed responses
  double calib = 0.0;  // share of responses at or below the prediction
};

double check_loss(double y, double pred, double tau);

MetricReport metrics(const Eigen::VectorXd& pred, const GroundTruth& truth,
                     const Eigen::VectorXd& y_test,
                     const Eigen::MatrixXd& x_test, double tau);

// TPR over the covariates active at tau and TNR over the inactive ones;
// the intercept is excluded from both. Empty denominators count as 1.
std::pair<double, double> selection_metrics(const SubsetMask& selected,
                                            const GroundTruth& truth,
                                            double tau);

// Share of points where the lower-quantile prediction is strictly below the
// higher one.
double non_crossing_rate(const Eigen::VectorXd& pred_lo,
                         const Eigen::VectorXd& pred_hi);

}  // namespace quantsel

#endif  // QUANTSEL_SIMULATION_HPP
