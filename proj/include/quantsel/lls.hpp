#ifndef QUANTSEL_LLS_HPP
#define QUANTSEL_LLS_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "quantsel/dataset.hpp"

namespace quantsel {

// Parameters of the Gaussian linear location-log-scale model
//   y_i ~ Normal(x_i' xi, {sigma * exp(x_i' gamma)}^2)
// with Normal(0, lambda_j) priors (lambda = prior sd) on the non-intercept
// coefficients, half-Cauchy(0,5) on each lambda, Inverse-Gamma(1/2,1/2) on
// sigma^2 and flat priors on the intercepts.
struct LlsParams {
  Eigen::VectorXd xi;            // length p
  Eigen::VectorXd gamma;         // length p
  double sigma = 1.0;            // > 0
  Eigen::VectorXd lambda_xi;     // length p-1, > 0
  Eigen::VectorXd lambda_gamma;  // length p-1, > 0

  Eigen::Index p() const { return xi.size(); }
  void validate() const;  // throws InputError on violated invariants
};

struct PosteriorDraws {
  std::vector<LlsParams> draws;
  Eigen::Index burn_in_discarded = 0;
  std::vector<double> acceptance_rates;  // one entry per sampler block

  Eigen::Index size() const { return Eigen::Index(draws.size()); }
  Eigen::Index p() const { return draws.empty() ? 0 : draws.front().p(); }

  // Dense views over the draws, one row per draw.
  Eigen::MatrixXd xi_matrix() const;
  Eigen::MatrixXd gamma_matrix() const;
  Eigen::VectorXd sigma_vector() const;
};

// Model-based conditional quantiles, one row per posterior draw:
//   q[m][i] = x_i' xi^m + sigma^m exp(x_i' gamma^m) Phi^{-1}(tau).
struct QuantileDraws {
  double tau = 0.5;
  Eigen::MatrixXd q;  // M x n
};

// Log of the unnormalized joint density (likelihood + priors) in the natural
// parameterization; the Inverse-Gamma factor is evaluated at sigma^2.
double log_posterior(const LlsParams& theta, const Dataset& d);

// Gradient of log_posterior stacked as [xi, gamma, sigma, lambda_xi,
// lambda_gamma] (length 4p - 1).
Eigen::VectorXd log_posterior_gradient(const LlsParams& theta,
                                       const Dataset& d);

// Precomputed per-draw location and scale surfaces, shared across quantiles.
class ConditionalQuantiles {
 public:
  ConditionalQuantiles(const PosteriorDraws& pd, const Eigen::MatrixXd& X);
  QuantileDraws at(double tau) const;  // throws for tau outside (0,1)

 private:
  Eigen::MatrixXd location_;  // M x n
  Eigen::MatrixXd scale_;     // M x n
};

QuantileDraws quantile_draws(const PosteriorDraws& pd, const Eigen::MatrixXd& X,
                             double tau);

// Column means of q: the Monte Carlo estimate of the posterior expected
// conditional quantiles.
Eigen::VectorXd fitted_quantiles(const QuantileDraws& qd);

// Wire format: one row per draw, columns xi_1..xi_p, gamma_1..gamma_p, sigma,
// so externally produced samplers can be substituted. Local shrinkage scales
// are not part of the exchange format; the loader fills them with 1.
void save_draws_csv(const std::string& path, const PosteriorDraws& pd);
PosteriorDraws load_draws_csv(const std::string& path);

}  // namespace quantsel

#endif  // QUANTSEL_LLS_HPP
