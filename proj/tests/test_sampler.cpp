#include "quantsel/sampler.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "doctest.h"
#include "quantsel/errors.hpp"
#include "quantsel/normal.hpp"
#include "quantsel/rng.hpp"

using namespace quantsel;

namespace {

Dataset synthetic_dataset(int n, const Eigen::VectorXd& xi_true,
                          const Eigen::VectorXd& gamma_true, double sigma_true,
                          std::uint64_t seed) {
  const int p = int(xi_true.size());
  Rng rng(seed, Stream::generic);
  Dataset d;
  d.X.resize(n, p);
  d.X.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j < p; ++j) d.X(i, j) = rng.normal();
  }
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double mean = d.X.row(i).dot(xi_true);
    const double sd = sigma_true * std::exp(d.X.row(i).dot(gamma_true));
    d.y[i] = mean + sd * rng.normal();
  }
  d.has_intercept = true;
  d.column_names.assign(std::size_t(p), "c");
  d.standardization.assign(std::size_t(p), ColumnScaling{});
  return d;
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

Moments xi_moments(const PosteriorDraws& pd) {
  const Eigen::MatrixXd xi = pd.xi_matrix();
  Moments m;
  m.mean = xi.colwise().mean();
  m.sd.resize(xi.cols());
  for (Eigen::Index j = 0; j < xi.cols(); ++j) {
    m.sd[j] = std::sqrt((xi.col(j).array() - m.mean[j]).square().sum() /
                        double(xi.rows() - 1));
  }
  return m;
}

}  // namespace

TEST_CASE("sampler is deterministic bit for bit") {
  Eigen::VectorXd xi(3), gamma(3);
  xi << 2.0, 1.0, -1.0;
  gamma.setZero();
  const Dataset d = synthetic_dataset(120, xi, gamma, 1.0, 5);
  const PosteriorDraws a = sample_posterior(d, 150, 200, 42);
  const PosteriorDraws b = sample_posterior(d, 150, 200, 42);
  REQUIRE(a.size() == b.size());
  for (Eigen::Index m = 0; m < a.size(); ++m) {
    CHECK(a.draws[std::size_t(m)].xi == b.draws[std::size_t(m)].xi);
    CHECK(a.draws[std::size_t(m)].gamma == b.draws[std::size_t(m)].gamma);
    CHECK(a.draws[std::size_t(m)].sigma == b.draws[std::size_t(m)].sigma);
    CHECK(a.draws[std::size_t(m)].lambda_xi ==
          b.draws[std::size_t(m)].lambda_xi);
  }
  CHECK(a.acceptance_rates == b.acceptance_rates);

  const PosteriorDraws c = sample_posterior(d, 150, 200, 43);
  CHECK(c.draws[0].xi != a.draws[0].xi);
}

TEST_CASE("homoscedastic data recovers the location coefficients") {
  Eigen::VectorXd xi(3), gamma(3);
  xi << 2.0, 1.0, -1.0;
  gamma.setZero();
  const Dataset d = synthetic_dataset(500, xi, gamma, 1.0, 7);
  const PosteriorDraws pd = sample_posterior(d, 800, 800, 11);
  const Moments m = xi_moments(pd);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(m.mean[j] - xi[j]) < 3.0 * m.sd[j]);
  }

  // Cross-check the posterior mean against a ridge fit.
  Eigen::MatrixXd gram = d.X.transpose() * d.X;
  gram.diagonal().array() += 1e-6;
  const Eigen::VectorXd ols = gram.llt().solve(d.X.transpose() * d.y);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(m.mean[j] - ols[j]) < 0.05);
  }

  // Acceptance rates settle inside the adapted band.
  for (double rate : pd.acceptance_rates) {
    CHECK(rate >= 0.15);
    CHECK(rate <= 0.6);
  }
  CHECK(pd.burn_in_discarded == 800);
}

TEST_CASE("log-scale coefficients concentrate near zero without signal") {
  Eigen::VectorXd xi(4), gamma(4);
  xi << 1.0, 2.0, 0.0, -2.0;
  gamma.setZero();
  const Dataset d = synthetic_dataset(400, xi, gamma, 1.3, 19);
  const PosteriorDraws pd = sample_posterior(d, 600, 800, 3);
  const Eigen::MatrixXd g = pd.gamma_matrix();
  int within = 0;
  for (Eigen::Index j = 1; j < 4; ++j) {
    const double mean = g.col(j).mean();
    const double sd = std::sqrt((g.col(j).array() - mean).square().sum() /
                                double(g.rows() - 1));
    if (std::abs(mean) <= 3.0 * sd) ++within;
  }
  CHECK(within >= 3);  // 90% of coordinates here means all of them
}

TEST_CASE("heteroscedastic signal is picked up by gamma") {
  Eigen::VectorXd xi(3), gamma(3);
  xi << 1.0, 2.0, 0.0;
  gamma << -0.2, 0.0, 0.6;
  const Dataset d = synthetic_dataset(600, xi, gamma, 1.0, 23);
  const PosteriorDraws pd = sample_posterior(d, 600, 800, 9);
  const Eigen::MatrixXd g = pd.gamma_matrix();
  const double mean2 = g.col(2).mean();
  const double sd2 = std::sqrt((g.col(2).array() - mean2).square().sum() /
                               double(g.rows() - 1));
  CHECK(mean2 - 3.0 * sd2 > 0.0);  // clearly positive
  CHECK(std::abs(mean2 - 0.6) < 0.25);
}

TEST_CASE("translation of the response shifts the fitted quantiles") {
  Eigen::VectorXd xi(3), gamma(3);
  xi << 0.5, 1.0, -0.5;
  gamma.setZero();
  const Dataset d = synthetic_dataset(200, xi, gamma, 0.8, 29);
  Dataset shifted = d;
  const double c = 5.0;
  shifted.y.array() += c;

  const PosteriorDraws pd0 = sample_posterior(d, 500, 600, 77);
  const PosteriorDraws pd1 = sample_posterior(shifted, 500, 600, 77);

  for (double tau : {0.25, 0.5, 0.9}) {
    const Eigen::VectorXd f0 =
        fitted_quantiles(quantile_draws(pd0, d.X, tau));
    const Eigen::VectorXd f1 =
        fitted_quantiles(quantile_draws(pd1, d.X, tau));
    // Batch-means standard error of the average fitted quantile.
    auto batch_se = [&](const PosteriorDraws& pd) {
      const QuantileDraws qd = quantile_draws(pd, d.X, tau);
      const Eigen::VectorXd per_draw = qd.q.rowwise().mean();
      const int n_batches = 20;
      const Eigen::Index len = per_draw.size() / n_batches;
      Eigen::VectorXd batch(n_batches);
      for (int b = 0; b < n_batches; ++b) {
        batch[b] = per_draw.segment(b * len, len).mean();
      }
      const double mean = batch.mean();
      return std::sqrt((batch.array() - mean).square().sum() /
                       double(n_batches - 1) / double(n_batches));
    };
    const double se = std::hypot(batch_se(pd0), batch_se(pd1));
    const double observed_shift = (f1 - f0).mean();
    CHECK(std::abs(observed_shift - c) < 3.0 * se);
  }
}

TEST_CASE("sampler input guards and divergence reporting") {
  Eigen::VectorXd xi(2), gamma(2);
  xi << 1.0, 0.5;
  gamma.setZero();
  const Dataset d = synthetic_dataset(50, xi, gamma, 1.0, 31);
  CHECK_THROWS_AS(sample_posterior(d, 50, 100, 1), InputError);

  Dataset corrupt = d;
  corrupt.y[0] = 1e300;  // residual variance overflows
  CHECK_THROWS_AS(sample_posterior(corrupt, 100, 100, 1), NumericalError);
}
