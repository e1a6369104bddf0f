#include "quantsel/sampler.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "quantsel/errors.hpp"
#include "quantsel/rng.hpp"

namespace quantsel {

namespace {

// Working vector layout: [xi(p), gamma(p), log sigma, log lambda_xi(p-1),
// log lambda_gamma(p-1)].
LlsParams unpack(const Eigen::VectorXd& v, Eigen::Index p) {
  LlsParams t;
  t.xi = v.segment(0, p);
  t.gamma = v.segment(p, p);
  t.sigma = std::exp(v[2 * p]);
  t.lambda_xi = v.segment(2 * p + 1, p - 1).array().exp();
  t.lambda_gamma = v.segment(3 * p, p - 1).array().exp();
  return t;
}

// Log target over the transformed vector: natural-parameter posterior plus
// log-Jacobians of sigma^2 <- log sigma and lambda <- log lambda. Proposals
// whose exponentials underflow to zero are rejected through -inf rather
// than tripping the positivity checks.
double log_target(const Eigen::VectorXd& v, const Dataset& d) {
  const Eigen::Index p = d.p();
  const LlsParams t = unpack(v, p);
  if (!(t.sigma > 0.0) || (t.lambda_xi.array() <= 0.0).any() ||
      (t.lambda_gamma.array() <= 0.0).any()) {
    return -std::numeric_limits<double>::infinity();
  }
  double lp = log_posterior(t, d);
  lp += std::log(2.0) + 2.0 * v[2 * p];            // d(sigma^2)/d(log sigma)
  lp += v.segment(2 * p + 1, 2 * (p - 1)).sum();   // d(lambda)/d(log lambda)
  return lp;
}

struct Block {
  Eigen::Index offset = 0;
  Eigen::Index dim = 0;
  double log_scale = 0.0;
  Eigen::MatrixXd chol;       // lower factor of the proposal covariance
  Eigen::VectorXd mean;       // running sample mean
  Eigen::MatrixXd m2;         // running scatter for the covariance
  Eigen::Index n_stats = 0;
  Eigen::Index accepted_post = 0;
  Eigen::Index attempts_post = 0;

  void init_stats() {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::MatrixXd::Zero(dim, dim);
  }

  void update_stats(const Eigen::VectorXd& value) {
    ++n_stats;
    const Eigen::VectorXd delta = value - mean;
    mean += delta / double(n_stats);
    m2.noalias() += delta * (value - mean).transpose();
  }

  void refresh_chol() {
    if (n_stats < 2 * dim + 4) return;  // not enough samples yet
    Eigen::MatrixXd cov = m2 / double(n_stats - 1);
    double jitter = 1e-10 + 1e-8 * cov.trace() / double(dim);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LLT<Eigen::MatrixXd> llt(
          cov + jitter * Eigen::MatrixXd::Identity(dim, dim));
      if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
        return;
      }
      jitter *= 100.0;
    }
  }
};

Eigen::MatrixXd safe_cholesky(Eigen::MatrixXd m) {
  double jitter = 1e-12;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(
        m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter *= 10.0;
  }
  throw NumericalError("sampler: proposal covariance is not positive definite");
}

}  // namespace

PosteriorDraws sample_posterior(const Dataset& d, Eigen::Index n_save,
                                Eigen::Index n_burn, std::uint64_t seed,
                                const SamplerConfig& config) {
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (n_save < 100) throw InputError("sample_posterior: n_save must be >= 100");
  if (n_burn < 0) throw InputError("sample_posterior: n_burn must be >= 0");
  if (config.thin < 1) throw InputError("sample_posterior: thin must be >= 1");

  const Eigen::Index dim = 4 * p - 1;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);

  // Ridge start for xi, residual sd for sigma, gamma = 0, lambda = 1.
  const Eigen::MatrixXd xtx = d.X.transpose() * d.X;
  Eigen::MatrixXd ridge = xtx;
  ridge.diagonal().array() += 1e-6;
  const Eigen::LLT<Eigen::MatrixXd> ridge_llt(ridge);
  const Eigen::VectorXd xi0 = ridge_llt.solve(d.X.transpose() * d.y);
  const double resid_var =
      (d.y - d.X * xi0).squaredNorm() / double(std::max<Eigen::Index>(n, 1));
  const double sigma0 = std::sqrt(std::max(resid_var, 1e-16));
  v.segment(0, p) = xi0;
  v[2 * p] = std::log(sigma0);

  double lp = log_target(v, d);
  if (!std::isfinite(lp)) {
    throw NumericalError(
        "sampler: non-finite log posterior at initialization (sigma0 = " +
        std::to_string(sigma0) + ")");
  }

  // Blocks: (xi), (gamma, log sigma), (log lambda). The lambda block is
  // empty when p == 1.
  std::vector<Block> blocks;
  {
    Block b1;
    b1.offset = 0;
    b1.dim = p;
    b1.chol = safe_cholesky(sigma0 * sigma0 *
                            ridge_llt.solve(Eigen::MatrixXd::Identity(p, p)));
    blocks.push_back(std::move(b1));

    // Fisher information of (gamma, log sigma) under the scale model is
    // 2 W'W with W = [X, 1]; the Inverse-Gamma prior adds curvature on the
    // log-sigma corner and breaks the gamma_1 / log sigma ridge.
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p + 1, p + 1);
    info.topLeftCorner(p, p) = 2.0 * xtx;
    const Eigen::VectorXd colsum =
        d.X.transpose() * Eigen::VectorXd::Ones(n);
    info.block(0, p, p, 1) = 2.0 * colsum;
    info.block(p, 0, 1, p) = 2.0 * colsum.transpose();
    info(p, p) = 2.0 * double(n) + 2.0;
    info.diagonal().array() += 1e-6;
    Block b2;
    b2.offset = p;
    b2.dim = p + 1;
    b2.chol = safe_cholesky(
        info.llt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1)));
    blocks.push_back(std::move(b2));

    if (p > 1) {
      Block b3;
      b3.offset = 2 * p + 1;
      b3.dim = 2 * (p - 1);
      b3.chol = 0.5 * Eigen::MatrixXd::Identity(b3.dim, b3.dim);
      blocks.push_back(std::move(b3));
    }
  }
  for (auto& b : blocks) {
    b.log_scale = std::log(2.38 / std::sqrt(double(b.dim)));
    b.init_stats();
  }

  Rng rng(seed, Stream::sampler);
  PosteriorDraws out;
  out.draws.reserve(std::size_t(n_save));
  out.burn_in_discarded = n_burn;

  const Eigen::Index total = n_burn + n_save * config.thin;
  Eigen::VectorXd proposal = v;
  for (Eigen::Index iter = 1; iter <= total; ++iter) {
    const bool adapting = iter <= n_burn;
    for (auto& b : blocks) {
      Eigen::VectorXd z(b.dim);
      for (Eigen::Index k = 0; k < b.dim; ++k) z[k] = rng.normal();
      proposal = v;
      proposal.segment(b.offset, b.dim) +=
          std::exp(b.log_scale) * (b.chol * z);
      const double lp_prop = log_target(proposal, d);
      const double log_ratio = lp_prop - lp;
      const double alpha =
          std::isfinite(lp_prop) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
      const double u = rng.uniform();
      if (u < alpha) {
        v = proposal;
        lp = lp_prop;
      }
      if (adapting) {
        b.log_scale += std::pow(double(iter), -0.7) *
                       (alpha - config.target_acceptance);
      } else {
        ++b.attempts_post;
        if (u < alpha) ++b.accepted_post;
      }
    }
    if (adapting) {
      for (auto& b : blocks) {
        b.update_stats(v.segment(b.offset, b.dim));
        if (iter >= config.adapt_start && iter % config.cov_refresh == 0) {
          b.refresh_chol();
        }
      }
    }
    if (iter == n_burn && !std::isfinite(lp)) {
      throw NumericalError(
          "sampler: divergent chain, non-finite log posterior after "
          "adaptation at iteration " +
          std::to_string(iter));
    }
    if (!adapting && (iter - n_burn) % config.thin == 0) {
      if (!std::isfinite(lp)) {
        throw NumericalError(
            "sampler: divergent chain, non-finite log posterior at "
            "iteration " +
            std::to_string(iter));
      }
      out.draws.push_back(unpack(v, p));
    }
  }

  for (const auto& b : blocks) {
    out.acceptance_rates.push_back(
        b.attempts_post > 0
            ? double(b.accepted_post) / double(b.attempts_post)
            : 0.0);
  }
  return out;
}

}  // namespace quantsel
