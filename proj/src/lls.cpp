#include "quantsel/lls.hpp"

#include <cmath>

#include "quantsel/csv.hpp"
#include "quantsel/errors.hpp"
#include "quantsel/normal.hpp"

namespace quantsel {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log sqrt(2 pi)
constexpr double kLogGammaHalf = 0.5723649429247001;  // log Gamma(1/2)

double half_cauchy_log_pdf(double x, double scale) {
  // 2 / (pi * scale * (1 + (x/scale)^2)) on x > 0
  const double r = x / scale;
  return std::log(2.0 / (M_PI * scale)) - std::log1p(r * r);
}

// Inverse-Gamma(a, b) log density evaluated at v.
double inverse_gamma_log_pdf(double v, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(v) - b / v;
}
}  // namespace

void LlsParams::validate() const {
  const Eigen::Index pp = xi.size();
  if (gamma.size() != pp || lambda_xi.size() != pp - 1 ||
      lambda_gamma.size() != pp - 1) {
    throw InputError("LlsParams: field length mismatch");
  }
  if (!(sigma > 0.0)) throw InputError("LlsParams: sigma must be positive");
  if ((lambda_xi.array() <= 0.0).any() || (lambda_gamma.array() <= 0.0).any()) {
    throw InputError("LlsParams: lambda entries must be positive");
  }
}

Eigen::MatrixXd PosteriorDraws::xi_matrix() const {
  Eigen::MatrixXd out(size(), p());
  for (Eigen::Index m = 0; m < size(); ++m) {
    out.row(m) = draws[std::size_t(m)].xi.transpose();
  }
  return out;
}

Eigen::MatrixXd PosteriorDraws::gamma_matrix() const {
  Eigen::MatrixXd out(size(), p());
  for (Eigen::Index m = 0; m < size(); ++m) {
    out.row(m) = draws[std::size_t(m)].gamma.transpose();
  }
  return out;
}

Eigen::VectorXd PosteriorDraws::sigma_vector() const {
  Eigen::VectorXd out(size());
  for (Eigen::Index m = 0; m < size(); ++m) {
    out[m] = draws[std::size_t(m)].sigma;
  }
  return out;
}

double log_posterior(const LlsParams& theta, const Dataset& d) {
  theta.validate();
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (theta.p() != p) throw InputError("log_posterior: dimension mismatch");

  const Eigen::VectorXd resid = d.y - d.X * theta.xi;
  const Eigen::VectorXd eta = d.X * theta.gamma;  // log scale offsets
  const double log_sigma = std::log(theta.sigma);

  // Gaussian likelihood with sd sigma * exp(eta_i).
  double lp = -double(n) * (kLogSqrt2Pi + log_sigma) - eta.sum();
  const double inv_two_sigma2 = 0.5 / (theta.sigma * theta.sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = resid[i] * std::exp(-eta[i]);
    lp -= z * z * inv_two_sigma2;
  }

  // Normal(0, lambda) shrinkage on non-intercept coefficients, lambda = sd.
  for (Eigen::Index j = 1; j < p; ++j) {
    const double lx = theta.lambda_xi[j - 1];
    const double lg = theta.lambda_gamma[j - 1];
    lp += -std::log(lx) - kLogSqrt2Pi -
          theta.xi[j] * theta.xi[j] / (2.0 * lx * lx);
    lp += -std::log(lg) - kLogSqrt2Pi -
          theta.gamma[j] * theta.gamma[j] / (2.0 * lg * lg);
    lp += half_cauchy_log_pdf(lx, 5.0);
    lp += half_cauchy_log_pdf(lg, 5.0);
  }

  // Inverse-Gamma(1/2, 1/2) on sigma^2; flat on both intercepts.
  lp += inverse_gamma_log_pdf(theta.sigma * theta.sigma, 0.5, 0.5);
  return lp;
}

Eigen::VectorXd log_posterior_gradient(const LlsParams& theta,
                                       const Dataset& d) {
  theta.validate();
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.p();
  if (theta.p() != p) {
    throw InputError("log_posterior_gradient: dimension mismatch");
  }

  const Eigen::VectorXd resid = d.y - d.X * theta.xi;
  const Eigen::VectorXd eta = d.X * theta.gamma;
  const double sigma2 = theta.sigma * theta.sigma;

  // w_i = r_i^2 / s_i^2 with s_i = sigma exp(eta_i)
  Eigen::VectorXd r_over_s2(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s2 = sigma2 * std::exp(2.0 * eta[i]);
    r_over_s2[i] = resid[i] / s2;
    w[i] = resid[i] * resid[i] / s2;
  }

  Eigen::VectorXd grad(4 * p - 1);
  grad.setZero();
  auto g_xi = grad.segment(0, p);
  auto g_gamma = grad.segment(p, p);
  double& g_sigma = grad[2 * p];
  auto g_lx = grad.segment(2 * p + 1, p - 1);
  auto g_lg = grad.segment(3 * p, p - 1);

  g_xi = d.X.transpose() * r_over_s2;
  g_gamma = d.X.transpose() * (w - Eigen::VectorXd::Ones(n));
  g_sigma = (-double(n) + w.sum()) / theta.sigma;
  // Inverse-Gamma(1/2,1/2) at sigma^2, differentiated in sigma.
  g_sigma += -3.0 / theta.sigma + 1.0 / (sigma2 * theta.sigma);

  for (Eigen::Index j = 1; j < p; ++j) {
    const double lx = theta.lambda_xi[j - 1];
    const double lg = theta.lambda_gamma[j - 1];
    g_xi[j] += -theta.xi[j] / (lx * lx);
    g_gamma[j] += -theta.gamma[j] / (lg * lg);
    g_lx[j - 1] = -1.0 / lx + theta.xi[j] * theta.xi[j] / (lx * lx * lx) -
                  2.0 * lx / (25.0 + lx * lx);
    g_lg[j - 1] = -1.0 / lg +
                  theta.gamma[j] * theta.gamma[j] / (lg * lg * lg) -
                  2.0 * lg / (25.0 + lg * lg);
  }
  return grad;
}

ConditionalQuantiles::ConditionalQuantiles(const PosteriorDraws& pd,
                                           const Eigen::MatrixXd& X) {
  if (pd.size() < 1) throw InputError("ConditionalQuantiles: no draws");
  if (X.cols() != pd.p()) {
    throw InputError("ConditionalQuantiles: dimension mismatch");
  }
  location_.noalias() = pd.xi_matrix() * X.transpose();
  scale_.noalias() = pd.gamma_matrix() * X.transpose();
  scale_ = scale_.array().exp();
  scale_.array().colwise() *= pd.sigma_vector().array();
}

QuantileDraws ConditionalQuantiles::at(double tau) const {
  QuantileDraws qd;
  qd.tau = tau;
  qd.q = location_ + inverse_normal_cdf(tau) * scale_;
  if (!qd.q.allFinite()) {
    throw NumericalError(
        "quantile_draws: non-finite conditional quantile (overflowing scale "
        "coefficients)");
  }
  return qd;
}

QuantileDraws quantile_draws(const PosteriorDraws& pd, const Eigen::MatrixXd& X,
                             double tau) {
  return ConditionalQuantiles(pd, X).at(tau);
}

Eigen::VectorXd fitted_quantiles(const QuantileDraws& qd) {
  if (qd.q.rows() < 1) throw InputError("fitted_quantiles: no draws");
  return qd.q.colwise().mean();
}

void save_draws_csv(const std::string& path, const PosteriorDraws& pd) {
  csv::Table table;
  const Eigen::Index p = pd.p();
  for (Eigen::Index j = 0; j < p; ++j) {
    table.header.push_back("xi_" + std::to_string(j + 1));
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    table.header.push_back("gamma_" + std::to_string(j + 1));
  }
  table.header.push_back("sigma");
  for (const auto& t : pd.draws) {
    std::vector<std::string> row;
    row.reserve(std::size_t(2 * p + 1));
    for (Eigen::Index j = 0; j < p; ++j) row.push_back(csv::from_number(t.xi[j]));
    for (Eigen::Index j = 0; j < p; ++j) {
      row.push_back(csv::from_number(t.gamma[j]));
    }
    row.push_back(csv::from_number(t.sigma));
    table.rows.push_back(std::move(row));
  }
  csv::write_file(path, table);
}

PosteriorDraws load_draws_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t width = table.header.size();
  if (width < 3 || width % 2 == 0) {
    throw InputError("load_draws_csv: malformed header in " + path);
  }
  const Eigen::Index p = Eigen::Index((width - 1) / 2);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (table.header[std::size_t(j)] != "xi_" + std::to_string(j + 1) ||
        table.header[std::size_t(p + j)] != "gamma_" + std::to_string(j + 1)) {
      throw InputError("load_draws_csv: unexpected column names in " + path);
    }
  }
  if (table.header.back() != "sigma") {
    throw InputError("load_draws_csv: missing sigma column in " + path);
  }
  if (table.rows.empty()) throw InputError("load_draws_csv: no draws in " + path);

  PosteriorDraws pd;
  pd.draws.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    LlsParams t;
    t.xi.resize(p);
    t.gamma.resize(p);
    t.lambda_xi = Eigen::VectorXd::Ones(p - 1);
    t.lambda_gamma = Eigen::VectorXd::Ones(p - 1);
    for (Eigen::Index j = 0; j < p; ++j) {
      t.xi[j] = csv::to_number(row[std::size_t(j)]);
      t.gamma[j] = csv::to_number(row[std::size_t(p + j)]);
    }
    t.sigma = csv::to_number(row.back());
    if (!t.xi.allFinite() || !t.gamma.allFinite() ||
        !std::isfinite(t.sigma)) {
      throw InputError("load_draws_csv: non-finite draw in " + path);
    }
    t.validate();
    pd.draws.push_back(std::move(t));
  }
  return pd;
}

}  // namespace quantsel
