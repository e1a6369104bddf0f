#include "quantsel/decision.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "quantsel/errors.hpp"
#include "quantsel/normal.hpp"
#include "quantsel/rng.hpp"

using namespace quantsel;

namespace {

Eigen::MatrixXd random_design(int n, int p, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j < p; ++j) X(i, j) = rng.normal();
  }
  return X;
}

Eigen::VectorXd random_vector(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Normal-equations oracle with an explicit dense inverse.
Eigen::VectorXd normal_equations_oracle(const Eigen::VectorXd& qhat,
                                        const Eigen::MatrixXd& X,
                                        const SubsetMask& S) {
  const int s = S.size();
  Eigen::MatrixXd xs(X.rows(), s);
  for (int i = 0; i < s; ++i) xs.col(i) = X.col(S.indices[std::size_t(i)] - 1);
  Eigen::MatrixXd gram(s, s);
  Eigen::VectorXd rhs(s);
  for (int a = 0; a < s; ++a) {
    rhs[a] = xs.col(a).dot(qhat);
    for (int b = 0; b < s; ++b) gram(a, b) = xs.col(a).dot(xs.col(b));
  }
  return gram.inverse() * rhs;
}

QuantileDraws draws_from_matrix(double tau, Eigen::MatrixXd q) {
  QuantileDraws qd;
  qd.tau = tau;
  qd.q = std::move(q);
  return qd;
}

}  // namespace

TEST_CASE("optimal action matches the normal-equations oracle") {
  Rng rng(1, Stream::generic);
  for (int instance = 0; instance < 50; ++instance) {
    const int n = 20 + int(rng.below(81));
    const int p = 2 + int(rng.below(9));
    const Eigen::MatrixXd X = random_design(n, p, rng);
    const Eigen::VectorXd qhat = random_vector(n, rng);
    std::vector<int> idx{1};
    for (int j = 2; j <= p; ++j) {
      if (rng.uniform() < 0.6) idx.push_back(j);
    }
    const SubsetMask S(idx);
    const OptimalAction action = optimal_action(qhat, X, S, 0.5);
    const Eigen::VectorXd oracle = normal_equations_oracle(qhat, X, S);
    for (int i = 0; i < S.size(); ++i) {
      CHECK(std::abs(action.delta[S.indices[std::size_t(i)] - 1] - oracle[i]) <
            1e-9);
    }
    // Off-subset coordinates are exactly zero.
    for (int j = 1; j <= p; ++j) {
      if (!S.contains(j)) CHECK(action.delta[j - 1] == 0.0);
    }
    // Residual orthogonality against the active columns.
    const Eigen::VectorXd resid = qhat - X * action.delta;
    for (int j : S.indices) {
      CHECK(std::abs(resid.dot(X.col(j - 1))) < 1e-8 * qhat.norm());
    }
  }
}

TEST_CASE("intercept-only action is the mean") {
  Rng rng(2, Stream::generic);
  const Eigen::MatrixXd X = random_design(30, 4, rng);
  const Eigen::VectorXd qhat = random_vector(30, rng);
  const OptimalAction a = optimal_action(qhat, X, SubsetMask({1}), 0.5);
  CHECK(a.delta[0] == doctest::Approx(qhat.mean()).epsilon(1e-12));
}

TEST_CASE("rank-deficient subset names the offending column") {
  Rng rng(3, Stream::generic);
  Eigen::MatrixXd X = random_design(20, 4, rng);
  X.col(3) = 2.0 * X.col(1);  // column 4 duplicates column 2
  const Eigen::VectorXd qhat = random_vector(20, rng);
  CHECK_THROWS_WITH_AS(optimal_action(qhat, X, SubsetMask({1, 2, 4}), 0.5),
                       doctest::Contains("rank deficient"), NumericalError);
}

TEST_CASE("homoscedastic draws reduce to averaged parameters") {
  // Location-scale draws with constant scale: the full-subset action is the
  // averaged location coefficients with a quantile shift on the intercept,
  // and the posterior action reproduces each draw exactly.
  Rng rng(4, Stream::generic);
  const int n = 40, p = 5, M = 60;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  Eigen::MatrixXd xi(M, p);
  Eigen::VectorXd sigma(M);
  for (int m = 0; m < M; ++m) {
    xi.row(m) = random_vector(p, rng).transpose();
    sigma[m] = 0.5 + rng.uniform();
  }
  for (double tau : {0.05, 0.5, 0.95}) {
    const double z = inverse_normal_cdf(tau);
    Eigen::MatrixXd q(M, n);
    for (int m = 0; m < M; ++m) {
      q.row(m) = (X * xi.row(m).transpose()).transpose() +
                 Eigen::RowVectorXd::Constant(n, sigma[m] * z);
    }
    const QuantileDraws qd = draws_from_matrix(tau, q);

    const OptimalAction action =
        optimal_action(fitted_quantiles(qd), X, SubsetMask::full(p), tau);
    CHECK(std::abs(action.delta[0] -
                   (xi.col(0).mean() + sigma.mean() * z)) < 1e-10);
    for (int j = 1; j < p; ++j) {
      CHECK(std::abs(action.delta[j] - xi.col(j).mean()) < 1e-10);
    }

    const PosteriorAction pa = posterior_action(qd, X, SubsetMask::full(p));
    for (int m = 0; m < M; ++m) {
      CHECK(std::abs(pa.draws(m, 0) - (xi(m, 0) + sigma[m] * z)) < 1e-10);
      for (int j = 1; j < p; ++j) {
        CHECK(std::abs(pa.draws(m, j) - xi(m, j)) < 1e-10);
      }
    }
  }
}

TEST_CASE("linear-quantile draws average to the optimal action") {
  Rng rng(5, Stream::generic);
  const int n = 30, p = 4, M = 40;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  Eigen::MatrixXd beta(M, p);
  Eigen::MatrixXd q(M, n);
  for (int m = 0; m < M; ++m) {
    beta.row(m) = random_vector(p, rng).transpose();
    q.row(m) = (X * beta.row(m).transpose()).transpose();
  }
  const QuantileDraws qd = draws_from_matrix(0.25, q);
  const OptimalAction action =
      optimal_action(fitted_quantiles(qd), X, SubsetMask::full(p), 0.25);
  const Eigen::VectorXd mean_beta = beta.colwise().mean();
  CHECK((action.delta - mean_beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("posterior action rows and means line up with optimal actions") {
  Rng rng(6, Stream::generic);
  const int n = 25, p = 4;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  const SubsetMask S({1, 3});

  Eigen::MatrixXd one_row(1, n);
  one_row.row(0) = random_vector(n, rng).transpose();
  const QuantileDraws single = draws_from_matrix(0.5, one_row);
  const PosteriorAction pa1 = posterior_action(single, X, S);
  const OptimalAction a1 =
      optimal_action(one_row.row(0).transpose(), X, S, 0.5);
  CHECK((pa1.draws.row(0).transpose() - a1.coefficients()).cwiseAbs().maxCoeff() <
        1e-12);

  Eigen::MatrixXd q(30, n);
  for (int m = 0; m < 30; ++m) q.row(m) = random_vector(n, rng).transpose();
  const QuantileDraws qd = draws_from_matrix(0.5, q);
  const PosteriorAction pa = posterior_action(qd, X, S);
  const OptimalAction a = optimal_action(fitted_quantiles(qd), X, S, 0.5);
  CHECK((pa.draws.colwise().mean().transpose() - a.coefficients())
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("credible intervals use type-7 quantiles") {
  SUBCASE("constant draws collapse") {
    PosteriorAction pa;
    pa.subset = SubsetMask({1});
    pa.draws = Eigen::MatrixXd::Constant(40, 1, 3.25);
    const auto ci = credible_interval(pa, 0.9);
    CHECK(ci[0].first == 3.25);
    CHECK(ci[0].second == 3.25);
  }

  SUBCASE("1..100 at level one half") {
    PosteriorAction pa;
    pa.subset = SubsetMask({1});
    pa.draws.resize(100, 1);
    for (int i = 0; i < 100; ++i) pa.draws(i, 0) = double(i + 1);
    const auto ci = credible_interval(pa, 0.5);
    CHECK(ci[0].first == doctest::Approx(25.75).epsilon(1e-12));
    CHECK(ci[0].second == doctest::Approx(75.25).epsilon(1e-12));
  }

  SUBCASE("standard normal draws bracket the usual critical values") {
    Rng rng(7, Stream::generic);
    PosteriorAction pa;
    pa.subset = SubsetMask({1});
    pa.draws.resize(2500, 1);
    for (int i = 0; i < 2500; ++i) pa.draws(i, 0) = rng.normal();
    const auto ci = credible_interval(pa, 0.95);
    CHECK(std::abs(ci[0].first + 1.96) < 0.15);
    CHECK(std::abs(ci[0].second - 1.96) < 0.15);
  }

  SUBCASE("level bounds enforced") {
    PosteriorAction pa;
    pa.draws = Eigen::MatrixXd::Zero(10, 1);
    CHECK_THROWS_AS(credible_interval(pa, 0.0), InputError);
    CHECK_THROWS_AS(credible_interval(pa, 1.0), InputError);
  }
}

TEST_CASE("expected loss, rss and their difference identity") {
  Rng rng(8, Stream::generic);
  const int n = 20, p = 5, M = 15;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  Eigen::MatrixXd q(M, n);
  for (int m = 0; m < M; ++m) q.row(m) = random_vector(n, rng).transpose();
  const QuantileDraws qd = draws_from_matrix(0.5, q);
  const Eigen::VectorXd qhat = fitted_quantiles(qd);

  SUBCASE("exact fit has zero loss") {
    Eigen::MatrixXd fitted_q(1, n);
    const Eigen::VectorXd coef = random_vector(p, rng);
    fitted_q.row(0) = (X * coef).transpose();
    const QuantileDraws exact = draws_from_matrix(0.5, fitted_q);
    const OptimalAction a =
        optimal_action(fitted_q.row(0).transpose(), X, SubsetMask::full(p), 0.5);
    CHECK(expected_loss(exact, X, a) < 1e-18);
  }

  SUBCASE("nested subsets order the loss") {
    const SubsetMask s1({1, 2});
    const SubsetMask s2({1, 2, 4});
    const double l1 = expected_loss(qd, X, optimal_action(qhat, X, s1, 0.5));
    const double l2 = expected_loss(qd, X, optimal_action(qhat, X, s2, 0.5));
    CHECK(l1 >= l2 - 1e-9);
  }

  SUBCASE("loss difference equals rss difference, brute force") {
    const SubsetMask s1({1, 3});
    const SubsetMask s2({1, 2, 3, 5});
    const OptimalAction a1 = optimal_action(qhat, X, s1, 0.5);
    const OptimalAction a2 = optimal_action(qhat, X, s2, 0.5);

    // Direct double loop over draws and rows.
    auto brute_loss = [&](const OptimalAction& a) {
      double total = 0.0;
      for (int m = 0; m < M; ++m) {
        for (int i = 0; i < n; ++i) {
          const double pred = X.row(i).dot(a.delta);
          total += (q(m, i) - pred) * (q(m, i) - pred);
        }
      }
      return total / double(M);
    };
    const double l1 = expected_loss(qd, X, a1);
    const double l2 = expected_loss(qd, X, a2);
    CHECK(l1 == doctest::Approx(brute_loss(a1)).epsilon(1e-12));
    CHECK(l2 == doctest::Approx(brute_loss(a2)).epsilon(1e-12));
    const double r1 = rss(qhat, X, a1);
    const double r2 = rss(qhat, X, a2);
    CHECK(l1 - l2 == doctest::Approx(r1 - r2).epsilon(1e-8));
    CHECK(r1 == doctest::Approx(a1.expected_loss).epsilon(1e-12));
  }
}

TEST_CASE("per-draw loss comparisons") {
  SUBCASE("predictions equal to qhat give identically zero D") {
    // Square invertible design: the projection reproduces any response.
    Eigen::MatrixX<double> X(2, 2);
    X << 1.0, 0.0, 1.0, 1.0;
    Eigen::MatrixXd q(2, 2);
    q << 1.0, 3.0, 3.0, 1.0;
    const QuantileDraws qd = draws_from_matrix(0.5, q);
    const OptimalAction a =
        optimal_action(fitted_quantiles(qd), X, SubsetMask::full(2), 0.5);
    const Eigen::VectorXd d = d_s_draws(qd, X, a);
    CHECK(d.cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("two-draw fixture by hand") {
    // qhat = (1,0,-1), draws qhat -/+ e with e = (1.2,0,0).
    // Subset {1} (intercept): predictions are 0, so
    //   D = 100 ((||r -/+ e||^2 - ||e||^2) / ||e||^2) with r = (1,0,-1):
    //   D_1 = 100 (1.04 - 1.44) / 1.44 = -250/9, D_2 = 100 (5.84-1.44)/1.44.
    // Subset {2} with x2 = (2,0,1): fit 0.2 x2, residual (0.6,0,-1.2):
    //   D_1 = 100 (1.8-1.44)/1.44 = 25, D_2 = 100 (4.68-1.44)/1.44 = 225.
    Eigen::MatrixXd X(3, 2);
    X << 1.0, 2.0, 1.0, 0.0, 1.0, 1.0;
    Eigen::MatrixXd q(2, 3);
    q << -0.2, 0.0, -1.0, 2.2, 0.0, -1.0;
    const QuantileDraws qd = draws_from_matrix(0.5, q);
    const Eigen::VectorXd qhat = fitted_quantiles(qd);
    CHECK((qhat - Eigen::Vector3d(1.0, 0.0, -1.0)).cwiseAbs().maxCoeff() <
          1e-14);

    const Eigen::VectorXd d_a =
        d_s_draws(qd, X, optimal_action(qhat, X, SubsetMask({1}), 0.5));
    CHECK(d_a[0] == doctest::Approx(-250.0 / 9.0).epsilon(1e-9));
    CHECK(d_a[1] == doctest::Approx(2750.0 / 9.0).epsilon(1e-9));

    const Eigen::VectorXd d_b =
        d_s_draws(qd, X, optimal_action(qhat, X, SubsetMask({2}), 0.5));
    CHECK(d_b[0] == doctest::Approx(25.0).epsilon(1e-9));
    CHECK(d_b[1] == doctest::Approx(225.0).epsilon(1e-9));
  }

  SUBCASE("D is bounded below by -100") {
    Rng rng(9, Stream::generic);
    const Eigen::MatrixXd X = random_design(12, 3, rng);
    Eigen::MatrixXd q(8, 12);
    for (int m = 0; m < 8; ++m) q.row(m) = random_vector(12, rng).transpose();
    const QuantileDraws qd = draws_from_matrix(0.5, q);
    for (const auto& S : {SubsetMask({1}), SubsetMask({1, 2}),
                          SubsetMask({2, 3}), SubsetMask::full(3)}) {
      const Eigen::VectorXd d =
          d_s_draws(qd, X, optimal_action(fitted_quantiles(qd), X, S, 0.5));
      CHECK(d.minCoeff() >= -100.0);
    }
  }

  SUBCASE("degenerate posterior raises zero anchor loss") {
    Rng rng(10, Stream::generic);
    const Eigen::MatrixXd X = random_design(10, 2, rng);
    Eigen::MatrixXd q(1, 10);
    q.row(0) = random_vector(10, rng).transpose();
    const QuantileDraws qd = draws_from_matrix(0.5, q);
    const OptimalAction a =
        optimal_action(fitted_quantiles(qd), X, SubsetMask({1}), 0.5);
    CHECK_THROWS_WITH_AS(d_s_draws(qd, X, a),
                         doctest::Contains("zero anchor loss"),
                         NumericalError);
  }

  SUBCASE("cache agrees with the direct computation") {
    Rng rng(11, Stream::generic);
    const Eigen::MatrixXd X = random_design(18, 4, rng);
    Eigen::MatrixXd q(25, 18);
    for (int m = 0; m < 25; ++m) q.row(m) = random_vector(18, rng).transpose();
    const QuantileDraws qd = draws_from_matrix(0.5, q);
    const DrawLossCache cache(qd, X);
    for (const auto& S :
         {SubsetMask({1}), SubsetMask({1, 2, 4}), SubsetMask::full(4)}) {
      const OptimalAction a = optimal_action(cache.qhat(), X, S, 0.5);
      const Eigen::VectorXd direct = d_s_draws(qd, X, a);
      const Eigen::VectorXd fast = cache.d_s(a);
      for (Eigen::Index m = 0; m < direct.size(); ++m) {
        CHECK(std::abs(direct[m] - fast[m]) <
              1e-8 * std::max(1.0, std::abs(direct[m])));
      }
      CHECK(cache.subset_losses(a).mean() ==
            doctest::Approx(expected_loss(qd, X, a)).epsilon(1e-8));
    }
  }
}

TEST_CASE("projection properties") {
  Rng rng(12, Stream::generic);
  const int n = 24, p = 5;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  const SubsetMask S({1, 2, 4});

  SUBCASE("idempotence on the column space") {
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    coef[0] = 1.5;
    coef[1] = -2.0;
    coef[3] = 0.7;
    const Eigen::VectorXd target = X * coef;
    const OptimalAction a = optimal_action(target, X, S, 0.5);
    CHECK((a.delta - coef).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("scale equivariance") {
    const Eigen::VectorXd qhat = random_vector(n, rng);
    const OptimalAction a = optimal_action(qhat, X, S, 0.5);
    const OptimalAction b = optimal_action((3.5 * qhat).eval(), X, S, 0.5);
    CHECK((b.delta - 3.5 * a.delta).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("null-space shifts leave the action unchanged") {
    const Eigen::VectorXd qhat = random_vector(n, rng);
    const OptimalAction a = optimal_action(qhat, X, S, 0.5);
    // Project noise onto the orthogonal complement of the active columns.
    Eigen::MatrixXd xs(n, S.size());
    for (int i = 0; i < S.size(); ++i) {
      xs.col(i) = X.col(S.indices[std::size_t(i)] - 1);
    }
    const Eigen::VectorXd w = random_vector(n, rng);
    const Eigen::VectorXd null_part =
        w - xs * (xs.transpose() * xs).inverse() * (xs.transpose() * w);
    const OptimalAction b = optimal_action((qhat + null_part).eval(), X, S, 0.5);
    CHECK((b.delta - a.delta).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("joint block solve separates across quantiles") {
  // Minimizing the summed loss over a grid with unconstrained per-tau
  // coefficients is the same as solving each tau on its own.
  Rng rng(13, Stream::generic);
  const int n = 18, p = 4;
  const Eigen::MatrixXd X = random_design(n, p, rng);
  const std::vector<double> taus = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
  const int t = int(taus.size());

  std::vector<Eigen::VectorXd> qhats;
  for (int k = 0; k < t; ++k) qhats.push_back(random_vector(n, rng));

  // Stacked block system: block-diagonal design, concatenated responses.
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n * t, p * t);
  Eigen::VectorXd rhs(n * t);
  for (int k = 0; k < t; ++k) {
    big.block(k * n, k * p, n, p) = X;
    rhs.segment(k * n, n) = qhats[std::size_t(k)];
  }
  const Eigen::VectorXd joint =
      Eigen::HouseholderQR<Eigen::MatrixXd>(big).solve(rhs);

  for (int k = 0; k < t; ++k) {
    const OptimalAction a = optimal_action(qhats[std::size_t(k)], X,
                                           SubsetMask::full(p), taus[std::size_t(k)]);
    CHECK((joint.segment(k * p, p) - a.delta).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("subset mask construction rules") {
  CHECK_THROWS_AS(SubsetMask({1, 1, 2}), InputError);
  CHECK_THROWS_AS(SubsetMask({0, 1}), InputError);
  const SubsetMask s({3, 1, 2});
  CHECK(s.indices == std::vector<int>{1, 2, 3});
  CHECK(s.to_string() == "1;2;3");
  CHECK(SubsetMask({1, 2}).contains_all(SubsetMask({2})));
  CHECK_FALSE(SubsetMask({1, 2}).contains_all(SubsetMask({3})));
}
