#ifndef QUANTSEL_ACCEPTANCE_HPP
#define QUANTSEL_ACCEPTANCE_HPP

#include <optional>
#include <string>
#include <vector>

#include "quantsel/decision.hpp"
#include "quantsel/search.hpp"

namespace quantsel {

struct AcceptableMember {
  SubsetMask subset;
  double prob_d_le_0 = 0.0;   // posterior probability that D_S <= 0
  double expected_loss = 0.0; // Monte Carlo mean of the per-draw loss
};

// Candidates whose optimal action has posterior probability at least epsilon
// of matching the fitted quantiles' loss. An empty family is a first-class
// outcome, reported through empty_reason rather than an error.
struct AcceptableFamily {
  double tau = 0.5;
  double epsilon = 0.05;
  std::vector<AcceptableMember> members;  // sorted by (size, loss, lex)
  std::optional<SubsetMask> s_small;
  std::optional<std::string> empty_reason;
};

// Scores every candidate with the weak criterion p{D_S <= 0 | y} >= epsilon
// and fills s_small by cardinality, then expected loss, then lexicographic
// order. Candidates must have been searched against fitted_quantiles(qd).
// A solver cache, when given, shares subset factorizations across calls
// (typically across quantiles); results are identical with or without it.
AcceptableFamily filter_acceptable(const CandidateSet& cands,
                                   const QuantileDraws& qd,
                                   const Eigen::MatrixXd& X, double epsilon,
                                   SubsetSolverCache* cache = nullptr);

std::optional<SubsetMask> smallest_acceptable(const AcceptableFamily& fam);

// VI_j = share of acceptable subsets containing covariate j; the intercept
// is reported too and equals one whenever it is force-included.
Eigen::VectorXd variable_importance(const AcceptableFamily& fam, int p);

}  // namespace quantsel

#endif  // QUANTSEL_ACCEPTANCE_HPP
