#include "quantsel/acceptance.hpp"

#include <algorithm>

#include "quantsel/errors.hpp"

namespace quantsel {

AcceptableFamily filter_acceptable(const CandidateSet& cands,
                                   const QuantileDraws& qd,
                                   const Eigen::MatrixXd& X, double epsilon,
                                   SubsetSolverCache* cache) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw InputError("filter_acceptable: epsilon must lie in (0, 1]");
  }
  AcceptableFamily fam;
  fam.tau = qd.tau;
  fam.epsilon = epsilon;

  const DrawLossCache losses(qd, X);
  const Eigen::Index m_draws = qd.q.rows();
  for (const auto& entry : cands.subsets) {
    OptimalAction action;
    action.tau = qd.tau;
    action.subset = entry.subset;
    if (cache) {
      const auto solver = cache->get(entry.subset);
      action.delta = solver->expand(solver->solve(losses.qhat()), X.cols());
      action.expected_loss = (losses.qhat() - X * action.delta).squaredNorm();
    } else {
      action = optimal_action(losses.qhat(), X, entry.subset, qd.tau);
    }
    const Eigen::VectorXd d = losses.d_s(action);
    const double prob = double((d.array() <= 0.0).count()) / double(m_draws);
    if (prob >= epsilon) {
      fam.members.push_back(AcceptableMember{
          entry.subset, prob, losses.subset_losses(action).mean()});
    }
  }

  std::sort(fam.members.begin(), fam.members.end(),
            [](const AcceptableMember& a, const AcceptableMember& b) {
              if (a.subset.size() != b.subset.size()) {
                return a.subset.size() < b.subset.size();
              }
              if (a.expected_loss != b.expected_loss) {
                return a.expected_loss < b.expected_loss;
              }
              return a.subset < b.subset;
            });

  if (fam.members.empty()) {
    fam.empty_reason = "no subset matches fitted quantiles";
  } else {
    fam.s_small = fam.members.front().subset;
  }
  return fam;
}

std::optional<SubsetMask> smallest_acceptable(const AcceptableFamily& fam) {
  return fam.s_small;
}

Eigen::VectorXd variable_importance(const AcceptableFamily& fam, int p) {
  if (fam.members.empty()) {
    throw InputError("variable_importance: empty acceptable family");
  }
  Eigen::VectorXd vi = Eigen::VectorXd::Zero(p);
  for (const auto& member : fam.members) {
    for (int j : member.subset.indices) vi[j - 1] += 1.0;
  }
  vi /= double(fam.members.size());
  return vi;
}

}  // namespace quantsel
