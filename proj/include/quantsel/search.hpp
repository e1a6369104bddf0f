#ifndef QUANTSEL_SEARCH_HPP
#define QUANTSEL_SEARCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "quantsel/decision.hpp"
#include "quantsel/lls.hpp"

namespace quantsel {

// Best subsets per size by residual sum of squares against the fitted
// quantiles. At most m_k subsets are retained for each size, except that
// subsets tied with the m_k-th RSS are kept as well. Entries are sorted by
// (size, rss, lexicographic indices).
struct CandidateSet {
  struct Entry {
    SubsetMask subset;
    double rss = 0.0;
  };

  double tau = 0.5;
  std::vector<Entry> subsets;
  int m_k = 50;
  SubsetMask always_include;

  std::vector<Entry> of_size(int k) const;
};

struct SearchOptions {
  int exhaustive_limit = 20;  // guard on p for complete enumeration
  int bb_limit = 35;          // guard on p for branch and bound
  int jobs = 1;               // >1 partitions the first branching level
};

struct SearchStats {
  std::uint64_t nodes_visited = 0;  // candidate subsets evaluated
};

// Complete enumeration of all subsets containing always_include.
CandidateSet exhaustive_search(const Eigen::VectorXd& qhat,
                               const Eigen::MatrixXd& X, int m_k,
                               const SubsetMask& always_include,
                               const SearchOptions& options = {});

// Branch and bound with the monotone RSS bound: a branch is cut when even
// its fully augmented subset cannot beat the currently retained RSS at any
// reachable size. Retained sets match exhaustive_search exactly.
CandidateSet branch_and_bound(const Eigen::VectorXd& qhat,
                              const Eigen::MatrixXd& X, int m_k,
                              const SubsetMask& always_include,
                              const SearchOptions& options = {},
                              SearchStats* stats = nullptr);

// Model-assisted screen for p above the branch-and-bound guard: keeps the
// intercept plus the limit-1 covariates with the largest posterior mean
// |xi_j| + |gamma_j|, ties resolved toward the smaller index.
SubsetMask prescreen(const PosteriorDraws& pd, int limit);

// Dense re-factorization of a single subset's RSS; the reference the
// incremental engine is checked against.
double rss_dense(const Eigen::VectorXd& qhat, const Eigen::MatrixXd& X,
                 const SubsetMask& S);

// Incremental RSS over a push/pop path of columns. A shared triangular
// factor of the active Gram grows one column per push; the response column
// is folded in with a Givens-style downdate of the residual norm.
class RssPath {
 public:
  RssPath(const Eigen::MatrixXd& X, const Eigen::VectorXd& qhat,
          const SubsetMask& base);

  double rss() const { return rss_stack_.back(); }
  int depth() const { return int(active_.size()); }
  void push(int index);  // 1-based column; throws on collinear push
  void pop();

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd xq_;
  int base_size_ = 0;
  std::vector<Eigen::VectorXd> factor_cols_;
  std::vector<double> z_;
  std::vector<double> rss_stack_;
  std::vector<int> active_;  // 0-based column ids in push order
};

void save_candidates_csv(const std::string& path, const CandidateSet& cands);

}  // namespace quantsel

#endif  // QUANTSEL_SEARCH_HPP
