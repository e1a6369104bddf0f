#include "quantsel/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "quantsel/csv.hpp"
#include "quantsel/errors.hpp"

namespace quantsel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<CandidateSet::Entry> CandidateSet::of_size(int k) const {
  std::vector<Entry> out;
  for (const auto& e : subsets) {
    if (e.subset.size() == k) out.push_back(e);
  }
  return out;
}

RssPath::RssPath(const Eigen::MatrixXd& X, const Eigen::VectorXd& qhat,
                 const SubsetMask& base) {
  if (qhat.size() != X.rows()) throw InputError("RssPath: length mismatch");
  gram_.noalias() = X.transpose() * X;
  xq_.noalias() = X.transpose() * qhat;
  rss_stack_.push_back(qhat.squaredNorm());
  for (int j : base.indices) push(j);
  base_size_ = depth();
}

void RssPath::push(int index) {
  const int j = index - 1;
  if (j < 0 || j >= gram_.cols()) throw InputError("RssPath: bad column");
  const int s = depth();
  // Forward substitution R' a = gram(active, j) against the stored factor.
  Eigen::VectorXd a(s);
  for (int i = 0; i < s; ++i) {
    double v = gram_(active_[std::size_t(i)], j);
    for (int t = 0; t < i; ++t) v -= factor_cols_[std::size_t(i)][t] * a[t];
    a[i] = v / factor_cols_[std::size_t(i)][i];
  }
  const double d2 = gram_(j, j) - a.squaredNorm();
  if (!(d2 > 1e-12 * gram_(j, j))) {
    throw NumericalError("RssPath: column " + std::to_string(index) +
                         " is collinear with the active set");
  }
  const double d = std::sqrt(d2);
  double zeta = xq_[j];
  for (int t = 0; t < s; ++t) zeta -= a[t] * z_[std::size_t(t)];
  zeta /= d;

  Eigen::VectorXd col(s + 1);
  col.head(s) = a;
  col[s] = d;
  factor_cols_.push_back(std::move(col));
  z_.push_back(zeta);
  active_.push_back(j);
  rss_stack_.push_back(std::max(rss_stack_.back() - zeta * zeta, 0.0));
}

void RssPath::pop() {
  if (depth() <= base_size_) throw InputError("RssPath: pop past base");
  factor_cols_.pop_back();
  z_.pop_back();
  active_.pop_back();
  rss_stack_.pop_back();
}

double rss_dense(const Eigen::VectorXd& qhat, const Eigen::MatrixXd& X,
                 const SubsetMask& S) {
  if (S.empty()) return qhat.squaredNorm();
  Eigen::MatrixXd xs(X.rows(), S.size());
  for (int i = 0; i < S.size(); ++i) {
    xs.col(i) = X.col(S.indices[std::size_t(i)] - 1);
  }
  const Eigen::VectorXd coef =
      Eigen::HouseholderQR<Eigen::MatrixXd>(xs).solve(qhat);
  return (qhat - xs * coef).squaredNorm();
}

namespace {

// Per-size ledgers of the best subsets, boundary ties kept.
class Retention {
 public:
  Retention(int max_size, int m_k) : m_k_(m_k) {
    lists_.resize(std::size_t(max_size) + 1);
  }

  double threshold(int k) const {
    const auto& list = lists_[std::size_t(k)];
    if (int(list.size()) < m_k_) return kInf;
    return list[std::size_t(m_k_ - 1)].rss;
  }

  // A branch whose best completion has this RSS stays alive if some size in
  // [lo, hi] could still retain it (ties included).
  bool any_open(int lo, int hi, double bound) const {
    for (int k = lo; k <= hi && k < int(lists_.size()); ++k) {
      if (bound <= threshold(k)) return true;
    }
    return false;
  }

  void insert(int k, double rss, SubsetMask subset) {
    auto& list = lists_[std::size_t(k)];
    CandidateSet::Entry entry{std::move(subset), rss};
    const auto pos = std::upper_bound(
        list.begin(), list.end(), entry, [](const auto& a, const auto& b) {
          return a.rss < b.rss || (a.rss == b.rss && a.subset < b.subset);
        });
    list.insert(pos, std::move(entry));
    if (int(list.size()) > m_k_) {
      const double cutoff = list[std::size_t(m_k_ - 1)].rss;
      auto it = list.begin() + m_k_;
      while (it != list.end() && it->rss <= cutoff) ++it;
      list.erase(it, list.end());
    }
  }

  void merge_into(Retention& target) const {
    for (std::size_t k = 0; k < lists_.size(); ++k) {
      for (const auto& e : lists_[k]) {
        target.insert(int(k), e.rss, e.subset);
      }
    }
  }

  std::vector<CandidateSet::Entry> collect() const {
    std::vector<CandidateSet::Entry> out;
    for (const auto& list : lists_) {
      out.insert(out.end(), list.begin(), list.end());
    }
    return out;
  }

 private:
  int m_k_;
  std::vector<std::vector<CandidateSet::Entry>> lists_;
};

std::vector<int> free_variables(int p, const SubsetMask& always) {
  std::vector<int> free;
  for (int j = 1; j <= p; ++j) {
    if (!always.contains(j)) free.push_back(j);
  }
  return free;
}

SubsetMask join(const SubsetMask& base, const std::vector<int>& extra) {
  std::vector<int> idx = base.indices;
  idx.insert(idx.end(), extra.begin(), extra.end());
  return SubsetMask(std::move(idx));
}

void validate_inputs(const Eigen::VectorXd& qhat, const Eigen::MatrixXd& X,
                     int m_k, const SubsetMask& always) {
  if (qhat.size() != X.rows()) throw InputError("search: length mismatch");
  if (m_k < 1) throw InputError("search: m_k must be >= 1");
  if (!always.empty() && always.indices.back() > X.cols()) {
    throw InputError("search: always_include index exceeds column count");
  }
}

// Depth-first enumeration in increasing-index order: every subset of the
// free variables is reached exactly once. Children are gated by the RSS of
// their fully augmented branch, which no completion can beat.
class BbWorker {
 public:
  BbWorker(const Eigen::MatrixXd& X, const Eigen::VectorXd& qhat,
           const SubsetMask& base, const std::vector<int>& order,
           Retention& retention)
      : path_(X, qhat, base),
        base_(base),
        order_(order),
        retention_(retention) {}

  std::uint64_t nodes() const { return nodes_; }

  void record_current() {
    ++nodes_;
    retention_.insert(base_.size() + int(chosen_.size()), path_.rss(),
                      join(base_, chosen_));
  }

  void descend(std::size_t start) {
    const std::size_t count = order_.size() - start;
    if (count == 0) return;
    std::vector<double> bound(count);
    for (std::size_t t = order_.size(); t-- > start;) {
      path_.push(order_[t]);
      bound[t - start] = path_.rss();
    }
    for (std::size_t t = 0; t < count; ++t) path_.pop();

    for (std::size_t i = start; i < order_.size(); ++i) {
      enter_child(i, bound[i - start]);
    }
  }

  // Record order_[i] appended to the current prefix, then explore its
  // subtree unless the bound proves it cannot place anywhere.
  void enter_child(std::size_t i, double bound) {
    path_.push(order_[std::size_t(i)]);
    chosen_.push_back(order_[std::size_t(i)]);
    record_current();
    const int size_now = base_.size() + int(chosen_.size());
    const int deepest = size_now + int(order_.size() - i - 1);
    if (deepest > size_now &&
        retention_.any_open(size_now + 1, deepest, bound)) {
      descend(i + 1);
    }
    chosen_.pop_back();
    path_.pop();
  }

  double bound_for_child(std::size_t i) {
    for (std::size_t t = order_.size(); t-- > i;) path_.push(order_[t]);
    const double bound = path_.rss();
    for (std::size_t t = i; t < order_.size(); ++t) path_.pop();
    return bound;
  }

 private:
  RssPath path_;
  const SubsetMask& base_;
  const std::vector<int>& order_;
  Retention& retention_;
  std::vector<int> chosen_;
  std::uint64_t nodes_ = 0;
};

CandidateSet finish(int m_k, const SubsetMask& always,
                    const Retention& retention) {
  CandidateSet out;
  out.m_k = m_k;
  out.always_include = always;
  out.subsets = retention.collect();
  return out;
}

}  // namespace

CandidateSet exhaustive_search(const Eigen::VectorXd& qhat,
                               const Eigen::MatrixXd& X, int m_k,
                               const SubsetMask& always_include,
                               const SearchOptions& options) {
  validate_inputs(qhat, X, m_k, always_include);
  const int p = int(X.cols());
  if (p > options.exhaustive_limit) {
    throw InputError("exhaustive_search: p = " + std::to_string(p) +
                     " exceeds the enumeration guard of " +
                     std::to_string(options.exhaustive_limit));
  }
  const std::vector<int> free = free_variables(p, always_include);
  Retention retention(p, m_k);
  std::vector<int> extra;
  for (std::uint64_t mask = 0; mask < (1ull << free.size()); ++mask) {
    extra.clear();
    for (std::size_t b = 0; b < free.size(); ++b) {
      if (mask & (1ull << b)) extra.push_back(free[b]);
    }
    SubsetMask subset = join(always_include, extra);
    if (subset.empty()) continue;
    const int size = subset.size();
    const double rss_value = rss_dense(qhat, X, subset);
    retention.insert(size, rss_value, std::move(subset));
  }
  return finish(m_k, always_include, retention);
}

CandidateSet branch_and_bound(const Eigen::VectorXd& qhat,
                              const Eigen::MatrixXd& X, int m_k,
                              const SubsetMask& always_include,
                              const SearchOptions& options,
                              SearchStats* stats) {
  validate_inputs(qhat, X, m_k, always_include);
  const int p = int(X.cols());
  if (p > options.bb_limit) {
    throw InputError("branch_and_bound: p = " + std::to_string(p) +
                     " exceeds the guard of " +
                     std::to_string(options.bb_limit) +
                     "; run prescreen first");
  }
  std::vector<int> order = free_variables(p, always_include);

  // Explore the most promising variables first: ascending RSS of the
  // single-variable extension of the base.
  {
    RssPath probe(X, qhat, always_include);
    std::vector<std::pair<double, int>> scored;
    scored.reserve(order.size());
    for (int j : order) {
      probe.push(j);
      scored.emplace_back(probe.rss(), j);
      probe.pop();
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t i = 0; i < scored.size(); ++i) order[i] = scored[i].second;
  }

  Retention retention(p, m_k);
  std::uint64_t nodes = 0;

  // The base subset itself.
  if (!always_include.empty()) {
    RssPath root(X, qhat, always_include);
    retention.insert(always_include.size(), root.rss(), always_include);
    ++nodes;
  }

  const int jobs =
      std::max(1, std::min(options.jobs, int(std::max<std::size_t>(
                                             order.size(), 1))));
  if (jobs == 1 || order.size() <= 1) {
    BbWorker worker(X, qhat, always_include, order, retention);
    worker.descend(0);
    nodes += worker.nodes();
  } else {
    // First-level children are dealt round-robin to workers with private
    // ledgers; local thresholds are never tighter than the global ones, so
    // the merged retention matches the single-threaded result.
    std::vector<Retention> parts(std::size_t(jobs), Retention(p, m_k));
    std::vector<std::uint64_t> part_nodes(std::size_t(jobs), 0);
    std::vector<std::thread> threads;
    for (int w = 0; w < jobs; ++w) {
      threads.emplace_back([&, w] {
        BbWorker worker(X, qhat, always_include, order, parts[std::size_t(w)]);
        for (std::size_t i = std::size_t(w); i < order.size();
             i += std::size_t(jobs)) {
          worker.enter_child(i, worker.bound_for_child(i));
        }
        part_nodes[std::size_t(w)] = worker.nodes();
      });
    }
    for (auto& t : threads) t.join();
    for (int w = 0; w < jobs; ++w) {
      parts[std::size_t(w)].merge_into(retention);
      nodes += part_nodes[std::size_t(w)];
    }
  }

  if (stats) stats->nodes_visited = nodes;
  return finish(m_k, always_include, retention);
}

SubsetMask prescreen(const PosteriorDraws& pd, int limit) {
  const int p = int(pd.p());
  if (limit < 1) throw InputError("prescreen: limit must be >= 1");
  if (limit > p) throw InputError("prescreen: limit exceeds p");
  if (limit == p) return SubsetMask::full(p);

  const Eigen::VectorXd xi_mean = pd.xi_matrix().colwise().mean();
  const Eigen::VectorXd gamma_mean = pd.gamma_matrix().colwise().mean();
  std::vector<std::pair<double, int>> scored;
  for (int j = 2; j <= p; ++j) {
    scored.emplace_back(std::abs(xi_mean[j - 1]) + std::abs(gamma_mean[j - 1]),
                        j);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<int> keep{1};
  for (int i = 0; i < limit - 1; ++i) {
    keep.push_back(scored[std::size_t(i)].second);
  }
  return SubsetMask(std::move(keep));
}

void save_candidates_csv(const std::string& path, const CandidateSet& cands) {
  csv::Table table;
  table.header = {"tau", "size", "rank", "rss", "indices"};
  int current_size = -1;
  int rank = 0;
  for (const auto& e : cands.subsets) {
    if (e.subset.size() != current_size) {
      current_size = e.subset.size();
      rank = 0;
    }
    ++rank;
    table.rows.push_back({csv::from_number(cands.tau),
                          std::to_string(e.subset.size()),
                          std::to_string(rank), csv::from_number(e.rss),
                          e.subset.to_string()});
  }
  csv::write_file(path, table);
}

}  // namespace quantsel
