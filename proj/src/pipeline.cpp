#include "quantsel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "quantsel/acceptance.hpp"
#include "quantsel/csv.hpp"
#include "quantsel/errors.hpp"
#include "quantsel/parallel.hpp"

namespace quantsel::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string tau_tag(double tau) { return csv::from_number(tau); }

std::string rep_dir_name(int rep) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "rep_%03d", rep);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("write failed for " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

csv::Table data_table(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  // Covariate columns are named by their 1-based design index, so x2 is the
  // first column after the intercept.
  csv::Table table;
  table.header.push_back("y");
  for (Eigen::Index j = 1; j < X.cols(); ++j) {
    table.header.push_back("x" + std::to_string(j + 1));
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    std::vector<std::string> row;
    row.reserve(std::size_t(X.cols()));
    row.push_back(csv::from_number(y[i]));
    for (Eigen::Index j = 1; j < X.cols(); ++j) {
      row.push_back(csv::from_number(X(i, j)));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Raw rows of a simulate-written file: response plus covariates with the
// intercept column restored in front.
void read_data_table(const std::string& path, Eigen::VectorXd& y,
                     Eigen::MatrixXd& X) {
  const csv::Table table = csv::read_file(path);
  const int yc = table.column("y");
  if (yc < 0) throw InputError("missing response column in " + path);
  const Eigen::Index n = Eigen::Index(table.rows.size());
  const Eigen::Index p = Eigen::Index(table.header.size());  // swaps y for intercept
  y.resize(n);
  X.resize(n, p);
  X.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[std::size_t(i)];
    Eigen::Index out = 1;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double v = csv::to_number(row[j]);
      if (int(j) == yc) {
        y[i] = v;
      } else {
        X(i, out++) = v;
      }
    }
  }
}

json coefficient_records(const std::vector<std::string>& names,
                         const Eigen::VectorXd& estimate,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  json arr = json::array();
  for (Eigen::Index j = 0; j < estimate.size(); ++j) {
    arr.push_back({{"index", j + 1},
                   {"name", names[std::size_t(j)]},
                   {"estimate", estimate[j]},
                   {"lo", lo[j]},
                   {"hi", hi[j]}});
  }
  return arr;
}

struct CoefficientSummary {
  Eigen::VectorXd estimate;  // raw scale, length p
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Posterior action for one subset, de-standardized draw by draw before the
// interval quantiles are taken.
CoefficientSummary summarize_subset(const Dataset& train,
                                    const QuantileDraws& qd,
                                    const SubsetMask& subset, double level,
                                    SubsetSolverCache& solvers) {
  const Eigen::Index p = train.p();
  PosteriorAction pa;
  pa.tau = qd.tau;
  pa.subset = subset;
  pa.draws = solvers.get(subset)->solve_columns(qd.q.transpose()).transpose();
  const Eigen::Index m_draws = pa.draws.rows();
  Eigen::MatrixXd raw(m_draws, p);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
  for (Eigen::Index m = 0; m < m_draws; ++m) {
    full.setZero();
    for (int i = 0; i < subset.size(); ++i) {
      full[subset.indices[std::size_t(i)] - 1] = pa.draws(m, i);
    }
    raw.row(m) = train.destandardize_coefficients(full).transpose();
  }
  CoefficientSummary out;
  out.estimate = raw.colwise().mean();
  out.lo.resize(p);
  out.hi.resize(p);
  const double alpha = 0.5 * (1.0 - level);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col(raw.col(j).data(), raw.col(j).data() + m_draws);
    out.lo[j] = type7_quantile(col, alpha);
    out.hi[j] = type7_quantile(std::move(col), 1.0 - alpha);
  }
  return out;
}

void append_coefficient_rows(csv::Table& table, double tau,
                             const std::string& kind,
                             const std::string& subset_id,
                             const std::vector<std::string>& names,
                             const CoefficientSummary& s) {
  for (Eigen::Index j = 0; j < s.estimate.size(); ++j) {
    table.rows.push_back({csv::from_number(tau), kind, subset_id,
                          std::to_string(j + 1), names[std::size_t(j)],
                          csv::from_number(s.estimate[j]),
                          csv::from_number(s.lo[j]),
                          csv::from_number(s.hi[j])});
  }
}

}  // namespace

void save_truth_json(const std::string& path, const GroundTruth& truth,
                     const SimConfig& cfg, int rep) {
  json j;
  j["n"] = cfg.n;
  j["n_test"] = cfg.n_test;
  j["p"] = cfg.p;
  j["rho"] = cfg.rho;
  j["het_ratio"] = truth.het_ratio;
  j["seed"] = cfg.seed;
  j["rep"] = rep;
  j["h"] = truth.h;
  j["het"] = truth.het;
  j["hom"] = truth.hom;
  j["xi_star"] = std::vector<double>(truth.xi_star.begin(), truth.xi_star.end());
  j["gamma_star"] =
      std::vector<double>(truth.gamma_star.begin(), truth.gamma_star.end());
  write_text(path, j.dump(1) + "\n");
}

GroundTruth load_truth_json(const std::string& path) {
  const json j = read_json(path);
  GroundTruth truth;
  const auto xi = j.at("xi_star").get<std::vector<double>>();
  const auto gamma = j.at("gamma_star").get<std::vector<double>>();
  truth.xi_star = Eigen::Map<const Eigen::VectorXd>(xi.data(),
                                                    Eigen::Index(xi.size()));
  truth.gamma_star =
      Eigen::Map<const Eigen::VectorXd>(gamma.data(), Eigen::Index(gamma.size()));
  truth.hom = j.at("hom").get<std::vector<int>>();
  truth.het = j.at("het").get<int>();
  truth.h = j.at("h").get<double>();
  truth.het_ratio = j.at("het_ratio").get<double>();
  return truth;
}

std::vector<std::string> run_simulate(const SimulateOptions& opt) {
  if (opt.reps < 1) throw InputError("simulate: reps must be >= 1");
  if (opt.sim.p < 6) throw InputError("simulate: p must be >= 6");
  if (opt.sim.n <= opt.sim.p) throw InputError("simulate: n must exceed p");
  if (opt.sim.n_test < 1) throw InputError("simulate: n_test must be >= 1");
  fs::create_directories(opt.out_dir);

  std::vector<std::string> dirs;
  for (int rep = 1; rep <= opt.reps; ++rep) {
    const fs::path dir = fs::path(opt.out_dir) / rep_dir_name(rep);
    fs::create_directories(dir);
    const std::uint64_t r = std::uint64_t(rep);

    const Eigen::MatrixXd x_train =
        gen_covariates(opt.sim.n, opt.sim.p, opt.sim.rho, opt.sim.seed,
                       substream(Stream::covariates, r));
    const GroundTruth truth = make_truth(x_train, opt.sim.het_ratio);
    const Eigen::VectorXd y_train = gen_response(
        x_train, truth, opt.sim.seed, substream(Stream::noise, r));
    const Eigen::MatrixXd x_test =
        gen_covariates(opt.sim.n_test, opt.sim.p, opt.sim.rho, opt.sim.seed,
                       substream(Stream::test_covariates, r));
    const Eigen::VectorXd y_test = gen_response(
        x_test, truth, opt.sim.seed, substream(Stream::test_noise, r));

    csv::write_file((dir / "train.csv").string(), data_table(y_train, x_train));
    csv::write_file((dir / "test.csv").string(), data_table(y_test, x_test));
    save_truth_json((dir / "truth.json").string(), truth, opt.sim, rep);
    dirs.push_back(dir.string());
  }
  return dirs;
}

void run_fit(const FitOptions& opt) {
  const Dataset train = load_csv(opt.train_csv, "y", true);
  fs::create_directories(opt.out_dir);
  const PosteriorDraws pd =
      sample_posterior(train, opt.n_save, opt.n_burn, opt.seed, opt.sampler);
  save_draws_csv((fs::path(opt.out_dir) / "draws.csv").string(), pd);

  json diag;
  diag["acceptance_rates"] = pd.acceptance_rates;
  diag["n_save"] = opt.n_save;
  diag["n_burn"] = opt.n_burn;
  diag["thin"] = opt.sampler.thin;
  diag["seed"] = opt.seed;
  diag["n"] = train.n();
  diag["p"] = train.p();
  write_text((fs::path(opt.out_dir) / "fit.json").string(),
             diag.dump(1) + "\n");
}

void run_select(const SelectOptions& opt) {
  const Dataset train = load_csv(opt.train_csv, "y", true);
  const PosteriorDraws pd = load_draws_csv(opt.draws_csv);
  if (pd.p() != train.p()) {
    throw InputError("select: draws and design disagree on p");
  }
  if (opt.taus.empty()) throw InputError("select: no quantiles requested");
  for (double tau : opt.taus) {
    if (!(tau > 0.0 && tau < 1.0)) {
      throw InputError("select: tau must lie in (0,1)");
    }
  }
  fs::create_directories(opt.out_dir);
  const int p = int(train.p());
  const ConditionalQuantiles cq(pd, train.X);
  SubsetSolverCache solvers(train.X);  // factors shared across quantiles

  // Direct-action mode: coefficient table for the requested subset only.
  if (opt.subset) {
    SubsetMask subset(*opt.subset);
    csv::Table coef;
    coef.header = {"tau",      "subset", "subset_id", "index",
                   "name",     "estimate", "lo",      "hi"};
    for (double tau : opt.taus) {
      const QuantileDraws qd = cq.at(tau);
      append_coefficient_rows(
          coef, tau, "direct", subset.to_string(), train.column_names,
          summarize_subset(train, qd, subset, opt.level, solvers));
    }
    csv::write_file((fs::path(opt.out_dir) / "coefficients.csv").string(),
                    coef);
    return;
  }

  const SubsetMask screened = p > opt.prescreen_limit
                                  ? prescreen(pd, opt.prescreen_limit)
                                  : SubsetMask::full(p);

  struct TauOutput {
    json report;
    CoefficientSummary small_summary;
    std::string small_id;
    bool has_small = false;
    CoefficientSummary full_summary;
  };
  std::vector<TauOutput> outputs(opt.taus.size());

  parallel_for(opt.taus.size(), opt.jobs, [&](std::size_t t) {
    const double tau = opt.taus[t];
    const QuantileDraws qd = cq.at(tau);
    const Eigen::VectorXd qhat = fitted_quantiles(qd);

    CandidateSet cands;
    if (screened.size() == p) {
      cands = branch_and_bound(qhat, train.X, opt.m_k, SubsetMask({1}));
    } else {
      // Search on the screened submatrix, then map indices back.
      Eigen::MatrixXd xs(train.n(), screened.size());
      for (int i = 0; i < screened.size(); ++i) {
        xs.col(i) = train.X.col(screened.indices[std::size_t(i)] - 1);
      }
      cands = branch_and_bound(qhat, xs, opt.m_k, SubsetMask({1}));
      for (auto& entry : cands.subsets) {
        std::vector<int> mapped;
        mapped.reserve(entry.subset.indices.size());
        for (int local : entry.subset.indices) {
          mapped.push_back(screened.indices[std::size_t(local - 1)]);
        }
        entry.subset = SubsetMask(std::move(mapped));
      }
      cands.always_include = SubsetMask({1});
    }
    cands.tau = tau;

    const AcceptableFamily fam =
        filter_acceptable(cands, qd, train.X, opt.epsilon, &solvers);

    json report;
    report["tau"] = tau;
    report["epsilon"] = opt.epsilon;
    report["level"] = opt.level;
    report["n_candidates"] = cands.subsets.size();
    report["n_acceptable"] = fam.members.size();
    json members = json::array();
    for (const auto& m : fam.members) {
      members.push_back({{"indices", m.subset.indices},
                         {"prob_d_le_0", m.prob_d_le_0},
                         {"expected_loss", m.expected_loss}});
    }
    report["members"] = members;

    TauOutput& out = outputs[t];
    out.full_summary =
        summarize_subset(train, qd, SubsetMask::full(p), opt.level, solvers);
    report["coefficients"]["s_full"] =
        coefficient_records(train.column_names, out.full_summary.estimate,
                            out.full_summary.lo, out.full_summary.hi);

    if (fam.s_small) {
      std::vector<std::string> names;
      for (int j : fam.s_small->indices) {
        names.push_back(train.column_names[std::size_t(j - 1)]);
      }
      report["s_small"] = {{"indices", fam.s_small->indices},
                           {"names", names}};
      const Eigen::VectorXd vi = variable_importance(fam, p);
      report["variable_importance"] =
          std::vector<double>(vi.begin(), vi.end());
      out.small_summary =
          summarize_subset(train, qd, *fam.s_small, opt.level, solvers);
      out.small_id = fam.s_small->to_string();
      out.has_small = true;
      report["coefficients"]["s_small"] =
          coefficient_records(train.column_names, out.small_summary.estimate,
                              out.small_summary.lo, out.small_summary.hi);
    } else {
      report["s_small"] = nullptr;
      report["empty_reason"] = *fam.empty_reason;
      report["coefficients"]["s_small"] = nullptr;
    }
    out.report = std::move(report);
  });

  csv::Table coef;
  coef.header = {"tau",      "subset", "subset_id", "index",
                 "name",     "estimate", "lo",      "hi"};
  for (std::size_t t = 0; t < opt.taus.size(); ++t) {
    const double tau = opt.taus[t];
    write_text((fs::path(opt.out_dir) / ("select_tau_" + tau_tag(tau) + ".json"))
                   .string(),
               outputs[t].report.dump(1) + "\n");
    if (outputs[t].has_small) {
      append_coefficient_rows(coef, tau, "s_small",
                              outputs[t].small_id, train.column_names,
                              outputs[t].small_summary);
    }
    append_coefficient_rows(coef, tau, "s_full",
                            SubsetMask::full(p).to_string(),
                            train.column_names, outputs[t].full_summary);
  }
  csv::write_file((fs::path(opt.out_dir) / "coefficients.csv").string(), coef);
}

namespace {

struct MetricRow {
  std::string rep;
  double tau;
  std::string method;
  std::string metric;
  double value;
};

Eigen::VectorXd json_coefficients(const json& records, const char* field) {
  Eigen::VectorXd out(records.size());
  for (std::size_t j = 0; j < records.size(); ++j) {
    out[Eigen::Index(j)] = records[j].at(field).get<double>();
  }
  return out;
}

void evaluate_rep(const std::string& dir, const std::vector<double>& taus,
                  std::vector<MetricRow>& rows) {
  const std::string rep = fs::path(dir).filename().string();
  const GroundTruth truth =
      load_truth_json((fs::path(dir) / "truth.json").string());
  const Dataset train = load_csv((fs::path(dir) / "train.csv").string(), "y");
  const PosteriorDraws pd =
      load_draws_csv((fs::path(dir) / "draws.csv").string());

  Eigen::VectorXd y_test;
  Eigen::MatrixXd x_test;  // raw, intercept restored
  read_data_table((fs::path(dir) / "test.csv").string(), y_test, x_test);
  const Eigen::Index p = x_test.cols();

  const ConditionalQuantiles cq_test(
      pd, train.standardize_new(x_test.rightCols(p - 1)));

  std::vector<double> sorted_taus = taus;
  std::sort(sorted_taus.begin(), sorted_taus.end());

  std::map<std::string, std::map<double, Eigen::VectorXd>> predictions;
  for (double tau : sorted_taus) {
    const json report = read_json(
        (fs::path(dir) / ("select_tau_" + tau_tag(tau) + ".json")).string());

    auto add = [&](const std::string& method, const Eigen::VectorXd& pred) {
      const MetricReport mr = metrics(pred, truth, y_test, x_test, tau);
      rows.push_back({rep, tau, method, "mse", mr.mse});
      rows.push_back({rep, tau, method, "check", mr.check});
      rows.push_back({rep, tau, method, "calib", mr.calib});
      predictions[method][tau] = pred;
    };

    add("q_hat", fitted_quantiles(cq_test.at(tau)));

    const json& full_coef = report.at("coefficients").at("s_full");
    const Eigen::VectorXd full_est = json_coefficients(full_coef, "estimate");
    add("s_full", x_test * full_est);
    {
      const Eigen::VectorXd lo = json_coefficients(full_coef, "lo");
      const Eigen::VectorXd hi = json_coefficients(full_coef, "hi");
      const Eigen::VectorXd beta = truth.beta_star(tau);
      double covered = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (lo[j] <= beta[j] && beta[j] <= hi[j]) covered += 1.0;
      }
      rows.push_back({rep, tau, "s_full", "coverage", covered / double(p)});
      rows.push_back({rep, tau, "s_full", "width", (hi - lo).mean()});
    }

    if (!report.at("s_small").is_null()) {
      const json& small_coef = report.at("coefficients").at("s_small");
      const Eigen::VectorXd small_est =
          json_coefficients(small_coef, "estimate");
      add("s_small", x_test * small_est);
      const Eigen::VectorXd lo = json_coefficients(small_coef, "lo");
      const Eigen::VectorXd hi = json_coefficients(small_coef, "hi");
      const Eigen::VectorXd beta = truth.beta_star(tau);
      double covered = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (lo[j] <= beta[j] && beta[j] <= hi[j]) covered += 1.0;
      }
      rows.push_back({rep, tau, "s_small", "coverage", covered / double(p)});
      rows.push_back({rep, tau, "s_small", "width", (hi - lo).mean()});

      const SubsetMask selected(
          report.at("s_small").at("indices").get<std::vector<int>>());
      const auto [tpr, tnr] = selection_metrics(selected, truth, tau);
      rows.push_back({rep, tau, "s_small", "tpr", tpr});
      rows.push_back({rep, tau, "s_small", "tnr", tnr});
    }
  }

  // Non-crossing between adjacent quantiles, attributed to the upper one.
  for (auto& [method, by_tau] : predictions) {
    for (std::size_t i = 1; i < sorted_taus.size(); ++i) {
      const auto lo = by_tau.find(sorted_taus[i - 1]);
      const auto hi = by_tau.find(sorted_taus[i]);
      if (lo == by_tau.end() || hi == by_tau.end()) continue;
      rows.push_back({rep, sorted_taus[i], method, "ncr",
                      non_crossing_rate(lo->second, hi->second)});
    }
  }
}

}  // namespace

void run_evaluate(const EvaluateOptions& opt) {
  if (opt.rep_dirs.empty()) throw InputError("evaluate: no repetitions given");
  std::vector<std::vector<MetricRow>> per_rep(opt.rep_dirs.size());
  parallel_for(opt.rep_dirs.size(), opt.jobs, [&](std::size_t i) {
    evaluate_rep(opt.rep_dirs[i], opt.taus, per_rep[i]);
  });

  csv::Table table;
  table.header = {"rep", "tau", "method", "metric", "value"};
  for (const auto& rows : per_rep) {
    for (const auto& r : rows) {
      table.rows.push_back({r.rep, csv::from_number(r.tau), r.method, r.metric,
                            csv::from_number(r.value)});
    }
  }
  csv::write_file(opt.out_csv, table);

  if (!opt.aggregate_csv.empty()) {
    std::map<std::tuple<double, std::string, std::string>,
             std::vector<double>>
        cells;
    for (const auto& rows : per_rep) {
      for (const auto& r : rows) {
        cells[{r.tau, r.method, r.metric}].push_back(r.value);
      }
    }
    csv::Table agg;
    agg.header = {"tau", "method", "metric", "mean", "sd", "n_reps"};
    for (const auto& [key, values] : cells) {
      const double n = double(values.size());
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= n;
      double sd = 0.0;
      if (values.size() > 1) {
        for (double v : values) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / (n - 1.0));
      }
      agg.rows.push_back({csv::from_number(std::get<0>(key)),
                          std::get<1>(key), std::get<2>(key),
                          csv::from_number(mean), csv::from_number(sd),
                          std::to_string(values.size())});
    }
    csv::write_file(opt.aggregate_csv, agg);
  }
}

void run_pipeline(const PipelineOptions& opt) {
  const std::vector<std::string> dirs = run_simulate(opt.simulate);
  parallel_for(dirs.size(), opt.jobs, [&](std::size_t i) {
    const std::string& dir = dirs[i];
    FitOptions fit;
    fit.train_csv = (fs::path(dir) / "train.csv").string();
    fit.out_dir = dir;
    fit.n_save = opt.n_save;
    fit.n_burn = opt.n_burn;
    fit.sampler = opt.sampler;
    fit.seed = opt.simulate.sim.seed + std::uint64_t(i) + 1;
    run_fit(fit);

    SelectOptions sel;
    sel.train_csv = fit.train_csv;
    sel.draws_csv = (fs::path(dir) / "draws.csv").string();
    sel.out_dir = dir;
    sel.taus = opt.taus;
    sel.epsilon = opt.epsilon;
    sel.m_k = opt.m_k;
    sel.prescreen_limit = opt.prescreen_limit;
    sel.level = opt.level;
    run_select(sel);
  });

  EvaluateOptions ev;
  ev.rep_dirs = dirs;
  ev.taus = opt.taus;
  ev.jobs = opt.jobs;
  ev.out_csv = (fs::path(opt.simulate.out_dir) / "metrics.csv").string();
  ev.aggregate_csv =
      (fs::path(opt.simulate.out_dir) / "metrics_aggregate.csv").string();
  run_evaluate(ev);
}

}  // namespace quantsel::pipeline
