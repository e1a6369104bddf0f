#ifndef QUANTSEL_PIPELINE_HPP
#define QUANTSEL_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "quantsel/sampler.hpp"
#include "quantsel/simulation.hpp"

namespace quantsel::pipeline {

inline const std::vector<double> kDefaultTaus = {0.01, 0.05, 0.25, 0.5,
                                                 0.75, 0.95, 0.99};

struct SimulateOptions {
  SimConfig sim;
  int reps = 1;
  std::string out_dir;
};

struct FitOptions {
  std::string train_csv;
  std::string out_dir;
  Eigen::Index n_save = 2500;
  Eigen::Index n_burn = 2500;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
};

struct SelectOptions {
  std::string train_csv;
  std::string draws_csv;
  std::string out_dir;
  std::vector<double> taus = kDefaultTaus;
  double epsilon = 0.05;
  int m_k = 50;
  int prescreen_limit = 35;
  double level = 0.95;
  std::optional<std::vector<int>> subset;  // direct-action mode, 1-based
  int jobs = 1;
};

struct EvaluateOptions {
  std::vector<std::string> rep_dirs;
  std::string out_csv;
  std::string aggregate_csv;  // empty to skip
  std::vector<double> taus = kDefaultTaus;
  int jobs = 1;
};

struct PipelineOptions {
  SimulateOptions simulate;
  Eigen::Index n_save = 2500;
  Eigen::Index n_burn = 2500;
  SamplerConfig sampler;
  std::vector<double> taus = kDefaultTaus;
  double epsilon = 0.05;
  int m_k = 50;
  int prescreen_limit = 35;
  double level = 0.95;
  int jobs = 1;
};

// Writes rep_### directories with train.csv, test.csv and truth.json.
std::vector<std::string> run_simulate(const SimulateOptions& opt);

// Fits the location-log-scale model and writes draws.csv + fit.json.
void run_fit(const FitOptions& opt);

// Per-tau subset search, filtration and summaries: select_tau_*.json plus a
// combined coefficients.csv. Succeeds on an empty acceptable family.
void run_select(const SelectOptions& opt);

// Long-format metrics.csv, one row per (rep, tau, method, metric), plus the
// mean/sd aggregate when requested.
void run_evaluate(const EvaluateOptions& opt);

// simulate -> fit -> select -> evaluate across repetitions.
void run_pipeline(const PipelineOptions& opt);

// Truth file round trip used by simulate/evaluate.
void save_truth_json(const std::string& path, const GroundTruth& truth,
                     const SimConfig& cfg, int rep);
GroundTruth load_truth_json(const std::string& path);

}  // namespace quantsel::pipeline

#endif  // QUANTSEL_PIPELINE_HPP
