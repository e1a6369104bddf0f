// Command-line front end: simulate synthetic data, fit the location-log-scale
// model, run the quantile-specific decision analysis, and evaluate.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quantsel/errors.hpp"
#include "quantsel/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace quantsel;

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::vector<double> parse_taus(const std::string& csv_list) {
  std::vector<double> taus;
  std::stringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    taus.push_back(std::stod(item));
  }
  if (taus.empty()) throw InputError("empty --tau list");
  return taus;
}

std::vector<int> parse_indices(const std::string& csv_list) {
  std::vector<int> idx;
  std::stringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    idx.push_back(std::stoi(item));
  }
  return idx;
}

// JSON config file with flag override: values fill in any option the user
// did not pass on the command line; unknown keys are rejected.
void apply_config(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError("malformed config JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw InputError("unknown config key '" + key + "' for subcommand " +
                       cmd->get_name());
    }
    if (opt->count() > 0) continue;  // flags override the file
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else {
      text = value.dump();
    }
    opt->add_result(text);
    opt->run_callback();
  }
}

struct CommonArgs {
  std::string config;
};

void add_config_flag(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON config file; flags override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quantile regression with subset selection"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Write synthetic train/test/truth repetitions");
  pipeline::SimulateOptions sim;
  CommonArgs sim_common;
  sim_cmd->add_option("--n", sim.sim.n, "training rows");
  sim_cmd->add_option("--p", sim.sim.p, "columns including intercept");
  sim_cmd->add_option("--het-ratio", sim.sim.het_ratio,
                      "var(X xi*) / gamma*_het");
  sim_cmd->add_option("--rho", sim.sim.rho, "copula correlation base");
  sim_cmd->add_option("--reps", sim.reps, "independent repetitions");
  sim_cmd->add_option("--seed", sim.sim.seed, "master seed");
  sim_cmd->add_option("--n-test", sim.sim.n_test, "test rows");
  sim_cmd->add_option("--out", sim.out_dir, "output directory")->required();
  add_config_flag(sim_cmd, sim_common);

  // fit
  auto* fit_cmd =
      app.add_subcommand("fit", "Sample the location-log-scale posterior");
  pipeline::FitOptions fit;
  CommonArgs fit_common;
  fit_cmd->add_option("--train", fit.train_csv, "training CSV")->required();
  fit_cmd->add_option("--out", fit.out_dir, "output directory")->required();
  fit_cmd->add_option("--draws", fit.n_save, "saved draws");
  fit_cmd->add_option("--burn", fit.n_burn, "burn-in iterations");
  fit_cmd->add_option("--thin", fit.sampler.thin, "thinning factor");
  fit_cmd->add_option("--seed", fit.seed, "sampler seed");
  add_config_flag(fit_cmd, fit_common);

  // select
  auto* sel_cmd = app.add_subcommand(
      "select", "Subset search, acceptable-family filtration and summaries");
  pipeline::SelectOptions sel;
  CommonArgs sel_common;
  std::string sel_taus, sel_subset;
  sel_cmd->add_option("--train", sel.train_csv, "training CSV")->required();
  sel_cmd->add_option("--draws", sel.draws_csv, "draws CSV")->required();
  sel_cmd->add_option("--out", sel.out_dir, "output directory")->required();
  sel_cmd->add_option("--tau", sel_taus, "comma-separated quantiles");
  sel_cmd->add_option("--epsilon", sel.epsilon, "acceptance probability");
  sel_cmd->add_option("--mk", sel.m_k, "subsets retained per size");
  sel_cmd->add_option("--prescreen-limit", sel.prescreen_limit,
                      "screen to this many columns before search");
  sel_cmd->add_option("--level", sel.level, "credible interval level");
  sel_cmd->add_option("--subset", sel_subset,
                      "direct-action mode: comma-separated 1-based indices");
  sel_cmd->add_option("--jobs", sel.jobs, "parallel workers over quantiles");
  add_config_flag(sel_cmd, sel_common);

  // evaluate
  auto* ev_cmd = app.add_subcommand(
      "evaluate", "Out-of-sample metrics for fitted repetitions");
  pipeline::EvaluateOptions ev;
  CommonArgs ev_common;
  std::string ev_taus;
  ev_cmd->add_option("--rep", ev.rep_dirs, "repetition directories")
      ->required();
  ev_cmd->add_option("--out", ev.out_csv, "metrics CSV path")->required();
  ev_cmd->add_option("--aggregate", ev.aggregate_csv,
                     "aggregate CSV path (optional)");
  ev_cmd->add_option("--tau", ev_taus, "comma-separated quantiles");
  ev_cmd->add_option("--jobs", ev.jobs, "parallel workers over repetitions");
  add_config_flag(ev_cmd, ev_common);

  // pipeline
  auto* pipe_cmd = app.add_subcommand(
      "pipeline", "simulate, fit, select and evaluate in one pass");
  pipeline::PipelineOptions pipe;
  CommonArgs pipe_common;
  std::string pipe_taus;
  pipe_cmd->add_option("--n", pipe.simulate.sim.n, "training rows");
  pipe_cmd->add_option("--p", pipe.simulate.sim.p,
                       "columns including intercept");
  pipe_cmd->add_option("--het-ratio", pipe.simulate.sim.het_ratio,
                       "var(X xi*) / gamma*_het");
  pipe_cmd->add_option("--rho", pipe.simulate.sim.rho,
                       "copula correlation base");
  pipe_cmd->add_option("--reps", pipe.simulate.reps, "repetitions");
  pipe_cmd->add_option("--seed", pipe.simulate.sim.seed, "master seed");
  pipe_cmd->add_option("--n-test", pipe.simulate.sim.n_test, "test rows");
  pipe_cmd->add_option("--out", pipe.simulate.out_dir, "output directory")
      ->required();
  pipe_cmd->add_option("--draws", pipe.n_save, "saved draws");
  pipe_cmd->add_option("--burn", pipe.n_burn, "burn-in iterations");
  pipe_cmd->add_option("--thin", pipe.sampler.thin, "thinning factor");
  pipe_cmd->add_option("--tau", pipe_taus, "comma-separated quantiles");
  pipe_cmd->add_option("--epsilon", pipe.epsilon, "acceptance probability");
  pipe_cmd->add_option("--mk", pipe.m_k, "subsets retained per size");
  pipe_cmd->add_option("--prescreen-limit", pipe.prescreen_limit,
                       "screen to this many columns before search");
  pipe_cmd->add_option("--level", pipe.level, "credible interval level");
  pipe_cmd->add_option("--jobs", pipe.jobs, "parallel workers");
  add_config_flag(pipe_cmd, pipe_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim_cmd) {
      if (!sim_common.config.empty()) apply_config(sim_cmd, sim_common.config);
      pipeline::run_simulate(sim);
    } else if (*fit_cmd) {
      if (!fit_common.config.empty()) apply_config(fit_cmd, fit_common.config);
      pipeline::run_fit(fit);
    } else if (*sel_cmd) {
      if (!sel_common.config.empty()) apply_config(sel_cmd, sel_common.config);
      if (!sel_taus.empty()) sel.taus = parse_taus(sel_taus);
      if (!sel_subset.empty()) sel.subset = parse_indices(sel_subset);
      pipeline::run_select(sel);
    } else if (*ev_cmd) {
      if (!ev_common.config.empty()) apply_config(ev_cmd, ev_common.config);
      if (!ev_taus.empty()) ev.taus = parse_taus(ev_taus);
      pipeline::run_evaluate(ev);
    } else if (*pipe_cmd) {
      if (!pipe_common.config.empty()) {
        apply_config(pipe_cmd, pipe_common.config);
      }
      if (!pipe_taus.empty()) pipe.taus = parse_taus(pipe_taus);
      pipeline::run_pipeline(pipe);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}
