#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mhgan/experiment.hpp"
#include "mhgan/metrics.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::string config_path;
  std::optional<std::size_t> k, n_samples;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> selectors;
  std::optional<double> gamma;
  std::optional<std::size_t> n_pilot;
  std::optional<std::string> calibrator, output_dir, experiment, discriminator;
  bool traces = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON experiment config");
  cmd->add_option("--experiment", o.experiment, "univariate4, grid25 or calibration_study");
  cmd->add_option("--k", o.k, "MH chain length");
  cmd->add_option("--n-samples", o.n_samples, "samples per selector");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--selector", o.selectors, "none, mh or drs (repeatable)");
  cmd->add_option("--gamma", o.gamma, "DRS acceptance shift");
  cmd->add_option("--n-pilot", o.n_pilot, "DRS pilot draws");
  cmd->add_option("--calibrator", o.calibrator, "identity, logistic, isotonic or beta");
  cmd->add_option("--discriminator", o.discriminator, "oracle, warped(a,b) or mlp");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
}

mhgan::ExperimentConfig load(const Overrides& o) {
  json j = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw mhgan::ConfigError("--config", "cannot open '" + o.config_path + "'");
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw mhgan::ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
  }
  if (o.experiment) j["experiment"] = *o.experiment;
  if (o.k) j["k"] = *o.k;
  if (o.n_samples) j["n_samples"] = *o.n_samples;
  if (o.seed) j["seed"] = *o.seed;
  if (!o.selectors.empty()) j["selectors"] = o.selectors;
  if (o.gamma) j["gamma"] = *o.gamma;
  if (o.n_pilot) j["n_pilot"] = *o.n_pilot;
  if (o.calibrator) j["calibrator"] = *o.calibrator;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.traces) j["write_traces"] = true;
  if (o.discriminator) {
    if (j.contains("discriminator") && j["discriminator"].is_object()) j["discriminator"]["type"] = *o.discriminator;
    else j["discriminator"] = *o.discriminator;
  }
  return mhgan::ExperimentConfig::from_json(j);
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    const auto item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw mhgan::ConfigError("--k-values", "'" + item + "' is not a non-negative integer");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

json nullable(const std::optional<double>& v) {
  return v && !std::isnan(*v) ? json(*v) : json(nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminator-driven sample selection for imperfect generators"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, cal_o, diag_o;
  auto* run = app.add_subcommand("run", "run an experiment and write CSV outputs");
  add_common(run, run_o);
  run->add_flag("--traces", run_o.traces, "write traces.csv");

  auto* sweep = app.add_subcommand("sweep-k", "metrics for a list of chain lengths");
  add_common(sweep, sweep_o);
  std::string k_values = "1,5,25,125,640";
  sweep->add_option("--k-values", k_values, "comma-separated ascending chain lengths");

  auto* cal = app.add_subcommand("calibrate", "fit the calibrator and print it as JSON");
  add_common(cal, cal_o);

  auto* diag = app.add_subcommand("diagnose", "print calibration Z values and AUC as JSON");
  add_common(diag, diag_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      const auto m = mhgan::run_experiment(load(run_o));
      std::cout << mhgan::metrics_csv_header();
      for (const auto& r : m.metrics) std::cout << mhgan::metrics_csv_row(r);
    } else if (*sweep) {
      const auto cfg = load(sweep_o);
      const auto rows = mhgan::sweep_k(cfg, parse_k_list(k_values));
      std::cout << mhgan::metrics_csv_header();
      for (const auto& r : rows) std::cout << mhgan::metrics_csv_row(r);
    } else if (*cal) {
      const auto p = mhgan::build_pipeline(load(cal_o));
      std::cout << json{{"calibrator", p.calibrator.to_json()},
                        {"z_raw", nullable(p.z_raw)},
                        {"z_calibrated", p.z_calibrated}}
                       .dump(2)
                << '\n';
    } else if (*diag) {
      const auto cfg = load(diag_o);
      const auto p = mhgan::build_pipeline(cfg);
      json out{{"z_raw", nullable(p.z_raw)},
               {"z_calibrated", p.z_calibrated},
               {"calibrated", std::abs(p.z_calibrated) < 3.35},
               {"auc", p.auc}};
      if (p.train_loss) out["train_loss"] = *p.train_loss;
      std::cout << out.dump(2) << '\n';
    }
  } catch (const mhgan::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
