#include "robmix/robmix.h"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace
{
  /** 0 success, 1 invalid input or unusable files, 2 numeric failure. */
  int exitCode(rm_status Status)
  {
    if (Status == RM_OK)
    {
      return 0;
    }
    std::cerr << "robmix: " << rm_last_error() << '\n';
    return Status == RM_ERROR_NUMERIC ? 2 : 1;
  }

  template <typename T> const T *optionalPointer(const std::optional<T> &Value)
  {
    return Value ? &*Value : nullptr;
  }

  const char *optionalText(const std::optional<std::string> &Value)
  {
    return Value ? Value->c_str() : nullptr;
  }
}

int main(int argc, char **argv)
{
  CLI::App App{"Self-tuning Gaussian mixture robust estimation: simulation, experiments and evaluation"};
  App.require_subcommand(1);
  App.set_version_flag("--version", std::string(rm_version()));

  std::optional<std::string> ConfigPath;
  std::optional<std::string> Out;
  std::optional<std::uint64_t> Seed;

  auto *Simulate = App.add_subcommand("simulate", "Generate a synthetic dataset from a scenario config");
  Simulate->add_option("--config", ConfigPath, "Scenario config (key=value); default: uwb-like preset");
  Simulate->add_option("--out", Out, "Dataset file to write")->required();
  Simulate->add_option("--seed", Seed, "Random seed (overrides the config)");

  auto *Run = App.add_subcommand("run", "Run the algorithms of an experiment config and write result tables");
  Run->add_option("--config", ConfigPath, "Experiment config (key=value)")->required();
  Run->add_option("--out", Out, "Output directory (overrides the config)");
  Run->add_option("--seed", Seed, "Scenario seed (overrides the config)");

  std::optional<std::string> Parameter;
  std::optional<std::string> Values;
  auto *Sweep = App.add_subcommand("sweep", "Sweep the initial sigma scale (or component count) of an experiment");
  Sweep->add_option("--config", ConfigPath, "Experiment config (key=value)")->required();
  Sweep->add_option("--out", Out, "Output directory (overrides the config)");
  Sweep->add_option("--seed", Seed, "Scenario seed (overrides the config)");
  Sweep->add_option("--parameter", Parameter, "init-sigma-scale or components");
  Sweep->add_option("--values", Values, "Comma separated sweep values");

  std::string Input;
  std::string Column = "0";
  std::size_t Components = 2;
  double Scale = 10.0;
  std::optional<double> BaseSigma;
  auto *FitGmm = App.add_subcommand("fit-gmm", "Fit a mixture to a CSV column of errors and print the model");
  FitGmm->add_option("input", Input, "CSV file with a header line")->required();
  FitGmm->add_option("--column", Column, "Column name or zero-based index")->capture_default_str();
  FitGmm->add_option("--components", Components, "Number of components")->capture_default_str();
  FitGmm->add_option("--scale", Scale, "Spread ratio of the initial components")->capture_default_str();
  FitGmm->add_option("--base-sigma", BaseSigma, "Initial standard deviation of the first component");
  FitGmm->add_option("--out", Out, "Write the model here instead of stdout");

  std::string Estimates;
  std::string Truth;
  std::optional<double> Tolerance;
  auto *Evaluate = App.add_subcommand("evaluate", "Absolute trajectory error of an estimate CSV");
  Evaluate->add_option("estimates", Estimates, "Estimate CSV with t,x,y columns")->required();
  Evaluate->add_option("truth", Truth, "Ground truth CSV (t,x,y) or dataset file")->required();
  Evaluate->add_option("--tolerance", Tolerance, "Timestamp match tolerance in seconds");
  Evaluate->add_option("--out", Out, "Write the report here instead of stdout");

  try
  {
    App.parse(argc, argv);
  }
  catch (const CLI::ParseError &Error)
  {
    return App.exit(Error) == 0 ? 0 : 1;
  }

  if (Simulate->parsed())
  {
    return exitCode(rm_simulate(optionalText(ConfigPath), Out->c_str(), optionalPointer(Seed)));
  }
  if (Run->parsed())
  {
    return exitCode(rm_experiment_run(ConfigPath->c_str(), optionalText(Out), optionalPointer(Seed)));
  }
  if (Sweep->parsed())
  {
    return exitCode(rm_experiment_sweep(ConfigPath->c_str(), optionalText(Out), optionalPointer(Seed),
                                        optionalText(Parameter), optionalText(Values)));
  }
  if (FitGmm->parsed())
  {
    return exitCode(
        rm_fit_gmm_csv(Input.c_str(), Column.c_str(), Components, Scale, optionalPointer(BaseSigma), optionalText(Out)));
  }
  return exitCode(rm_evaluate(Estimates.c_str(), Truth.c_str(), optionalPointer(Tolerance), optionalText(Out)));
}
