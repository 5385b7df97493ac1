#include "robmix/robmix.h"

#include "robmix/error.hpp"
#include "robmix/experiment.hpp"
#include "robmix/robust.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

struct rm_mixture
{
  robmix::GaussianMixture Mixture;
};

struct rm_dataset
{
  robmix::Dataset Data;
};

namespace
{
  thread_local std::string LastError;

  template <typename Body> rm_status guarded(Body &&Run)
  {
    try
    {
      LastError.clear();
      Run();
      return RM_OK;
    }
    catch (const robmix::ValidationError &Error)
    {
      LastError = Error.what();
      return RM_ERROR_VALIDATION;
    }
    catch (const robmix::NumericError &Error)
    {
      LastError = Error.what();
      return RM_ERROR_NUMERIC;
    }
    catch (const robmix::IoError &Error)
    {
      LastError = Error.what();
      return RM_ERROR_IO;
    }
    catch (const std::exception &Error)
    {
      LastError = Error.what();
      return RM_ERROR_INTERNAL;
    }
    catch (...)
    {
      LastError = "unknown failure";
      return RM_ERROR_INTERNAL;
    }
  }

  void require(bool Condition, const char *Message)
  {
    if (!Condition)
    {
      throw robmix::ValidationError(Message);
    }
  }

  robmix::Matrix samples(const double *Errors, size_t Count, size_t Dimension)
  {
    require(Errors != nullptr || Count == 0, "error samples must not be null");
    robmix::Matrix Result(static_cast<Eigen::Index>(Count), static_cast<Eigen::Index>(Dimension));
    for (size_t i = 0; i < Count; ++i)
    {
      for (size_t k = 0; k < Dimension; ++k)
      {
        Result(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = Errors[i * Dimension + k];
      }
    }
    return Result;
  }

  robmix::KeyValueConfig loadConfig(const char *Path, const uint64_t *Seed, const char *Out)
  {
    require(Path != nullptr, "config path must not be null");
    auto Config = robmix::KeyValueConfig::load(Path);
    if (Seed)
    {
      Config.set("seed", std::to_string(*Seed));
    }
    if (Out)
    {
      Config.set("out", Out);
    }
    return Config;
  }

  void emit(const std::string &Text, const char *OutPath)
  {
    if (!OutPath)
    {
      std::cout << Text << std::flush;
      return;
    }
    std::ofstream Out(OutPath, std::ios::binary);
    if (!(Out << Text))
    {
      throw robmix::IoError(std::string("cannot write '") + OutPath + "'");
    }
  }
}

extern "C"
{
  const char *rm_last_error(void)
  {
    return LastError.c_str();
  }

  const char *rm_version(void)
  {
    return "0.1.0";
  }

  rm_status rm_mixture_create_default(const double *base_sqrt_info, size_t dimension, size_t components, double scale,
                                      rm_mixture **out)
  {
    return guarded(
        [&]
        {
          require(base_sqrt_info != nullptr && out != nullptr, "arguments must not be null");
          require(dimension > 0, "dimension must be positive");
          robmix::Matrix Base(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(dimension));
          for (size_t r = 0; r < dimension; ++r)
          {
            for (size_t c = 0; c < dimension; ++c)
            {
              Base(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = base_sqrt_info[r * dimension + c];
            }
          }
          *out = new rm_mixture{robmix::defaultInit(Base, components, scale)};
        });
  }

  rm_status rm_mixture_parse(const char *text, rm_mixture **out)
  {
    return guarded(
        [&]
        {
          require(text != nullptr && out != nullptr, "arguments must not be null");
          *out = new rm_mixture{robmix::GaussianMixture::fromString(text)};
        });
  }

  void rm_mixture_destroy(rm_mixture *mixture)
  {
    delete mixture;
  }

  size_t rm_mixture_components(const rm_mixture *mixture)
  {
    return mixture ? mixture->Mixture.size() : 0;
  }

  size_t rm_mixture_dimension(const rm_mixture *mixture)
  {
    return mixture ? mixture->Mixture.dimension() : 0;
  }

  rm_status rm_mixture_component(const rm_mixture *mixture, size_t index, double *weight, double *mean,
                                 double *sqrt_info)
  {
    return guarded(
        [&]
        {
          require(mixture != nullptr, "mixture must not be null");
          require(index < mixture->Mixture.size(), "component index out of range");
          const auto &Component = mixture->Mixture.component(index);
          const auto D = Component.Mean.size();
          if (weight)
          {
            *weight = Component.Weight;
          }
          for (Eigen::Index r = 0; r < D && mean; ++r)
          {
            mean[r] = Component.Mean(r);
          }
          for (Eigen::Index r = 0; r < D && sqrt_info; ++r)
          {
            for (Eigen::Index c = 0; c < D; ++c)
            {
              sqrt_info[r * D + c] = Component.SqrtInfo(r, c);
            }
          }
        });
  }

  rm_status rm_mixture_format(const rm_mixture *mixture, char *buffer, size_t capacity, size_t *required)
  {
    return guarded(
        [&]
        {
          require(mixture != nullptr, "mixture must not be null");
          const std::string Text = mixture->Mixture.toString();
          if (required)
          {
            *required = Text.size() + 1;
          }
          if (buffer == nullptr)
          {
            return;
          }
          require(capacity > Text.size(), "buffer too small for the mixture text");
          std::memcpy(buffer, Text.c_str(), Text.size() + 1);
        });
  }

  rm_status rm_mixture_fit(const rm_mixture *init, const double *errors, size_t count, int max_iterations,
                           double rel_tolerance, rm_mixture **out, rm_fit_info *info)
  {
    return guarded(
        [&]
        {
          require(init != nullptr && out != nullptr, "arguments must not be null");
          robmix::EmConfig Config;
          Config.MaxIterations = max_iterations;
          Config.RelTolerance = rel_tolerance;
          auto Result = robmix::fitEm(samples(errors, count, init->Mixture.dimension()), init->Mixture, Config);
          if (info)
          {
            info->iterations = Result.Diagnostics.Iterations;
            info->final_log_likelihood = Result.Diagnostics.FinalLogLikelihood;
            info->reset_count = Result.Diagnostics.ResetCount;
          }
          *out = new rm_mixture{std::move(Result.Mixture)};
        });
  }

  rm_status rm_mixture_residual(const rm_mixture *mixture, rm_robust_kind kind, const double *error, double *residual,
                                double *jacobian, size_t *rows)
  {
    return guarded(
        [&]
        {
          require(mixture != nullptr && error != nullptr && residual != nullptr, "arguments must not be null");
          const auto D = static_cast<Eigen::Index>(mixture->Mixture.dimension());
          const robmix::Vector E = Eigen::Map<const robmix::Vector>(error, D);
          robmix::ResidualEvaluation Eval;
          if (kind == RM_ROBUST_MAX_MIXTURE)
          {
            Eval = robmix::residualMaxMixture(mixture->Mixture, E);
          }
          else if (kind == RM_ROBUST_SUM_MIXTURE)
          {
            Eval = robmix::residualSumMixture(mixture->Mixture, E);
          }
          else
          {
            throw robmix::ValidationError("unknown robust model kind");
          }
          for (Eigen::Index r = 0; r < Eval.Residual.size(); ++r)
          {
            residual[r] = Eval.Residual(r);
            for (Eigen::Index c = 0; c < D && jacobian; ++c)
            {
              jacobian[r * D + c] = Eval.Jacobian(r, c);
            }
          }
          if (rows)
          {
            *rows = static_cast<size_t>(Eval.Residual.size());
          }
        });
  }

  rm_status rm_mixture_information_criterion(const rm_mixture *mixture, const double *errors, size_t count,
                                             rm_criterion criterion, double *value)
  {
    return guarded(
        [&]
        {
          require(mixture != nullptr && value != nullptr, "arguments must not be null");
          require(criterion == RM_CRITERION_BIC || criterion == RM_CRITERION_AIC, "unknown information criterion");
          *value = robmix::informationCriterion(
              mixture->Mixture, samples(errors, count, mixture->Mixture.dimension()),
              criterion == RM_CRITERION_BIC ? robmix::InformationCriterion::BIC : robmix::InformationCriterion::AIC);
        });
  }

  rm_status rm_dataset_load(const char *path, rm_dataset **out)
  {
    return guarded(
        [&]
        {
          require(path != nullptr && out != nullptr, "arguments must not be null");
          *out = new rm_dataset{robmix::loadDataset(path)};
        });
  }

  rm_status rm_dataset_generate(const char *config_text, rm_dataset **out)
  {
    return guarded(
        [&]
        {
          require(out != nullptr, "output handle must not be null");
          const auto Config = robmix::KeyValueConfig::parseText(config_text ? config_text : "");
          *out = new rm_dataset{robmix::generate(robmix::scenarioFromConfig(Config))};
        });
  }

  rm_status rm_dataset_write(const rm_dataset *dataset, const char *path)
  {
    return guarded(
        [&]
        {
          require(dataset != nullptr && path != nullptr, "arguments must not be null");
          robmix::saveDataset(dataset->Data, path);
        });
  }

  void rm_dataset_destroy(rm_dataset *dataset)
  {
    delete dataset;
  }

  rm_status rm_dataset_get_counts(const rm_dataset *dataset, rm_dataset_counts *counts)
  {
    return guarded(
        [&]
        {
          require(dataset != nullptr && counts != nullptr, "arguments must not be null");
          *counts = {};
          for (const auto &Record : dataset->Data.Measurements)
          {
            if (std::holds_alternative<robmix::OdometryRecord>(Record))
            {
              ++counts->odometry;
            }
            else if (std::holds_alternative<robmix::RangeRecord>(Record))
            {
              ++counts->ranges;
            }
            else
            {
              ++counts->pseudoranges;
            }
          }
          counts->ground_truth = dataset->Data.GroundTruth.size();
        });
  }

  rm_status rm_estimate(const rm_dataset *dataset, const char *algorithm, const char *config_text, double *mean_ate)
  {
    return guarded(
        [&]
        {
          require(dataset != nullptr && algorithm != nullptr && mean_ate != nullptr, "arguments must not be null");
          const auto Spec =
              robmix::ExperimentSpec::fromConfig(robmix::KeyValueConfig::parseText(config_text ? config_text : ""));
          *mean_ate = robmix::runAlgorithm(dataset->Data, robmix::parseAlgorithm(algorithm), Spec).Ate.Mean;
        });
  }

  rm_status rm_simulate(const char *config_path, const char *out_path, const uint64_t *seed)
  {
    return guarded(
        [&]
        {
          require(out_path != nullptr, "output path must not be null");
          robmix::KeyValueConfig Config = config_path ? loadConfig(config_path, seed, nullptr) : robmix::KeyValueConfig();
          if (!config_path && seed)
          {
            Config.set("seed", std::to_string(*seed));
          }
          robmix::commandSimulate(Config, out_path);
        });
  }

  rm_status rm_experiment_run(const char *config_path, const char *out_dir, const uint64_t *seed)
  {
    return guarded(
        [&]
        {
          const auto Spec = robmix::ExperimentSpec::fromConfig(loadConfig(config_path, seed, out_dir));
          for (const auto &Result : robmix::commandRun(Spec))
          {
            std::cout << robmix::toString(Result.Alg) << ": mean ATE " << robmix::formatDouble(Result.Ate.Mean)
                      << " m, " << Result.WallSeconds << " s\n";
          }
          std::cout << std::flush;
        });
  }

  rm_status rm_experiment_sweep(const char *config_path, const char *out_dir, const uint64_t *seed,
                                const char *parameter, const char *values)
  {
    return guarded(
        [&]
        {
          auto Config = loadConfig(config_path, seed, out_dir);
          if (parameter)
          {
            Config.set("sweep_parameter", parameter);
          }
          if (values)
          {
            Config.set("sweep_values", values);
          }
          const auto Spec = robmix::ExperimentSpec::fromConfig(Config);
          std::cout << robmix::formatSweep(robmix::commandSweep(Spec), Spec.Sweep) << std::flush;
        });
  }

  rm_status rm_fit_gmm_csv(const char *csv_path, const char *column, size_t components, double scale,
                           const double *base_sigma, const char *out_path)
  {
    return guarded(
        [&]
        {
          require(csv_path != nullptr, "CSV path must not be null");
          robmix::FitGmmOptions Options;
          if (column)
          {
            Options.Column = column;
          }
          Options.Components = components;
          Options.SigmaScale = scale;
          if (base_sigma)
          {
            Options.BaseSigma = *base_sigma;
          }
          emit(robmix::commandFitGmm(csv_path, Options), out_path);
        });
  }

  rm_status rm_evaluate(const char *estimate_path, const char *truth_path, const double *tolerance,
                        const char *out_path)
  {
    return guarded(
        [&]
        {
          require(estimate_path != nullptr && truth_path != nullptr, "paths must not be null");
          std::optional<double> Tolerance;
          if (tolerance)
          {
            Tolerance = *tolerance;
          }
          emit(robmix::commandEvaluate(estimate_path, truth_path, Tolerance), out_path);
        });
  }
}
