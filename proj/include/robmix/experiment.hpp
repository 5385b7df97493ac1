#pragma once

#include "robmix/config.hpp"
#include "robmix/dataset.hpp"
#include "robmix/estimator.hpp"
#include "robmix/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robmix
{
  enum class Algorithm
  {
    Gaussian,
    Dcs,
    StaticMm,
    StaticSm,
    AdaptiveMm,
    AdaptiveSm
  };

  /** `gaussian`, `dcs`, `static-mm`, `static-sm`, `adaptive-mm`, `adaptive-sm` */
  std::string toString(Algorithm Alg);
  Algorithm parseAlgorithm(const std::string &Name);
  const std::vector<Algorithm> &allAlgorithms();

  enum class SweepParameter
  {
    InitSigmaScale,
    Components
  };

  /**
   * One experiment: a dataset (file or generator scenario), the algorithms to compare and the
   * estimator settings they share. Parsed from flat key=value config text.
   */
  struct ExperimentSpec
  {
    std::optional<std::string> DatasetPath;
    /** Used when DatasetPath is unset. */
    ScenarioConfig Scenario = scenarioPreset("uwb-like");
    std::vector<Algorithm> Algorithms{Algorithm::Gaussian, Algorithm::StaticSm, Algorithm::AdaptiveSm};
    std::size_t Components = 2;
    double SigmaScale = 10.0;
    double Window = 60.0;
    std::optional<double> BaseSigma;
    double DcsPhi = 1.0;
    bool EmWarmStart = false;
    bool EmPrewhiten = false;
    /** Unset: half the median ground truth sampling interval. */
    std::optional<double> MatchTolerance;
    std::string OutputDirectory = "robmix-out";
    /** Algorithm runs executed concurrently. */
    unsigned Jobs = 1;

    SweepParameter Sweep = SweepParameter::InitSigmaScale;
    std::vector<double> SweepValues;
    std::vector<Algorithm> SweepAlgorithms{Algorithm::AdaptiveMm, Algorithm::AdaptiveSm, Algorithm::StaticMm,
                                           Algorithm::StaticSm};

    void validate() const;
    /** Unknown keys and unknown algorithm names are rejected here, before anything runs. */
    static ExperimentSpec fromConfig(const KeyValueConfig &Config);
    /** Keys accepted by fromConfig in addition to the scenario keys. */
    static const std::vector<std::string> &configKeys();
  };

  struct AlgorithmResult
  {
    Algorithm Alg = Algorithm::Gaussian;
    AteReport Ate;
    double WallSeconds = 0.0;
    EstimatorOutput Output;
  };

  EstimatorConfig estimatorConfigFor(Algorithm Alg, const ExperimentSpec &Spec);
  /** The spec's dataset file, or the generated scenario. */
  Dataset experimentDataset(const ExperimentSpec &Spec);
  double defaultMatchTolerance(const std::vector<TimedPosition> &GroundTruth);
  std::vector<TimedPosition> positionsOf(const EstimatorOutput &Output);
  std::vector<TimedPosition> positionsOf(const std::vector<GroundTruthPose> &GroundTruth);

  AlgorithmResult runAlgorithm(const Dataset &Data, Algorithm Alg, const ExperimentSpec &Spec);
  /** Runs every algorithm of the spec (up to Spec.Jobs at once); results keep the spec's order. */
  std::vector<AlgorithmResult> runAlgorithms(const Dataset &Data, const std::vector<Algorithm> &Algorithms,
                                             const ExperimentSpec &Spec);

  /** `algorithm,mean_ate,rmse_ate,max_ate,matched`; free of timing so repeated runs compare byte for byte. */
  std::string formatResults(const std::vector<AlgorithmResult> &Results);
  /** `algorithm,wall_s` */
  std::string formatTiming(const std::vector<AlgorithmResult> &Results);

  struct SweepRow
  {
    double Value = 0.0;
    Algorithm Alg = Algorithm::AdaptiveSm;
    double MeanAte = 0.0;
  };

  std::vector<SweepRow> runSweep(const Dataset &Data, const ExperimentSpec &Spec);
  /** `scale,algorithm,mean_ate` (or `components,...` for a component sweep). */
  std::string formatSweep(const std::vector<SweepRow> &Rows, SweepParameter Parameter);

  /** Generates the scenario described by `Config` and writes it to `OutPath`. */
  void commandSimulate(const KeyValueConfig &Config, const std::string &OutPath);
  /**
   * Writes results.csv, timing.csv, `<algorithm>_estimates.csv`, `<algorithm>_gmm.csv` (mixture
   * algorithms) and, for generated data, dataset.txt into the output directory.
   */
  std::vector<AlgorithmResult> commandRun(const ExperimentSpec &Spec);
  /** Writes sweep.csv into the output directory. */
  std::vector<SweepRow> commandSweep(const ExperimentSpec &Spec);

  struct FitGmmOptions
  {
    std::string Column = "0";
    std::size_t Components = 2;
    double SigmaScale = 10.0;
    /** Unset: 1.4826 times the median absolute deviation of the samples. */
    std::optional<double> BaseSigma;
  };

  /** Fits a scalar mixture to one CSV column (header name or zero-based index) and returns the model text. */
  std::string commandFitGmm(const std::string &CsvPath, const FitGmmOptions &Options);
  /**
   * ATE report of an estimate CSV (`t,x,y,...`) against ground truth given either as a `t,x,y` CSV or
   * as a dataset file with `gt2` records.
   */
  std::string commandEvaluate(const std::string &EstimatePath, const std::string &TruthPath,
                              std::optional<double> MatchTolerance);

  /** Header-indexed numeric CSV; empty cells read as NaN. */
  struct CsvTable
  {
    std::vector<std::string> Header;
    std::vector<std::vector<double>> Rows;

    /** Column by header name, or by zero-based index when `Name` is a number. */
    std::size_t column(const std::string &Name) const;
    std::vector<double> values(std::size_t Column) const;
  };

  CsvTable parseCsv(std::istream &Stream);
  CsvTable loadCsv(const std::string &Path);
}
