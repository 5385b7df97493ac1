#include "robmix/experiment.hpp"
#include "robmix/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace robmix
{
  namespace
  {
    void writeText(const std::filesystem::path &Path, const std::string &Text)
    {
      std::ofstream Out(Path, std::ios::binary);
      if (!Out)
      {
        throw IoError("cannot open '" + Path.string() + "' for writing");
      }
      Out << Text;
      if (!Out)
      {
        throw IoError("failed writing '" + Path.string() + "'");
      }
    }

    std::filesystem::path prepareDirectory(const std::string &Directory)
    {
      std::error_code Error;
      std::filesystem::create_directories(Directory, Error);
      if (Error || !std::filesystem::is_directory(Directory))
      {
        throw IoError("cannot create output directory '" + Directory + "'");
      }
      return std::filesystem::path(Directory);
    }

    bool isMixture(Algorithm Alg)
    {
      return Alg != Algorithm::Gaussian && Alg != Algorithm::Dcs;
    }

    double median(std::vector<double> Values)
    {
      const auto Middle = Values.begin() + static_cast<std::ptrdiff_t>(Values.size() / 2);
      std::nth_element(Values.begin(), Middle, Values.end());
      if (Values.size() % 2 == 1)
      {
        return *Middle;
      }
      return 0.5 * (*Middle + *std::max_element(Values.begin(), Middle));
    }
  }

  std::string toString(Algorithm Alg)
  {
    switch (Alg)
    {
    case Algorithm::Gaussian:
      return "gaussian";
    case Algorithm::Dcs:
      return "dcs";
    case Algorithm::StaticMm:
      return "static-mm";
    case Algorithm::StaticSm:
      return "static-sm";
    case Algorithm::AdaptiveMm:
      return "adaptive-mm";
    case Algorithm::AdaptiveSm:
      return "adaptive-sm";
    }
    return "unknown";
  }

  const std::vector<Algorithm> &allAlgorithms()
  {
    static const std::vector<Algorithm> All{Algorithm::Gaussian, Algorithm::Dcs,        Algorithm::StaticMm,
                                            Algorithm::StaticSm, Algorithm::AdaptiveMm, Algorithm::AdaptiveSm};
    return All;
  }

  Algorithm parseAlgorithm(const std::string &Name)
  {
    for (const auto Alg : allAlgorithms())
    {
      if (toString(Alg) == Name)
      {
        return Alg;
      }
    }
    throw ValidationError("unknown algorithm '" + Name +
                          "' (expected gaussian, dcs, static-mm, static-sm, adaptive-mm or adaptive-sm)");
  }

  const std::vector<std::string> &ExperimentSpec::configKeys()
  {
    static const std::vector<std::string> Keys{
        "dataset",     "algorithms",   "components",    "sigma_scale",     "window",          "base_sigma",
        "dcs_phi",     "em_warm_start", "em_prewhiten", "match_tolerance", "out",             "jobs",
        "sweep_parameter", "sweep_values", "sweep_algorithms"};
    return Keys;
  }

  void ExperimentSpec::validate() const
  {
    if (Algorithms.empty())
    {
      throw ValidationError("experiment needs at least one algorithm");
    }
    if (Components < 1)
    {
      throw ValidationError("component count must be at least 1");
    }
    if (!(SigmaScale > 0.0) || !std::isfinite(SigmaScale))
    {
      throw ValidationError("sigma scale must be positive");
    }
    if (!(Window > 0.0))
    {
      throw ValidationError("window length must be positive");
    }
    if (BaseSigma && !(*BaseSigma > 0.0))
    {
      throw ValidationError("base sigma must be positive");
    }
    if (!(DcsPhi > 0.0))
    {
      throw ValidationError("DCS parameter must be positive");
    }
    if (MatchTolerance && !(*MatchTolerance >= 0.0))
    {
      throw ValidationError("match tolerance must be non-negative");
    }
    if (Jobs < 1)
    {
      throw ValidationError("jobs must be at least 1");
    }
    if (OutputDirectory.empty())
    {
      throw ValidationError("output directory must not be empty");
    }
    if (SweepAlgorithms.empty())
    {
      throw ValidationError("sweep needs at least one algorithm");
    }
    for (const double Value : SweepValues)
    {
      if (!(Value > 0.0) || !std::isfinite(Value))
      {
        throw ValidationError("sweep values must be positive");
      }
      if (Sweep == SweepParameter::Components && Value != std::floor(Value))
      {
        throw ValidationError("component sweep values must be integers");
      }
    }
    if (!DatasetPath)
    {
      Scenario.validate();
    }
  }

  ExperimentSpec ExperimentSpec::fromConfig(const KeyValueConfig &Config)
  {
    for (const auto &[Key, Value] : Config.entries())
    {
      const auto &Own = configKeys();
      const auto &ScenarioKeys = scenarioConfigKeys();
      if (std::find(Own.begin(), Own.end(), Key) == Own.end() &&
          std::find(ScenarioKeys.begin(), ScenarioKeys.end(), Key) == ScenarioKeys.end())
      {
        throw ValidationError("unknown experiment config key '" + Key + "'");
      }
    }

    ExperimentSpec Spec;
    Spec.DatasetPath = Config.getString("dataset");
    Spec.Scenario = scenarioFromConfig(Config);
    if (Config.has("algorithms"))
    {
      Spec.Algorithms.clear();
      for (const auto &Name : Config.getStringList("algorithms"))
      {
        Spec.Algorithms.push_back(parseAlgorithm(Name));
      }
    }
    const auto Components = Config.getInt("components", static_cast<std::int64_t>(Spec.Components));
    if (Components < 1)
    {
      throw ValidationError("config key 'components' must be at least 1");
    }
    Spec.Components = static_cast<std::size_t>(Components);
    Spec.SigmaScale = Config.getDouble("sigma_scale", Spec.SigmaScale);
    Spec.Window = Config.getDouble("window", Spec.Window);
    Spec.BaseSigma = Config.getDouble("base_sigma");
    Spec.DcsPhi = Config.getDouble("dcs_phi", Spec.DcsPhi);
    Spec.EmWarmStart = Config.getBool("em_warm_start", Spec.EmWarmStart);
    Spec.EmPrewhiten = Config.getBool("em_prewhiten", Spec.EmPrewhiten);
    Spec.MatchTolerance = Config.getDouble("match_tolerance");
    Spec.OutputDirectory = Config.getString("out", Spec.OutputDirectory);
    const auto Jobs = Config.getInt("jobs", 1);
    if (Jobs < 1)
    {
      throw ValidationError("config key 'jobs' must be at least 1");
    }
    Spec.Jobs = static_cast<unsigned>(Jobs);

    const auto Parameter = Config.getString("sweep_parameter", "init-sigma-scale");
    if (Parameter == "init-sigma-scale")
    {
      Spec.Sweep = SweepParameter::InitSigmaScale;
    }
    else if (Parameter == "components")
    {
      Spec.Sweep = SweepParameter::Components;
    }
    else
    {
      throw ValidationError("config key 'sweep_parameter' must be 'init-sigma-scale' or 'components'");
    }
    if (Config.has("sweep_values"))
    {
      Spec.SweepValues = Config.getDoubleList("sweep_values");
    }
    if (Config.has("sweep_algorithms"))
    {
      Spec.SweepAlgorithms.clear();
      for (const auto &Name : Config.getStringList("sweep_algorithms"))
      {
        Spec.SweepAlgorithms.push_back(parseAlgorithm(Name));
      }
    }
    Spec.validate();
    return Spec;
  }

  EstimatorConfig estimatorConfigFor(Algorithm Alg, const ExperimentSpec &Spec)
  {
    EstimatorConfig Config;
    Config.Window = Spec.Window;
    Config.Components = Spec.Components;
    Config.SigmaScale = Spec.SigmaScale;
    Config.BaseSigma = Spec.BaseSigma;
    Config.DcsPhi = Spec.DcsPhi;
    Config.EmWarmStart = Spec.EmWarmStart;
    Config.EmPrewhiten = Spec.EmPrewhiten;
    switch (Alg)
    {
    case Algorithm::Gaussian:
      Config.MeasurementModel = RobustKind::Gaussian;
      break;
    case Algorithm::Dcs:
      Config.MeasurementModel = RobustKind::Dcs;
      break;
    case Algorithm::StaticMm:
    case Algorithm::AdaptiveMm:
      Config.MeasurementModel = RobustKind::MaxMixture;
      break;
    case Algorithm::StaticSm:
    case Algorithm::AdaptiveSm:
      Config.MeasurementModel = RobustKind::SumMixture;
      break;
    }
    Config.Adaptive = Alg == Algorithm::AdaptiveMm || Alg == Algorithm::AdaptiveSm;
    return Config;
  }

  Dataset experimentDataset(const ExperimentSpec &Spec)
  {
    if (Spec.DatasetPath)
    {
      return loadDataset(*Spec.DatasetPath);
    }
    return generate(Spec.Scenario);
  }

  std::vector<TimedPosition> positionsOf(const EstimatorOutput &Output)
  {
    std::vector<TimedPosition> Positions;
    Positions.reserve(Output.Steps.size());
    for (const auto &Step : Output.Steps)
    {
      Positions.push_back({Step.Time, Step.Pose.X, Step.Pose.Y});
    }
    return Positions;
  }

  std::vector<TimedPosition> positionsOf(const std::vector<GroundTruthPose> &GroundTruth)
  {
    std::vector<TimedPosition> Positions;
    Positions.reserve(GroundTruth.size());
    for (const auto &Pose : GroundTruth)
    {
      Positions.push_back({Pose.Time, Pose.X, Pose.Y});
    }
    return Positions;
  }

  double defaultMatchTolerance(const std::vector<TimedPosition> &GroundTruth)
  {
    std::vector<double> Times;
    for (const auto &Pose : GroundTruth)
    {
      Times.push_back(Pose.Time);
    }
    std::sort(Times.begin(), Times.end());
    std::vector<double> Gaps;
    for (std::size_t i = 1; i < Times.size(); ++i)
    {
      if (Times[i] > Times[i - 1])
      {
        Gaps.push_back(Times[i] - Times[i - 1]);
      }
    }
    return Gaps.empty() ? 0.0 : 0.5 * median(Gaps);
  }

  AlgorithmResult runAlgorithm(const Dataset &Data, Algorithm Alg, const ExperimentSpec &Spec)
  {
    if (Data.GroundTruth.empty())
    {
      throw ValidationError("dataset has no ground truth to evaluate against");
    }
    AlgorithmResult Result;
    Result.Alg = Alg;
    const auto Started = std::chrono::steady_clock::now();
    Result.Output = runEstimator(Data, estimatorConfigFor(Alg, Spec));
    Result.WallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - Started).count();

    const auto Truth = positionsOf(Data.GroundTruth);
    Result.Ate = ate(positionsOf(Result.Output), Truth, Spec.MatchTolerance.value_or(defaultMatchTolerance(Truth)));
    return Result;
  }

  std::vector<AlgorithmResult> runAlgorithms(const Dataset &Data, const std::vector<Algorithm> &Algorithms,
                                             const ExperimentSpec &Spec)
  {
    Spec.validate();
    std::vector<AlgorithmResult> Results(Algorithms.size());
    std::vector<std::exception_ptr> Failures(Algorithms.size());
    std::atomic<std::size_t> Next{0};
    const auto Worker = [&]()
    {
      for (std::size_t i = Next++; i < Algorithms.size(); i = Next++)
      {
        try
        {
          Results[i] = runAlgorithm(Data, Algorithms[i], Spec);
        }
        catch (...)
        {
          Failures[i] = std::current_exception();
        }
      }
    };

    const auto Threads = std::min<std::size_t>(Spec.Jobs, Algorithms.size());
    if (Threads <= 1)
    {
      Worker();
    }
    else
    {
      std::vector<std::jthread> Pool;
      for (std::size_t t = 0; t < Threads; ++t)
      {
        Pool.emplace_back(Worker);
      }
    }
    for (const auto &Failure : Failures)
    {
      if (Failure)
      {
        std::rethrow_exception(Failure);
      }
    }
    return Results;
  }

  std::string formatResults(const std::vector<AlgorithmResult> &Results)
  {
    std::ostringstream Out;
    Out << "algorithm,mean_ate,rmse_ate,max_ate,matched\n";
    for (const auto &R : Results)
    {
      Out << toString(R.Alg) << ',' << formatDouble(R.Ate.Mean) << ',' << formatDouble(R.Ate.Rmse) << ','
          << formatDouble(R.Ate.Max) << ',' << R.Ate.Matched << '\n';
    }
    return Out.str();
  }

  std::string formatTiming(const std::vector<AlgorithmResult> &Results)
  {
    std::ostringstream Out;
    Out << "algorithm,wall_s\n";
    for (const auto &R : Results)
    {
      Out << toString(R.Alg) << ',' << formatDouble(R.WallSeconds) << '\n';
    }
    return Out.str();
  }

  std::vector<SweepRow> runSweep(const Dataset &Data, const ExperimentSpec &Spec)
  {
    if (Spec.SweepValues.empty())
    {
      throw ValidationError("sweep needs at least one value");
    }
    Spec.validate();

    std::vector<SweepRow> Rows;
    for (const double Value : Spec.SweepValues)
    {
      ExperimentSpec Point = Spec;
      if (Spec.Sweep == SweepParameter::InitSigmaScale)
      {
        Point.SigmaScale = Value;
      }
      else
      {
        Point.Components = static_cast<std::size_t>(Value);
      }
      for (const auto &Result : runAlgorithms(Data, Spec.SweepAlgorithms, Point))
      {
        Rows.push_back({Value, Result.Alg, Result.Ate.Mean});
      }
    }
    return Rows;
  }

  std::string formatSweep(const std::vector<SweepRow> &Rows, SweepParameter Parameter)
  {
    std::ostringstream Out;
    Out << (Parameter == SweepParameter::InitSigmaScale ? "scale" : "components") << ",algorithm,mean_ate\n";
    for (const auto &Row : Rows)
    {
      Out << formatDouble(Row.Value) << ',' << toString(Row.Alg) << ',' << formatDouble(Row.MeanAte) << '\n';
    }
    return Out.str();
  }

  void commandSimulate(const KeyValueConfig &Config, const std::string &OutPath)
  {
    const auto &Keys = scenarioConfigKeys();
    for (const auto &[Key, Value] : Config.entries())
    {
      if (std::find(Keys.begin(), Keys.end(), Key) == Keys.end())
      {
        throw ValidationError("unknown scenario config key '" + Key + "'");
      }
    }
    saveDataset(generate(scenarioFromConfig(Config)), OutPath);
  }

  std::vector<AlgorithmResult> commandRun(const ExperimentSpec &Spec)
  {
    Spec.validate();
    const Dataset Data = experimentDataset(Spec);
    const auto Directory = prepareDirectory(Spec.OutputDirectory);
    if (!Spec.DatasetPath)
    {
      saveDataset(Data, (Directory / "dataset.txt").string());
    }

    const auto Results = runAlgorithms(Data, Spec.Algorithms, Spec);
    for (const auto &Result : Results)
    {
      const auto Name = toString(Result.Alg);
      writeText(Directory / (Name + "_estimates.csv"), formatEstimates(Result.Output));
      if (isMixture(Result.Alg))
      {
        writeText(Directory / (Name + "_gmm.csv"), formatMixtureTrace(Result.Output));
      }
    }
    writeText(Directory / "results.csv", formatResults(Results));
    writeText(Directory / "timing.csv", formatTiming(Results));
    return Results;
  }

  std::vector<SweepRow> commandSweep(const ExperimentSpec &Spec)
  {
    Spec.validate();
    if (Spec.SweepValues.empty())
    {
      throw ValidationError("sweep needs at least one value");
    }
    const Dataset Data = experimentDataset(Spec);
    const auto Directory = prepareDirectory(Spec.OutputDirectory);
    const auto Rows = runSweep(Data, Spec);
    writeText(Directory / "sweep.csv", formatSweep(Rows, Spec.Sweep));
    return Rows;
  }

  std::size_t CsvTable::column(const std::string &Name) const
  {
    for (std::size_t c = 0; c < Header.size(); ++c)
    {
      if (Header[c] == Name)
      {
        return c;
      }
    }
    if (!Name.empty() && std::all_of(Name.begin(), Name.end(), [](char C) { return C >= '0' && C <= '9'; }))
    {
      const auto Index = static_cast<std::size_t>(std::stoull(Name));
      if (Index < Header.size())
      {
        return Index;
      }
    }
    throw ValidationError("CSV has no column '" + Name + "'");
  }

  std::vector<double> CsvTable::values(std::size_t Column) const
  {
    std::vector<double> Values;
    Values.reserve(Rows.size());
    for (const auto &Row : Rows)
    {
      Values.push_back(Row.at(Column));
    }
    return Values;
  }

  CsvTable parseCsv(std::istream &Stream)
  {
    CsvTable Table;
    std::string Line;
    std::size_t LineNumber = 0;
    while (std::getline(Stream, Line))
    {
      ++LineNumber;
      if (!Line.empty() && Line.back() == '\r')
      {
        Line.pop_back();
      }
      if (trim(Line).empty() || trim(Line).front() == '#')
      {
        continue;
      }
      auto Cells = split(Line, ',');
      for (auto &Cell : Cells)
      {
        Cell = trim(Cell);
      }
      if (Table.Header.empty())
      {
        Table.Header = std::move(Cells);
        continue;
      }
      if (Cells.size() != Table.Header.size())
      {
        throw ValidationError("CSV line " + std::to_string(LineNumber) + ": expected " +
                              std::to_string(Table.Header.size()) + " cells, got " + std::to_string(Cells.size()));
      }
      std::vector<double> Row;
      for (const auto &Cell : Cells)
      {
        try
        {
          Row.push_back(Cell.empty() ? std::numeric_limits<double>::quiet_NaN() : parseDouble(Cell));
        }
        catch (const ValidationError &Error)
        {
          throw ValidationError("CSV line " + std::to_string(LineNumber) + ": " + Error.what());
        }
      }
      Table.Rows.push_back(std::move(Row));
    }
    if (Table.Header.empty())
    {
      throw ValidationError("CSV has no header line");
    }
    return Table;
  }

  CsvTable loadCsv(const std::string &Path)
  {
    std::ifstream In(Path);
    if (!In)
    {
      throw IoError("cannot open '" + Path + "'");
    }
    return parseCsv(In);
  }

  std::string commandFitGmm(const std::string &CsvPath, const FitGmmOptions &Options)
  {
    if (Options.Components < 1)
    {
      throw ValidationError("component count must be at least 1");
    }
    const CsvTable Table = loadCsv(CsvPath);
    std::vector<double> Samples;
    for (const double Value : Table.values(Table.column(Options.Column)))
    {
      if (!std::isfinite(Value))
      {
        throw ValidationError("error column contains a non-finite value");
      }
      Samples.push_back(Value);
    }
    if (Samples.size() < Options.Components)
    {
      throw ValidationError("need at least as many samples as components");
    }

    double Base = 0.0;
    if (Options.BaseSigma)
    {
      Base = *Options.BaseSigma;
    }
    else
    {
      const double Center = median(Samples);
      std::vector<double> Deviations;
      for (const double Value : Samples)
      {
        Deviations.push_back(std::abs(Value - Center));
      }
      Base = 1.4826 * median(Deviations);
    }
    if (!(Base > 0.0) || !std::isfinite(Base))
    {
      throw ValidationError("cannot derive a positive base sigma from the samples; pass one explicitly");
    }

    const Matrix Errors = Eigen::Map<const Matrix>(Samples.data(), static_cast<Eigen::Index>(Samples.size()), 1);
    const GaussianMixture Init = defaultInit(Matrix::Constant(1, 1, 1.0 / Base), Options.Components, Options.SigmaScale);
    return fitEm(Errors, Init).Mixture.toString();
  }

  std::string commandEvaluate(const std::string &EstimatePath, const std::string &TruthPath,
                              std::optional<double> MatchTolerance)
  {
    const auto ReadPositions = [](const CsvTable &Table)
    {
      const auto T = Table.column("t");
      const auto X = Table.column("x");
      const auto Y = Table.column("y");
      std::vector<TimedPosition> Positions;
      for (const auto &Row : Table.Rows)
      {
        Positions.push_back({Row[T], Row[X], Row[Y]});
      }
      return Positions;
    };

    const auto Estimates = ReadPositions(loadCsv(EstimatePath));

    std::ifstream Probe(TruthPath);
    if (!Probe)
    {
      throw IoError("cannot open '" + TruthPath + "'");
    }
    std::string First;
    while (std::getline(Probe, First) && (trim(First).empty() || trim(First).front() == '#'))
    {
    }
    Probe.close();
    const bool IsCsv = First.find(',') != std::string::npos;
    const auto Truth = IsCsv ? ReadPositions(loadCsv(TruthPath)) : positionsOf(loadDataset(TruthPath).GroundTruth);

    return formatAteReport(ate(Estimates, Truth, MatchTolerance.value_or(defaultMatchTolerance(Truth))));
  }
}
