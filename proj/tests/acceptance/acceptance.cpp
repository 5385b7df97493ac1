// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero when a criterion
// fails that was not declared with --known-failure.

#include "robmix/dataset.hpp"
#include "robmix/experiment.hpp"
#include "robmix/factors.hpp"
#include "robmix/mixture.hpp"
#include "robmix/robust.hpp"
#include "robmix/solver.hpp"

#include "../unit/oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

using namespace robmix;
namespace fs = std::filesystem;

namespace
{
  struct Outcome
  {
    bool Pass = false;
    std::string Detail;
  };

  std::string fmt(double Value, int Precision = 4)
  {
    std::ostringstream Out;
    Out.precision(Precision);
    Out << Value;
    return Out.str();
  }

  double secondsSince(std::chrono::steady_clock::time_point Start)
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - Start).count();
  }

  void info(int Criterion, const std::string &Text)
  {
    std::cout << "info criterion " << Criterion << ": " << Text << std::endl;
  }

  Matrix column(const std::vector<double> &Values)
  {
    return Eigen::Map<const Eigen::VectorXd>(Values.data(), static_cast<Eigen::Index>(Values.size()));
  }

  GaussianMixture scalarMixture(const std::vector<oracle::Gauss1> &Parts)
  {
    std::vector<GaussianComponent> Components;
    for (const auto &P : Parts)
    {
      Components.push_back({P.W, Vector::Constant(1, P.Mu), Matrix::Constant(1, 1, 1.0 / P.Sigma)});
    }
    return GaussianMixture(Components);
  }

  double sigmaOf(const GaussianComponent &C) { return 1.0 / C.SqrtInfo(0, 0); }

  Outcome emMonotonicity()
  {
    const auto Start = std::chrono::steady_clock::now();
    double WorstDrop = 0.0;
    int MaxIterations = 0;
    for (std::uint64_t Seed = 0; Seed < 100; ++Seed)
    {
      std::mt19937_64 Rng(Seed);
      std::uniform_real_distribution<double> Weight(0.2, 0.8), Mean(-3.0, 3.0), Sigma(0.05, 2.0);
      const double W = Weight(Rng);
      const std::vector<oracle::Gauss1> Truth{{W, 0.0, Sigma(Rng)}, {1.0 - W, Mean(Rng), Sigma(Rng)}};
      const auto Samples = oracle::sampleMixture(Truth, 500, Seed + 1000);
      const Matrix Errors = column(Samples);
      const auto Init = defaultInit(Matrix::Constant(1, 1, 1.0 / oracle::stddev(Samples)), 2);
      const auto Fit = fitEm(Errors, Init);
      const auto &Trace = Fit.Diagnostics.LogLikelihoodTrace;
      for (std::size_t i = 1; i < Trace.size(); ++i)
      {
        WorstDrop = std::max(WorstDrop, Trace[i - 1] - Trace[i]);
      }
      MaxIterations = std::max(MaxIterations, Fit.Diagnostics.Iterations);
    }
    const double Elapsed = secondsSince(Start);
    return {WorstDrop <= 1e-9 && Elapsed < 5.0, "largest per-iteration decrease " + fmt(WorstDrop) + ", max iterations " +
                                                    std::to_string(MaxIterations) + ", " + fmt(Elapsed, 3) + " s"};
  }

  Outcome emRecovery()
  {
    const std::vector<oracle::Gauss1> Truth{{0.7, 0.0, 0.1}, {0.3, 1.0, 0.5}};
    const Matrix Errors = column(oracle::sampleMixture(Truth, 10000, 2024));
    const auto Start = std::chrono::steady_clock::now();
    const auto Fit = fitEm(Errors, defaultInit(Matrix::Constant(1, 1, 1.0 / 0.1), 2));
    const double Elapsed = secondsSince(Start);

    auto Components = Fit.Mixture.components();
    std::sort(Components.begin(), Components.end(),
              [](const auto &A, const auto &B) { return sigmaOf(A) < sigmaOf(B); });
    bool Pass = Elapsed < 2.0;
    std::string Detail;
    for (std::size_t j = 0; j < 2; ++j)
    {
      const auto &C = Components[j];
      Pass = Pass && std::abs(C.Weight - Truth[j].W) <= 0.03 && std::abs(C.Mean(0) - Truth[j].Mu) <= 0.05 &&
             std::abs(sigmaOf(C) / Truth[j].Sigma - 1.0) <= 0.10;
      Detail += "w=" + fmt(C.Weight) + " mu=" + fmt(C.Mean(0)) + " sigma=" + fmt(sigmaOf(C)) + "; ";
    }
    return {Pass, Detail + fmt(Elapsed, 3) + " s"};
  }

  Outcome reductionIdentity()
  {
    const double Mu = 0.3, Sigma = 0.7;
    const auto Mixture = scalarMixture({{1.0, Mu, Sigma}});
    const auto Gaussian = RobustModel::gaussian(Matrix::Constant(1, 1, 1.0 / Sigma), Vector::Constant(1, Mu));
    const auto Mm = RobustModel::maxMixture(Mixture);
    const auto Sm = RobustModel::sumMixture(Mixture);
    std::mt19937_64 Rng(3);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    double MmLo = INFINITY, MmHi = -INFINITY, SmLo = INFINITY, SmHi = -INFINITY;
    for (int i = 0; i < 1000; ++i)
    {
      const Vector E = Vector::Constant(1, U(Rng));
      const double G = 0.5 * Gaussian.evaluate(E).Residual.squaredNorm();
      const double M = 0.5 * Mm.evaluate(E).Residual.squaredNorm() - G;
      const double S = 0.5 * Sm.evaluate(E).Residual.squaredNorm() - G;
      MmLo = std::min(MmLo, M);
      MmHi = std::max(MmHi, M);
      SmLo = std::min(SmLo, S);
      SmHi = std::max(SmHi, S);
    }
    return {MmHi - MmLo < 1e-9 && SmHi - SmLo < 1e-9,
            "constant spread max-mixture " + fmt(MmHi - MmLo) + ", sum-mixture " + fmt(SmHi - SmLo)};
  }

  Outcome mixtureAgreement()
  {
    const std::vector<oracle::Gauss1> Parts{{0.5, 0.0, 0.1}, {0.5, 3.0, 1.0}};
    const auto Mixture = scalarMixture(Parts);
    const auto Mm = RobustModel::maxMixture(Mixture);
    const auto Sm = RobustModel::sumMixture(Mixture);
    const double LogGammaM = std::log(maxMixtureNormalization(Mixture));
    const double LogGammaS = std::log(sumMixtureNormalization(Mixture));

    double WorstAtMargin3 = 0.0, WorstAtMargin691 = 0.0, MarginOfWorst = 0.0, OracleDeviation = 0.0;
    std::size_t Checked = 0;
    for (int i = 0; i < 1000; ++i)
    {
      const double E = -5.0 + 13.0 * i / 999.0;
      const Vector Err = Vector::Constant(1, E);
      const double CostMm = 0.5 * Mm.evaluate(Err).Residual.squaredNorm() - LogGammaM;
      const double CostSm = 0.5 * Sm.evaluate(Err).Residual.squaredNorm() - LogGammaS;
      const double Diff = std::abs(CostMm - CostSm);
      OracleDeviation = std::max(OracleDeviation, std::abs(CostMm - oracle::maxMixtureCost(Parts, E)));
      OracleDeviation = std::max(OracleDeviation, std::abs(CostSm - oracle::sumMixtureCost(Parts, E)));
      const double Margin = std::abs(oracle::branchCost(Parts[0], E) - oracle::branchCost(Parts[1], E));
      if (Margin > 3.0)
      {
        ++Checked;
        if (Diff > WorstAtMargin3)
        {
          WorstAtMargin3 = Diff;
          MarginOfWorst = Margin;
        }
      }
      if (Margin > 6.91)
      {
        WorstAtMargin691 = std::max(WorstAtMargin691, Diff);
      }
    }
    info(4, "cost difference equals ln(1 + exp(-margin)); at margin > 6.91 nats the largest difference is " +
                fmt(WorstAtMargin691));
    info(4, "largest deviation of either cost from the reference negative log-likelihood " + fmt(OracleDeviation));
    return {WorstAtMargin3 < 1e-3 && OracleDeviation < 1e-9,
            std::to_string(Checked) + " grid points with margin > 3 nats, largest |MM - SM| " + fmt(WorstAtMargin3) +
                " at margin " + fmt(MarginOfWorst)};
  }

  /** Largest relative deviation of `Analytic`'s Jacobian from central differences of `Reference`. */
  double deviationAgainst(const ResidualBlock &Analytic, const ResidualBlock &Reference, const std::vector<Vector> &Point,
                          double Step)
  {
    std::vector<const Vector *> Params;
    for (const auto &V : Point)
    {
      Params.push_back(&V);
    }
    Vector R;
    std::vector<Matrix> J(Point.size());
    Analytic.Function(Params, R, &J);
    Vector RefValue;
    Reference.Function(Params, RefValue, nullptr);
    double Worst = (R - RefValue).cwiseAbs().maxCoeff();

    std::vector<Vector> Perturbed = Point;
    std::vector<const Vector *> PerturbedParams;
    for (const auto &V : Perturbed)
    {
      PerturbedParams.push_back(&V);
    }
    Vector Plus, Minus;
    for (std::size_t k = 0; k < Point.size(); ++k)
    {
      for (Eigen::Index c = 0; c < Point[k].size(); ++c)
      {
        Perturbed[k](c) = Point[k](c) + Step;
        Reference.Function(PerturbedParams, Plus, nullptr);
        Perturbed[k](c) = Point[k](c) - Step;
        Reference.Function(PerturbedParams, Minus, nullptr);
        Perturbed[k](c) = Point[k](c);
        const Vector Numeric = (Plus - Minus) / (2.0 * Step);
        for (Eigen::Index r = 0; r < Numeric.size(); ++r)
        {
          Worst = std::max(Worst, std::abs(J[k](r, c) - Numeric(r)) / std::max(1.0, std::abs(Numeric(r))));
        }
      }
    }
    return Worst;
  }

  Outcome jacobians()
  {
    const double Sigma = 0.1, Phi = 1.0, Step = 1e-6;
    const Matrix U = Matrix::Constant(1, 1, 1.0 / Sigma);
    const auto Mixture = scalarMixture({{0.7, 0.0, 0.1}, {0.3, -1.0, 0.5}});
    const std::map<std::string, RobustModel> Models{{"gaussian", RobustModel::gaussian(U)},
                                                    {"dcs", RobustModel::dcs(U, Phi)},
                                                    {"max-mixture", RobustModel::maxMixture(Mixture)},
                                                    {"sum-mixture", RobustModel::sumMixture(Mixture)}};
    std::map<std::string, double> Worst;
    std::size_t ScaledPoints = 0;
    double UnfrozenDcs = 0.0;

    std::mt19937_64 Rng(5);
    std::uniform_real_distribution<double> Pos(-10.0, 10.0), Angle(-std::numbers::pi, std::numbers::pi),
        Small(-1.0, 1.0), Positive(0.5, 20.0);
    const auto record = [&Worst](const std::string &Name, double Value)
    { Worst[Name] = std::max(Worst[Name], Value); };

    for (int i = 0; i < 100; ++i)
    {
      const Vector Pose = Eigen::Vector3d(Pos(Rng), Pos(Rng), Angle(Rng));
      const Vector Next = Eigen::Vector3d(Pos(Rng), Pos(Rng), Angle(Rng));
      const Vector Clock = Eigen::Vector2d(100.0 * Small(Rng), Small(Rng));
      const Vector NextClock = Eigen::Vector2d(100.0 * Small(Rng), Small(Rng));

      record("prior", checkJacobian({{0}, priorResidual({Pos(Rng), Pos(Rng), Angle(Rng)}, {10.0, 10.0, 100.0}), ""},
                                    {Pose}, Step));
      record("odometry", checkJacobian({{0, 1}, odometryResidual({Small(Rng), Small(Rng), Small(Rng)}, Positive(Rng) / 10.0,
                                                                 {10.0, 10.0, 20.0}), ""},
                                       {Pose, Next}, Step));
      record("clock-prior",
             checkJacobian({{0}, clockPriorResidual({Small(Rng), Small(Rng)}, {0.01, 1.0}), ""}, {Clock}, Step));
      record("cced", checkJacobian({{0, 1}, ccedResidual(Positive(Rng), {1.0, 10.0}), ""}, {Clock, NextClock}, Step));

      const Eigen::Vector2d Anchor(Pos(Rng), Pos(Rng));
      const Pose2 P = Pose2::fromVector(Pose);
      const ClockState C = ClockState::fromVector(Clock);
      const double RangeMeasured = std::hypot(P.X - Anchor.x(), P.Y - Anchor.y()) + Small(Rng);
      const double PseudoMeasured = RangeMeasured + C.Bias + Small(Rng);
      const double ErrorScale = Positive(Rng) / 10.0;

      for (const auto &[Name, Model] : Models)
      {
        const ResidualBlock Range{{0}, rangeResidual(RangeMeasured, Anchor, Model, ErrorScale), ""};
        const ResidualBlock Pseudo{{0, 1}, pseudorangeResidual(PseudoMeasured, Anchor, Model, ErrorScale), ""};
        if (Model.kind() != RobustKind::Dcs)
        {
          record("range/" + Name, checkJacobian(Range, {Pose}, Step));
          record("pseudorange/" + Name, checkJacobian(Pseudo, {Pose, Clock}, Step));
          continue;
        }
        // The scale factor is a constant of each linearization, so the reference is the same
        // residual with the scale frozen at the evaluation point.
        const auto frozen = [&](double Error)
        {
          const double Chi2 = (Error * ErrorScale / Sigma) * (Error * ErrorScale / Sigma);
          const double S = std::min(1.0, 2.0 * Phi / (Phi + Chi2));
          ScaledPoints += S < 1.0 ? 1 : 0;
          return RobustModel::gaussian(S * U);
        };
        const auto FrozenRange = frozen(errorRange(P, RangeMeasured, Anchor));
        const auto FrozenPseudo = frozen(errorPseudorange(P, C, PseudoMeasured, Anchor));
        record("range/dcs", deviationAgainst(Range, {{0}, rangeResidual(RangeMeasured, Anchor, FrozenRange, ErrorScale), ""},
                                             {Pose}, Step));
        record("pseudorange/dcs",
               deviationAgainst(Pseudo, {{0, 1}, pseudorangeResidual(PseudoMeasured, Anchor, FrozenPseudo, ErrorScale), ""},
                                {Pose, Clock}, Step));
        UnfrozenDcs = std::max(UnfrozenDcs, checkJacobian(Range, {Pose}, Step));
      }
    }
    info(5, "dcs evaluated with a scale below one at " + std::to_string(ScaledPoints) +
                " of 200 points; against differences that also vary the scale the deviation reaches " + fmt(UnfrozenDcs));

    bool Pass = true;
    std::string Detail;
    for (const auto &[Name, Value] : Worst)
    {
      Pass = Pass && Value < 1e-5;
      Detail += Name + " " + fmt(Value, 2) + ", ";
    }
    return {Pass, Detail.substr(0, Detail.size() - 2)};
  }

  double meanAte(const std::vector<AlgorithmResult> &Results, Algorithm Alg)
  {
    for (const auto &R : Results)
    {
      if (R.Alg == Alg)
      {
        return R.Ate.Mean;
      }
    }
    throw std::runtime_error("missing result for " + toString(Alg));
  }

  Outcome robustnessTrend(const std::vector<AlgorithmResult> &Results)
  {
    const double Gaussian = meanAte(Results, Algorithm::Gaussian);
    const double StaticSm = meanAte(Results, Algorithm::StaticSm);
    const double AdaptiveSm = meanAte(Results, Algorithm::AdaptiveSm);
    double Slowest = 0.0;
    std::string Detail;
    for (const auto &R : Results)
    {
      Slowest = std::max(Slowest, R.WallSeconds);
      Detail += toString(R.Alg) + " " + fmt(R.Ate.Mean) + " m (" + fmt(R.WallSeconds, 3) + " s), ";
    }
    const bool Pass = AdaptiveSm <= StaticSm && StaticSm < Gaussian && AdaptiveSm <= 0.5 * Gaussian && Slowest < 60.0;
    return {Pass, Detail.substr(0, Detail.size() - 2)};
  }

  Outcome shiftedMode(const std::vector<AlgorithmResult> &Results)
  {
    bool Pass = true;
    std::string Detail;
    for (const auto &R : Results)
    {
      if (R.Alg != Algorithm::AdaptiveMm && R.Alg != Algorithm::AdaptiveSm)
      {
        continue;
      }
      const auto &Fitted = R.Output.Steps.back().Mixture;
      if (!Fitted || Fitted->size() < 2)
      {
        return {false, toString(R.Alg) + " has no fitted two-component mixture"};
      }
      const auto &Components = Fitted->components();
      const auto &Wide = *std::max_element(Components.begin(), Components.end(),
                                           [](const auto &A, const auto &B) { return sigmaOf(A) < sigmaOf(B); });
      // Errors are predicted minus measured, so a positive range bias appears with negative mean.
      const double Shift = -Wide.Mean(0);
      Pass = Pass && std::abs(Shift - 1.0) <= 0.3;
      Detail += toString(R.Alg) + " bias " + fmt(Shift) + " m (sigma " + fmt(sigmaOf(Wide)) + ", weight " +
                fmt(Wide.Weight) + "), ";
    }
    return {Pass, Detail.substr(0, Detail.size() - 2)};
  }

  Outcome initializationBasin(const std::vector<AlgorithmResult> &Results, const Dataset &Data, ExperimentSpec Spec)
  {
    Spec.Sweep = SweepParameter::InitSigmaScale;
    Spec.SweepValues = {2.0, 5.0, 20.0, 50.0};
    Spec.SweepAlgorithms = {Algorithm::StaticMm, Algorithm::StaticSm, Algorithm::AdaptiveMm, Algorithm::AdaptiveSm};
    std::map<double, std::map<Algorithm, double>> Table;
    for (const auto &Row : runSweep(Data, Spec))
    {
      Table[Row.Value][Row.Alg] = Row.MeanAte;
    }
    for (const auto Alg : Spec.SweepAlgorithms)
    {
      Table[10.0][Alg] = meanAte(Results, Alg);
    }

    bool Pass = true;
    double Lo = INFINITY, Hi = 0.0;
    std::string Detail;
    for (const auto &[Scale, Row] : Table)
    {
      Pass = Pass && Row.at(Algorithm::AdaptiveMm) < Row.at(Algorithm::StaticMm) &&
             Row.at(Algorithm::AdaptiveSm) < Row.at(Algorithm::StaticSm);
      Lo = std::min(Lo, Row.at(Algorithm::AdaptiveSm));
      Hi = std::max(Hi, Row.at(Algorithm::AdaptiveSm));
      Detail += "x" + fmt(Scale) + ": mm " + fmt(Row.at(Algorithm::StaticMm)) + "/" + fmt(Row.at(Algorithm::AdaptiveMm)) +
                " sm " + fmt(Row.at(Algorithm::StaticSm)) + "/" + fmt(Row.at(Algorithm::AdaptiveSm)) + "; ";
    }
    Pass = Pass && Hi / Lo < 1.5;
    return {Pass, "static/adaptive " + Detail + "adaptive-sm max/min " + fmt(Hi / Lo)};
  }

  Outcome componentPlateau(const std::vector<AlgorithmResult> &Results, const Dataset &Data, ExperimentSpec Spec)
  {
    Spec.Sweep = SweepParameter::Components;
    Spec.SweepValues = {1.0, 3.0, 5.0};
    Spec.SweepAlgorithms = {Algorithm::AdaptiveSm};
    std::map<int, double> Ate{{2, meanAte(Results, Algorithm::AdaptiveSm)}};
    for (const auto &Row : runSweep(Data, Spec))
    {
      Ate[static_cast<int>(Row.Value)] = Row.MeanAte;
    }
    double Best = INFINITY;
    std::string Detail;
    for (const auto &[N, Value] : Ate)
    {
      if (N >= 2)
      {
        Best = std::min(Best, Value);
      }
      Detail += "n=" + std::to_string(N) + " " + fmt(Value) + ", ";
    }
    return {Ate.at(2) <= 1.1 * Best, Detail + "ratio to best " + fmt(Ate.at(2) / Best)};
  }

  Dataset slice(const Dataset &Data, double From, double To)
  {
    Dataset Out;
    for (const auto &R : Data.Measurements)
    {
      if (timeOf(R) > From && timeOf(R) <= To)
      {
        Out.Measurements.push_back(R);
      }
    }
    for (const auto &G : Data.GroundTruth)
    {
      if (G.Time > From && G.Time <= To)
      {
        Out.GroundTruth.push_back(G);
      }
    }
    return Out;
  }

  bool sameStep(const StepEstimate &A, const StepEstimate &B)
  {
    bool Same = A.Time == B.Time && A.Pose.X == B.Pose.X && A.Pose.Y == B.Pose.Y && A.Pose.Theta == B.Pose.Theta &&
                A.Cost == B.Cost && A.Clock.has_value() == B.Clock.has_value() &&
                A.Mixture.has_value() == B.Mixture.has_value();
    if (Same && A.Clock)
    {
      Same = A.Clock->Bias == B.Clock->Bias && A.Clock->Drift == B.Clock->Drift;
    }
    if (Same && A.Mixture)
    {
      Same = A.Mixture->toString() == B.Mixture->toString();
    }
    return Same;
  }

  std::size_t windowViolations(const EstimatorOutput &Output, double Window)
  {
    std::size_t Count = 0;
    for (const auto &S : Output.Steps)
    {
      Count += S.Time - S.OldestFactorTime > Window ? 1 : 0;
    }
    return Count;
  }

  Outcome causality(const std::vector<AlgorithmResult> &FullResults, const ExperimentSpec &Base, const fs::path &Work)
  {
    ScenarioConfig Scenario = Base.Scenario;
    Scenario.Duration = 150.0;
    const Dataset Data = generate(Scenario);
    const fs::path Path = Work / "growing.txt";
    saveDataset(slice(Data, -INFINITY, 100.0), Path.string());

    ExperimentSpec Spec = Base;
    Spec.Window = 20.0;
    const Dataset Before = loadDataset(Path.string());
    {
      std::ofstream Append(Path, std::ios::app);
      writeDataset(slice(Data, 100.0, INFINITY), Append);
    }
    const Dataset After = loadDataset(Path.string());

    std::size_t Compared = 0, Changed = 0, Violations = 0, Checked = 0;
    for (const auto Alg : allAlgorithms())
    {
      const auto Short = runAlgorithm(Before, Alg, Spec).Output;
      const auto Long = runAlgorithm(After, Alg, Spec).Output;
      if (Long.Steps.size() <= Short.Steps.size())
      {
        return {false, "appending records did not add steps"};
      }
      for (std::size_t i = 0; i < Short.Steps.size(); ++i)
      {
        ++Compared;
        Changed += sameStep(Short.Steps[i], Long.Steps[i]) ? 0 : 1;
      }
      Violations += windowViolations(Long, Spec.Window);
      Checked += Long.Steps.size();
    }
    for (const auto &R : FullResults)
    {
      Violations += windowViolations(R.Output, Base.Window);
      Checked += R.Output.Steps.size();
    }
    return {Changed == 0 && Violations == 0,
            std::to_string(Changed) + " of " + std::to_string(Compared) +
                " prefix estimates changed after appending; factor age above the window at " +
                std::to_string(Violations) + " of " + std::to_string(Checked) + " steps"};
  }

  std::string withoutTimingColumn(const std::string &Csv)
  {
    std::istringstream In(Csv);
    std::string Line, Out;
    while (std::getline(In, Line))
    {
      Out += Line.substr(0, Line.rfind(',')) + '\n';
    }
    return Out;
  }

  Outcome determinism(const ExperimentSpec &Spec, const fs::path &First, const fs::path &Second)
  {
    std::size_t Files = 0;
    std::vector<std::string> Different;
    for (const auto &Entry : fs::directory_iterator(First))
    {
      const auto Name = Entry.path().filename().string();
      if (Name == "timing.csv")
      {
        continue;
      }
      std::string A = oracle::readFile(Entry.path());
      std::string B = oracle::readFile(Second / Name);
      if (Name.ends_with("_estimates.csv"))
      {
        A = withoutTimingColumn(A);
        B = withoutTimingColumn(B);
      }
      ++Files;
      if (A != B || A.empty())
      {
        Different.push_back(Name);
      }
    }
    const bool ResultsSame =
        oracle::readFile(First / "results.csv") == oracle::readFile(Second / "results.csv") && fs::exists(First / "results.csv");
    std::string Detail = std::to_string(Files) + " output files of " + std::to_string(Spec.Algorithms.size()) +
                         " algorithms compared, " + std::to_string(Different.size()) + " differ";
    for (const auto &Name : Different)
    {
      Detail += " " + Name;
    }
    return {ResultsSame && Different.empty(), Detail};
  }
}

int main(int argc, char **argv)
{
  CLI::App App{"Acceptance checks"};
  std::string Work = "acceptance-work";
  std::vector<int> KnownFailures;
  App.add_option("--work", Work, "Scratch directory for experiment outputs");
  App.add_option("--known-failure", KnownFailures, "Criterion reported but not counted as a failure");
  CLI11_PARSE(App, argc, argv);

  fs::remove_all(Work);
  fs::create_directories(Work);
  const std::set<int> Known(KnownFailures.begin(), KnownFailures.end());
  std::vector<int> Unexpected;

  const auto report = [&](int Criterion, const std::string &Title, const std::function<Outcome()> &Check)
  {
    Outcome Result;
    try
    {
      Result = Check();
    }
    catch (const std::exception &Error)
    {
      Result = {false, std::string("exception: ") + Error.what()};
    }
    std::cout << (Result.Pass ? "PASS" : "FAIL") << " criterion " << Criterion << " (" << Title
              << "): " << Result.Detail << std::endl;
    if (!Result.Pass && !Known.contains(Criterion))
    {
      Unexpected.push_back(Criterion);
    }
    if (Result.Pass && Known.contains(Criterion))
    {
      info(Criterion, "declared as a known failure but passed");
    }
  };

  report(1, "EM monotonicity", emMonotonicity);
  report(2, "EM recovery", emRecovery);
  report(3, "single-component reduction", reductionIdentity);
  report(4, "max/sum mixture agreement", mixtureAgreement);
  report(5, "Jacobian correctness", jacobians);

  ExperimentSpec Spec;
  Spec.Scenario = scenarioPreset("uwb-like");
  Spec.Algorithms = allAlgorithms();
  Spec.OutputDirectory = (fs::path(Work) / "run-a").string();
  std::vector<AlgorithmResult> Results;
  Dataset Data;
  try
  {
    Data = experimentDataset(Spec);
    Results = commandRun(Spec);
  }
  catch (const std::exception &Error)
  {
    std::cout << "full experiment failed: " << Error.what() << std::endl;
  }
  const auto needResults = [&Results]()
  {
    if (Results.empty())
    {
      throw std::runtime_error("full experiment unavailable");
    }
  };

  report(6, "robustness trend", [&] { needResults(); return robustnessTrend(Results); });
  report(7, "shifted mode", [&] { needResults(); return shiftedMode(Results); });
  report(8, "initialization basin", [&] { needResults(); return initializationBasin(Results, Data, Spec); });
  report(9, "component count plateau", [&] { needResults(); return componentPlateau(Results, Data, Spec); });
  report(10, "causality and window", [&] { needResults(); return causality(Results, Spec, Work); });
  report(11, "determinism",
         [&]
         {
           needResults();
           ExperimentSpec Again = Spec;
           Again.OutputDirectory = (fs::path(Work) / "run-b").string();
           commandRun(Again);
           return determinism(Spec, Spec.OutputDirectory, Again.OutputDirectory);
         });

  if (!Unexpected.empty())
  {
    std::cout << Unexpected.size() << " unexpected failure(s)" << std::endl;
    return 1;
  }
  return 0;
}
