#include "robmix/estimator.hpp"
#include "robmix/config.hpp"
#include "robmix/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace robmix
{
  namespace
  {
    void wrapPose(Vector &Value)
    {
      Value(2) = wrapAngle(Value(2));
    }
  }

  void EstimatorConfig::validate() const
  {
    if (!(Window > 0.0))
    {
      throw ValidationError("sliding window length must be positive");
    }
    if (Components < 1)
    {
      throw ValidationError("mixture needs at least one component");
    }
    if (!(SigmaScale > 0.0))
    {
      throw ValidationError("sigma scale must be positive");
    }
    if (BaseSigma && !(*BaseSigma > 0.0))
    {
      throw ValidationError("base sigma must be positive");
    }
    if (!(DcsPhi > 0.0))
    {
      throw ValidationError("DCS parameter must be positive");
    }
    if (Adaptive && MeasurementModel != RobustKind::MaxMixture && MeasurementModel != RobustKind::SumMixture)
    {
      throw ValidationError("adaptive estimation needs a Max- or Sum-Mixture model");
    }
    if (!(PriorSigma.array() > 0.0).all() || !(ClockPriorSigma.array() > 0.0).all() || !(CcedSigma.array() > 0.0).all())
    {
      throw ValidationError("prior and clock model sigmas must be positive");
    }
    Em.validate(Components);
    Solver.validate();
  }

  SlidingWindowEstimator::SlidingWindowEstimator(EstimatorConfig Config) : Config_(std::move(Config))
  {
    Config_.validate();
  }

  const GaussianMixture *SlidingWindowEstimator::initialMixture() const
  {
    return InitialMixture_ ? &*InitialMixture_ : nullptr;
  }

  const GaussianMixture *SlidingWindowEstimator::currentMixture() const
  {
    return MixtureModel_ ? MixtureModel_->mixture() : nullptr;
  }

  void SlidingWindowEstimator::ensureMixtureModel(double RecordSigma)
  {
    if (MixtureModel_ || (Config_.MeasurementModel != RobustKind::MaxMixture && Config_.MeasurementModel != RobustKind::SumMixture))
    {
      return;
    }
    const double Base = Config_.EmPrewhiten ? 1.0 : Config_.BaseSigma.value_or(RecordSigma);
    InitialMixture_ = defaultInit(Matrix::Constant(1, 1, 1.0 / Base), Config_.Components, Config_.SigmaScale);
    MixtureModel_ = Config_.MeasurementModel == RobustKind::MaxMixture ? RobustModel::maxMixture(*InitialMixture_)
                                                                       : RobustModel::sumMixture(*InitialMixture_);
  }

  std::optional<RobustModel> SlidingWindowEstimator::rangeNoise(double Sigma) const
  {
    const Matrix SqrtInfo = Matrix::Constant(1, 1, 1.0 / Sigma);
    switch (Config_.MeasurementModel)
    {
    case RobustKind::Gaussian:
      return RobustModel::gaussian(SqrtInfo);
    case RobustKind::Dcs:
      return RobustModel::dcs(SqrtInfo, Config_.DcsPhi);
    default:
      return std::nullopt;
    }
  }

  double SlidingWindowEstimator::measurementError(const Factor &F, const Node &N, Eigen::RowVector3d *WrtPose,
                                                  Eigen::RowVector2d *WrtClock) const
  {
    if (F.Kind == FactorKind::Range)
    {
      return errorRange(N.Pose, F.Measurement(0), F.Anchor, WrtPose);
    }
    return errorPseudorange(N.Pose, N.Clock, F.Measurement(0), F.Anchor, WrtPose, WrtClock);
  }

  void SlidingWindowEstimator::addMeasurementFactors(const Node &New, std::span<const MeasurementRecord> Records, bool First)
  {
    for (const auto &Record : Records)
    {
      if (const auto *Odom = std::get_if<OdometryRecord>(&Record))
      {
        if (First)
        {
          continue;
        }
        const Node &Prev = Nodes_[Nodes_.size() - 2];
        Factor F;
        F.Kind = FactorKind::Odometry;
        F.From = Prev.Id;
        F.To = New.Id;
        F.Measurement = Eigen::Vector3d(Odom->Vx, Odom->Vy, Odom->Omega);
        F.SqrtInfoDiagonal = Eigen::Vector3d(1.0 / Odom->SigmaVx, 1.0 / Odom->SigmaVy, 1.0 / Odom->SigmaOmega);
        F.Dt = New.Time - Prev.Time;
        Factors_.push_back(std::move(F));
      }
      else if (const auto *Range = std::get_if<RangeRecord>(&Record))
      {
        ensureMixtureModel(Range->Sigma);
        Factor F;
        F.Kind = FactorKind::Range;
        F.From = F.To = New.Id;
        F.Measurement = Vector::Constant(1, Range->Range);
        F.Anchor = {Range->AnchorX, Range->AnchorY};
        F.Sigma = Range->Sigma;
        F.Noise = rangeNoise(Range->Sigma);
        Factors_.push_back(std::move(F));
      }
      else if (const auto *Pseudo = std::get_if<PseudorangeRecord>(&Record))
      {
        if (!Config_.UseClock)
        {
          throw ValidationError("pseudorange measurements need clock estimation enabled");
        }
        ensureMixtureModel(Pseudo->Sigma);
        Factor F;
        F.Kind = FactorKind::Pseudorange;
        F.From = F.To = New.Id;
        F.Measurement = Vector::Constant(1, Pseudo->Range);
        F.Anchor = {Pseudo->SourceX, Pseudo->SourceY};
        F.Sigma = Pseudo->Sigma;
        F.Noise = rangeNoise(Pseudo->Sigma);
        Factors_.push_back(std::move(F));
      }
    }
  }

  void SlidingWindowEstimator::prune(double Time)
  {
    const double Horizon = Time - Config_.Window;
    while (Nodes_.size() > 1 && Nodes_.front().Time <= Horizon)
    {
      Nodes_.pop_front();
    }
    const std::uint64_t FirstId = Nodes_.front().Id;
    /* factors are stored in order of their oldest node */
    while (!Factors_.empty() && std::min(Factors_.front().From, Factors_.front().To) < FirstId)
    {
      Factors_.pop_front();
    }
  }

  void SlidingWindowEstimator::adaptMixture()
  {
    std::vector<double> Errors;
    for (const auto &F : Factors_)
    {
      if (F.Kind != FactorKind::Range && F.Kind != FactorKind::Pseudorange)
      {
        continue;
      }
      double E = measurementError(F, Nodes_[nodeIndex(F.From)], nullptr, nullptr);
      if (Config_.EmPrewhiten)
      {
        E /= F.Sigma;
      }
      Errors.push_back(E);
    }
    if (Errors.size() < std::max(Config_.MinEmSamples, Config_.Components))
    {
      MixtureModel_->setMixture(*InitialMixture_);
      return;
    }
    const Matrix Samples = Eigen::Map<const Matrix>(Errors.data(), static_cast<Eigen::Index>(Errors.size()), 1);
    const GaussianMixture &Start = Config_.EmWarmStart ? *MixtureModel_->mixture() : *InitialMixture_;
    EmConfig Em = Config_.Em;
    if (!Em.CovRegularizer)
    {
      Em.CovRegularizer = 1e-6 * InitialMixture_->component(0).covariance()(0, 0);
    }
    try
    {
      MixtureModel_->setMixture(fitEm(Samples, Start, Em).Mixture);
    }
    catch (const NumericError &)
    {
      MixtureModel_->setMixture(*InitialMixture_);
    }
  }

  const StepEstimate &SlidingWindowEstimator::step(double Time, std::span<const MeasurementRecord> Records)
  {
    if (!std::isfinite(Time))
    {
      throw ValidationError("step time must be finite");
    }
    if (!Nodes_.empty() && !(Time > Nodes_.back().Time))
    {
      throw ValidationError("step times must be strictly increasing");
    }
    for (const auto &Record : Records)
    {
      if (timeOf(Record) != Time)
      {
        throw ValidationError("all records of a step must carry the step time");
      }
    }

    const auto Started = std::chrono::steady_clock::now();
    const bool First = Nodes_.empty();

    Node New;
    New.Id = NextId_++;
    New.Time = Time;
    if (First)
    {
      New.Pose = Config_.InitialPose.value_or(Pose2{});
      New.Pose.Theta = wrapAngle(New.Pose.Theta);
      if (Config_.UseClock)
      {
        double BiasSum = 0.0;
        int Count = 0;
        for (const auto &Record : Records)
        {
          if (const auto *Pseudo = std::get_if<PseudorangeRecord>(&Record))
          {
            BiasSum += Pseudo->Range - std::hypot(New.Pose.X - Pseudo->SourceX, New.Pose.Y - Pseudo->SourceY);
            ++Count;
          }
        }
        New.Clock = {Count > 0 ? BiasSum / Count : 0.0, 0.0};
      }
    }
    else
    {
      const Node &Prev = Nodes_.back();
      const double Dt = Time - Prev.Time;
      New.Pose = Prev.Pose;
      for (const auto &Record : Records)
      {
        if (const auto *Odom = std::get_if<OdometryRecord>(&Record))
        {
          const double C = std::cos(Prev.Pose.Theta);
          const double S = std::sin(Prev.Pose.Theta);
          New.Pose.X = Prev.Pose.X + (C * Odom->Vx - S * Odom->Vy) * Dt;
          New.Pose.Y = Prev.Pose.Y + (S * Odom->Vx + C * Odom->Vy) * Dt;
          New.Pose.Theta = wrapAngle(Prev.Pose.Theta + Odom->Omega * Dt);
          break;
        }
      }
      New.Clock = {Prev.Clock.Bias + Prev.Clock.Drift * Dt, Prev.Clock.Drift};
    }
    Nodes_.push_back(New);

    if (First)
    {
      Factor Prior;
      Prior.Kind = FactorKind::Prior;
      Prior.From = Prior.To = New.Id;
      Prior.Measurement = New.Pose.vector();
      Prior.SqrtInfoDiagonal = Config_.PriorSigma.cwiseInverse();
      Factors_.push_back(Prior);
      if (Config_.UseClock)
      {
        Factor ClockPrior;
        ClockPrior.Kind = FactorKind::Cced;
        ClockPrior.From = ClockPrior.To = New.Id;
        ClockPrior.Measurement = New.Clock.vector();
        ClockPrior.SqrtInfoDiagonal = Config_.ClockPriorSigma.cwiseInverse();
        ClockPrior.Dt = 0.0;
        Factors_.push_back(ClockPrior);
      }
    }
    else if (Config_.UseClock)
    {
      const Node &Prev = Nodes_[Nodes_.size() - 2];
      Factor Clock;
      Clock.Kind = FactorKind::Cced;
      Clock.From = Prev.Id;
      Clock.To = New.Id;
      Clock.SqrtInfoDiagonal = Config_.CcedSigma.cwiseInverse();
      Clock.Dt = Time - Prev.Time;
      Factors_.push_back(Clock);
    }
    addMeasurementFactors(New, Records, First);

    prune(Time);

    if (Config_.Adaptive && MixtureModel_)
    {
      adaptMixture();
    }

    /* assemble the window problem */
    LeastSquaresProblem Problem;
    std::vector<std::size_t> PoseBlock(Nodes_.size());
    std::vector<std::size_t> ClockBlock(Nodes_.size());
    for (std::size_t i = 0; i < Nodes_.size(); ++i)
    {
      PoseBlock[i] = Problem.addParameterBlock("pose" + std::to_string(Nodes_[i].Id), Nodes_[i].Pose.vector(), wrapPose);
      if (Config_.UseClock)
      {
        ClockBlock[i] = Problem.addParameterBlock("clock" + std::to_string(Nodes_[i].Id), Nodes_[i].Clock.vector());
      }
    }

    const RobustModel *MixtureModel = MixtureModel_ ? &*MixtureModel_ : nullptr;
    const bool Prewhiten = Config_.EmPrewhiten;

    for (const auto &F : Factors_)
    {
      const std::size_t A = nodeIndex(F.From);
      const std::size_t B = nodeIndex(F.To);
      switch (F.Kind)
      {
      case FactorKind::Prior:
        Problem.addResidualBlock({PoseBlock[A]}, priorResidual(F.Measurement, F.SqrtInfoDiagonal),
                                 "prior@" + std::to_string(Nodes_[A].Id));
        break;

      case FactorKind::Odometry:
        Problem.addResidualBlock({PoseBlock[A], PoseBlock[B]},
                                 odometryResidual(F.Measurement, F.Dt, F.SqrtInfoDiagonal),
                                 "odometry@" + std::to_string(Nodes_[B].Id));
        break;

      case FactorKind::Cced:
        if (F.From == F.To)
        {
          Problem.addResidualBlock({ClockBlock[A]}, clockPriorResidual(F.Measurement, F.SqrtInfoDiagonal),
                                   "clkprior@" + std::to_string(Nodes_[A].Id));
        }
        else
        {
          Problem.addResidualBlock({ClockBlock[A], ClockBlock[B]}, ccedResidual(F.Dt, F.SqrtInfoDiagonal),
                                   "cced@" + std::to_string(Nodes_[B].Id));
        }
        break;

      case FactorKind::Range:
      case FactorKind::Pseudorange:
      {
        const RobustModel &Noise = F.Noise ? *F.Noise : *MixtureModel;
        const double Scale = F.Noise || !Prewhiten ? 1.0 : 1.0 / F.Sigma;
        const Eigen::Vector2d &Anchor = F.Anchor;
        if (F.Kind == FactorKind::Pseudorange)
        {
          Problem.addResidualBlock({PoseBlock[A], ClockBlock[A]},
                                   pseudorangeResidual(F.Measurement(0), Anchor, Noise, Scale),
                                   "pseudorange@" + std::to_string(Nodes_[A].Id));
        }
        else
        {
          Problem.addResidualBlock({PoseBlock[A]}, rangeResidual(F.Measurement(0), Anchor, Noise, Scale),
                                   "range@" + std::to_string(Nodes_[A].Id));
        }
        break;
      }
      }
    }

    const SolveReport Report = solve(Problem, Config_.Solver);

    StepEstimate Out;
    Out.Time = Time;
    Out.SolverIterations = Report.Iterations;
    Out.SolverTermination = Report.Reason;
    Out.SolverFailed = !Report.successful();
    Out.Cost = Out.SolverFailed ? Report.InitialCost : Report.FinalCost;
    if (!Out.SolverFailed)
    {
      for (std::size_t i = 0; i < Nodes_.size(); ++i)
      {
        Nodes_[i].Pose = Pose2::fromVector(Problem.value(PoseBlock[i]));
        if (Config_.UseClock)
        {
          Nodes_[i].Clock = ClockState::fromVector(Problem.value(ClockBlock[i]));
        }
      }
    }

    const Node &Latest = Nodes_.back();
    Out.Pose = Latest.Pose;
    if (Config_.UseClock)
    {
      Out.Clock = Latest.Clock;
    }
    if (const auto *Mixture = currentMixture())
    {
      Out.Mixture = *Mixture;
    }
    Out.WindowNodes = Nodes_.size();
    Out.WindowFactors = Factors_.size();
    Out.OldestFactorTime = Latest.Time;
    for (const auto &F : Factors_)
    {
      Out.OldestFactorTime = std::min(Out.OldestFactorTime, Nodes_[nodeIndex(std::min(F.From, F.To))].Time);
    }
    Out.SolveMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - Started).count();

    History_.push_back(std::move(Out));
    return History_.back();
  }

  EstimatorOutput runEstimator(const Dataset &Data, EstimatorConfig Config)
  {
    if (Data.Measurements.empty())
    {
      throw ValidationError("dataset has no measurements to estimate from");
    }
    if (Data.hasPseudoranges())
    {
      Config.UseClock = true;
    }
    if (!Config.InitialPose && !Data.GroundTruth.empty())
    {
      const double Start = timeOf(Data.Measurements.front());
      const auto Nearest = std::min_element(Data.GroundTruth.begin(), Data.GroundTruth.end(),
                                            [Start](const auto &A, const auto &B)
                                            { return std::abs(A.Time - Start) < std::abs(B.Time - Start); });
      Config.InitialPose = Pose2{Nearest->X, Nearest->Y, Nearest->Theta};
    }

    SlidingWindowEstimator Estimator(std::move(Config));
    EstimatorOutput Output;
    std::size_t Begin = 0;
    while (Begin < Data.Measurements.size())
    {
      const double Time = timeOf(Data.Measurements[Begin]);
      std::size_t End = Begin;
      while (End < Data.Measurements.size() && timeOf(Data.Measurements[End]) == Time)
      {
        ++End;
      }
      Estimator.step(Time, std::span<const MeasurementRecord>(Data.Measurements.data() + Begin, End - Begin));
      Begin = End;
    }
    Output.Steps = Estimator.history();
    return Output;
  }

  std::string formatEstimates(const EstimatorOutput &Output)
  {
    std::ostringstream Out;
    Out << "t,x,y,theta,b,b_dot,cost,solve_ms\n";
    for (const auto &S : Output.Steps)
    {
      Out << formatDouble(S.Time) << ',' << formatDouble(S.Pose.X) << ',' << formatDouble(S.Pose.Y) << ','
          << formatDouble(S.Pose.Theta) << ',';
      if (S.Clock)
      {
        Out << formatDouble(S.Clock->Bias) << ',' << formatDouble(S.Clock->Drift);
      }
      else
      {
        Out << ',';
      }
      Out << ',' << formatDouble(S.Cost) << ',' << formatDouble(S.SolveMs) << '\n';
    }
    return Out.str();
  }

  std::string formatMixtureTrace(const EstimatorOutput &Output)
  {
    std::ostringstream Out;
    Out << "t,component,weight,mean,sqrt_info\n";
    for (const auto &S : Output.Steps)
    {
      if (!S.Mixture)
      {
        continue;
      }
      for (std::size_t j = 0; j < S.Mixture->size(); ++j)
      {
        const auto &C = S.Mixture->component(j);
        Out << formatDouble(S.Time) << ',' << j << ',' << formatDouble(C.Weight) << ',' << formatDouble(C.Mean(0)) << ','
            << formatDouble(C.SqrtInfo(0, 0)) << '\n';
      }
    }
    return Out.str();
  }
}
