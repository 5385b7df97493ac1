#pragma once

#include "robmix/dataset.hpp"
#include "robmix/factors.hpp"
#include "robmix/mixture.hpp"
#include "robmix/robust.hpp"
#include "robmix/solver.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace robmix
{
  struct EstimatorConfig
  {
    /** Factors and states older than now - Window seconds are dropped. */
    double Window = 60.0;
    /** Noise model of range and pseudorange factors. */
    RobustKind MeasurementModel = RobustKind::Gaussian;
    /** Refit the mixture with EM every step (Max-/Sum-Mixture only). */
    bool Adaptive = false;
    std::size_t Components = 2;
    /** Spread ratio between consecutive initial components. */
    double SigmaScale = 10.0;
    /** Base standard deviation of the initial mixture; unset: sigma of the first range record. */
    std::optional<double> BaseSigma;
    double DcsPhi = 1.0;
    EmConfig Em;
    /** Per-step solves start warm, so a looser cost tolerance than the solver default is enough. */
    SolverConfig Solver{.MaxIterations = 20, .ParameterTolerance = 1e-8, .FunctionTolerance = 1e-6};
    /** Start EM from the previous step's mixture instead of the initial one. */
    bool EmWarmStart = false;
    /** Feed EM with errors divided by each record's sigma instead of raw errors. */
    bool EmPrewhiten = false;
    /** Below this many window samples the initial mixture is used as is. */
    std::size_t MinEmSamples = 20;

    std::optional<Pose2> InitialPose;
    Eigen::Vector3d PriorSigma{0.1, 0.1, 0.05};
    Eigen::Vector2d ClockPriorSigma{1000.0, 10.0};
    Eigen::Vector2d CcedSigma{0.1, 0.009};
    /** Estimate clock bias and drift (required for pseudoranges). */
    bool UseClock = false;

    void validate() const;
  };

  struct StepEstimate
  {
    double Time = 0.0;
    Pose2 Pose;
    std::optional<ClockState> Clock;
    double Cost = 0.0;
    double SolveMs = 0.0;
    bool SolverFailed = false;
    int SolverIterations = 0;
    Termination SolverTermination = Termination::Converged;
    /** Mixture used in this step's optimization (mixture models only). */
    std::optional<GaussianMixture> Mixture;
    std::size_t WindowNodes = 0;
    std::size_t WindowFactors = 0;
    /** Timestamp of the oldest state any retained factor touches. */
    double OldestFactorTime = 0.0;
  };

  struct EstimatorOutput
  {
    std::vector<StepEstimate> Steps;
  };

  /**
   * Sliding-window factor graph over planar poses (and optionally receiver clock states) with
   * odometry, range, pseudorange, clock drift and prior factors.
   *
   * Every step adds one state, drops everything older than the window, refits the shared
   * range error mixture from the current residual errors when adaptive, then re-solves.
   */
  class SlidingWindowEstimator
  {
  public:
    explicit SlidingWindowEstimator(EstimatorConfig Config);

    /** All records must carry `Time`, which must be later than the previous step. */
    const StepEstimate &step(double Time, std::span<const MeasurementRecord> Records);

    std::size_t nodeCount() const { return Nodes_.size(); }
    std::size_t factorCount() const { return Factors_.size(); }
    /** The initial mixture, or null for non-mixture models. */
    const GaussianMixture *initialMixture() const;
    const GaussianMixture *currentMixture() const;
    const std::vector<StepEstimate> &history() const { return History_; }
    const EstimatorConfig &config() const { return Config_; }

  private:
    enum class FactorKind
    {
      Prior,
      Odometry,
      Range,
      Pseudorange,
      Cced
    };

    struct Node
    {
      std::uint64_t Id = 0;
      double Time = 0.0;
      Pose2 Pose;
      ClockState Clock;
    };

    struct Factor
    {
      FactorKind Kind = FactorKind::Prior;
      std::uint64_t From = 0;
      std::uint64_t To = 0;
      Vector Measurement;
      Vector SqrtInfoDiagonal;
      Eigen::Vector2d Anchor = Eigen::Vector2d::Zero();
      double Sigma = 1.0;
      double Dt = 0.0;
      /** Per-factor noise model of Gaussian and DCS range factors; mixture factors share MixtureModel_. */
      std::optional<RobustModel> Noise;
    };

    void ensureMixtureModel(double RecordSigma);
    std::optional<RobustModel> rangeNoise(double Sigma) const;
    void addMeasurementFactors(const Node &New, std::span<const MeasurementRecord> Records, bool First);
    void prune(double Time);
    void adaptMixture();
    double measurementError(const Factor &F, const Node &N, Eigen::RowVector3d *WrtPose, Eigen::RowVector2d *WrtClock) const;
    std::size_t nodeIndex(std::uint64_t Id) const { return static_cast<std::size_t>(Id - Nodes_.front().Id); }

    EstimatorConfig Config_;
    std::deque<Node> Nodes_;
    std::deque<Factor> Factors_;
    std::uint64_t NextId_ = 0;
    std::optional<GaussianMixture> InitialMixture_;
    std::optional<RobustModel> MixtureModel_;
    std::vector<StepEstimate> History_;
  };

  /** Replays a dataset step by step; each step sees only records up to its own timestamp. */
  EstimatorOutput runEstimator(const Dataset &Data, EstimatorConfig Config);

  /** `t,x,y,theta,b,b_dot,cost,solve_ms` header then one row per step; clock fields empty without a clock. */
  std::string formatEstimates(const EstimatorOutput &Output);
  /** `t,component,weight,mean,sqrt_info` rows of every step's mixture (scalar mixtures). */
  std::string formatMixtureTrace(const EstimatorOutput &Output);
}
