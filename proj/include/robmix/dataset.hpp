#pragma once

#include "robmix/config.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace robmix
{
  /** `odom2 <t> <vx> <vy> <omega> <sx> <sy> <somega>` */
  struct OdometryRecord
  {
    double Time = 0.0;
    double Vx = 0.0;
    double Vy = 0.0;
    double Omega = 0.0;
    double SigmaVx = 0.0;
    double SigmaVy = 0.0;
    double SigmaOmega = 0.0;
  };

  /** `range2 <t> <z> <sigma> <lx> <ly> <id>` */
  struct RangeRecord
  {
    double Time = 0.0;
    double Range = 0.0;
    double Sigma = 0.0;
    double AnchorX = 0.0;
    double AnchorY = 0.0;
    std::int64_t Id = 0;
  };

  /** `pseudorange2 <t> <z> <sigma> <sx> <sy> <id>` */
  struct PseudorangeRecord
  {
    double Time = 0.0;
    double Range = 0.0;
    double Sigma = 0.0;
    double SourceX = 0.0;
    double SourceY = 0.0;
    std::int64_t Id = 0;
  };

  using MeasurementRecord = std::variant<OdometryRecord, RangeRecord, PseudorangeRecord>;

  double timeOf(const MeasurementRecord &Record);

  /** `gt2 <t> <x> <y> <theta>` */
  struct GroundTruthPose
  {
    double Time = 0.0;
    double X = 0.0;
    double Y = 0.0;
    double Theta = 0.0;
  };

  struct Dataset
  {
    /** Sorted by time; records with equal timestamps keep file order. */
    std::vector<MeasurementRecord> Measurements;
    std::vector<GroundTruthPose> GroundTruth;
    /** Comment lines without the leading `#`, written back as a header. */
    std::vector<std::string> Comments;

    bool hasPseudoranges() const;
    /** Distinct measurement timestamps in ascending order. */
    std::vector<double> timestamps() const;
  };

  /** Throws ValidationError with the offending line number for malformed input. */
  Dataset parseDataset(std::istream &Stream);
  Dataset loadDataset(const std::string &Path);
  void writeDataset(const Dataset &Data, std::ostream &Stream);
  void saveDataset(const Dataset &Data, const std::string &Path);

  enum class ScenarioMode
  {
    Range,
    Pseudorange
  };

  /** Synthetic scenario with Gaussian inliers and a biased, wider outlier population. */
  struct ScenarioConfig
  {
    std::string Preset = "custom";
    ScenarioMode Mode = ScenarioMode::Range;
    std::uint64_t Seed = 1;
    double Dt = 0.1;
    double Duration = 600.0;

    /** `circle` or `waypoints` */
    std::string Trajectory = "circle";
    Eigen::Vector2d CircleCenter{3.5, 3.0};
    double CircleRadius = 2.0;
    double Speed = 0.5;
    std::vector<Eigen::Vector2d> Waypoints;
    double MaxTurnRate = 1.0;

    std::vector<Eigen::Vector2d> Anchors;
    /** 0 or >= number of anchors: every anchor each step, otherwise round robin. */
    int RangesPerStep = 1;

    double InlierSigma = 0.1;
    double Contamination = 0.3;
    double OutlierMean = 1.0;
    double OutlierSigma = 0.5;

    Eigen::Vector3d OdometrySigma{0.01, 0.01, 0.01};

    double ClockBias = 0.0;
    double ClockDrift = 0.0;
    Eigen::Vector2d ClockNoise{0.1, 0.009};

    void validate() const;
    /** Flat `key=value` rendering that parses back into the same config. */
    std::string toKeyValue() const;
  };

  /** Named presets: `uwb-like`, `uwb-clean`, `gnss-like`. */
  ScenarioConfig scenarioPreset(const std::string &Name);

  /** Starts from `preset` (default uwb-like) and applies the remaining keys. */
  ScenarioConfig scenarioFromConfig(const KeyValueConfig &Config);
  /** Every key scenarioFromConfig understands. */
  const std::vector<std::string> &scenarioConfigKeys();

  struct GeneratedScenario
  {
    Dataset Data;
    /** Per range/pseudorange measurement in dataset order: drawn from the outlier population. */
    std::vector<bool> OutlierFlags;
    /** Measurement error (measured minus true) of each range/pseudorange measurement. */
    std::vector<double> RangeErrors;
  };

  GeneratedScenario generateScenario(const ScenarioConfig &Config);
  Dataset generate(const ScenarioConfig &Config);
}
