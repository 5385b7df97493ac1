#include "robmix/dataset.hpp"
#include "robmix/error.hpp"
#include "robmix/factors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace robmix
{
  namespace
  {
    std::int64_t parseId(const std::string &Token)
    {
      const double Value = parseDouble(Token);
      if (Value != std::floor(Value) || std::abs(Value) > 9.0e15)
      {
        throw ValidationError("identifier must be an integer: '" + Token + "'");
      }
      return static_cast<std::int64_t>(Value);
    }

    std::string formatPoints(const std::vector<Eigen::Vector2d> &Points)
    {
      std::string Text;
      for (std::size_t i = 0; i < Points.size(); ++i)
      {
        if (i > 0)
        {
          Text += ';';
        }
        Text += formatDouble(Points[i](0)) + "," + formatDouble(Points[i](1));
      }
      return Text;
    }

    std::vector<Eigen::Vector2d> parsePoints(const std::string &Key, const std::string &Text)
    {
      std::vector<Eigen::Vector2d> Points;
      for (const auto &Item : split(Text, ';'))
      {
        if (Item.empty())
        {
          continue;
        }
        const auto Coordinates = split(Item, ',');
        if (Coordinates.size() != 2)
        {
          throw ValidationError("config key '" + Key + "': expected 'x,y;x,y;...', got '" + Text + "'");
        }
        Points.emplace_back(parseDouble(Coordinates[0]), parseDouble(Coordinates[1]));
      }
      return Points;
    }

    template <int N>
    Eigen::Matrix<double, N, 1> parseFixed(const KeyValueConfig &Config, const std::string &Key,
                                           const Eigen::Matrix<double, N, 1> &Default)
    {
      if (!Config.has(Key))
      {
        return Default;
      }
      const auto Values = Config.getDoubleList(Key);
      if (Values.size() != static_cast<std::size_t>(N))
      {
        throw ValidationError("config key '" + Key + "' needs " + std::to_string(N) + " comma separated values");
      }
      return Eigen::Map<const Eigen::Matrix<double, N, 1>>(Values.data());
    }
  }

  double timeOf(const MeasurementRecord &Record)
  {
    return std::visit([](const auto &R) { return R.Time; }, Record);
  }

  bool Dataset::hasPseudoranges() const
  {
    return std::any_of(Measurements.begin(), Measurements.end(),
                       [](const auto &Record) { return std::holds_alternative<PseudorangeRecord>(Record); });
  }

  std::vector<double> Dataset::timestamps() const
  {
    std::vector<double> Times;
    for (const auto &Record : Measurements)
    {
      const double T = timeOf(Record);
      if (Times.empty() || Times.back() != T)
      {
        Times.push_back(T);
      }
    }
    return Times;
  }

  Dataset parseDataset(std::istream &Stream)
  {
    Dataset Data;
    std::string Line;
    int LineNumber = 0;
    while (std::getline(Stream, Line))
    {
      ++LineNumber;
      const std::string Clean = trim(Line);
      if (Clean.empty())
      {
        continue;
      }
      if (Clean.front() == '#')
      {
        Data.Comments.push_back(trim(Clean.substr(1)));
        continue;
      }

      std::istringstream Tokens(Clean);
      std::vector<std::string> Fields;
      std::string Token;
      while (Tokens >> Token)
      {
        Fields.push_back(Token);
      }
      const std::string &Kind = Fields.front();
      const auto Fail = [&](const std::string &Why)
      { return ValidationError("dataset line " + std::to_string(LineNumber) + ": " + Why); };
      const auto Expect = [&](std::size_t Count)
      {
        if (Fields.size() != Count + 1)
        {
          throw Fail("'" + Kind + "' needs " + std::to_string(Count) + " values, got " + std::to_string(Fields.size() - 1));
        }
      };

      try
      {
        if (Kind == "odom2")
        {
          Expect(7);
          OdometryRecord R{parseDouble(Fields[1]), parseDouble(Fields[2]), parseDouble(Fields[3]), parseDouble(Fields[4]),
                           parseDouble(Fields[5]), parseDouble(Fields[6]), parseDouble(Fields[7])};
          if (!(R.SigmaVx > 0.0 && R.SigmaVy > 0.0 && R.SigmaOmega > 0.0))
          {
            throw Fail("odometry sigmas must be positive");
          }
          Data.Measurements.emplace_back(R);
        }
        else if (Kind == "range2" || Kind == "pseudorange2")
        {
          Expect(6);
          const double T = parseDouble(Fields[1]);
          const double Z = parseDouble(Fields[2]);
          const double Sigma = parseDouble(Fields[3]);
          const double Lx = parseDouble(Fields[4]);
          const double Ly = parseDouble(Fields[5]);
          const auto Id = parseId(Fields[6]);
          if (!(Sigma > 0.0))
          {
            throw Fail("range sigma must be positive");
          }
          if (Kind == "range2")
          {
            Data.Measurements.emplace_back(RangeRecord{T, Z, Sigma, Lx, Ly, Id});
          }
          else
          {
            Data.Measurements.emplace_back(PseudorangeRecord{T, Z, Sigma, Lx, Ly, Id});
          }
        }
        else if (Kind == "gt2")
        {
          Expect(4);
          Data.GroundTruth.push_back({parseDouble(Fields[1]), parseDouble(Fields[2]), parseDouble(Fields[3]), parseDouble(Fields[4])});
        }
        else
        {
          throw Fail("unknown record kind '" + Kind + "'");
        }
      }
      catch (const ValidationError &Error)
      {
        const std::string What = Error.what();
        if (What.rfind("dataset line", 0) == 0)
        {
          throw;
        }
        throw Fail(What);
      }

      const double T = Kind == "gt2" ? Data.GroundTruth.back().Time : timeOf(Data.Measurements.back());
      if (!std::isfinite(T))
      {
        throw Fail("timestamp must be finite");
      }
    }

    if (Data.Measurements.empty() && Data.GroundTruth.empty())
    {
      throw ValidationError("dataset contains no records");
    }

    std::stable_sort(Data.Measurements.begin(), Data.Measurements.end(),
                     [](const auto &A, const auto &B) { return timeOf(A) < timeOf(B); });
    std::stable_sort(Data.GroundTruth.begin(), Data.GroundTruth.end(),
                     [](const auto &A, const auto &B) { return A.Time < B.Time; });
    return Data;
  }

  Dataset loadDataset(const std::string &Path)
  {
    std::ifstream File(Path);
    if (!File)
    {
      throw IoError("cannot open dataset '" + Path + "'");
    }
    return parseDataset(File);
  }

  void writeDataset(const Dataset &Data, std::ostream &Stream)
  {
    for (const auto &Comment : Data.Comments)
    {
      Stream << "# " << Comment << '\n';
    }

    /* measurements and ground truth interleaved by time, ground truth last within a timestamp */
    std::size_t g = 0;
    const auto WriteTruthUntil = [&](double Time, bool Inclusive)
    {
      while (g < Data.GroundTruth.size() &&
             (Data.GroundTruth[g].Time < Time || (Inclusive && Data.GroundTruth[g].Time == Time)))
      {
        const auto &P = Data.GroundTruth[g++];
        Stream << "gt2 " << formatDouble(P.Time) << ' ' << formatDouble(P.X) << ' ' << formatDouble(P.Y) << ' '
               << formatDouble(P.Theta) << '\n';
      }
    };

    for (std::size_t i = 0; i < Data.Measurements.size(); ++i)
    {
      const auto &Record = Data.Measurements[i];
      WriteTruthUntil(timeOf(Record), false);
      std::visit(
          [&Stream](const auto &R)
          {
            using T = std::decay_t<decltype(R)>;
            if constexpr (std::is_same_v<T, OdometryRecord>)
            {
              Stream << "odom2 " << formatDouble(R.Time) << ' ' << formatDouble(R.Vx) << ' ' << formatDouble(R.Vy) << ' '
                     << formatDouble(R.Omega) << ' ' << formatDouble(R.SigmaVx) << ' ' << formatDouble(R.SigmaVy) << ' '
                     << formatDouble(R.SigmaOmega) << '\n';
            }
            else
            {
              Stream << (std::is_same_v<T, RangeRecord> ? "range2 " : "pseudorange2 ") << formatDouble(R.Time) << ' '
                     << formatDouble(R.Range) << ' ' << formatDouble(R.Sigma) << ' ';
              if constexpr (std::is_same_v<T, RangeRecord>)
              {
                Stream << formatDouble(R.AnchorX) << ' ' << formatDouble(R.AnchorY);
              }
              else
              {
                Stream << formatDouble(R.SourceX) << ' ' << formatDouble(R.SourceY);
              }
              Stream << ' ' << R.Id << '\n';
            }
          },
          Record);
      const bool LastOfTime = i + 1 == Data.Measurements.size() || timeOf(Data.Measurements[i + 1]) != timeOf(Record);
      if (LastOfTime)
      {
        WriteTruthUntil(timeOf(Record), true);
      }
    }
    WriteTruthUntil(std::numeric_limits<double>::infinity(), true);
  }

  void saveDataset(const Dataset &Data, const std::string &Path)
  {
    std::ofstream File(Path, std::ios::binary);
    if (!File)
    {
      throw IoError("cannot write dataset '" + Path + "'");
    }
    writeDataset(Data, File);
    if (!File)
    {
      throw IoError("failed while writing dataset '" + Path + "'");
    }
  }

  void ScenarioConfig::validate() const
  {
    const auto Require = [](bool Condition, const std::string &What)
    {
      if (!Condition)
      {
        throw ValidationError("scenario: " + What);
      }
    };
    Require(Dt > 0.0 && std::isfinite(Dt), "dt must be positive");
    Require(Duration > 0.0 && std::isfinite(Duration), "duration must be positive");
    Require(Trajectory == "circle" || Trajectory == "waypoints", "trajectory must be 'circle' or 'waypoints'");
    if (Trajectory == "circle")
    {
      Require(CircleRadius > 0.0, "circle radius must be positive");
    }
    else
    {
      Require(Waypoints.size() >= 2, "waypoint trajectory needs at least two waypoints");
      Require(MaxTurnRate > 0.0, "max turn rate must be positive");
    }
    Require(Speed >= 0.0, "speed must be non-negative");
    Require(!Anchors.empty(), "at least one anchor is required");
    Require(RangesPerStep >= 0, "ranges per step must be non-negative");
    Require(InlierSigma > 0.0, "inlier sigma must be positive");
    Require(OutlierSigma > 0.0, "outlier sigma must be positive");
    Require(Contamination >= 0.0 && Contamination < 1.0, "contamination must lie in [0, 1)");
    Require((OdometrySigma.array() > 0.0).all(), "odometry sigmas must be positive");
    Require((ClockNoise.array() > 0.0).all(), "clock noise sigmas must be positive");
  }

  std::string ScenarioConfig::toKeyValue() const
  {
    std::ostringstream Out;
    Out << "preset=" << Preset << '\n'
        << "mode=" << (Mode == ScenarioMode::Range ? "range" : "pseudorange") << '\n'
        << "seed=" << Seed << '\n'
        << "dt=" << formatDouble(Dt) << '\n'
        << "duration=" << formatDouble(Duration) << '\n'
        << "trajectory=" << Trajectory << '\n'
        << "circle_center=" << formatDouble(CircleCenter(0)) << ',' << formatDouble(CircleCenter(1)) << '\n'
        << "circle_radius=" << formatDouble(CircleRadius) << '\n'
        << "speed=" << formatDouble(Speed) << '\n';
    if (!Waypoints.empty())
    {
      Out << "waypoints=" << formatPoints(Waypoints) << '\n';
    }
    Out << "max_turn_rate=" << formatDouble(MaxTurnRate) << '\n'
        << "anchors=" << formatPoints(Anchors) << '\n'
        << "ranges_per_step=" << RangesPerStep << '\n'
        << "inlier_sigma=" << formatDouble(InlierSigma) << '\n'
        << "contamination=" << formatDouble(Contamination) << '\n'
        << "outlier_mean=" << formatDouble(OutlierMean) << '\n'
        << "outlier_sigma=" << formatDouble(OutlierSigma) << '\n'
        << "odometry_sigma=" << formatDouble(OdometrySigma(0)) << ',' << formatDouble(OdometrySigma(1)) << ','
        << formatDouble(OdometrySigma(2)) << '\n'
        << "clock_bias=" << formatDouble(ClockBias) << '\n'
        << "clock_drift=" << formatDouble(ClockDrift) << '\n'
        << "clock_noise=" << formatDouble(ClockNoise(0)) << ',' << formatDouble(ClockNoise(1)) << '\n';
    return Out.str();
  }

  ScenarioConfig scenarioPreset(const std::string &Name)
  {
    ScenarioConfig Config;
    if (Name == "uwb-like" || Name == "uwb-clean")
    {
      Config.Preset = Name;
      Config.Mode = ScenarioMode::Range;
      Config.Dt = 0.1;
      Config.Duration = 600.0;
      Config.Trajectory = "circle";
      Config.CircleCenter = {3.5, 3.0};
      Config.CircleRadius = 2.0;
      Config.Speed = 0.5;
      Config.Anchors = {{0.0, 0.0}, {10.0, 0.0}, {10.0, 8.0}, {0.0, 8.0}};
      Config.RangesPerStep = 1;
      Config.InlierSigma = 0.1;
      Config.Contamination = Name == "uwb-like" ? 0.3 : 0.0;
      Config.OutlierMean = 1.0;
      Config.OutlierSigma = 0.5;
      Config.OdometrySigma = {0.01, 0.01, 0.01};
      return Config;
    }
    if (Name == "gnss-like")
    {
      Config.Preset = Name;
      Config.Mode = ScenarioMode::Pseudorange;
      Config.Dt = 1.0;
      Config.Duration = 300.0;
      Config.Trajectory = "circle";
      Config.CircleCenter = {0.0, 0.0};
      Config.CircleRadius = 200.0;
      Config.Speed = 10.0;
      Config.Anchors.clear();
      for (int k = 0; k < 8; ++k)
      {
        const double Angle = (10.0 + 45.0 * k) * std::numbers::pi / 180.0;
        Config.Anchors.emplace_back(20000.0 * std::cos(Angle), 20000.0 * std::sin(Angle));
      }
      Config.RangesPerStep = 0;
      Config.InlierSigma = 10.0;
      Config.Contamination = 0.3;
      Config.OutlierMean = 30.0;
      Config.OutlierSigma = 20.0;
      Config.OdometrySigma = {0.05, 0.03, 0.006};
      Config.ClockBias = 100.0;
      Config.ClockDrift = 0.5;
      Config.ClockNoise = {0.1, 0.009};
      return Config;
    }
    throw ValidationError("unknown scenario preset '" + Name + "' (expected uwb-like, uwb-clean or gnss-like)");
  }

  const std::vector<std::string> &scenarioConfigKeys()
  {
    static const std::vector<std::string> Keys{
        "preset",      "mode",          "seed",           "dt",           "duration",       "trajectory",
        "circle_center", "circle_radius", "speed",        "waypoints",    "max_turn_rate",  "anchors",
        "ranges_per_step", "inlier_sigma", "contamination", "outlier_mean", "outlier_sigma", "odometry_sigma",
        "clock_bias",  "clock_drift",   "clock_noise"};
    return Keys;
  }

  ScenarioConfig scenarioFromConfig(const KeyValueConfig &Config)
  {
    ScenarioConfig S = scenarioPreset(Config.getString("preset", "uwb-like"));
    if (const auto Mode = Config.getString("mode"))
    {
      if (*Mode == "range")
      {
        S.Mode = ScenarioMode::Range;
      }
      else if (*Mode == "pseudorange")
      {
        S.Mode = ScenarioMode::Pseudorange;
      }
      else
      {
        throw ValidationError("config key 'mode' must be 'range' or 'pseudorange'");
      }
    }
    S.Seed = Config.getUInt64("seed", S.Seed);
    S.Dt = Config.getDouble("dt", S.Dt);
    S.Duration = Config.getDouble("duration", S.Duration);
    S.Trajectory = Config.getString("trajectory", S.Trajectory);
    S.CircleCenter = parseFixed<2>(Config, "circle_center", S.CircleCenter);
    S.CircleRadius = Config.getDouble("circle_radius", S.CircleRadius);
    S.Speed = Config.getDouble("speed", S.Speed);
    if (const auto Text = Config.getString("waypoints"))
    {
      S.Waypoints = parsePoints("waypoints", *Text);
    }
    S.MaxTurnRate = Config.getDouble("max_turn_rate", S.MaxTurnRate);
    if (const auto Text = Config.getString("anchors"))
    {
      S.Anchors = parsePoints("anchors", *Text);
    }
    S.RangesPerStep = static_cast<int>(Config.getInt("ranges_per_step", S.RangesPerStep));
    S.InlierSigma = Config.getDouble("inlier_sigma", S.InlierSigma);
    S.Contamination = Config.getDouble("contamination", S.Contamination);
    S.OutlierMean = Config.getDouble("outlier_mean", S.OutlierMean);
    S.OutlierSigma = Config.getDouble("outlier_sigma", S.OutlierSigma);
    S.OdometrySigma = parseFixed<3>(Config, "odometry_sigma", S.OdometrySigma);
    S.ClockBias = Config.getDouble("clock_bias", S.ClockBias);
    S.ClockDrift = Config.getDouble("clock_drift", S.ClockDrift);
    S.ClockNoise = parseFixed<2>(Config, "clock_noise", S.ClockNoise);
    S.validate();
    return S;
  }

  GeneratedScenario generateScenario(const ScenarioConfig &Config)
  {
    Config.validate();

    std::mt19937_64 Rng(Config.Seed);
    std::normal_distribution<double> Normal(0.0, 1.0);
    std::uniform_real_distribution<double> Uniform(0.0, 1.0);

    GeneratedScenario Result;
    Dataset &Data = Result.Data;
    Data.Comments.push_back("robmix synthetic scenario");
    for (const auto &Line : split(Config.toKeyValue(), '\n'))
    {
      if (!Line.empty())
      {
        Data.Comments.push_back(Line);
      }
    }

    const auto Steps = static_cast<long>(std::llround(Config.Duration / Config.Dt));
    const auto NumAnchors = static_cast<int>(Config.Anchors.size());
    const int PerStep = (Config.RangesPerStep == 0 || Config.RangesPerStep >= NumAnchors) ? NumAnchors : Config.RangesPerStep;

    Pose2 Pose;
    std::size_t TargetWaypoint = 1;
    if (Config.Trajectory == "circle")
    {
      Pose = {Config.CircleCenter(0) + Config.CircleRadius, Config.CircleCenter(1), std::numbers::pi / 2.0};
    }
    else
    {
      const Eigen::Vector2d Dir = Config.Waypoints[1] - Config.Waypoints[0];
      Pose = {Config.Waypoints[0](0), Config.Waypoints[0](1), std::atan2(Dir(1), Dir(0))};
    }
    ClockState Clock{Config.ClockBias, Config.ClockDrift};

    for (long k = 0; k <= Steps; ++k)
    {
      const double Time = static_cast<double>(k) * Config.Dt;

      for (int r = 0; r < PerStep; ++r)
      {
        const auto AnchorIndex = static_cast<std::size_t>((k * PerStep + r) % NumAnchors);
        const Eigen::Vector2d &Anchor = Config.Anchors[AnchorIndex];
        const double TrueRange = std::hypot(Pose.X - Anchor(0), Pose.Y - Anchor(1));
        const bool Outlier = Uniform(Rng) < Config.Contamination;
        const double Error = Outlier ? Config.OutlierMean + Config.OutlierSigma * Normal(Rng)
                                     : Config.InlierSigma * Normal(Rng);
        Result.OutlierFlags.push_back(Outlier);
        Result.RangeErrors.push_back(Error);
        if (Config.Mode == ScenarioMode::Range)
        {
          Data.Measurements.emplace_back(RangeRecord{Time, TrueRange + Error, Config.InlierSigma, Anchor(0), Anchor(1),
                                                     static_cast<std::int64_t>(AnchorIndex)});
        }
        else
        {
          Data.Measurements.emplace_back(PseudorangeRecord{Time, TrueRange + Clock.Bias + Error, Config.InlierSigma,
                                                           Anchor(0), Anchor(1), static_cast<std::int64_t>(AnchorIndex)});
        }
      }
      Data.GroundTruth.push_back({Time, Pose.X, Pose.Y, Pose.Theta});

      if (k == Steps)
      {
        break;
      }

      /* commanded motion over [t_k, t_k+1] */
      double Speed = Config.Speed;
      double Omega = 0.0;
      if (Config.Trajectory == "circle")
      {
        Omega = Config.Speed / Config.CircleRadius;
      }
      else
      {
        Eigen::Vector2d ToTarget = Config.Waypoints[TargetWaypoint] - Eigen::Vector2d(Pose.X, Pose.Y);
        if (ToTarget.norm() <= std::max(Speed * Config.Dt, 1e-9))
        {
          TargetWaypoint = (TargetWaypoint + 1) % Config.Waypoints.size();
          ToTarget = Config.Waypoints[TargetWaypoint] - Eigen::Vector2d(Pose.X, Pose.Y);
        }
        const double Heading = wrapAngle(std::atan2(ToTarget(1), ToTarget(0)) - Pose.Theta);
        Omega = std::clamp(Heading / Config.Dt, -Config.MaxTurnRate, Config.MaxTurnRate);
      }

      const double NextTime = static_cast<double>(k + 1) * Config.Dt;
      Data.Measurements.emplace_back(OdometryRecord{NextTime,
                                                    Speed + Config.OdometrySigma(0) * Normal(Rng),
                                                    Config.OdometrySigma(1) * Normal(Rng),
                                                    Omega + Config.OdometrySigma(2) * Normal(Rng),
                                                    Config.OdometrySigma(0), Config.OdometrySigma(1), Config.OdometrySigma(2)});

      const double C = std::cos(Pose.Theta);
      const double S = std::sin(Pose.Theta);
      Pose.X += C * Speed * Config.Dt;
      Pose.Y += S * Speed * Config.Dt;
      Pose.Theta = wrapAngle(Pose.Theta + Omega * Config.Dt);

      if (Config.Mode == ScenarioMode::Pseudorange)
      {
        Clock.Bias += Clock.Drift * Config.Dt + Config.ClockNoise(0) * Normal(Rng);
        Clock.Drift += Config.ClockNoise(1) * Normal(Rng);
      }
    }

    std::stable_sort(Data.Measurements.begin(), Data.Measurements.end(),
                     [](const auto &A, const auto &B) { return timeOf(A) < timeOf(B); });
    return Result;
  }

  Dataset generate(const ScenarioConfig &Config)
  {
    return generateScenario(Config).Data;
  }
}
