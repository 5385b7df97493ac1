#include "robmix/dataset.hpp"
#include "robmix/error.hpp"
#include "robmix/factors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace robmix;

namespace
{
  Dataset parseText(const std::string &Text)
  {
    std::istringstream Stream(Text);
    return parseDataset(Stream);
  }

  std::string writeText(const Dataset &Data)
  {
    std::ostringstream Out;
    writeDataset(Data, Out);
    return Out.str();
  }

  ScenarioConfig shortScenario(const std::string &Preset, double Duration)
  {
    ScenarioConfig Config = scenarioPreset(Preset);
    Config.Duration = Duration;
    return Config;
  }
}

TEST_CASE("single range record")
{
  const Dataset Data = parseText("range2 0.0 5.0 0.1 3.0 4.0 0\n");
  REQUIRE(Data.Measurements.size() == 1);
  const auto &R = std::get<RangeRecord>(Data.Measurements[0]);
  CHECK(R.Time == 0.0);
  CHECK(R.Range == 5.0);
  CHECK(R.Sigma == 0.1);
  CHECK(R.AnchorX == 3.0);
  CHECK(R.AnchorY == 4.0);
  CHECK(R.Id == 0);
  CHECK(Data.GroundTruth.empty());
  CHECK_FALSE(Data.hasPseudoranges());
}

TEST_CASE("every record kind parses")
{
  const Dataset Data = parseText("# comment line\n"
                                 "odom2 0.1 0.5 0.0 0.25 0.01 0.01 0.02\n"
                                 "pseudorange2 0.1 20000.5 10 100 -50 7\n"
                                 "gt2 0.1 1 2 -0.5\n");
  REQUIRE(Data.Measurements.size() == 2);
  const auto &O = std::get<OdometryRecord>(Data.Measurements[0]);
  CHECK(O.Vx == 0.5);
  CHECK(O.Omega == 0.25);
  CHECK(O.SigmaOmega == 0.02);
  const auto &P = std::get<PseudorangeRecord>(Data.Measurements[1]);
  CHECK(P.Range == 20000.5);
  CHECK(P.SourceX == 100.0);
  CHECK(P.Id == 7);
  REQUIRE(Data.GroundTruth.size() == 1);
  CHECK(Data.GroundTruth[0].Theta == -0.5);
  CHECK(Data.hasPseudoranges());
  CHECK(Data.Comments == std::vector<std::string>{"comment line"});
}

TEST_CASE("malformed input is rejected with the line number")
{
  CHECK_THROWS_AS(parseText(""), ValidationError);
  CHECK_THROWS_AS(parseText("# only a comment\n"), ValidationError);
  const auto Message = [](const std::string &Text)
  {
    try
    {
      parseText(Text);
    }
    catch (const ValidationError &Error)
    {
      return std::string(Error.what());
    }
    return std::string();
  };
  CHECK(Message("range2 0 5 0.1 3 4 0\nlaser 1 2\n").find("line 2") != std::string::npos);
  CHECK(Message("range2 0 5 0.1 3 4 0\nlaser 1 2\n").find("laser") != std::string::npos);
  CHECK(Message("range2 0 5 0.1 3 4\n").find("line 1") != std::string::npos);
  CHECK(Message("range2 0 5 abc 3 4 0\n").find("line 1") != std::string::npos);
  CHECK(Message("range2 0 5 0.1 3 4 1.5\n").find("line 1") != std::string::npos);
  CHECK(Message("range2 0 5 -0.1 3 4 0\n").find("line 1") != std::string::npos);
  CHECK(Message("gt2 nan 0 0 0\n").find("line 1") != std::string::npos);
}

TEST_CASE("out-of-order records are stably sorted")
{
  const Dataset Data = parseText("range2 2.0 1 0.1 0 0 0\n"
                                 "range2 1.0 2 0.1 0 0 1\n"
                                 "range2 1.0 3 0.1 0 0 2\n"
                                 "gt2 2.0 0 0 0\n"
                                 "gt2 1.0 0 0 0\n");
  REQUIRE(Data.Measurements.size() == 3);
  CHECK(std::get<RangeRecord>(Data.Measurements[0]).Id == 1);
  CHECK(std::get<RangeRecord>(Data.Measurements[1]).Id == 2);
  CHECK(std::get<RangeRecord>(Data.Measurements[2]).Id == 0);
  CHECK(Data.GroundTruth[0].Time == 1.0);
  CHECK(Data.timestamps() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("missing and unwritable files are I/O errors")
{
  CHECK_THROWS_AS(loadDataset("no/such/dataset.txt"), IoError);
  CHECK_THROWS_AS(saveDataset(parseText("gt2 0 0 0 0\n"), "/proc/definitely/not/here.txt"), IoError);
}

TEST_CASE("generate, write and load round-trip exactly")
{
  const GeneratedScenario Scenario = generateScenario(shortScenario("gnss-like", 20.0));
  const std::string Text = writeText(Scenario.Data);
  const Dataset Back = parseText(Text);
  CHECK(writeText(Back) == Text);
  REQUIRE(Back.Measurements.size() == Scenario.Data.Measurements.size());
  for (std::size_t i = 0; i < Back.Measurements.size(); ++i)
  {
    CHECK(Back.Measurements[i].index() == Scenario.Data.Measurements[i].index());
    if (const auto *P = std::get_if<PseudorangeRecord>(&Back.Measurements[i]))
    {
      const auto &Q = std::get<PseudorangeRecord>(Scenario.Data.Measurements[i]);
      CHECK(P->Range == Q.Range);
      CHECK(P->Time == Q.Time);
    }
  }
  REQUIRE(Back.GroundTruth.size() == Scenario.Data.GroundTruth.size());
  for (std::size_t i = 0; i < Back.GroundTruth.size(); ++i)
  {
    CHECK(Back.GroundTruth[i].X == Scenario.Data.GroundTruth[i].X);
    CHECK(Back.GroundTruth[i].Theta == Scenario.Data.GroundTruth[i].Theta);
  }
  CHECK(Text.rfind("# robmix synthetic scenario", 0) == 0);
  CHECK(Text.find("preset=gnss-like") != std::string::npos);
}

TEST_CASE("generation is deterministic under the seed")
{
  ScenarioConfig Config = shortScenario("uwb-like", 30.0);
  const std::string A = writeText(generate(Config));
  CHECK(writeText(generate(Config)) == A);
  Config.Seed = 2;
  CHECK(writeText(generate(Config)) != A);
}

TEST_CASE("clean ranges have the configured spread")
{
  ScenarioConfig Config = shortScenario("uwb-clean", 1200.0);
  const GeneratedScenario Scenario = generateScenario(Config);
  REQUIRE(Scenario.RangeErrors.size() >= 10000);
  CHECK(std::abs(oracle::stddev(Scenario.RangeErrors) / Config.InlierSigma - 1.0) < 0.05);

  std::size_t k = 0;
  for (const auto &Record : Scenario.Data.Measurements)
  {
    if (const auto *R = std::get_if<RangeRecord>(&Record))
    {
      const auto &Gt = Scenario.Data.GroundTruth[static_cast<std::size_t>(std::llround(R->Time / Config.Dt))];
      const double True = std::hypot(Gt.X - R->AnchorX, Gt.Y - R->AnchorY);
      CHECK(R->Range - True == doctest::Approx(Scenario.RangeErrors[k]).epsilon(1e-9).scale(1.0));
      ++k;
    }
  }
}

TEST_CASE("contaminated ranges follow the configured mixture")
{
  const ScenarioConfig Config = scenarioPreset("uwb-like");
  const GeneratedScenario Scenario = generateScenario(Config);
  const auto M = static_cast<double>(Scenario.RangeErrors.size());
  const double Expected = (1.0 - Config.Contamination) * 0.0 + Config.Contamination * Config.OutlierMean;
  CHECK(Expected == doctest::Approx(0.30));
  CHECK(oracle::mean(Scenario.RangeErrors) == doctest::Approx(Expected).epsilon(0.03).scale(1.0));

  double Outliers = 0.0;
  for (bool Flag : Scenario.OutlierFlags)
  {
    Outliers += Flag ? 1.0 : 0.0;
  }
  const double Sd = std::sqrt(M * Config.Contamination * (1.0 - Config.Contamination));
  CHECK(std::abs(Outliers - M * Config.Contamination) < 3.0 * Sd);
}

TEST_CASE("ground truth follows the odometry kinematics without noise")
{
  for (const std::string Trajectory : {"circle", "waypoints"})
  {
    ScenarioConfig Config = shortScenario("uwb-like", 60.0);
    Config.Trajectory = Trajectory;
    Config.Waypoints = {{1.0, 1.0}, {8.0, 1.0}, {8.0, 6.0}, {1.0, 6.0}};
    Config.OdometrySigma = {1e-12, 1e-12, 1e-12};
    const Dataset Data = generate(Config);
    std::size_t k = 0;
    for (const auto &Record : Data.Measurements)
    {
      if (const auto *O = std::get_if<OdometryRecord>(&Record))
      {
        const auto &A = Data.GroundTruth[k];
        const auto &B = Data.GroundTruth[k + 1];
        CHECK(B.Time == doctest::Approx(O->Time));
        const Eigen::Vector3d E =
            errorOdometry({A.X, A.Y, A.Theta}, {B.X, B.Y, B.Theta}, {O->Vx, O->Vy, O->Omega}, B.Time - A.Time);
        CHECK(E.norm() < 1e-9);
        ++k;
      }
    }
    CHECK(k + 1 == Data.GroundTruth.size());
  }
}

TEST_CASE("pseudorange preset carries a drifting clock")
{
  const GeneratedScenario Scenario = generateScenario(shortScenario("gnss-like", 100.0));
  CHECK(Scenario.Data.hasPseudoranges());
  double First = NAN, Last = NAN;
  std::size_t k = 0;
  for (const auto &Record : Scenario.Data.Measurements)
  {
    if (const auto *P = std::get_if<PseudorangeRecord>(&Record))
    {
      const auto &Gt = Scenario.Data.GroundTruth[static_cast<std::size_t>(std::llround(P->Time))];
      const double Bias = P->Range - std::hypot(Gt.X - P->SourceX, Gt.Y - P->SourceY) - Scenario.RangeErrors[k++];
      if (std::isnan(First))
      {
        First = Bias;
      }
      Last = Bias;
    }
  }
  CHECK(First == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(Last - First == doctest::Approx(0.5 * 100.0).epsilon(0.5).scale(1.0));
}

TEST_CASE("scenario config keys")
{
  const auto Config = scenarioFromConfig(
      KeyValueConfig::parseText("preset=uwb-like\nseed=7\nduration=30\nanchors=0,0;5,0;5,5\ncontamination=0\n"));
  CHECK(Config.Seed == 7);
  CHECK(Config.Duration == 30.0);
  CHECK(Config.Anchors.size() == 3);
  CHECK(Config.Contamination == 0.0);

  const auto Back = scenarioFromConfig(KeyValueConfig::parseText(Config.toKeyValue()));
  CHECK(Back.toKeyValue() == Config.toKeyValue());
  for (const auto &Key : scenarioConfigKeys())
  {
    CHECK(!Key.empty());
  }
  CHECK_THROWS_AS(scenarioFromConfig(KeyValueConfig::parseText("preset=indoor\n")), ValidationError);
  CHECK_THROWS_AS(scenarioFromConfig(KeyValueConfig::parseText("contamination=1\n")), ValidationError);
  CHECK_THROWS_AS(scenarioFromConfig(KeyValueConfig::parseText("anchors=1,2,3\n")), ValidationError);
  CHECK_THROWS_AS(scenarioFromConfig(KeyValueConfig::parseText("mode=lidar\n")), ValidationError);
}
