#include "robmix/metrics.hpp"
#include "robmix/config.hpp"
#include "robmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace robmix
{
  AteReport ate(const std::vector<TimedPosition> &Estimates, const std::vector<TimedPosition> &GroundTruth,
                double MatchTolerance)
  {
    if (Estimates.empty() || GroundTruth.empty())
    {
      throw ValidationError("ATE needs non-empty estimate and ground truth trajectories");
    }
    if (!(MatchTolerance >= 0.0))
    {
      throw ValidationError("ATE match tolerance must be non-negative");
    }

    std::vector<TimedPosition> Truth = GroundTruth;
    std::stable_sort(Truth.begin(), Truth.end(), [](const auto &A, const auto &B) { return A.Time < B.Time; });

    AteReport Report;
    double SquaredSum = 0.0;
    for (const auto &Estimate : Estimates)
    {
      const auto Upper = std::lower_bound(Truth.begin(), Truth.end(), Estimate.Time,
                                          [](const TimedPosition &P, double T) { return P.Time < T; });
      const TimedPosition *Best = nullptr;
      if (Upper != Truth.end())
      {
        Best = &*Upper;
      }
      if (Upper != Truth.begin())
      {
        const auto &Lower = *std::prev(Upper);
        if (Best == nullptr || std::abs(Lower.Time - Estimate.Time) <= std::abs(Best->Time - Estimate.Time))
        {
          Best = &Lower;
        }
      }
      if (Best == nullptr || std::abs(Best->Time - Estimate.Time) > MatchTolerance)
      {
        ++Report.Unmatched;
        continue;
      }
      const double Error = std::hypot(Estimate.X - Best->X, Estimate.Y - Best->Y);
      Report.Errors.push_back(Error);
      Report.Mean += Error;
      SquaredSum += Error * Error;
      Report.Max = std::max(Report.Max, Error);
    }

    Report.Matched = Report.Errors.size();
    if (Report.Matched == 0)
    {
      throw ValidationError("no estimate matched a ground truth timestamp");
    }
    Report.Mean /= static_cast<double>(Report.Matched);
    Report.Rmse = std::sqrt(SquaredSum / static_cast<double>(Report.Matched));
    return Report;
  }

  std::vector<HistogramBin> histogram(const std::vector<double> &Values, double BinWidth)
  {
    if (!(BinWidth > 0.0))
    {
      throw ValidationError("histogram bin width must be positive");
    }
    std::vector<HistogramBin> Bins;
    if (Values.empty())
    {
      return Bins;
    }
    const auto IndexOf = [BinWidth](double Value) { return static_cast<long long>(std::floor(Value / BinWidth + 0.5)); };
    const auto [Low, High] = std::minmax_element(Values.begin(), Values.end());
    const long long First = IndexOf(*Low);
    const long long Last = IndexOf(*High);
    Bins.resize(static_cast<std::size_t>(Last - First + 1));
    for (std::size_t b = 0; b < Bins.size(); ++b)
    {
      Bins[b].Center = static_cast<double>(First + static_cast<long long>(b)) * BinWidth;
    }
    for (const double Value : Values)
    {
      ++Bins[static_cast<std::size_t>(IndexOf(Value) - First)].Count;
    }
    return Bins;
  }

  std::string formatAteReport(const AteReport &Report)
  {
    std::ostringstream Out;
    Out << "metric,value\n"
        << "mean_ate," << formatDouble(Report.Mean) << '\n'
        << "rmse_ate," << formatDouble(Report.Rmse) << '\n'
        << "max_ate," << formatDouble(Report.Max) << '\n'
        << "matched," << Report.Matched << '\n'
        << "unmatched," << Report.Unmatched << '\n';
    return Out.str();
  }

  std::string formatHistogram(const std::vector<HistogramBin> &Bins)
  {
    std::ostringstream Out;
    Out << "bin_center,count\n";
    for (const auto &Bin : Bins)
    {
      Out << formatDouble(Bin.Center) << ',' << Bin.Count << '\n';
    }
    return Out.str();
  }
}
