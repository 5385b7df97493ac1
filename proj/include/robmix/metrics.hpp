#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace robmix
{
  struct TimedPosition
  {
    double Time = 0.0;
    double X = 0.0;
    double Y = 0.0;
  };

  /** Absolute trajectory error in the XY-plane, no alignment. */
  struct AteReport
  {
    std::vector<double> Errors;
    double Mean = 0.0;
    double Rmse = 0.0;
    double Max = 0.0;
    std::size_t Matched = 0;
    std::size_t Unmatched = 0;
  };

  /**
   * Matches every estimate to the nearest ground truth timestamp within `MatchTolerance`;
   * estimates without a partner are counted and skipped. Throws ValidationError when nothing matches.
   */
  AteReport ate(const std::vector<TimedPosition> &Estimates, const std::vector<TimedPosition> &GroundTruth,
                double MatchTolerance);

  struct HistogramBin
  {
    double Center = 0.0;
    std::size_t Count = 0;
  };

  /** Bins are centered on integer multiples of `BinWidth` and contiguous from the lowest to the highest sample. */
  std::vector<HistogramBin> histogram(const std::vector<double> &Values, double BinWidth);

  /** `metric,value` rows. */
  std::string formatAteReport(const AteReport &Report);
  /** `bin_center,count` rows. */
  std::string formatHistogram(const std::vector<HistogramBin> &Bins);
}
