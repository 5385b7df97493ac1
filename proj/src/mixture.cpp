#include "robmix/mixture.hpp"
#include "robmix/config.hpp"
#include "robmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace robmix
{
  namespace
  {
    /** Responsibility mass below which a component counts as degenerate. */
    constexpr double MassFloor = 1e-10;

    void checkErrors(const Matrix &Errors, std::size_t Dimension)
    {
      if (Errors.rows() == 0)
      {
        throw ValidationError("error sample set is empty");
      }
      if (static_cast<std::size_t>(Errors.cols()) != Dimension)
      {
        throw ValidationError("error samples have dimension " + std::to_string(Errors.cols()) +
                              ", mixture has dimension " + std::to_string(Dimension));
      }
    }

    double defaultRegularizer(const GaussianMixture &Init)
    {
      const Matrix Cov = Init.component(0).covariance();
      return 1e-6 * Cov.diagonal().mean();
    }
  }

  double GaussianComponent::scaling() const
  {
    return Weight * SqrtInfo.diagonal().prod();
  }

  double GaussianComponent::logScaling() const
  {
    return std::log(Weight) + SqrtInfo.diagonal().array().log().sum();
  }

  double GaussianComponent::squaredDistance(const Vector &Error) const
  {
    if (Error.size() != Mean.size())
    {
      throw ValidationError("error dimension " + std::to_string(Error.size()) +
                            " does not match component dimension " + std::to_string(Mean.size()));
    }
    if (Mean.size() == 1)
    {
      const double Whitened = SqrtInfo(0, 0) * (Error(0) - Mean(0));
      return Whitened * Whitened;
    }
    return (SqrtInfo.triangularView<Eigen::Upper>() * (Error - Mean)).squaredNorm();
  }

  Matrix GaussianComponent::covariance() const
  {
    const Matrix Info = SqrtInfo.transpose() * SqrtInfo;
    return Info.llt().solve(Matrix::Identity(Info.rows(), Info.cols()));
  }

  void GaussianComponent::validate() const
  {
    const auto D = Mean.size();
    if (D == 0)
    {
      throw ValidationError("component has dimension zero");
    }
    if (SqrtInfo.rows() != D || SqrtInfo.cols() != D)
    {
      throw ValidationError("square root information must be " + std::to_string(D) + "x" + std::to_string(D));
    }
    if (!(Weight > 0.0 && Weight <= 1.0))
    {
      throw ValidationError("component weight must lie in (0, 1], got " + formatDouble(Weight));
    }
    if (!Mean.allFinite() || !SqrtInfo.allFinite())
    {
      throw ValidationError("component parameters must be finite");
    }
    for (Eigen::Index Row = 0; Row < D; ++Row)
    {
      if (!(SqrtInfo(Row, Row) > 0.0))
      {
        throw ValidationError("square root information needs a strictly positive diagonal");
      }
      for (Eigen::Index Col = 0; Col < Row; ++Col)
      {
        if (SqrtInfo(Row, Col) != 0.0)
        {
          throw ValidationError("square root information must be upper-triangular");
        }
      }
    }
  }

  GaussianMixture::GaussianMixture(std::vector<GaussianComponent> Components)
      : Components_(std::move(Components))
  {
    if (Components_.empty())
    {
      throw ValidationError("a mixture needs at least one component");
    }
    double WeightSum = 0.0;
    for (const auto &Component : Components_)
    {
      Component.validate();
      if (Component.dimension() != Components_.front().dimension())
      {
        throw ValidationError("all mixture components must share one dimension");
      }
      WeightSum += Component.Weight;
    }
    if (std::abs(WeightSum - 1.0) > 1e-9)
    {
      throw ValidationError("mixture weights must sum to one, got " + formatDouble(WeightSum));
    }
  }

  std::string GaussianMixture::toString() const
  {
    std::ostringstream Out;
    for (const auto &Component : Components_)
    {
      Out << formatDouble(Component.Weight);
      for (Eigen::Index i = 0; i < Component.Mean.size(); ++i)
      {
        Out << ' ' << formatDouble(Component.Mean(i));
      }
      for (Eigen::Index Row = 0; Row < Component.SqrtInfo.rows(); ++Row)
      {
        for (Eigen::Index Col = 0; Col < Component.SqrtInfo.cols(); ++Col)
        {
          Out << ' ' << formatDouble(Component.SqrtInfo(Row, Col));
        }
      }
      Out << '\n';
    }
    return Out.str();
  }

  GaussianMixture GaussianMixture::fromString(const std::string &Text)
  {
    std::vector<GaussianComponent> Components;
    std::istringstream Lines(Text);
    std::string Line;
    while (std::getline(Lines, Line))
    {
      if (trim(Line).empty())
      {
        continue;
      }
      std::vector<double> Values;
      std::istringstream Tokens(Line);
      std::string Token;
      while (Tokens >> Token)
      {
        Values.push_back(parseDouble(Token));
      }
      /* 1 + d + d^2 tokens */
      std::size_t D = 0;
      while (1 + (D + 1) + (D + 1) * (D + 1) <= Values.size())
      {
        ++D;
      }
      if (D == 0 || 1 + D + D * D != Values.size())
      {
        throw ValidationError("mixture line has " + std::to_string(Values.size()) + " values, expected 1 + d + d*d");
      }
      GaussianComponent Component;
      Component.Weight = Values[0];
      Component.Mean = Eigen::Map<const Vector>(Values.data() + 1, static_cast<Eigen::Index>(D));
      Component.SqrtInfo.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
      for (std::size_t Row = 0; Row < D; ++Row)
      {
        for (std::size_t Col = 0; Col < D; ++Col)
        {
          Component.SqrtInfo(static_cast<Eigen::Index>(Row), static_cast<Eigen::Index>(Col)) = Values[1 + D + Row * D + Col];
        }
      }
      Components.push_back(std::move(Component));
    }
    return GaussianMixture(std::move(Components));
  }

  void EmConfig::validate(std::size_t NumComponents) const
  {
    if (MaxIterations < 1)
    {
      throw ValidationError("EM needs at least one iteration");
    }
    if (!(RelTolerance > 0.0))
    {
      throw ValidationError("EM tolerance must be positive");
    }
    if (CovRegularizer && !(*CovRegularizer >= 0.0))
    {
      throw ValidationError("covariance regularizer must be non-negative");
    }
    if (!(MinWeight >= 0.0 && MinWeight < 1.0 / static_cast<double>(NumComponents)))
    {
      throw ValidationError("minimum weight must lie in [0, 1/n)");
    }
  }

  double logSumExp(const double *Values, std::size_t Count)
  {
    double Max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < Count; ++k)
    {
      Max = std::max(Max, Values[k]);
    }
    if (!std::isfinite(Max))
    {
      return Max;
    }
    double Sum = 0.0;
    for (std::size_t k = 0; k < Count; ++k)
    {
      Sum += std::exp(Values[k] - Max);
    }
    return Max + std::log(Sum);
  }

  double logComponentDensity(const GaussianComponent &Component, const Vector &Error)
  {
    return Component.logScaling() - 0.5 * Component.squaredDistance(Error);
  }

  double componentDensity(const GaussianComponent &Component, const Vector &Error)
  {
    return std::exp(logComponentDensity(Component, Error));
  }

  Responsibilities eStep(const GaussianMixture &Mixture, const Matrix &Errors)
  {
    if (Mixture.empty())
    {
      throw ValidationError("e-step needs a non-empty mixture");
    }
    checkErrors(Errors, Mixture.dimension());

    const auto M = Errors.rows();
    const auto N = static_cast<Eigen::Index>(Mixture.size());

    std::vector<double> LogScale(Mixture.size());
    for (std::size_t j = 0; j < Mixture.size(); ++j)
    {
      LogScale[j] = Mixture.component(j).logScaling();
    }

    Responsibilities Result;
    Result.Alpha.resize(M, N);
    std::vector<double> LogDensity(Mixture.size());
    Vector Sample;
    for (Eigen::Index i = 0; i < M; ++i)
    {
      Sample = Errors.row(i).transpose();
      for (Eigen::Index j = 0; j < N; ++j)
      {
        const auto &Component = Mixture.component(static_cast<std::size_t>(j));
        LogDensity[static_cast<std::size_t>(j)] = LogScale[static_cast<std::size_t>(j)] - 0.5 * Component.squaredDistance(Sample);
      }
      const double RowLog = logSumExp(LogDensity.data(), LogDensity.size());
      if (!std::isfinite(RowLog))
      {
        Result.Alpha.row(i).setConstant(1.0 / static_cast<double>(N));
        Result.UnderflowRows.push_back(static_cast<std::size_t>(i));
        continue;
      }
      for (Eigen::Index j = 0; j < N; ++j)
      {
        Result.Alpha(i, j) = std::exp(LogDensity[static_cast<std::size_t>(j)] - RowLog);
      }
      Result.LogLikelihood += RowLog;
    }
    return Result;
  }

  Matrix sqrtInfoFromCovariance(const Matrix &Covariance)
  {
    const auto D = Covariance.rows();
    Eigen::LLT<Matrix> CovFactor(Covariance);
    if (CovFactor.info() != Eigen::Success || !Covariance.allFinite())
    {
      throw NumericError("covariance is not positive definite");
    }
    const Matrix Info = CovFactor.solve(Matrix::Identity(D, D));
    Eigen::LLT<Matrix> InfoFactor(0.5 * (Info + Info.transpose()));
    if (InfoFactor.info() != Eigen::Success)
    {
      throw NumericError("information matrix is not positive definite");
    }
    Matrix Upper = InfoFactor.matrixL().transpose();
    Upper.triangularView<Eigen::StrictlyLower>().setZero();
    if (!Upper.allFinite())
    {
      throw NumericError("square root information is not finite");
    }
    return Upper;
  }

  MStepResult mStep(const Matrix &Errors, const Matrix &Alpha, const EmConfig &Config,
                    const GaussianMixture &ResetModel)
  {
    checkErrors(Errors, ResetModel.dimension());
    const auto M = Errors.rows();
    const auto D = Errors.cols();
    const auto N = static_cast<Eigen::Index>(ResetModel.size());
    if (Alpha.rows() != M || Alpha.cols() != N)
    {
      throw ValidationError("responsibility matrix has the wrong shape");
    }
    Config.validate(ResetModel.size());
    const double Regularizer = Config.CovRegularizer.value_or(defaultRegularizer(ResetModel));
    const double Floor = std::max(MassFloor, Config.MinWeight * static_cast<double>(M));

    MStepResult Result;
    std::vector<GaussianComponent> Components(static_cast<std::size_t>(N));
    for (Eigen::Index j = 0; j < N; ++j)
    {
      auto &Component = Components[static_cast<std::size_t>(j)];

      const auto Weights = Alpha.col(j);
      const double Mass = Weights.sum();
      if (!(Mass >= Floor))
      {
        Component = ResetModel.component(static_cast<std::size_t>(j));
        Result.ResetComponents.push_back(static_cast<std::size_t>(j));
        continue;
      }
      Vector Mean = Errors.transpose() * Weights / Mass;

      Matrix Cov(D, D);
      if (D == 1)
      {
        Cov(0, 0) = (Weights.array() * (Errors.col(0).array() - Mean(0)).square()).sum();
      }
      else
      {
        const Matrix Centered = Errors.rowwise() - Mean.transpose();
        Cov = Centered.transpose() * Weights.asDiagonal() * Centered;
      }
      Cov /= Mass;
      Cov.diagonal().array() += Regularizer;

      Component.Weight = Mass / static_cast<double>(M);
      Component.Mean = std::move(Mean);
      Component.SqrtInfo = sqrtInfoFromCovariance(Cov);
    }

    if (!Result.ResetComponents.empty())
    {
      double Sum = 0.0;
      for (const auto &Component : Components)
      {
        Sum += Component.Weight;
      }
      for (auto &Component : Components)
      {
        Component.Weight /= Sum;
      }
    }
    else
    {
      /* absorb rounding so the weight invariant holds exactly enough */
      double Sum = 0.0;
      for (const auto &Component : Components)
      {
        Sum += Component.Weight;
      }
      if (std::abs(Sum - 1.0) > 1e-12)
      {
        for (auto &Component : Components)
        {
          Component.Weight /= Sum;
        }
      }
    }

    Result.Mixture = GaussianMixture(std::move(Components));
    return Result;
  }

  EmResult fitEm(const Matrix &Errors, const GaussianMixture &Init, const EmConfig &Config)
  {
    if (Init.empty())
    {
      throw ValidationError("EM needs an initial mixture");
    }
    checkErrors(Errors, Init.dimension());
    if (static_cast<std::size_t>(Errors.rows()) < Init.size())
    {
      throw ValidationError("EM needs at least as many samples as components");
    }
    Config.validate(Init.size());

    EmConfig Resolved = Config;
    if (!Resolved.CovRegularizer)
    {
      Resolved.CovRegularizer = defaultRegularizer(Init);
    }

    const double Offset = -0.5 * static_cast<double>(Errors.rows() * Errors.cols()) * std::log(2.0 * std::numbers::pi);

    EmResult Result;
    Result.Mixture = Init;
    auto &Diag = Result.Diagnostics;

    Responsibilities Resp = eStep(Result.Mixture, Errors);
    Diag.UnderflowCount += Resp.UnderflowRows.size();
    Diag.LogLikelihoodTrace.push_back(Resp.LogLikelihood + Offset);

    for (int Iteration = 1; Iteration <= Resolved.MaxIterations; ++Iteration)
    {
      MStepResult Step = mStep(Errors, Resp.Alpha, Resolved, Init);
      Diag.ResetCount += Step.ResetComponents.size();
      Result.Mixture = std::move(Step.Mixture);

      const double Previous = Diag.LogLikelihoodTrace.back();
      Resp = eStep(Result.Mixture, Errors);
      Diag.UnderflowCount += Resp.UnderflowRows.size();
      const double Current = Resp.LogLikelihood + Offset;
      Diag.LogLikelihoodTrace.push_back(Current);
      Diag.Iterations = Iteration;

      const double Change = std::abs(Current - Previous) / std::max(std::abs(Current), 1e-300);
      if (Change < Resolved.RelTolerance)
      {
        break;
      }
    }
    Diag.FinalLogLikelihood = Diag.LogLikelihoodTrace.back();
    return Result;
  }

  GaussianMixture defaultInit(const Matrix &BaseSqrtInfo, std::size_t NumComponents, double Scale)
  {
    if (NumComponents < 1)
    {
      throw ValidationError("a mixture needs at least one component");
    }
    if (!(Scale > 0.0) || !std::isfinite(Scale))
    {
      throw ValidationError("component scale factor must be positive");
    }
    GaussianComponent Base;
    Base.Weight = 1.0;
    Base.Mean = Vector::Zero(BaseSqrtInfo.rows());
    Base.SqrtInfo = BaseSqrtInfo;
    Base.validate();

    std::vector<GaussianComponent> Components;
    double Factor = 1.0;
    for (std::size_t j = 0; j < NumComponents; ++j)
    {
      GaussianComponent Component = Base;
      Component.Weight = 1.0 / static_cast<double>(NumComponents);
      Component.SqrtInfo = BaseSqrtInfo * Factor;
      Components.push_back(std::move(Component));
      Factor /= Scale;
    }
    return GaussianMixture(std::move(Components));
  }

  double logLikelihood(const GaussianMixture &Mixture, const Matrix &Errors)
  {
    checkErrors(Errors, Mixture.dimension());
    const double LogNorm = -0.5 * static_cast<double>(Mixture.dimension()) * std::log(2.0 * std::numbers::pi);
    std::vector<double> Terms(Mixture.size());
    double Total = 0.0;
    Vector Sample;
    for (Eigen::Index i = 0; i < Errors.rows(); ++i)
    {
      Sample = Errors.row(i).transpose();
      for (std::size_t j = 0; j < Mixture.size(); ++j)
      {
        Terms[j] = logComponentDensity(Mixture.component(j), Sample);
      }
      Total += logSumExp(Terms.data(), Terms.size()) + LogNorm;
    }
    return Total;
  }

  std::size_t freeParameterCount(std::size_t NumComponents, std::size_t Dimension)
  {
    return NumComponents * (1 + Dimension + Dimension * (Dimension + 1) / 2) - 1;
  }

  double informationCriterion(const GaussianMixture &Mixture, const Matrix &Errors, InformationCriterion Kind)
  {
    const double L = logLikelihood(Mixture, Errors);
    const auto K = static_cast<double>(freeParameterCount(Mixture.size(), Mixture.dimension()));
    switch (Kind)
    {
    case InformationCriterion::BIC:
      return K * std::log(static_cast<double>(Errors.rows())) - 2.0 * L;
    case InformationCriterion::AIC:
      return 2.0 * K - 2.0 * L;
    }
    return 0.0;
  }
}
