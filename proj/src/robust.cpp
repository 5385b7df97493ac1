#include "robmix/robust.hpp"
#include "robmix/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace robmix
{
  namespace
  {
    void checkMixture(const GaussianMixture &Mixture, const Vector &Error)
    {
      if (Mixture.empty())
      {
        throw ValidationError("robust model needs a non-empty mixture");
      }
      if (static_cast<std::size_t>(Error.size()) != Mixture.dimension())
      {
        throw ValidationError("error dimension " + std::to_string(Error.size()) +
                              " does not match mixture dimension " + std::to_string(Mixture.dimension()));
      }
    }

    void checkSquare(const Matrix &SqrtInfo, const Vector &Error)
    {
      if (SqrtInfo.rows() != Error.size() || SqrtInfo.cols() != Error.size())
      {
        throw ValidationError("square root information does not match error dimension");
      }
    }

    /** Per-component scratch values; mixtures are small, so this stays on the stack. */
    class Scratch
    {
    public:
      explicit Scratch(std::size_t Size)
      {
        if (Size > Local_.size())
        {
          Heap_.resize(Size);
        }
      }
      double *data() { return Heap_.empty() ? Local_.data() : Heap_.data(); }

    private:
      std::array<double, 16> Local_{};
      std::vector<double> Heap_;
    };

    /** Per-component -ln c_j + 0.5 q_j. */
    void branchCosts(const GaussianMixture &Mixture, const Vector &Error, double *Costs)
    {
      for (std::size_t j = 0; j < Mixture.size(); ++j)
      {
        const auto &Component = Mixture.component(j);
        Costs[j] = -Component.logScaling() + 0.5 * Component.squaredDistance(Error);
      }
    }
  }

  ResidualEvaluation residualGaussian(const Matrix &SqrtInfo, const Vector &Mean, const Vector &Error)
  {
    checkSquare(SqrtInfo, Error);
    if (Mean.size() != Error.size())
    {
      throw ValidationError("mean does not match error dimension");
    }
    ResidualEvaluation Result;
    Result.Residual = SqrtInfo * (Error - Mean);
    Result.Jacobian = SqrtInfo;
    return Result;
  }

  double maxMixtureNormalization(const GaussianMixture &Mixture)
  {
    double Gamma = 0.0;
    for (const auto &Component : Mixture.components())
    {
      Gamma = std::max(Gamma, Component.scaling());
    }
    return Gamma;
  }

  double sumMixtureNormalization(const GaussianMixture &Mixture)
  {
    double Gamma = 0.0;
    for (const auto &Component : Mixture.components())
    {
      Gamma += Component.scaling();
    }
    return Gamma;
  }

  double maxMixtureNegLogLikelihood(const GaussianMixture &Mixture, const Vector &Error)
  {
    checkMixture(Mixture, Error);
    Scratch Costs(Mixture.size());
    branchCosts(Mixture, Error, Costs.data());
    return *std::min_element(Costs.data(), Costs.data() + Mixture.size());
  }

  double sumMixtureNegLogLikelihood(const GaussianMixture &Mixture, const Vector &Error)
  {
    checkMixture(Mixture, Error);
    Scratch Terms(Mixture.size());
    branchCosts(Mixture, Error, Terms.data());
    for (std::size_t j = 0; j < Mixture.size(); ++j)
    {
      Terms.data()[j] = -Terms.data()[j];
    }
    return -logSumExp(Terms.data(), Mixture.size());
  }

  ResidualEvaluation residualMaxMixture(const GaussianMixture &Mixture, const Vector &Error)
  {
    checkMixture(Mixture, Error);
    Scratch Buffer(Mixture.size());
    double *Costs = Buffer.data();
    branchCosts(Mixture, Error, Costs);

    std::size_t Active = 0;
    for (std::size_t j = 1; j < Mixture.size(); ++j)
    {
      if (Costs[j] < Costs[Active])
      {
        Active = j;
      }
    }

    /* ln(gamma_m) = max_j ln(c_j) */
    double LogGamma = -std::numeric_limits<double>::infinity();
    for (const auto &Component : Mixture.components())
    {
      LogGamma = std::max(LogGamma, Component.logScaling());
    }

    const auto &Component = Mixture.component(Active);
    const auto D = static_cast<Eigen::Index>(Mixture.dimension());

    ResidualEvaluation Result;
    Result.ActiveComponent = Active;
    Result.Residual.resize(D + 1);
    Result.Residual(0) = std::sqrt(std::max(0.0, -2.0 * (Component.logScaling() - LogGamma)));
    Result.Residual.tail(D) = Component.SqrtInfo * (Error - Component.Mean);
    Result.Jacobian = Matrix::Zero(D + 1, D);
    Result.Jacobian.bottomRows(D) = Component.SqrtInfo;
    return Result;
  }

  ResidualEvaluation residualSumMixture(const GaussianMixture &Mixture, const Vector &Error)
  {
    checkMixture(Mixture, Error);
    const std::size_t N = Mixture.size();
    const auto D = static_cast<Eigen::Index>(Mixture.dimension());

    /* ln(c_j / gamma_s) - 0.5 q_j */
    Scratch TermBuffer(N);
    Scratch ScaleBuffer(N);
    double *LogTerms = TermBuffer.data();
    double *LogScale = ScaleBuffer.data();
    for (std::size_t j = 0; j < N; ++j)
    {
      LogScale[j] = Mixture.component(j).logScaling();
    }
    const double LogGamma = logSumExp(LogScale, N);
    for (std::size_t j = 0; j < N; ++j)
    {
      LogTerms[j] = LogScale[j] - LogGamma - 0.5 * Mixture.component(j).squaredDistance(Error);
    }
    const double LogSum = logSumExp(LogTerms, N);
    const double NegLog = std::max(-LogSum, SumMixtureFloor);

    ResidualEvaluation Result;
    Result.Residual.resize(1);
    Result.Residual(0) = std::sqrt(2.0 * NegLog);

    /* dL/de = sum_j alpha_j U_j^T U_j (e - mu_j) */
    if (D == 1)
    {
      double Gradient = 0.0;
      for (std::size_t j = 0; j < N; ++j)
      {
        const auto &Component = Mixture.component(j);
        const double Info = Component.SqrtInfo(0, 0) * Component.SqrtInfo(0, 0);
        Gradient += std::exp(LogTerms[j] - LogSum) * Info * (Error(0) - Component.Mean(0));
      }
      Result.Jacobian.resize(1, 1);
      Result.Jacobian(0, 0) = Gradient / Result.Residual(0);
      return Result;
    }
    Vector Gradient = Vector::Zero(D);
    for (std::size_t j = 0; j < N; ++j)
    {
      const double Alpha = std::exp(LogTerms[j] - LogSum);
      if (Alpha == 0.0)
      {
        continue;
      }
      const auto &Component = Mixture.component(j);
      Gradient += Alpha * (Component.SqrtInfo.transpose() * (Component.SqrtInfo * (Error - Component.Mean)));
    }
    Result.Jacobian = Gradient.transpose() / Result.Residual(0);
    return Result;
  }

  ResidualEvaluation residualDcs(const Matrix &SqrtInfo, const Vector &Error, double Phi)
  {
    checkSquare(SqrtInfo, Error);
    if (!(Phi > 0.0))
    {
      throw ValidationError("DCS parameter must be positive");
    }
    const Vector Whitened = SqrtInfo * Error;
    const double Chi2 = Whitened.squaredNorm();
    const double Scale = std::min(1.0, 2.0 * Phi / (Phi + Chi2));

    ResidualEvaluation Result;
    Result.Residual = Scale * Whitened;
    Result.Jacobian = Scale * SqrtInfo;
    return Result;
  }

  std::string toString(RobustKind Kind)
  {
    switch (Kind)
    {
    case RobustKind::Gaussian:
      return "gaussian";
    case RobustKind::MaxMixture:
      return "max-mixture";
    case RobustKind::SumMixture:
      return "sum-mixture";
    case RobustKind::Dcs:
      return "dcs";
    }
    return "unknown";
  }

  RobustModel RobustModel::gaussian(Matrix SqrtInfo, std::optional<Vector> Mean)
  {
    Vector Mu = Mean.value_or(Vector::Zero(SqrtInfo.rows()));
    if (SqrtInfo.rows() != SqrtInfo.cols() || Mu.size() != SqrtInfo.rows())
    {
      throw ValidationError("Gaussian model dimensions do not agree");
    }
    return RobustModel(GaussianModel{std::move(SqrtInfo), std::move(Mu)});
  }

  RobustModel RobustModel::maxMixture(GaussianMixture Mixture)
  {
    if (Mixture.empty())
    {
      throw ValidationError("Max-Mixture needs a non-empty mixture");
    }
    return RobustModel(MaxMixtureModel{std::move(Mixture)});
  }

  RobustModel RobustModel::sumMixture(GaussianMixture Mixture)
  {
    if (Mixture.empty())
    {
      throw ValidationError("Sum-Mixture needs a non-empty mixture");
    }
    return RobustModel(SumMixtureModel{std::move(Mixture)});
  }

  RobustModel RobustModel::dcs(Matrix SqrtInfo, double Phi)
  {
    if (!(Phi > 0.0))
    {
      throw ValidationError("DCS parameter must be positive");
    }
    if (SqrtInfo.rows() != SqrtInfo.cols())
    {
      throw ValidationError("DCS square root information must be square");
    }
    return RobustModel(DcsModel{std::move(SqrtInfo), Phi});
  }

  RobustKind RobustModel::kind() const
  {
    return static_cast<RobustKind>(Model_.index());
  }

  std::size_t RobustModel::errorDimension() const
  {
    return std::visit(
        [](const auto &Model) -> std::size_t
        {
          using T = std::decay_t<decltype(Model)>;
          if constexpr (std::is_same_v<T, GaussianModel> || std::is_same_v<T, DcsModel>)
          {
            return static_cast<std::size_t>(Model.SqrtInfo.rows());
          }
          else
          {
            return Model.Mixture.dimension();
          }
        },
        Model_);
  }

  std::size_t RobustModel::residualDimension() const
  {
    switch (kind())
    {
    case RobustKind::MaxMixture:
      return errorDimension() + 1;
    case RobustKind::SumMixture:
      return 1;
    default:
      return errorDimension();
    }
  }

  ResidualEvaluation RobustModel::evaluate(const Vector &Error) const
  {
    return std::visit(
        [&Error](const auto &Model) -> ResidualEvaluation
        {
          using T = std::decay_t<decltype(Model)>;
          if constexpr (std::is_same_v<T, GaussianModel>)
          {
            return residualGaussian(Model.SqrtInfo, Model.Mean, Error);
          }
          else if constexpr (std::is_same_v<T, MaxMixtureModel>)
          {
            return residualMaxMixture(Model.Mixture, Error);
          }
          else if constexpr (std::is_same_v<T, SumMixtureModel>)
          {
            return residualSumMixture(Model.Mixture, Error);
          }
          else
          {
            return residualDcs(Model.SqrtInfo, Error, Model.Phi);
          }
        },
        Model_);
  }

  void RobustModel::evaluateScalar(double Error, Vector &Residual, Vector &Derivative) const
  {
    if (errorDimension() != 1)
    {
      throw ValidationError("scalar evaluation needs a one-dimensional error model");
    }
    std::visit(
        [Error, &Residual, &Derivative](const auto &Model)
        {
          using T = std::decay_t<decltype(Model)>;
          if constexpr (std::is_same_v<T, GaussianModel>)
          {
            const double U = Model.SqrtInfo(0, 0);
            Residual.resize(1);
            Derivative.resize(1);
            Residual(0) = U * (Error - Model.Mean(0));
            Derivative(0) = U;
          }
          else if constexpr (std::is_same_v<T, MaxMixtureModel>)
          {
            const auto &Mixture = Model.Mixture;
            std::size_t Active = 0;
            double Best = std::numeric_limits<double>::infinity();
            double LogGamma = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < Mixture.size(); ++j)
            {
              const auto &Component = Mixture.component(j);
              const double Whitened = Component.SqrtInfo(0, 0) * (Error - Component.Mean(0));
              const double LogScale = Component.logScaling();
              const double Cost = -LogScale + 0.5 * Whitened * Whitened;
              if (Cost < Best)
              {
                Best = Cost;
                Active = j;
              }
              LogGamma = std::max(LogGamma, LogScale);
            }
            const auto &Component = Mixture.component(Active);
            Residual.resize(2);
            Derivative.resize(2);
            Residual(0) = std::sqrt(std::max(0.0, -2.0 * (Component.logScaling() - LogGamma)));
            Residual(1) = Component.SqrtInfo(0, 0) * (Error - Component.Mean(0));
            Derivative(0) = 0.0;
            Derivative(1) = Component.SqrtInfo(0, 0);
          }
          else if constexpr (std::is_same_v<T, SumMixtureModel>)
          {
            const auto &Mixture = Model.Mixture;
            const std::size_t N = Mixture.size();
            Scratch TermBuffer(N);
            Scratch ScaleBuffer(N);
            double *LogTerms = TermBuffer.data();
            double *LogScale = ScaleBuffer.data();
            for (std::size_t j = 0; j < N; ++j)
            {
              LogScale[j] = Mixture.component(j).logScaling();
            }
            const double LogGamma = logSumExp(LogScale, N);
            for (std::size_t j = 0; j < N; ++j)
            {
              const auto &Component = Mixture.component(j);
              const double Whitened = Component.SqrtInfo(0, 0) * (Error - Component.Mean(0));
              LogTerms[j] = LogScale[j] - LogGamma - 0.5 * Whitened * Whitened;
            }
            const double LogSum = logSumExp(LogTerms, N);
            double Gradient = 0.0;
            for (std::size_t j = 0; j < N; ++j)
            {
              const auto &Component = Mixture.component(j);
              const double Info = Component.SqrtInfo(0, 0) * Component.SqrtInfo(0, 0);
              Gradient += std::exp(LogTerms[j] - LogSum) * Info * (Error - Component.Mean(0));
            }
            Residual.resize(1);
            Derivative.resize(1);
            Residual(0) = std::sqrt(2.0 * std::max(-LogSum, SumMixtureFloor));
            Derivative(0) = Gradient / Residual(0);
          }
          else
          {
            const double U = Model.SqrtInfo(0, 0);
            const double Whitened = U * Error;
            const double Scale = std::min(1.0, 2.0 * Model.Phi / (Model.Phi + Whitened * Whitened));
            Residual.resize(1);
            Derivative.resize(1);
            Residual(0) = Scale * Whitened;
            Derivative(0) = Scale * U;
          }
        },
        Model_);
  }

  const GaussianMixture *RobustModel::mixture() const
  {
    if (const auto *Max = std::get_if<MaxMixtureModel>(&Model_))
    {
      return &Max->Mixture;
    }
    if (const auto *Sum = std::get_if<SumMixtureModel>(&Model_))
    {
      return &Sum->Mixture;
    }
    return nullptr;
  }

  void RobustModel::setMixture(GaussianMixture Mixture)
  {
    if (auto *Max = std::get_if<MaxMixtureModel>(&Model_))
    {
      Max->Mixture = std::move(Mixture);
      return;
    }
    if (auto *Sum = std::get_if<SumMixtureModel>(&Model_))
    {
      Sum->Mixture = std::move(Mixture);
      return;
    }
    throw ValidationError("only mixture models carry a mixture");
  }
}
