#pragma once

#include "robmix/mixture.hpp"

#include <optional>
#include <string>
#include <variant>

namespace robmix
{
  /**
   * Residual produced from a raw error vector. The solver minimizes 0.5 * ||Residual||^2,
   * `Jacobian` is d(Residual)/d(error).
   */
  struct ResidualEvaluation
  {
    Vector Residual;
    Matrix Jacobian;
    std::optional<std::size_t> ActiveComponent;
  };

  /** Lower bound on the Sum-Mixture negative log-likelihood before the square root. */
  inline constexpr double SumMixtureFloor = 1e-12;

  ResidualEvaluation residualGaussian(const Matrix &SqrtInfo, const Vector &Mean, const Vector &Error);

  /**
   * Max-Mixture: picks the component with the lowest -ln(c_j) + 0.5 ||U_j (e - mu_j)||^2 (ties go
   * to the lowest index) and returns the (d+1)-vector [sqrt(-2 ln(c_j / gamma_m)); U_j (e - mu_j)]
   * with gamma_m = max_j c_j.
   */
  ResidualEvaluation residualMaxMixture(const GaussianMixture &Mixture, const Vector &Error);

  /**
   * Sum-Mixture: scalar sqrt(2 * L) with L = -ln sum_j (c_j / gamma_s) exp(-0.5 ||U_j (e - mu_j)||^2)
   * and gamma_s = sum_j c_j, so that 0.5 * r^2 = L. L is floored at SumMixtureFloor.
   */
  ResidualEvaluation residualSumMixture(const GaussianMixture &Mixture, const Vector &Error);

  /** Dynamic covariance scaling with s = min(1, 2 Phi / (Phi + chi^2)), s held constant in the Jacobian. */
  ResidualEvaluation residualDcs(const Matrix &SqrtInfo, const Vector &Error, double Phi);

  /** gamma_m = max_j c_j */
  double maxMixtureNormalization(const GaussianMixture &Mixture);
  /** gamma_s = sum_j c_j */
  double sumMixtureNormalization(const GaussianMixture &Mixture);

  /** -ln max_j c_j exp(-0.5 q_j), the Max-Mixture negative log-likelihood. */
  double maxMixtureNegLogLikelihood(const GaussianMixture &Mixture, const Vector &Error);
  /** -ln sum_j c_j exp(-0.5 q_j), the exact mixture negative log-likelihood (no (2 pi) term). */
  double sumMixtureNegLogLikelihood(const GaussianMixture &Mixture, const Vector &Error);

  enum class RobustKind
  {
    Gaussian,
    MaxMixture,
    SumMixture,
    Dcs
  };

  std::string toString(RobustKind Kind);

  /** Noise model of one factor: a whitening transform from error to residual. */
  class RobustModel
  {
  public:
    static RobustModel gaussian(Matrix SqrtInfo, std::optional<Vector> Mean = std::nullopt);
    static RobustModel maxMixture(GaussianMixture Mixture);
    static RobustModel sumMixture(GaussianMixture Mixture);
    static RobustModel dcs(Matrix SqrtInfo, double Phi);

    RobustKind kind() const;
    std::size_t errorDimension() const;
    /** Gaussian/DCS: d; Max-Mixture: d + 1; Sum-Mixture: 1. */
    std::size_t residualDimension() const;

    ResidualEvaluation evaluate(const Vector &Error) const;
    /**
     * Same values as evaluate() for one-dimensional errors, written into caller storage so hot loops
     * do not allocate. `Derivative` receives d(residual)/d(error).
     */
    void evaluateScalar(double Error, Vector &Residual, Vector &Derivative) const;

    /** Null for non-mixture models. */
    const GaussianMixture *mixture() const;
    /** Replaces the mixture of a Max- or Sum-Mixture model. */
    void setMixture(GaussianMixture Mixture);

  private:
    struct GaussianModel
    {
      Matrix SqrtInfo;
      Vector Mean;
    };
    struct MaxMixtureModel
    {
      GaussianMixture Mixture;
    };
    struct SumMixtureModel
    {
      GaussianMixture Mixture;
    };
    struct DcsModel
    {
      Matrix SqrtInfo;
      double Phi;
    };

    using Variant = std::variant<GaussianModel, MaxMixtureModel, SumMixtureModel, DcsModel>;
    explicit RobustModel(Variant Model) : Model_(std::move(Model)) {}

    Variant Model_;
  };
}
