#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace robmix
{
  using Vector = Eigen::VectorXd;
  using Matrix = Eigen::MatrixXd;

  /**
   * One weighted Gaussian of a mixture.
   *
   * The spread is stored as an upper-triangular square root information matrix U with
   * U^T * U = Sigma^-1, so whitening an error is a single triangular product.
   */
  struct GaussianComponent
  {
    double Weight = 1.0;
    Vector Mean;
    Matrix SqrtInfo;

    std::size_t dimension() const { return static_cast<std::size_t>(Mean.size()); }

    /** c = w * det(U) */
    double scaling() const;
    double logScaling() const;

    /** Squared Mahalanobis distance ||U (e - mu)||^2. */
    double squaredDistance(const Vector &Error) const;

    /** Covariance (U^T U)^-1. */
    Matrix covariance() const;

    /** Throws ValidationError when the invariants do not hold. */
    void validate() const;
  };

  class GaussianMixture
  {
  public:
    GaussianMixture() = default;
    /** Validates dimensions, weights (sum to one within 1e-9) and square root information factors. */
    explicit GaussianMixture(std::vector<GaussianComponent> Components);

    std::size_t size() const { return Components_.size(); }
    std::size_t dimension() const { return Components_.empty() ? 0 : Components_.front().dimension(); }
    bool empty() const { return Components_.empty(); }

    const GaussianComponent &component(std::size_t Index) const { return Components_.at(Index); }
    const std::vector<GaussianComponent> &components() const { return Components_; }

    /** One line per component: `w mu[0..d) sqrtinfo-row-major[0..d*d)`, 17 significant digits. */
    std::string toString() const;
    static GaussianMixture fromString(const std::string &Text);

  private:
    std::vector<GaussianComponent> Components_;
  };

  /** Convergence and regularization settings of the EM fit. */
  struct EmConfig
  {
    int MaxIterations = 100;
    double RelTolerance = 1e-6;
    /** Variance added to the covariance diagonal. Unset: 1e-6 times the first initial component's variance. */
    std::optional<double> CovRegularizer;
    double MinWeight = 0.0;

    void validate(std::size_t NumComponents) const;
  };

  /** Posterior membership probabilities, one row per sample. */
  struct Responsibilities
  {
    Matrix Alpha;
    /** Unnormalized log-likelihood sum_i ln sum_j P(e_i | component j). */
    double LogLikelihood = 0.0;
    /** Rows where every component density underflowed; they were set to 1/n. */
    std::vector<std::size_t> UnderflowRows;
  };

  struct MStepResult
  {
    GaussianMixture Mixture;
    /** Components whose responsibility mass vanished and were reset to their initial values. */
    std::vector<std::size_t> ResetComponents;
  };

  struct EmDiagnostics
  {
    int Iterations = 0;
    double FinalLogLikelihood = 0.0;
    std::vector<double> LogLikelihoodTrace;
    std::size_t ResetCount = 0;
    std::size_t UnderflowCount = 0;
  };

  struct EmResult
  {
    GaussianMixture Mixture;
    EmDiagnostics Diagnostics;
  };

  enum class InformationCriterion
  {
    BIC,
    AIC
  };

  /** w * det(U) * exp(-0.5 ||U (e - mu)||^2), without the (2 pi)^(-d/2) factor. */
  double componentDensity(const GaussianComponent &Component, const Vector &Error);
  double logComponentDensity(const GaussianComponent &Component, const Vector &Error);

  /** Samples are the rows of `Errors` (m x d). */
  Responsibilities eStep(const GaussianMixture &Mixture, const Matrix &Errors);

  /**
   * Weighted moments of the samples; components with vanishing mass are reset to the
   * matching component of `ResetModel`.
   */
  MStepResult mStep(const Matrix &Errors, const Matrix &Alpha, const EmConfig &Config,
                    const GaussianMixture &ResetModel);

  EmResult fitEm(const Matrix &Errors, const GaussianMixture &Init, const EmConfig &Config = {});

  /** Equal weights, zero means, U_j = U_base * Scale^(1-j). Scale 10 is the usual choice. */
  GaussianMixture defaultInit(const Matrix &BaseSqrtInfo, std::size_t NumComponents, double Scale = 10.0);

  /** Total log-likelihood with the fully normalized Gaussian density. */
  double logLikelihood(const GaussianMixture &Mixture, const Matrix &Errors);

  /** n * (1 + d + d(d+1)/2) - 1 */
  std::size_t freeParameterCount(std::size_t NumComponents, std::size_t Dimension);

  double informationCriterion(const GaussianMixture &Mixture, const Matrix &Errors, InformationCriterion Kind);

  /** Numerically stable ln(sum_k exp(v_k)); -inf for an empty or all -inf input. */
  double logSumExp(const double *Values, std::size_t Count);

  /** Upper-triangular U with U^T U = Covariance^-1; throws NumericError when not positive definite. */
  Matrix sqrtInfoFromCovariance(const Matrix &Covariance);
}
