#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace robmix
{
  using Vector = Eigen::VectorXd;
  using Matrix = Eigen::MatrixXd;

  /**
   * Evaluates a residual from the values of its parameter blocks. When `Jacobians` is non-null it
   * holds one matrix per referenced block, to be filled with d(residual)/d(block).
   */
  using ResidualFunction =
      std::function<void(std::span<const Vector *const> Parameters, Vector &Residual, std::vector<Matrix> *Jacobians)>;

  /** Post-update normalization of a parameter block, e.g. angle wrapping. */
  using PlusHook = std::function<void(Vector &Value)>;

  struct ParameterBlock
  {
    std::string Name;
    Vector Value;
    PlusHook Normalize;
  };

  struct ResidualBlock
  {
    std::vector<std::size_t> Blocks;
    ResidualFunction Function;
    std::string Label;
  };

  class LeastSquaresProblem
  {
  public:
    std::size_t addParameterBlock(std::string Name, Vector Initial, PlusHook Normalize = {});
    void addResidualBlock(std::vector<std::size_t> Blocks, ResidualFunction Function, std::string Label = {});

    std::size_t numParameterBlocks() const { return Parameters_.size(); }
    std::size_t numResidualBlocks() const { return Residuals_.size(); }
    std::size_t numParameters() const { return NumParameters_; }

    const ParameterBlock &parameterBlock(std::size_t Index) const { return Parameters_.at(Index); }
    const Vector &value(std::size_t Index) const { return Parameters_.at(Index).Value; }
    void setValue(std::size_t Index, const Vector &Value);

    const std::vector<ParameterBlock> &parameterBlocks() const { return Parameters_; }
    std::vector<ParameterBlock> &parameterBlocks() { return Parameters_; }
    const std::vector<ResidualBlock> &residualBlocks() const { return Residuals_; }

    /** 0.5 * sum of squared residuals at the current values. */
    double cost() const;

  private:
    std::vector<ParameterBlock> Parameters_;
    std::vector<ResidualBlock> Residuals_;
    std::size_t NumParameters_ = 0;
  };

  enum class Termination
  {
    Converged,
    MaxIterations,
    Stalled,
    NumericFailure
  };

  std::string toString(Termination Reason);

  struct SolverConfig
  {
    int MaxIterations = 50;
    /** Max-norm of the gradient. */
    double GradientTolerance = 1e-10;
    /** Relative step norm. */
    double ParameterTolerance = 1e-10;
    /** Relative cost decrease of an accepted step. */
    double FunctionTolerance = 1e-12;
    double InitialDamping = 1e-4;
    double DampingIncrease = 10.0;
    double DampingDecrease = 10.0;

    void validate() const;
  };

  struct SolveReport
  {
    int Iterations = 0;
    double InitialCost = 0.0;
    double FinalCost = 0.0;
    Termination Reason = Termination::MaxIterations;
    /** Cost before the first iteration, then after every accepted step. */
    std::vector<double> CostTrace;
    /** Label of the offending residual block on numeric failure. */
    std::string FailureDetail;

    bool successful() const { return Reason != Termination::NumericFailure; }
  };

  /**
   * Levenberg-Marquardt with Marquardt scaling (H + lambda * diag(H)). Normal equations are
   * assembled sparsely and factored with a simplicial Cholesky.
   */
  SolveReport solve(LeastSquaresProblem &Problem, const SolverConfig &Config = {});

  /**
   * Compares the analytic Jacobian of `Block` at `Point` with central finite differences.
   * Returns max over entries of |analytic - numeric| / max(1, |numeric|).
   */
  double checkJacobian(const ResidualBlock &Block, const std::vector<Vector> &Point, double Step);

  /** Convenience overload for a residual of a single parameter vector. */
  double checkJacobian(const ResidualFunction &Function, const Vector &Point, double Step);
}
