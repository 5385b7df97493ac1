#include "robmix/solver.hpp"
#include "robmix/error.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>

namespace robmix
{
  namespace
  {
    using SparseMatrix = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

    struct Linearization
    {
      double Cost = 0.0;
      Vector Gradient;
      SparseMatrix Hessian;
      bool Finite = true;
      std::string FailedBlock;

      /* SparseMatrix has no move support, so std::swap would copy */
      void swap(Linearization &Other)
      {
        std::swap(Cost, Other.Cost);
        Gradient.swap(Other.Gradient);
        Hessian.swap(Other.Hessian);
        std::swap(Finite, Other.Finite);
        FailedBlock.swap(Other.FailedBlock);
      }
    };

    class Evaluator
    {
    public:
      /** Builds the lower-triangular sparsity pattern of J^T J once; later linearizations only refill values. */
      explicit Evaluator(const LeastSquaresProblem &Problem) : Problem_(Problem)
      {
        std::size_t Offset = 0;
        for (const auto &Block : Problem.parameterBlocks())
        {
          Offsets_.push_back(Offset);
          Offset += static_cast<std::size_t>(Block.Value.size());
        }
        Size_ = Offset;

        std::vector<Triplet> Triplets;
        for (std::size_t i = 0; i < Size_; ++i)
        {
          Triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
        }
        forEachEntry([&Triplets](std::size_t, Eigen::Index Row, Eigen::Index Col)
                     { Triplets.emplace_back(static_cast<int>(Row), static_cast<int>(Col), 0.0); });
        Pattern_.resize(static_cast<Eigen::Index>(Size_), static_cast<Eigen::Index>(Size_));
        Pattern_.setFromTriplets(Triplets.begin(), Triplets.end());
        Pattern_.makeCompressed();

        for (std::size_t i = 0; i < Size_; ++i)
        {
          DiagonalSlots_.push_back(slot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        }
        forEachEntry([this](std::size_t, Eigen::Index Row, Eigen::Index Col) { EntrySlots_.push_back(slot(Row, Col)); });

        const auto &Blocks = Problem.residualBlocks();
        Residuals_.resize(Blocks.size());
        Jacobians_.resize(Blocks.size());
        for (std::size_t k = 0; k < Blocks.size(); ++k)
        {
          Jacobians_[k].resize(Blocks[k].Blocks.size());
        }
      }

      std::size_t size() const { return Size_; }
      std::size_t offset(std::size_t Block) const { return Offsets_[Block]; }
      const std::vector<Eigen::Index> &diagonalSlots() const { return DiagonalSlots_; }

      /** Cost, gradient J^T r and the lower triangle of J^T J at `Values`. */
      void linearize(const std::vector<Vector> &Values, Linearization &Result)
      {
        Result.Cost = 0.0;
        Result.Finite = true;
        Result.FailedBlock.clear();
        Result.Gradient.setZero(static_cast<Eigen::Index>(Size_));
        if (Result.Hessian.nonZeros() != Pattern_.nonZeros())
        {
          Result.Hessian = Pattern_;
        }
        double *Entries = Result.Hessian.valuePtr();
        std::fill(Entries, Entries + Result.Hessian.nonZeros(), 0.0);

        std::vector<const Vector *> Params;
        std::size_t Slot = 0;
        const auto &Blocks = Problem_.residualBlocks();
        for (std::size_t k = 0; k < Blocks.size(); ++k)
        {
          const auto &Block = Blocks[k];
          Params.clear();
          for (const auto Index : Block.Blocks)
          {
            Params.push_back(&Values[Index]);
          }
          Vector &Residual = Residuals_[k];
          auto &Jacobians = Jacobians_[k];
          Block.Function(Params, Residual, &Jacobians);

          bool Finite = Residual.allFinite();
          for (std::size_t a = 0; a < Block.Blocks.size() && Finite; ++a)
          {
            const auto &J = Jacobians[a];
            Finite = J.rows() == Residual.size() && J.cols() == Values[Block.Blocks[a]].size() && J.allFinite();
          }
          if (!Finite)
          {
            Result.Finite = false;
            Result.FailedBlock = Block.Label.empty() ? "unnamed residual block" : Block.Label;
            return;
          }

          Result.Cost += 0.5 * Residual.squaredNorm();
          for (std::size_t a = 0; a < Block.Blocks.size(); ++a)
          {
            const auto &Ja = Jacobians[a];
            Result.Gradient.segment(static_cast<Eigen::Index>(Offsets_[Block.Blocks[a]]), Ja.cols()).noalias() +=
                Ja.transpose() * Residual;
          }
          /* same traversal order as the pattern construction */
          for (std::size_t a = 0; a < Block.Blocks.size(); ++a)
          {
            const auto &Ja = Jacobians[a];
            for (std::size_t b = 0; b < Block.Blocks.size(); ++b)
            {
              if (Offsets_[Block.Blocks[a]] < Offsets_[Block.Blocks[b]])
              {
                continue;
              }
              const auto &Jb = Jacobians[b];
              for (Eigen::Index r = 0; r < Ja.cols(); ++r)
              {
                for (Eigen::Index c = 0; c < (a == b ? r + 1 : Jb.cols()); ++c)
                {
                  Entries[EntrySlots_[Slot++]] += Ja.col(r).dot(Jb.col(c));
                }
              }
            }
          }
        }
        if (!std::isfinite(Result.Cost))
        {
          Result.Finite = false;
          Result.FailedBlock = "total cost";
        }
      }

    private:
      template <typename Visitor> void forEachEntry(Visitor &&Visit) const
      {
        const auto &Blocks = Problem_.residualBlocks();
        for (std::size_t k = 0; k < Blocks.size(); ++k)
        {
          const auto &Block = Blocks[k];
          for (std::size_t a = 0; a < Block.Blocks.size(); ++a)
          {
            const auto OffA = static_cast<Eigen::Index>(Offsets_[Block.Blocks[a]]);
            const auto SizeA = Problem_.parameterBlock(Block.Blocks[a]).Value.size();
            for (std::size_t b = 0; b < Block.Blocks.size(); ++b)
            {
              const auto OffB = static_cast<Eigen::Index>(Offsets_[Block.Blocks[b]]);
              if (OffA < OffB)
              {
                continue;
              }
              const auto SizeB = Problem_.parameterBlock(Block.Blocks[b]).Value.size();
              for (Eigen::Index r = 0; r < SizeA; ++r)
              {
                for (Eigen::Index c = 0; c < (a == b ? r + 1 : SizeB); ++c)
                {
                  Visit(k, OffA + r, OffB + c);
                }
              }
            }
          }
        }
      }

      Eigen::Index slot(Eigen::Index Row, Eigen::Index Col) const
      {
        const int *Begin = Pattern_.innerIndexPtr() + Pattern_.outerIndexPtr()[Col];
        const int *End = Pattern_.innerIndexPtr() + Pattern_.outerIndexPtr()[Col + 1];
        const int *Found = std::lower_bound(Begin, End, static_cast<int>(Row));
        return static_cast<Eigen::Index>(Found - Pattern_.innerIndexPtr());
      }

      const LeastSquaresProblem &Problem_;
      std::vector<std::size_t> Offsets_;
      std::size_t Size_ = 0;
      SparseMatrix Pattern_;
      std::vector<Eigen::Index> DiagonalSlots_;
      std::vector<Eigen::Index> EntrySlots_;
      std::vector<Vector> Residuals_;
      std::vector<std::vector<Matrix>> Jacobians_;
    };

    double residualCost(const ResidualBlock &Block, const std::vector<Vector> &Values)
    {
      std::vector<const Vector *> Params;
      for (const auto Index : Block.Blocks)
      {
        Params.push_back(&Values[Index]);
      }
      Vector Residual;
      Block.Function(Params, Residual, nullptr);
      return 0.5 * Residual.squaredNorm();
    }
  }

  std::size_t LeastSquaresProblem::addParameterBlock(std::string Name, Vector Initial, PlusHook Normalize)
  {
    if (Initial.size() == 0)
    {
      throw ValidationError("parameter block '" + Name + "' is empty");
    }
    NumParameters_ += static_cast<std::size_t>(Initial.size());
    Parameters_.push_back({std::move(Name), std::move(Initial), std::move(Normalize)});
    return Parameters_.size() - 1;
  }

  void LeastSquaresProblem::addResidualBlock(std::vector<std::size_t> Blocks, ResidualFunction Function, std::string Label)
  {
    if (Blocks.empty())
    {
      throw ValidationError("residual block '" + Label + "' references no parameters");
    }
    for (std::size_t k = 0; k < Blocks.size(); ++k)
    {
      if (Blocks[k] >= Parameters_.size())
      {
        throw ValidationError("residual block '" + Label + "' references a missing parameter block");
      }
      if (std::find(Blocks.begin(), Blocks.begin() + static_cast<std::ptrdiff_t>(k), Blocks[k]) != Blocks.begin() + static_cast<std::ptrdiff_t>(k))
      {
        throw ValidationError("residual block '" + Label + "' references a parameter block twice");
      }
    }
    Residuals_.push_back({std::move(Blocks), std::move(Function), std::move(Label)});
  }

  void LeastSquaresProblem::setValue(std::size_t Index, const Vector &Value)
  {
    auto &Block = Parameters_.at(Index);
    if (Block.Value.size() != Value.size())
    {
      throw ValidationError("parameter block '" + Block.Name + "' has a different size");
    }
    Block.Value = Value;
  }

  double LeastSquaresProblem::cost() const
  {
    std::vector<Vector> Values;
    for (const auto &Block : Parameters_)
    {
      Values.push_back(Block.Value);
    }
    double Cost = 0.0;
    for (const auto &Block : Residuals_)
    {
      Cost += residualCost(Block, Values);
    }
    return Cost;
  }

  std::string toString(Termination Reason)
  {
    switch (Reason)
    {
    case Termination::Converged:
      return "converged";
    case Termination::MaxIterations:
      return "max_iter";
    case Termination::Stalled:
      return "stalled";
    case Termination::NumericFailure:
      return "numeric_failure";
    }
    return "unknown";
  }

  void SolverConfig::validate() const
  {
    if (MaxIterations < 1 || !(GradientTolerance > 0.0) || !(ParameterTolerance > 0.0) ||
        !(FunctionTolerance > 0.0) || !(InitialDamping > 0.0) || !(DampingIncrease > 1.0) ||
        !(DampingDecrease > 1.0))
    {
      throw ValidationError("solver settings must be positive (damping factors > 1)");
    }
  }

  SolveReport solve(LeastSquaresProblem &Problem, const SolverConfig &Config)
  {
    Config.validate();
    if (Problem.numResidualBlocks() == 0)
    {
      throw ValidationError("least squares problem has no residuals");
    }

    SolveReport Report;
    Evaluator Eval(Problem);

    std::vector<Vector> Values;
    for (const auto &Block : Problem.parameterBlocks())
    {
      if (!Block.Value.allFinite())
      {
        Report.Reason = Termination::NumericFailure;
        Report.FailureDetail = "initial value of '" + Block.Name + "' is not finite";
        return Report;
      }
      Values.push_back(Block.Value);
    }

    Linearization Current;
    Linearization Next;
    Eval.linearize(Values, Current);
    if (!Current.Finite)
    {
      Report.Reason = Termination::NumericFailure;
      Report.FailureDetail = Current.FailedBlock;
      return Report;
    }
    Report.InitialCost = Current.Cost;
    Report.FinalCost = Current.Cost;
    Report.CostTrace.push_back(Current.Cost);

    /* the pattern always carries the full diagonal, so damping never changes it; blocks are expected
       in chain order (time-ordered states), which keeps the natural ordering free of fill-in */
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> Factor;
    Factor.analyzePattern(Current.Hessian);
    SparseMatrix Damped;
    std::vector<Vector> Candidate;

    double Lambda = Config.InitialDamping;
    Report.Reason = Termination::MaxIterations;
    const auto N = static_cast<Eigen::Index>(Eval.size());

    for (int Iteration = 0; Iteration < Config.MaxIterations; ++Iteration)
    {
      if (Current.Gradient.lpNorm<Eigen::Infinity>() < Config.GradientTolerance)
      {
        Report.Reason = Termination::Converged;
        break;
      }
      ++Report.Iterations;

      Damped = Current.Hessian;
      const auto &Diagonal = Eval.diagonalSlots();
      for (Eigen::Index i = 0; i < N; ++i)
      {
        const double Diag = std::clamp(Current.Hessian.valuePtr()[Diagonal[i]], 1e-12, 1e32);
        Damped.valuePtr()[Diagonal[i]] += Lambda * Diag;
      }
      Factor.factorize(Damped);
      if (Factor.info() != Eigen::Success)
      {
        for (Eigen::Index i = 0; i < N; ++i)
        {
          Damped.valuePtr()[Diagonal[i]] += 1e-10;
        }
        Factor.factorize(Damped);
      }
      if (Factor.info() != Eigen::Success)
      {
        Lambda *= Config.DampingIncrease;
        continue;
      }
      const Vector Step = Factor.solve(-Current.Gradient);

      double ValueNorm = 0.0;
      for (const auto &Value : Values)
      {
        ValueNorm += Value.squaredNorm();
      }
      if (Step.allFinite() && Step.norm() <= Config.ParameterTolerance * (std::sqrt(ValueNorm) + Config.ParameterTolerance))
      {
        Report.Reason = Termination::Converged;
        break;
      }

      Candidate = Values;
      for (std::size_t b = 0; b < Candidate.size(); ++b)
      {
        auto &Value = Candidate[b];
        Value += Step.segment(static_cast<Eigen::Index>(Eval.offset(b)), Value.size());
        if (const auto &Hook = Problem.parameterBlock(b).Normalize)
        {
          Hook(Value);
        }
      }

      Next.Finite = false;
      if (Step.allFinite())
      {
        Eval.linearize(Candidate, Next);
      }
      if (Next.Finite && Next.Cost < Current.Cost)
      {
        const double Decrease = (Current.Cost - Next.Cost) / std::max(Current.Cost, 1e-300);
        Values.swap(Candidate);
        Current.swap(Next);
        Report.CostTrace.push_back(Current.Cost);
        Lambda = std::max(Lambda / Config.DampingDecrease, 1e-16);
        if (Decrease < Config.FunctionTolerance)
        {
          Report.Reason = Termination::Converged;
          break;
        }
      }
      else
      {
        Lambda *= Config.DampingIncrease;
        if (Lambda > 1e20)
        {
          Report.Reason = Termination::Stalled;
          break;
        }
      }
    }

    for (std::size_t b = 0; b < Values.size(); ++b)
    {
      Problem.setValue(b, Values[b]);
    }
    Report.FinalCost = Current.Cost;
    return Report;
  }

  double checkJacobian(const ResidualBlock &Block, const std::vector<Vector> &Point, double Step)
  {
    if (!(Step > 0.0))
    {
      throw ValidationError("finite difference step must be positive");
    }
    if (Point.size() != Block.Blocks.size())
    {
      throw ValidationError("evaluation point needs one vector per referenced block");
    }

    std::vector<const Vector *> Params;
    for (const auto &Value : Point)
    {
      Params.push_back(&Value);
    }
    Vector Residual;
    std::vector<Matrix> Analytic(Point.size());
    Block.Function(Params, Residual, &Analytic);

    double MaxDeviation = 0.0;
    std::vector<Vector> Perturbed = Point;
    std::vector<const Vector *> PerturbedParams;
    for (const auto &Value : Perturbed)
    {
      PerturbedParams.push_back(&Value);
    }
    Vector Plus;
    Vector Minus;
    for (std::size_t k = 0; k < Point.size(); ++k)
    {
      if (Analytic[k].rows() != Residual.size() || Analytic[k].cols() != Point[k].size())
      {
        throw ValidationError("analytic Jacobian has the wrong shape");
      }
      for (Eigen::Index c = 0; c < Point[k].size(); ++c)
      {
        Perturbed[k](c) = Point[k](c) + Step;
        Block.Function(PerturbedParams, Plus, nullptr);
        Perturbed[k](c) = Point[k](c) - Step;
        Block.Function(PerturbedParams, Minus, nullptr);
        Perturbed[k](c) = Point[k](c);

        const Vector Numeric = (Plus - Minus) / (2.0 * Step);
        for (Eigen::Index r = 0; r < Numeric.size(); ++r)
        {
          const double Deviation = std::abs(Analytic[k](r, c) - Numeric(r)) / std::max(1.0, std::abs(Numeric(r)));
          MaxDeviation = std::max(MaxDeviation, Deviation);
        }
      }
    }
    return MaxDeviation;
  }

  double checkJacobian(const ResidualFunction &Function, const Vector &Point, double Step)
  {
    ResidualBlock Block{{0}, Function, "single"};
    return checkJacobian(Block, std::vector<Vector>{Point}, Step);
  }
}
