#include "robmix/factors.hpp"
#include "robmix/error.hpp"

#include <cmath>
#include <numbers>

namespace robmix
{
  double wrapAngle(double Angle)
  {
    constexpr double Pi = std::numbers::pi;
    double Wrapped = std::fmod(Angle + Pi, 2.0 * Pi);
    if (Wrapped <= 0.0)
    {
      Wrapped += 2.0 * Pi;
    }
    return Wrapped - Pi;
  }

  Eigen::Vector3d errorOdometry(const Pose2 &From, const Pose2 &To, const Eigen::Vector3d &Velocity, double Dt,
                                OdometryJacobians *Jacobians)
  {
    if (!(Dt > 0.0))
    {
      throw ValidationError("odometry needs a positive time step");
    }
    const double C = std::cos(From.Theta);
    const double S = std::sin(From.Theta);
    const double DeltaX = (C * Velocity(0) - S * Velocity(1)) * Dt;
    const double DeltaY = (S * Velocity(0) + C * Velocity(1)) * Dt;
    const double PredictedTheta = From.Theta + Velocity(2) * Dt;

    Eigen::Vector3d Error;
    Error(0) = ((To.X - From.X) - DeltaX) / Dt;
    Error(1) = ((To.Y - From.Y) - DeltaY) / Dt;
    Error(2) = wrapAngle(To.Theta - PredictedTheta) / Dt;

    if (Jacobians != nullptr)
    {
      const double InvDt = 1.0 / Dt;
      Jacobians->WrtFrom << -InvDt, 0.0, (S * Velocity(0) + C * Velocity(1)),
          0.0, -InvDt, -(C * Velocity(0) - S * Velocity(1)),
          0.0, 0.0, -InvDt;
      Jacobians->WrtTo = Eigen::Matrix3d::Identity() * InvDt;
    }
    return Error;
  }

  double errorRange(const Pose2 &Pose, double Measured, const Eigen::Vector2d &Anchor, Eigen::RowVector3d *WrtPose)
  {
    if (!Anchor.allFinite())
    {
      throw ValidationError("anchor position must be finite");
    }
    Eigen::Vector2d Diff(Pose.X - Anchor(0), Pose.Y - Anchor(1));
    double Distance = Diff.norm();
    if (Distance == 0.0)
    {
      Diff(0) = 1e-9;
      Distance = 1e-9;
    }
    if (WrtPose != nullptr)
    {
      *WrtPose << Diff(0) / Distance, Diff(1) / Distance, 0.0;
    }
    return Distance - Measured;
  }

  double errorPseudorange(const Pose2 &Pose, const ClockState &Clock, double Measured, const Eigen::Vector2d &Anchor,
                          Eigen::RowVector3d *WrtPose, Eigen::RowVector2d *WrtClock)
  {
    if (WrtClock != nullptr)
    {
      *WrtClock << 1.0, 0.0;
    }
    return errorRange(Pose, Measured, Anchor, WrtPose) + Clock.Bias;
  }

  Eigen::Vector2d errorCced(const ClockState &From, const ClockState &To, double Dt, CcedJacobians *Jacobians)
  {
    if (!(Dt > 0.0))
    {
      throw ValidationError("clock model needs a positive time step");
    }
    if (Jacobians != nullptr)
    {
      Jacobians->WrtFrom << -1.0, -Dt, 0.0, -1.0;
      Jacobians->WrtTo = Eigen::Matrix2d::Identity();
    }
    return {To.Bias - (From.Bias + From.Drift * Dt), To.Drift - From.Drift};
  }

  ResidualFunction priorResidual(const Eigen::Vector3d &Mean, const Eigen::Vector3d &SqrtInfo)
  {
    return [Mean, SqrtInfo](std::span<const Vector *const> P, Vector &R, std::vector<Matrix> *J)
    {
      const Vector &X = *P[0];
      R.resize(3);
      R(0) = SqrtInfo(0) * (X(0) - Mean(0));
      R(1) = SqrtInfo(1) * (X(1) - Mean(1));
      R(2) = SqrtInfo(2) * wrapAngle(X(2) - Mean(2));
      if (J)
      {
        (*J)[0] = SqrtInfo.asDiagonal();
      }
    };
  }

  ResidualFunction odometryResidual(const Eigen::Vector3d &Velocity, double Dt, const Eigen::Vector3d &SqrtInfo)
  {
    return [Velocity, Dt, SqrtInfo](std::span<const Vector *const> P, Vector &R, std::vector<Matrix> *J)
    {
      OdometryJacobians Jac;
      const Eigen::Vector3d E =
          errorOdometry(Pose2::fromVector(*P[0]), Pose2::fromVector(*P[1]), Velocity, Dt, J ? &Jac : nullptr);
      R = E.cwiseProduct(SqrtInfo);
      if (J)
      {
        (*J)[0] = SqrtInfo.asDiagonal() * Jac.WrtFrom;
        (*J)[1] = SqrtInfo.asDiagonal() * Jac.WrtTo;
      }
    };
  }

  ResidualFunction clockPriorResidual(const Eigen::Vector2d &Mean, const Eigen::Vector2d &SqrtInfo)
  {
    return [Mean, SqrtInfo](std::span<const Vector *const> P, Vector &R, std::vector<Matrix> *J)
    {
      R = (*P[0] - Mean).cwiseProduct(SqrtInfo);
      if (J)
      {
        (*J)[0] = SqrtInfo.asDiagonal();
      }
    };
  }

  ResidualFunction ccedResidual(double Dt, const Eigen::Vector2d &SqrtInfo)
  {
    return [Dt, SqrtInfo](std::span<const Vector *const> P, Vector &R, std::vector<Matrix> *J)
    {
      CcedJacobians Jac;
      const Eigen::Vector2d E =
          errorCced(ClockState::fromVector(*P[0]), ClockState::fromVector(*P[1]), Dt, J ? &Jac : nullptr);
      R = E.cwiseProduct(SqrtInfo);
      if (J)
      {
        (*J)[0] = SqrtInfo.asDiagonal() * Jac.WrtFrom;
        (*J)[1] = SqrtInfo.asDiagonal() * Jac.WrtTo;
      }
    };
  }

  namespace
  {
    ResidualFunction measurementResidual(double Measured, const Eigen::Vector2d &Anchor, const RobustModel &Noise,
                                         double ErrorScale, bool Pseudo)
    {
      if (Noise.errorDimension() != 1)
      {
        throw ValidationError("range noise model must be one-dimensional");
      }
      return [Measured, Anchor, Noise = &Noise, ErrorScale, Pseudo,
              Derivative = Vector()](std::span<const Vector *const> P, Vector &R, std::vector<Matrix> *J) mutable
      {
        const Vector &X = *P[0];
        const Pose2 Pose{X(0), X(1), X(2)};
        Eigen::RowVector3d WrtPose;
        Eigen::RowVector2d WrtClock;
        const double E = Pseudo ? errorPseudorange(Pose, ClockState::fromVector(*P[1]), Measured, Anchor, &WrtPose,
                                                   &WrtClock)
                                : errorRange(Pose, Measured, Anchor, &WrtPose);
        Noise->evaluateScalar(E * ErrorScale, R, Derivative);
        if (J)
        {
          (*J)[0].noalias() = (ErrorScale * Derivative) * WrtPose;
          if (Pseudo)
          {
            (*J)[1].noalias() = (ErrorScale * Derivative) * WrtClock;
          }
        }
      };
    }
  }

  ResidualFunction rangeResidual(double Measured, const Eigen::Vector2d &Anchor, const RobustModel &Noise,
                                 double ErrorScale)
  {
    return measurementResidual(Measured, Anchor, Noise, ErrorScale, false);
  }

  ResidualFunction pseudorangeResidual(double Measured, const Eigen::Vector2d &Anchor, const RobustModel &Noise,
                                       double ErrorScale)
  {
    return measurementResidual(Measured, Anchor, Noise, ErrorScale, true);
  }
}
