#pragma once

#include "robmix/robust.hpp"
#include "robmix/solver.hpp"

#include <Eigen/Dense>

namespace robmix
{
  /** Planar pose; Theta is kept in (-pi, pi]. */
  struct Pose2
  {
    double X = 0.0;
    double Y = 0.0;
    double Theta = 0.0;

    Eigen::Vector3d vector() const { return {X, Y, Theta}; }
    static Pose2 fromVector(const Eigen::Vector3d &V) { return {V(0), V(1), V(2)}; }
  };

  /** Receiver clock error in meters and its drift in m/s. */
  struct ClockState
  {
    double Bias = 0.0;
    double Drift = 0.0;

    Eigen::Vector2d vector() const { return {Bias, Drift}; }
    static ClockState fromVector(const Eigen::Vector2d &V) { return {V(0), V(1)}; }
  };

  /** Wraps an angle into (-pi, pi]. */
  double wrapAngle(double Angle);

  struct OdometryJacobians
  {
    Eigen::Matrix3d WrtFrom;
    Eigen::Matrix3d WrtTo;
  };

  /**
   * Body-frame Euler step from `From` with velocities (vx, vy, omega) over Dt. The error is the
   * world-frame mismatch of the next pose divided by Dt, i.e. in velocity units.
   */
  Eigen::Vector3d errorOdometry(const Pose2 &From, const Pose2 &To, const Eigen::Vector3d &Velocity, double Dt,
                                OdometryJacobians *Jacobians = nullptr);

  /**
   * Predicted minus measured range. A pose on top of the anchor is shifted by 1e-9 m along x
   * so the gradient stays defined.
   */
  double errorRange(const Pose2 &Pose, double Measured, const Eigen::Vector2d &Anchor,
                    Eigen::RowVector3d *WrtPose = nullptr);

  /** Range plus clock bias minus measured pseudorange; d/d(bias) = 1. */
  double errorPseudorange(const Pose2 &Pose, const ClockState &Clock, double Measured, const Eigen::Vector2d &Anchor,
                          Eigen::RowVector3d *WrtPose = nullptr, Eigen::RowVector2d *WrtClock = nullptr);

  struct CcedJacobians
  {
    Eigen::Matrix2d WrtFrom;
    Eigen::Matrix2d WrtTo;
  };

  /** Constant clock drift model: (b1 - (b0 + d0 * Dt), d1 - d0). */
  Eigen::Vector2d errorCced(const ClockState &From, const ClockState &To, double Dt, CcedJacobians *Jacobians = nullptr);

  /*
   * Residual functions of the graph's factors. Gaussian factors take the diagonal of their square
   * root information matrix. Pose blocks are (x, y, theta), clock blocks (bias, drift).
   */
  ResidualFunction priorResidual(const Eigen::Vector3d &Mean, const Eigen::Vector3d &SqrtInfo);
  ResidualFunction odometryResidual(const Eigen::Vector3d &Velocity, double Dt, const Eigen::Vector3d &SqrtInfo);
  ResidualFunction clockPriorResidual(const Eigen::Vector2d &Mean, const Eigen::Vector2d &SqrtInfo);
  ResidualFunction ccedResidual(double Dt, const Eigen::Vector2d &SqrtInfo);

  /**
   * Range error, multiplied by `ErrorScale`, passed through `Noise`. The model is referenced, not
   * copied, so a shared mixture can be refitted between solves; it must outlive the function.
   */
  ResidualFunction rangeResidual(double Measured, const Eigen::Vector2d &Anchor, const RobustModel &Noise,
                                 double ErrorScale = 1.0);
  /** As rangeResidual over a pose block and a clock block. */
  ResidualFunction pseudorangeResidual(double Measured, const Eigen::Vector2d &Anchor, const RobustModel &Noise,
                                       double ErrorScale = 1.0);
}
