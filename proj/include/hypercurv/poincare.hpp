#pragma once

#include "hypercurv/autodiff.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::geo {

inline constexpr double kBallEps = 1e-5;
inline constexpr double kCurvatureMin = 1e-6;
inline constexpr double kCurvatureMax = 1.0;
inline constexpr double kSmallNorm = 1e-12;
inline constexpr double kSingularDenominator = 1e-12;
inline constexpr double kBoundaryMargin = 1e-12;

/// Point strictly inside the ball {x : c‖x‖² ≤ 1 − kBallEps}.
class BallPoint {
 public:
  BallPoint(Tensor coords, double c);

  static BallPoint origin(std::size_t dim, double c);

  const Tensor& coords() const { return coords_; }
  double curvature() const { return c_; }
  std::size_t dim() const { return coords_.numel(); }
  double norm() const { return hypercurv::norm(coords_); }

 private:
  Tensor coords_;
  double c_;
};

struct TangentVector {
  Tensor coords;
  BallPoint base;
};

/// Largest admissible norm at curvature c.
double max_norm(double c);
void require_curvature(double c);

BallPoint project_to_ball(const Tensor& v, double c);
Tensor clip_features(const Tensor& v, double r);

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
/// Möbius addition on raw coordinates, unprojected.
Tensor mobius_add_raw(const Tensor& x, const Tensor& y, double c);
BallPoint negate(const BallPoint& x);

double conformal_factor(const BallPoint& y);

BallPoint expmap(const BallPoint& y, const TangentVector& v);
BallPoint expmap(const BallPoint& y, const Tensor& v);
BallPoint expmap0(const Tensor& v, double c);
TangentVector logmap(const BallPoint& y, const BallPoint& x);
Tensor logmap0(const BallPoint& x);
double distance(const BallPoint& x, const BallPoint& y);

/// Differentiable batched forms. Rows of an (n,d) value are points; a (1,d)
/// operand broadcasts against every row. Outputs are projected into the ball.
namespace batched {

ad::Var row_norm(const ad::Var& x);
ad::Var project(const ad::Var& x, double c);
ad::Var clip(const ad::Var& x, double r);
ad::Var mobius_add(const ad::Var& x, const ad::Var& y, double c);
ad::Var expmap0(const ad::Var& v, double c);
ad::Var logmap0(const ad::Var& x, double c);

}  // namespace batched

}  // namespace hypercurv::geo
