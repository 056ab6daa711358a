#include "hypercurv/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypercurv/error.hpp"

namespace hypercurv::geo {

void require_curvature(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("curvature must be positive and finite");
}

double max_norm(double c) { return std::sqrt((1.0 - kBallEps) / c); }

BallPoint::BallPoint(Tensor coords, double c) : coords_(std::move(coords)), c_(c) {
  require_curvature(c_);
  if (coords_.rank() != 1) throw ContractViolation("ball point coordinates must be rank-1");
  if (!coords_.all_finite()) throw DomainError("ball point coordinates must be finite");
  const double q = c_ * squared_norm(coords_);
  if (q > (1.0 - kBallEps) * (1.0 + 1e-12)) {
    throw BoundaryError("point outside the ball interior: c*|x|^2 = " + std::to_string(q));
  }
}

BallPoint BallPoint::origin(std::size_t dim, double c) { return BallPoint(Tensor(Shape{dim}, 0.0), c); }

BallPoint project_to_ball(const Tensor& v, double c) {
  require_curvature(c);
  const Tensor flat = v.reshaped({v.numel()});
  if (c * squared_norm(flat) <= 1.0 - kBallEps) return BallPoint(flat, c);
  return BallPoint(flat * (max_norm(c) / norm(flat)), c);
}

Tensor clip_features(const Tensor& v, double r) {
  if (!(r > 0.0)) throw ContractViolation("clip radius must be positive");
  const double n = norm(v);
  if (n <= r) return v;
  return v * (r / n);
}

Tensor mobius_add_raw(const Tensor& x, const Tensor& y, double c) {
  if (x.numel() != y.numel()) throw ContractViolation("mobius_add: dimension mismatch");
  const double xy = dot(x, y), x2 = squared_norm(x), y2 = squared_norm(y);
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  if (std::abs(den) < kSingularDenominator) throw NearSingularError("Möbius denominator below 1e-12");
  const double ax = 1.0 + 2.0 * c * xy + c * y2;
  const double ay = 1.0 - c * x2;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (ax * x[i] + ay * y[i]) / den;
  return out;
}

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  if (x.curvature() != y.curvature()) throw ContractViolation("mobius_add: curvature mismatch");
  return project_to_ball(mobius_add_raw(x.coords(), y.coords(), x.curvature()), x.curvature());
}

BallPoint negate(const BallPoint& x) { return BallPoint(-x.coords(), x.curvature()); }

double conformal_factor(const BallPoint& y) { return 2.0 / (1.0 - y.curvature() * squared_norm(y.coords())); }

BallPoint expmap(const BallPoint& y, const Tensor& v) {
  const double c = y.curvature();
  const double vn = norm(v);
  if (vn < kSmallNorm) return y;
  const double sc = std::sqrt(c);
  const Tensor u = v * (std::tanh(sc * conformal_factor(y) * vn / 2.0) / (sc * vn));
  return project_to_ball(mobius_add_raw(y.coords(), u, c), c);
}

BallPoint expmap(const BallPoint& y, const TangentVector& v) {
  if (v.base.curvature() != y.curvature() || !(v.base.coords() == y.coords())) {
    throw ContractViolation("expmap: tangent vector is not based at y");
  }
  return expmap(y, v.coords);
}

BallPoint expmap0(const Tensor& v, double c) {
  require_curvature(c);
  const Tensor flat = v.reshaped({v.numel()});
  const double vn = norm(flat);
  if (vn < kSmallNorm) return BallPoint::origin(flat.numel(), c);
  const double sc = std::sqrt(c);
  return project_to_ball(flat * (std::tanh(sc * vn) / (sc * vn)), c);
}

namespace {

double scaled_atanh(double sc, double n) {
  if (sc * n >= 1.0 - kBoundaryMargin) throw BoundaryError("point at the ball boundary in atanh");
  return std::atanh(sc * n);
}

}  // namespace

TangentVector logmap(const BallPoint& y, const BallPoint& x) {
  if (x.curvature() != y.curvature()) throw ContractViolation("logmap: curvature mismatch");
  const double c = y.curvature();
  const Tensor u = mobius_add_raw(-y.coords(), x.coords(), c);
  const double un = norm(u);
  if (un < kSmallNorm) return {Tensor::zeros_like(u), y};
  const double sc = std::sqrt(c);
  const double scale = 2.0 / (sc * conformal_factor(y)) * scaled_atanh(sc, un) / un;
  return {u * scale, y};
}

Tensor logmap0(const BallPoint& x) {
  const double c = x.curvature();
  const double n = x.norm();
  if (n < kSmallNorm) return Tensor::zeros_like(x.coords());
  const double sc = std::sqrt(c);
  return x.coords() * (scaled_atanh(sc, n) / (sc * n));
}

double distance(const BallPoint& x, const BallPoint& y) {
  if (x.curvature() != y.curvature()) throw ContractViolation("distance: curvature mismatch");
  const double c = x.curvature();
  // ‖(−x)⊕y‖ in the closed form ‖x−y‖/√(1−2c⟨x,y⟩+c²‖x‖²‖y‖²), symmetric in x and y.
  const double xy = dot(x.coords(), y.coords());
  const double x2 = squared_norm(x.coords()), y2 = squared_norm(y.coords());
  const double den = 1.0 - 2.0 * c * xy + c * c * x2 * y2;
  if (den < kSingularDenominator) throw NearSingularError("distance denominator below 1e-12");
  const double n = norm(x.coords() - y.coords()) / std::sqrt(den);
  if (n < kSmallNorm) return 2.0 * n;
  const double sc = std::sqrt(c);
  return 2.0 / sc * scaled_atanh(sc, n);
}

namespace batched {

ad::Var row_norm(const ad::Var& x) { return ad::sqrt(ad::clamp_min(ad::row_sums(ad::square(x)), 1e-30)); }

ad::Var project(const ad::Var& x, double c) {
  const auto factor = ad::clamp_max(max_norm(c) / row_norm(x), 1.0);
  return x * factor;
}

ad::Var clip(const ad::Var& x, double r) { return x * ad::clamp_max(r / row_norm(x), 1.0); }

ad::Var mobius_add(const ad::Var& x, const ad::Var& y, double c) {
  const auto xy = ad::row_sums(x * y);
  const auto x2 = ad::row_sums(ad::square(x));
  const auto y2 = ad::row_sums(ad::square(y));
  const auto den = 1.0 + 2.0 * c * xy + (c * c) * x2 * y2;
  for (double d : den.value().data()) {
    if (std::abs(d) < kSingularDenominator) throw NearSingularError("Möbius denominator below 1e-12");
  }
  const auto num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y;
  return project(num / den, c);
}

ad::Var expmap0(const ad::Var& v, double c) {
  require_curvature(c);
  const double sc = std::sqrt(c);
  const auto n = row_norm(v);
  return project(v * (ad::tanh(sc * n) / (sc * n)), c);
}

ad::Var logmap0(const ad::Var& x, double c) {
  require_curvature(c);
  const double sc = std::sqrt(c);
  const auto n = row_norm(x);
  for (double v : n.value().data()) {
    if (sc * v >= 1.0 - kBoundaryMargin) throw BoundaryError("point at the ball boundary in logmap0");
  }
  return x * (ad::atanh(sc * n) / (sc * n));
}

}  // namespace batched

}  // namespace hypercurv::geo
