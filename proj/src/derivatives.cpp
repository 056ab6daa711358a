#include "hypercurv/derivatives.hpp"

#include <algorithm>
#include <cmath>

#include "hypercurv/error.hpp"

namespace hypercurv {

namespace {

void require_finite(const Tensor& w) {
  if (!w.all_finite()) throw DomainError("parameters contain non-finite entries");
}

struct CurvatureStencil {
  double lo, hi;
};

// Central stencil when both sides stay positive, forward stencil otherwise.
CurvatureStencil curvature_stencil(double c) {
  if (!(c > 0.0)) throw DomainError("curvature must be positive, got " + std::to_string(c));
  const double h = curvature_fd_step(c);
  if (c - h > 0.0) return {c - h, c + h};
  return {c, c + h};
}

}  // namespace

double evaluate(const ScalarFn& f, const Tensor& w) {
  ad::NoGradGuard guard;
  return f(ad::constant(w)).item();
}

std::pair<double, Tensor> value_and_grad(const ScalarFn& f, const Tensor& w) {
  require_finite(w);
  ad::GradTape tape;
  auto x = tape.leaf(w);
  auto y = f(x);
  if (y.numel() != 1) throw ContractViolation("gradient requires a scalar-valued function");
  const double v = y.value()[0];
  auto g = tape.gradient(y, {x});
  return {v, g[0].value().reshaped(w.shape())};
}

Tensor grad(const ScalarFn& f, const Tensor& w) { return value_and_grad(f, w).second; }

double weight_fd_step(const Tensor& w) { return std::max(1e-5, 1e-5 * norm(w)); }

double curvature_fd_step(double c) { return std::max(1e-6, 1e-4 * c); }

Tensor hvp(const ScalarFn& f, const Tensor& w, const Tensor& v, HvpMode mode) {
  if (v.numel() != w.numel()) throw ContractViolation("hvp: direction length does not match parameters");
  const double vn = norm(v);
  if (vn < 1e-12) throw DegenerateDirectionError("hvp direction norm below 1e-12");
  require_finite(w);

  if (mode == HvpMode::Analytic) {
    ad::GradTape tape;
    auto x = tape.leaf(w);
    auto y = f(x);
    auto g = tape.gradient(y, {x}, true)[0];
    auto gv = ad::dot(g, ad::constant(v.reshaped(g.shape())));
    if (!gv.requires_grad()) return Tensor::zeros_like(w);
    return tape.gradient(gv, {x})[0].value().reshaped(w.shape());
  }

  const double h = weight_fd_step(w);
  const Tensor u = v / vn;
  const Tensor gp = grad(f, axpy(w, h, u.reshaped(w.shape())));
  const Tensor gm = grad(f, axpy(w, -h, u.reshaped(w.shape())));
  return (gp - gm) * (vn / (2.0 * h));
}

Tensor mixed_partial_c(const CurvedFn& f, const Tensor& w, double c) {
  const auto s = curvature_stencil(c);
  const Tensor gp = grad(at_curvature(f, s.hi), w);
  const Tensor gm = grad(at_curvature(f, s.lo), w);
  return (gp - gm) / (s.hi - s.lo);
}

double partial_c(const CurvedFn& f, const Tensor& w, double c) {
  const auto s = curvature_stencil(c);
  return (evaluate(at_curvature(f, s.hi), w) - evaluate(at_curvature(f, s.lo), w)) / (s.hi - s.lo);
}

}  // namespace hypercurv
