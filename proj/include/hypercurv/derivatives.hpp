#pragma once

#include <functional>
#include <utility>

#include "hypercurv/autodiff.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv {

using ScalarFn = std::function<ad::Var(const ad::Var& w)>;
/// Loss depending on parameters and a curvature scalar.
using CurvedFn = std::function<ad::Var(const ad::Var& w, double c)>;

enum class HvpMode { FiniteDifference, Analytic };

double evaluate(const ScalarFn& f, const Tensor& w);
Tensor grad(const ScalarFn& f, const Tensor& w);
std::pair<double, Tensor> value_and_grad(const ScalarFn& f, const Tensor& w);

/// Hessian-vector product H(w)·v without forming H.
Tensor hvp(const ScalarFn& f, const Tensor& w, const Tensor& v, HvpMode mode = HvpMode::FiniteDifference);

/// Step used by the finite-difference Hessian-vector product.
double weight_fd_step(const Tensor& w);
/// Step used for curvature finite differences.
double curvature_fd_step(double c);

/// ∂(∇_w f)/∂c by central differences in c.
Tensor mixed_partial_c(const CurvedFn& f, const Tensor& w, double c);
/// ∂f/∂c at fixed w, same stencil as mixed_partial_c.
double partial_c(const CurvedFn& f, const Tensor& w, double c);

inline ScalarFn at_curvature(const CurvedFn& f, double c) {
  return [f, c](const ad::Var& w) { return f(w, c); };
}

}  // namespace hypercurv
