#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypercurv/derivatives.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv {

struct SharpnessConfig {
  int K = 1;
  double rho = 0.05;
  std::vector<double> sweep_steps{0.05, 0.1, 0.2, 0.3, 0.5};
  int power_iters = 50;
  int n_eigs = 3;

  void validate() const;
};

/// 1 − (1 − ‖g‖²)^(K+1); clamped to 1 when ‖g‖² ≥ 1.
double sn_hat(const Tensor& g, int K);
double sn_hat_from_sq(double grad_sq, int K);
/// True when ‖g‖² < 1, the domain in which the closed form is a convergent series.
bool sn_hat_in_domain(const Tensor& g);

/// gᵀ[Σ_{i≤K} (I − ggᵀ)^i]g with the matrix formed explicitly; d ≤ 64.
double sn_exact_small(const Tensor& g, int K);
inline constexpr std::size_t kSnOracleMaxDim = 64;

struct Perturbation {
  Tensor eps;
  /// ∂ŝn/∂w at w.
  Tensor sn_grad;
  bool flat = false;
};

/// ρ·∇ŝn/‖∇ŝn‖ with ∇ŝn = 2(K+1)(1−‖g‖²)^K·H·g.
Perturbation epsilon_hat(const ScalarFn& loss, const Tensor& w, double rho, int K,
                         HvpMode mode = HvpMode::FiniteDifference);

/// Gradient of ŝn∘∇L by central differences, for checking epsilon_hat.
Tensor sn_grad_fd(const ScalarFn& loss, const Tensor& w, int K, double h = 1e-5);

struct PerturbedPoint {
  Tensor w_hat;
  /// ε̂ came from the curvature direction because ∇ŝn vanished.
  bool flat = false;
};

/// ŵ = w + ε̂. At a flat point ε̂ is taken along the leading Hessian
/// eigenvector, the maximiser of the second-order expansion of ŝn.
PerturbedPoint perturbed_point(const ScalarFn& loss, const Tensor& w, double rho, int K,
                               HvpMode mode = HvpMode::FiniteDifference);

struct ScopeSharpness {
  double value = 0.0;
  Tensor w_hat;
  Tensor grad_at_w_hat;
  bool flat = false;
};

ScopeSharpness scope_sharpness(const ScalarFn& loss, const Tensor& w, double rho, int K,
                               HvpMode mode = HvpMode::FiniteDifference);

struct LSharp {
  double value = 0.0;
  bool flat = false;
};

/// max over ± of L(w ± ρg/‖g‖) − L(w).
LSharp l_sharp(const ScalarFn& loss, const Tensor& w, double rho);

struct EigenEstimate {
  std::vector<double> values;  // descending
  std::vector<Tensor> vectors;
  bool converged = true;
};

EigenEstimate top_hessian_eigs(const ScalarFn& loss, const Tensor& w, int n_eigs, int power_iters,
                               std::uint64_t seed = 0, HvpMode mode = HvpMode::FiniteDifference);

struct SweepPoint {
  double zeta;
  double loss;
  std::optional<double> test_accuracy;
};

using AccuracyFn = std::function<double(const Tensor& w)>;

/// Loss along w + ζ‖w‖·o/‖o‖ for a fixed direction o; ordered by ζ.
std::vector<SweepPoint> perturbation_sweep(const ScalarFn& loss, const Tensor& w, const Tensor& direction,
                                           std::vector<double> steps, const AccuracyFn& accuracy = {});
std::vector<SweepPoint> perturbation_sweep(const ScalarFn& loss, const Tensor& w, std::uint64_t direction_seed,
                                           std::vector<double> steps, const AccuracyFn& accuracy = {});

/// max(1, 2·max‖g‖), the divisor that keeps the scaled gradient inside the unit ball.
double loss_scale(double max_grad_norm);
ScalarFn scaled(const ScalarFn& loss, double s);
CurvedFn scaled(const CurvedFn& loss, double s);

struct SharpnessReport {
  double sn_hat = 0.0;
  double scope_sn = 0.0;
  double l_sharp = 0.0;
  std::vector<double> eigenvalues;
  std::vector<SweepPoint> sweep;
};

/// Computes every report field at w. sn_hat and scope_sn use the loss divided by `scale`.
SharpnessReport sharpness_report(const ScalarFn& loss, const Tensor& w, const SharpnessConfig& cfg, double scale,
                                 std::uint64_t seed, const AccuracyFn& accuracy = {});

std::string to_json(const SharpnessReport& r);

}  // namespace hypercurv
