#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypercurv/hnn_model.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::lip {

/// Scalars the bound formulas depend on beyond the points themselves.
struct LipschitzContext {
  double c = 1.0;
  /// Curvature pair for the curvature-sensitivity bound; both ≤ c.
  double c1 = 1.0;
  double c2 = 1.0;
  /// cos θ̃: every constrained pair has cos θ ≥ cos_theta_bound.
  double cos_theta_bound = 0.1;
  double L_f = 1.0;
  /// Lipschitz constant of the loss in the predicted probability.
  double L_loss = 1.0;
  double L_p = 1.0;
  double a_norm = 1.0;
  double rho = 0.05;
  double N_tilde = 1.0;
  /// ‖x‖ of the tangent vector fed to the exponential map.
  double tangent_norm = 1.0;
  /// ‖x₂‖ in the exponential-map bound in its tangent argument.
  double tangent_norm_2 = 1.0;
  /// ‖y‖ of the tangent point moved to the origin.
  double tangent_point_norm = 0.0;

  void validate() const;
  /// L_𝓛 = L_loss·L_p.
  double loss_constant() const { return L_loss * L_p; }
};

/// |1 + 2c⟨x,y⟩ + c²‖x‖²‖y‖²|; raises DegenerateContextError below 1e-12.
double mobius_denominator(double c, const Tensor& x, const Tensor& y);

// General forms, evaluated at concrete points.
double mobius_c(const Tensor& x, const Tensor& y, double c1, double c2);
double mobius_c0(const Tensor& x, const Tensor& y, double c);
double mobius_y(const Tensor& x, const Tensor& y1, const Tensor& y2, double c);
double mobius_x(const Tensor& x1, const Tensor& x2, const Tensor& y, double c);
double expmap_y(double L_oy, double L_ox, double c, double x_norm, double y1_norm, double y2_norm);
double expmap_x(double L_oy, double c, double y_norm, double x2_norm);
double logmap_y(double L_ox, double c, double x_norm, double y1_norm, double y1_plus_y2_norm);

// Forms that use only the ball constraint and the angle bound.
/// Coefficient of |c₁ − c₂|; the printed expression is this times |c₂ − c₁|.
double mobius_c_angular(double c, double c1, double c2, double cos_bound);
double mobius_c0_angular(double c, double cos_bound);
double mobius_y_angular(double cos_bound);
double mobius_x_angular(double cos_bound);
double expmap_y_constrained(double L_oy, double L_ox, double c, double x_norm);
double expmap_x_constrained(double L_oy, double c, double x2_norm);
double logmap_y_constrained(double L_ox, double c);

/// L_𝓛 L_⊕x (L_expm_y + L_expm_x L_f L_logm_y ‖a‖).
double tangent(double L_loss, double L_ox, double L_ey, double L_ex, double L_f, double L_ly, double a_norm);
/// Value of the tangent constant as c → 0.
double tangent_limit(double L_loss, double L_f, double a_norm);

struct ConstantSet {
  double L_oc = 0.0;  // coefficient of |c₁ − c₂|
  double L_oc0 = 0.0;
  double L_oy = 0.0;
  double L_ox = 0.0;
  double L_expm_y = 0.0;
  double L_expm_x = 0.0;
  double L_logm_y = 0.0;
  double L_tangent = 0.0;
  /// ‖y‖·L_tangent.
  double E_ly = 0.0;
  /// L_tangent/c, the form that only uses the ball constraint on y.
  double E_ly_hyperbolic = 0.0;
};

/// Every constant in its constrained/angular form.
ConstantSet constrained_constants(const LipschitzContext& ctx);

struct BoundTerms {
  double E_lgen_prime = 0.0;
  double E_lc = 0.0;
  double E_lc_prime = 0.0;
  double E_ly_prime = 0.0;
  double E_ly = 0.0;
  double E_lgen = 0.0;
};

/// sqrt((d log(1 + ‖w‖²/ρ²(1+sqrt(log n/d))²) + 4 log(n/δ) + 8 log(6n+3d)) / (n−1)).
double generalization_radical(std::size_t n, std::size_t d, double delta, double w_norm, double rho);

/// Generalisation-bound terms from a constant set; E_lgen sums the other five.
BoundTerms bound_terms(const LipschitzContext& ctx, const ConstantSet& k, std::size_t n, std::size_t d,
                       double delta, double w_norm);

/// 1.1 × max ‖f_a(logm₀(x))‖ over the inputs.
double estimate_n_tilde(const HnnModel& model, const Tensor& w, const Tensor& inputs, double c);

enum class Theorem { MobiusC, MobiusY, MobiusX, ExpmapY, ExpmapX, LogmapY, Tangent };
enum class Form { General, Constrained };

std::string to_string(Theorem t);
Theorem theorem_from_string(const std::string& s);
const std::vector<Theorem>& all_theorems();

struct SamplerConfig {
  double c = 1.0;
  std::size_t min_dim = 2;
  std::size_t max_dim = 5;
  /// Points are drawn with norm ≤ radius_fraction/√c.
  double radius_fraction = 0.9;
  double cos_theta_bound = 0.1;
  /// c₂ = c·U(lo, 1).
  double c2_low = 0.25;
  int max_rejections = 10000;
  std::uint64_t seed = 0;
};

struct CertificateReport {
  std::string name;
  Form form = Form::General;
  double curvature = 0.0;
  /// Largest constant seen over the samples.
  double formula_value = 0.0;
  std::size_t n_samples = 0;
  double max_ratio = 0.0;
  std::size_t violations = 0;
  /// Samples whose constant was infinite (holds trivially, ratio 0).
  std::size_t unbounded = 0;
};

inline constexpr double kRatioSlack = 1e-9;

CertificateReport verify_inequality(Theorem which, Form form, const SamplerConfig& sampler, std::size_t n_samples,
                                    const LipschitzContext& ctx = {});

struct MonotonicityFlag {
  std::string constant;
  std::string argument;
  double at = 0.0;
};

/// Diagnostic: scans each norm argument over a grid and reports where a constant decreases.
std::vector<MonotonicityFlag> monotonicity_scan(double c, int grid = 16);

std::string to_json(const std::vector<CertificateReport>& reports);

}  // namespace hypercurv::lip
