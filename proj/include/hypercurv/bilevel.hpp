#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypercurv/derivatives.hpp"
#include "hypercurv/error.hpp"
#include "hypercurv/hnn_model.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv {

struct BilevelConfig {
  int T = 2;            // SAM steps per outer iteration
  int outer_iters = 10;
  double eta = 0.1;
  double rho_hat = 0.05;
  int J = 2;
  int K = 1;
  /// Radius of the sharpness neighbourhood used by F.
  double rho = 0.05;
  double train_fraction = 0.8;
  double val_fraction = 0.2;
  double eta_c = 1e-3;
  double c_min = 1e-6;
  double c_max = 1.0;
  /// η⁰/√t and ρ̂⁰/√t over the global inner step counter.
  bool decay_schedule = false;
  bool learn_curvature = true;
  HvpMode hvp_mode = HvpMode::FiniteDifference;
  /// Replaces the automatic loss scale when set.
  std::optional<double> loss_scale;

  void validate() const;
};

struct CurvatureHistoryEntry {
  int iter;
  double c;
  double abs_grad;
  /// |c_prev − c|/η_c, the step actually taken; equals abs_grad unless the clamp bit.
  double projected_grad;
};

class CurvatureState {
 public:
  CurvatureState(double c, double c_min, double c_max, double eta_c);

  double c() const { return c_; }
  double c_min() const { return c_min_; }
  double c_max() const { return c_max_; }
  double eta_c() const { return eta_c_; }
  const std::vector<CurvatureHistoryEntry>& history() const { return history_; }

  /// c ← clamp(c − η_c·dF/dc).
  void update(int iter, double dfdc);

 private:
  double c_, c_min_, c_max_, eta_c_;
  std::vector<CurvatureHistoryEntry> history_;
};

/// Inner (training) and outer (validation) losses as functions of (w, c).
struct Problem {
  CurvedFn train_loss;
  CurvedFn val_loss;
};

Problem make_problem(const HnnModel& model, const Batch& train, const Batch& val);

/// One SAM step: gradient taken at w + ρ̂·g/‖g‖.
Tensor sam_step(const ScalarFn& loss, const Tensor& w, double eta, double rho_hat);

struct OuterValue {
  double F = 0.0;
  double val_loss = 0.0;
  double sn = 0.0;
  bool flat = false;
};

/// L_V(w*) + ŝn(ŵ) with the sharpness taken on L_S/scale.
OuterValue outer_objective(const Problem& p, const Tensor& w_star, double c, int K, double rho, double scale,
                           HvpMode mode = HvpMode::FiniteDifference);

struct U1Result {
  double value = 0.0;
  bool diverged = false;
};

/// −∇L_V·[Σ_{i≤J}(I − H)^i]·∂²_{wc}L_S, all on L_S/scale.
U1Result u1_neumann(const Problem& p, const Tensor& w_star, double c, int J, double scale,
                    HvpMode mode = HvpMode::FiniteDifference);

struct U2Result {
  double value = 0.0;
  bool flat = false;
};

U2Result u2_term(const Problem& p, const Tensor& w_star, double c, int K, double rho, double scale,
                 HvpMode mode = HvpMode::FiniteDifference);

struct Hypergradient {
  double direct = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double total = 0.0;
  bool diverged = false;
  bool flat = false;
};

Hypergradient curvature_grad(const Problem& p, const Tensor& w_star, double c, const BilevelConfig& cfg,
                             double scale);

struct TelemetryRecord {
  int iter = 0;
  double c = 0.0;
  double F = 0.0;
  double grad_norm = 0.0;
  double sn_hat = 0.0;
  double l_sharp = 0.0;
  double wall_ms = 0.0;
};

std::string to_json_line(const TelemetryRecord& r);

using TelemetrySink = std::function<void(const TelemetryRecord&)>;

struct RunResult {
  Tensor w;
  CurvatureState state;
  std::vector<TelemetryRecord> telemetry;
  /// ‖∇_w L_S‖² before every inner step.
  std::vector<double> inner_grad_sq;
  double scale = 1.0;
};

/// Raised when a run fails part-way; carries the last consistent state.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, Tensor w, double c, int iter)
      : Error(what), w(std::move(w)), c(c), iter(iter) {}
  Tensor w;
  double c;
  int iter;
};

RunResult run_algorithm1(const Problem& p, Tensor w0, double c0, const BilevelConfig& cfg,
                         const TelemetrySink& sink = {});

}  // namespace hypercurv
