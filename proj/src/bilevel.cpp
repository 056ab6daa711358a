#include "hypercurv/bilevel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hypercurv/sharpness.hpp"
#include "json.hpp"

namespace hypercurv {

void BilevelConfig::validate() const {
  if (T < 1) throw ConfigurationError("T must be at least 1");
  if (outer_iters < 0) throw ConfigurationError("outer_iters must be non-negative");
  if (J < 0) throw ConfigurationError("J must be non-negative");
  if (K < 1) throw ConfigurationError("K must be at least 1");
  if (!(eta > 0.0)) throw ConfigurationError("eta must be positive");
  if (!(rho_hat >= 0.0)) throw ConfigurationError("rho_hat must be non-negative");
  if (!(rho >= 0.0)) throw ConfigurationError("rho must be non-negative");
  if (!(train_fraction > 0.0 && train_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0) ||
      train_fraction + val_fraction > 1.0 + 1e-12) {
    throw ConfigurationError("split fractions must lie in (0,1) and sum to at most 1");
  }
  if (!(eta_c >= 0.0)) throw ConfigurationError("eta_c must be non-negative");
  if (!(c_min > 0.0 && c_min <= c_max)) throw ConfigurationError("curvature bounds must satisfy 0 < c_min <= c_max");
  if (loss_scale && !(*loss_scale > 0.0)) throw ConfigurationError("loss_scale must be positive");
}

CurvatureState::CurvatureState(double c, double c_min, double c_max, double eta_c)
    : c_(c), c_min_(c_min), c_max_(c_max), eta_c_(eta_c) {
  if (!(c_min > 0.0 && c_min <= c_max)) throw ConfigurationError("curvature bounds must satisfy 0 < c_min <= c_max");
  if (!(c >= c_min && c <= c_max)) throw ConfigurationError("initial curvature outside [c_min, c_max]");
}

void CurvatureState::update(int iter, double dfdc) {
  if (!std::isfinite(dfdc)) throw DomainError("non-finite curvature gradient");
  const double prev = c_;
  c_ = std::clamp(c_ - eta_c_ * dfdc, c_min_, c_max_);
  const double moved = eta_c_ > 0.0 ? std::abs(prev - c_) / eta_c_ : std::abs(dfdc);
  history_.push_back({iter, c_, std::abs(dfdc), moved});
}

Problem make_problem(const HnnModel& model, const Batch& train, const Batch& val) {
  ModelConfig vc = model.config();
  vc.weight_decay = 0.0;
  return {model.loss_fn(train), HnnModel(vc).loss_fn(val)};
}

Tensor sam_step(const ScalarFn& loss, const Tensor& w, double eta, double rho_hat) {
  const Tensor g = grad(loss, w);
  const double gn = norm(g);
  if (gn == 0.0) return w;
  if (rho_hat == 0.0 || gn < 1e-12) return axpy(w, -eta, g);
  const Tensor wp = axpy(w, rho_hat / gn, g);
  return axpy(w, -eta, grad(loss, wp));
}

OuterValue outer_objective(const Problem& p, const Tensor& w_star, double c, int K, double rho, double scale,
                           HvpMode mode) {
  OuterValue out;
  out.val_loss = evaluate(at_curvature(p.val_loss, c), w_star);
  const auto ls = scaled(at_curvature(p.train_loss, c), scale);
  const auto s = scope_sharpness(ls, w_star, rho, K, mode);
  out.sn = s.value;
  out.flat = s.flat;
  out.F = out.val_loss + out.sn;
  return out;
}

U1Result u1_neumann(const Problem& p, const Tensor& w_star, double c, int J, double scale, HvpMode mode) {
  const auto train_s = scaled(p.train_loss, scale);
  const auto ls = at_curvature(train_s, c);
  Tensor v = grad(at_curvature(p.val_loss, c), w_star);
  Tensor acc = v;
  U1Result out;
  double prev = norm(v);
  int growth = 0;
  for (int i = 0; i < J; ++i) {
    if (norm(v) < 1e-12) break;
    v = v - hvp(ls, w_star, v, mode);
    acc = acc + v;
    const double n = norm(v);
    growth = n > prev ? growth + 1 : 0;
    prev = n;
    if (growth >= 3) {
      out.diverged = true;
      break;
    }
  }
  out.value = -dot(acc, mixed_partial_c(train_s, w_star, c));
  return out;
}

namespace {

double sn_coefficient(double a, int K) { return a >= 1.0 ? 0.0 : 2.0 * (K + 1) * std::pow(1.0 - a, K); }

}  // namespace

U2Result u2_term(const Problem& p, const Tensor& w_star, double c, int K, double rho, double scale, HvpMode mode) {
  const auto train_s = scaled(p.train_loss, scale);
  const auto ls = at_curvature(train_s, c);
  const auto pt = perturbed_point(ls, w_star, rho, K, mode);
  const Tensor g = grad(ls, pt.w_hat);
  if (norm(g) == 0.0) return {0.0, pt.flat};
  const double coef = sn_coefficient(squared_norm(g), K);
  return {-coef * dot(g, mixed_partial_c(train_s, w_star, c)), pt.flat};
}

Hypergradient curvature_grad(const Problem& p, const Tensor& w_star, double c, const BilevelConfig& cfg,
                             double scale) {
  Hypergradient h;
  h.direct = partial_c(p.val_loss, w_star, c);
  const auto train_s = scaled(p.train_loss, scale);
  const auto pt = perturbed_point(at_curvature(train_s, c), w_star, cfg.rho, cfg.K, cfg.hvp_mode);
  const Tensor g = grad(at_curvature(train_s, c), pt.w_hat);
  if (norm(g) > 0.0) {
    h.direct += sn_coefficient(squared_norm(g), cfg.K) * dot(g, mixed_partial_c(train_s, pt.w_hat, c));
  }
  const auto u2 = u2_term(p, w_star, c, cfg.K, cfg.rho, scale, cfg.hvp_mode);
  h.u2 = u2.value;
  h.flat = u2.flat;
  const auto u1 = u1_neumann(p, w_star, c, cfg.J, scale, cfg.hvp_mode);
  h.u1 = u1.value;
  h.diverged = u1.diverged;
  h.total = h.direct + h.u1 + h.u2;
  return h;
}

std::string to_json_line(const TelemetryRecord& r) {
  nlohmann::ordered_json j;
  j["iter"] = r.iter;
  j["c"] = r.c;
  j["F"] = r.F;
  j["grad_norm"] = r.grad_norm;
  j["sn_hat"] = r.sn_hat;
  j["l_sharp"] = r.l_sharp;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

RunResult run_algorithm1(const Problem& p, Tensor w0, double c0, const BilevelConfig& cfg, const TelemetrySink& sink) {
  cfg.validate();
  RunResult out{std::move(w0), CurvatureState(c0, cfg.c_min, cfg.c_max, cfg.eta_c), {}, {}, 1.0};
  if (cfg.outer_iters == 0) return out;
  out.scale = cfg.loss_scale ? *cfg.loss_scale : loss_scale(norm(grad(at_curvature(p.train_loss, c0), out.w)));
  Tensor& w = out.w;
  CurvatureState& st = out.state;
  int step = 0;
  for (int it = 1; it <= cfg.outer_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor w_prev = w;
    const double c = st.c();
    try {
      const auto ls = at_curvature(p.train_loss, c);
      for (int t = 0; t < cfg.T; ++t) {
        ++step;
        const double decay = cfg.decay_schedule ? 1.0 / std::sqrt(static_cast<double>(step)) : 1.0;
        const Tensor g = grad(ls, w);
        out.inner_grad_sq.push_back(squared_norm(g));
        w = sam_step(ls, w, cfg.eta * decay, cfg.rho_hat * decay);
      }
      if (!w.all_finite()) throw DomainError("inner training produced non-finite parameters");
      TelemetryRecord rec;
      rec.iter = it;
      rec.c = c;
      rec.F = outer_objective(p, w, c, cfg.K, cfg.rho, out.scale, cfg.hvp_mode).F;
      const Tensor g = grad(ls, w);
      rec.grad_norm = norm(g);
      rec.sn_hat = sn_hat(g / out.scale, cfg.K);
      rec.l_sharp = l_sharp(ls, w, cfg.rho).value;
      if (cfg.learn_curvature) {
        const auto h = curvature_grad(p, w, c, cfg, out.scale);
        st.update(it, h.total);
        if (!(st.c() >= st.c_min() && st.c() <= st.c_max())) throw ContractViolation("curvature left its bounds");
      }
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      out.telemetry.push_back(rec);
      if (sink) sink(rec);
    } catch (const Error& e) {
      throw RunAborted(std::string("outer iteration ") + std::to_string(it) + ": " + e.what(), w_prev, c, it);
    }
  }
  return out;
}

}  // namespace hypercurv
