#include "hypercurv/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hypercurv/error.hpp"
#include "json.hpp"

namespace hypercurv {

void SharpnessConfig::validate() const {
  if (K < 1) throw ConfigurationError("sharpness K must be at least 1");
  if (!(rho > 0.0)) throw ConfigurationError("sharpness rho must be positive");
  for (double z : sweep_steps) {
    if (!(z > 0.0 && z < 1.0)) throw ConfigurationError("sweep steps must lie in (0,1)");
  }
  if (power_iters < 10) throw ConfigurationError("power_iters must be at least 10");
  if (n_eigs < 1) throw ConfigurationError("n_eigs must be positive");
}

double sn_hat_from_sq(double grad_sq, int K) {
  if (K < 0) throw ContractViolation("truncation K must be non-negative");
  if (grad_sq >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - grad_sq, K + 1);
}

double sn_hat(const Tensor& g, int K) { return sn_hat_from_sq(squared_norm(g), K); }

bool sn_hat_in_domain(const Tensor& g) { return squared_norm(g) < 1.0; }

double sn_exact_small(const Tensor& g, int K) {
  const std::size_t d = g.numel();
  if (d > kSnOracleMaxDim) {
    throw SizeError("sn_exact_small refuses dimension " + std::to_string(d) + " above the oracle cap of 64");
  }
  if (K < 0) throw ContractViolation("truncation K must be non-negative");
  std::vector<double> M(d * d), P(d * d, 0.0), S(d * d, 0.0), tmp(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) M[i * d + j] = (i == j ? 1.0 : 0.0) - g[i] * g[j];
    P[i * d + i] = 1.0;
    S[i * d + i] = 1.0;
  }
  for (int k = 1; k <= K; ++k) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < d; ++l)
        for (std::size_t j = 0; j < d; ++j) tmp[i * d + j] += P[i * d + l] * M[l * d + j];
    P.swap(tmp);
    for (std::size_t i = 0; i < d * d; ++i) S[i] += P[i];
  }
  double out = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out += g[i] * S[i * d + j] * g[j];
  return out;
}

Perturbation epsilon_hat(const ScalarFn& loss, const Tensor& w, double rho, int K, HvpMode mode) {
  const Tensor g = grad(loss, w);
  const double a = squared_norm(g);
  Perturbation out{Tensor::zeros_like(w), Tensor::zeros_like(w), false};
  if (std::sqrt(a) < 1e-12) {
    out.flat = true;
    return out;
  }
  const double coef = 2.0 * (K + 1) * std::pow(1.0 - a, K);
  out.sn_grad = coef * hvp(loss, w, g, mode);
  const double n = norm(out.sn_grad);
  if (n < 1e-12) {
    out.flat = true;
    return out;
  }
  out.eps = out.sn_grad * (rho / n);
  return out;
}

Tensor sn_grad_fd(const ScalarFn& loss, const Tensor& w, int K, double h) {
  Tensor out = Tensor::zeros_like(w);
  for (std::size_t i = 0; i < w.numel(); ++i) {
    Tensor p = w, m = w;
    p[i] += h;
    m[i] -= h;
    out[i] = (sn_hat(grad(loss, p), K) - sn_hat(grad(loss, m), K)) / (2.0 * h);
  }
  return out;
}

PerturbedPoint perturbed_point(const ScalarFn& loss, const Tensor& w, double rho, int K, HvpMode mode) {
  const auto p = epsilon_hat(loss, w, rho, K, mode);
  if (!p.flat) return {w + p.eps, false};
  const auto eig = top_hessian_eigs(loss, w, 1, 30, 0, mode);
  if (eig.vectors.empty() || !(std::abs(eig.values[0]) > 0.0)) return {w, true};
  return {axpy(w, rho, eig.vectors[0]), true};
}

ScopeSharpness scope_sharpness(const ScalarFn& loss, const Tensor& w, double rho, int K, HvpMode mode) {
  auto p = perturbed_point(loss, w, rho, K, mode);
  Tensor g = grad(loss, p.w_hat);
  const double v = sn_hat(g, K);
  return {v, std::move(p.w_hat), std::move(g), p.flat};
}

LSharp l_sharp(const ScalarFn& loss, const Tensor& w, double rho) {
  if (rho == 0.0) return {0.0, false};
  const auto [l0, g] = value_and_grad(loss, w);
  const double gn = norm(g);
  if (gn < 1e-12) return {0.0, true};
  const Tensor e = g * (rho / gn);
  const double lp = evaluate(loss, w + e);
  const double lm = evaluate(loss, w - e);
  return {std::max(lp, lm) - l0, false};
}

namespace {

void orthogonalize(Tensor& v, const std::vector<Tensor>& basis) {
  for (const auto& b : basis) v = axpy(v, -dot(b, v), b);
}

}  // namespace

EigenEstimate top_hessian_eigs(const ScalarFn& loss, const Tensor& w, int n_eigs, int power_iters,
                               std::uint64_t seed, HvpMode mode) {
  if (n_eigs < 1 || static_cast<std::size_t>(n_eigs) > w.numel()) {
    throw ContractViolation("n_eigs must lie in [1, dim(w)]");
  }
  if (power_iters < 10) {
    throw ContractViolation("power iteration needs at least 10 iterations");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  EigenEstimate out;
  for (int k = 0; k < n_eigs; ++k) {
    Tensor v = Tensor::zeros_like(w);
    for (auto& x : v.storage()) x = nd(rng);
    orthogonalize(v, out.vectors);
    v = v / norm(v);
    double lambda = 0.0, rel = std::numeric_limits<double>::infinity();
    for (int it = 0; it < power_iters; ++it) {
      Tensor u = hvp(loss, w, v, mode);
      orthogonalize(u, out.vectors);
      const double next = dot(v, u);
      const double un = norm(u);
      rel = it == 0 ? rel : std::abs(next - lambda) / std::max(std::abs(next), 1e-12);
      lambda = next;
      if (un < 1e-300) {
        rel = 0.0;
        break;
      }
      v = u / un;
      orthogonalize(v, out.vectors);
      v = v / norm(v);
      if (rel < 1e-10) break;
    }
    if (rel > 1e-3) out.converged = false;
    out.values.push_back(lambda);
    out.vectors.push_back(v);
  }
  std::vector<std::size_t> order(out.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return out.values[a] > out.values[b]; });
  EigenEstimate sorted{{}, {}, out.converged};
  for (auto i : order) {
    sorted.values.push_back(out.values[i]);
    sorted.vectors.push_back(out.vectors[i]);
  }
  return sorted;
}

std::vector<SweepPoint> perturbation_sweep(const ScalarFn& loss, const Tensor& w, const Tensor& direction,
                                           std::vector<double> steps, const AccuracyFn& accuracy) {
  const double wn = norm(w);
  if (!(wn > 0.0)) throw ContractViolation("perturbation sweep needs a nonzero parameter vector");
  const double on = norm(direction);
  if (!(on > 0.0)) throw DegenerateDirectionError("sweep direction is zero");
  std::sort(steps.begin(), steps.end());
  std::vector<SweepPoint> out;
  out.reserve(steps.size());
  for (double z : steps) {
    const Tensor wz = axpy(w, z * wn / on, direction);
    std::optional<double> acc;
    if (accuracy) acc = accuracy(wz);
    out.push_back({z, evaluate(loss, wz), acc});
  }
  return out;
}

std::vector<SweepPoint> perturbation_sweep(const ScalarFn& loss, const Tensor& w, std::uint64_t direction_seed,
                                           std::vector<double> steps, const AccuracyFn& accuracy) {
  std::mt19937_64 rng(direction_seed);
  std::normal_distribution<double> nd;
  Tensor o = Tensor::zeros_like(w);
  for (auto& x : o.storage()) x = nd(rng);
  return perturbation_sweep(loss, w, o, std::move(steps), accuracy);
}

double loss_scale(double max_grad_norm) { return std::max(1.0, 2.0 * max_grad_norm); }

ScalarFn scaled(const ScalarFn& loss, double s) {
  if (s == 1.0) return loss;
  return [loss, s](const ad::Var& w) { return loss(w) / s; };
}

CurvedFn scaled(const CurvedFn& loss, double s) {
  if (s == 1.0) return loss;
  return [loss, s](const ad::Var& w, double c) { return loss(w, c) / s; };
}

SharpnessReport sharpness_report(const ScalarFn& loss, const Tensor& w, const SharpnessConfig& cfg, double scale,
                                 std::uint64_t seed, const AccuracyFn& accuracy) {
  cfg.validate();
  const auto ls = scaled(loss, scale);
  SharpnessReport r;
  r.sn_hat = sn_hat(grad(ls, w), cfg.K);
  r.scope_sn = scope_sharpness(ls, w, cfg.rho, cfg.K).value;
  r.l_sharp = l_sharp(loss, w, cfg.rho).value;
  r.eigenvalues = top_hessian_eigs(loss, w, std::min<int>(cfg.n_eigs, static_cast<int>(w.numel())),
                                   cfg.power_iters, seed)
                      .values;
  r.sweep = perturbation_sweep(loss, w, seed, cfg.sweep_steps, accuracy);
  return r;
}

std::string to_json(const SharpnessReport& r) {
  nlohmann::ordered_json j;
  j["sn_hat"] = r.sn_hat;
  j["scope_sn"] = r.scope_sn;
  j["l_sharp"] = r.l_sharp;
  j["eigenvalues"] = r.eigenvalues;
  auto sweep = nlohmann::ordered_json::array();
  for (const auto& p : r.sweep) {
    nlohmann::ordered_json e;
    e["zeta"] = p.zeta;
    e["train_loss"] = p.loss;
    e["test_accuracy"] = p.test_accuracy ? nlohmann::ordered_json(*p.test_accuracy) : nlohmann::ordered_json();
    sweep.push_back(e);
  }
  j["sweep"] = sweep;
  return j.dump(2);
}

}  // namespace hypercurv
