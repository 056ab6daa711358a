#include "hypercurv/lipschitz.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "hypercurv/error.hpp"
#include "hypercurv/poincare.hpp"
#include "json.hpp"

namespace hypercurv::lip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq(double v) { return v * v; }
double cube(double v) { return v * v * v; }

void require_positive_c(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("curvature must be positive and finite");
}

double angular_denominator(double cos_bound) {
  if (!(cos_bound > -1.0 && cos_bound < 1.0)) throw ConfigurationError("cos_theta_bound must lie in (-1, 1)");
  return sq(1.0 - sq(cos_bound));
}

}  // namespace

void LipschitzContext::validate() const {
  require_positive_c(c);
  if (!(c1 > 0.0 && c2 > 0.0)) throw ConfigurationError("c1 and c2 must be positive");
  if (!(sq(cos_theta_bound) < 1.0)) throw ConfigurationError("cos_theta_bound must lie in (-1, 1)");
  if (!(L_f > 0.0 && L_loss > 0.0 && L_p > 0.0)) throw ConfigurationError("assumed Lipschitz constants must be positive");
  if (!(a_norm >= 0.0 && rho >= 0.0 && N_tilde >= 0.0)) throw ConfigurationError("norms must be non-negative");
  if (!(tangent_norm >= 0.0 && tangent_norm_2 >= 0.0)) throw ConfigurationError("tangent norms must be non-negative");
  if (!(tangent_point_norm >= 0.0 && c * sq(tangent_point_norm) < 1.0)) {
    throw ConfigurationError("tangent point must lie inside the ball");
  }
}

double mobius_denominator(double c, const Tensor& x, const Tensor& y) {
  const double n = std::abs(1.0 + 2.0 * c * dot(x, y) + c * c * squared_norm(x) * squared_norm(y));
  if (n < 1e-12) throw DegenerateContextError("Mobius denominator below 1e-12");
  return n;
}

double mobius_c(const Tensor& x, const Tensor& y, double c1, double c2) {
  require_positive_c(c1);
  require_positive_c(c2);
  const double a = norm(x), b = norm(y);
  const double num = 2 * a * b + 3 * a * a * b + 2 * a * b * b + (c1 + c2) * a * a * cube(b) +
                     (c1 + c2) * cube(a) * b * b + c1 * c2 * cube(a) * sq(b * b) + 3 * c1 * c2 * sq(a * a) * cube(b);
  return num / (mobius_denominator(c1, x, y) * mobius_denominator(c2, x, y));
}

double mobius_c0(const Tensor& x, const Tensor& y, double c) {
  require_positive_c(c);
  const double a = norm(x), b = norm(y);
  const double num =
      2 * c * a * b + 3 * c * a * a * b + 2 * c * a * b * b + c * c * a * a * cube(b) + c * c * cube(a) * b * b;
  return num / mobius_denominator(c, x, y);
}

double mobius_y(const Tensor& x, const Tensor& y1, const Tensor& y2, double c) {
  require_positive_c(c);
  const double a = norm(x), p = norm(y1), q = norm(y2);
  const double num = 1 + c * (5 * a * a + 5 * a * p + a * q) +
                     c * c * a * a * (13 * a * p + a * q + 6 * p * p + 3 * p * q) +
                     cube(c) * cube(a) * (6 * a * p * p + 3 * a * p * q + 2 * cube(p) + 2 * p * p * q);
  return num / (mobius_denominator(c, x, y1) * mobius_denominator(c, x, y2));
}

double mobius_x(const Tensor& x1, const Tensor& x2, const Tensor& y, double c) {
  require_positive_c(c);
  const double p = norm(x1), q = norm(x2), b = norm(y);
  const double num = 1 + 3 * c * b * b + 3 * c * p * b + 7 * c * q * b +
                     c * c * b * b * (7 * p * q + p * b + 5 * q * b + 6 * q * q) +
                     cube(c) * q * cube(b) * (4 * p * p + 4 * p * q + 2 * q * b + p * b);
  return num / (mobius_denominator(c, x1, y) * mobius_denominator(c, x2, y));
}

double expmap_y(double L_oy, double L_ox, double c, double x_norm, double y1_norm, double y2_norm) {
  require_positive_c(c);
  const double num = L_oy * c * x_norm * (y1_norm + y2_norm);
  const double den = sq(1.0 - std::sqrt(c));
  if (den == 0.0) return num == 0.0 ? L_ox : kInf;
  return num / den + L_ox;
}

double expmap_x(double L_oy, double c, double y_norm, double x2_norm) {
  require_positive_c(c);
  const double s = 1.0 - c * y_norm * y_norm;
  if (s <= 0.0) throw DegenerateContextError("base point outside the ball");
  const double k = std::sqrt(c) * x2_norm;
  const double second = k < 1e-12 ? 2.0 / s : 2.0 * std::tanh(k / s) / k;
  return L_oy * (std::abs(1.0 / s) + second);
}

double logmap_y(double L_ox, double c, double x_norm, double y1_norm, double y1_plus_y2_norm) {
  require_positive_c(c);
  const double rc = std::sqrt(c);
  return L_ox * sq(1.0 + c * x_norm * y1_norm) + 0.25 * rc * y1_plus_y2_norm + rc * L_ox;
}

double mobius_c_angular(double c, double c1, double c2, double cos_bound) {
  require_positive_c(c);
  const double num = 6.0 / std::pow(c, 1.5) + 2.0 / c + 4.0 * c1 * c2 / std::pow(c, 3.5) +
                     2.0 * (c1 + c2) / std::pow(c, 2.5);
  return num / angular_denominator(cos_bound);
}

double mobius_c0_angular(double c, double cos_bound) {
  require_positive_c(c);
  return (8.0 / std::sqrt(c) + 2.0) / angular_denominator(cos_bound);
}

double mobius_y_angular(double cos_bound) { return 48.0 / angular_denominator(cos_bound); }

double mobius_x_angular(double cos_bound) { return 44.0 / angular_denominator(cos_bound); }

double expmap_y_constrained(double L_oy, double L_ox, double c, double x_norm) {
  require_positive_c(c);
  const double num = 2.0 * std::sqrt(c) * L_oy * x_norm;
  const double den = sq(1.0 - std::sqrt(c));
  if (den == 0.0) return num == 0.0 ? L_ox : kInf;
  return num / den + L_ox;
}

double expmap_x_constrained(double L_oy, double c, double x2_norm) {
  require_positive_c(c);
  const double rc = std::sqrt(c);
  if (x2_norm <= 0.0) throw DegenerateContextError("constrained exponential-map bound needs a nonzero tangent");
  const double first = rc == 1.0 ? kInf : L_oy * std::abs(1.0 / (1.0 - rc));
  return first + 2.0 * L_oy / (rc * x2_norm);
}

double logmap_y_constrained(double L_ox, double c) {
  require_positive_c(c);
  return 4.0 * L_ox + 0.5 + std::sqrt(c) * L_ox;
}

double tangent(double L_loss, double L_ox, double L_ey, double L_ex, double L_f, double L_ly, double a_norm) {
  return L_loss * L_ox * (L_ey + L_ex * L_f * L_ly * a_norm);
}

double tangent_limit(double L_loss, double L_f, double a_norm) { return L_loss + L_loss * L_f * a_norm; }

ConstantSet constrained_constants(const LipschitzContext& ctx) {
  ctx.validate();
  ConstantSet k;
  k.L_oc = mobius_c_angular(ctx.c, ctx.c1, ctx.c2, ctx.cos_theta_bound);
  k.L_oc0 = mobius_c0_angular(ctx.c, ctx.cos_theta_bound);
  k.L_oy = mobius_y_angular(ctx.cos_theta_bound);
  k.L_ox = mobius_x_angular(ctx.cos_theta_bound);
  k.L_expm_y = expmap_y_constrained(k.L_oy, k.L_ox, ctx.c, ctx.tangent_norm);
  k.L_expm_x = expmap_x_constrained(k.L_oy, ctx.c, ctx.tangent_norm_2);
  k.L_logm_y = logmap_y_constrained(k.L_ox, ctx.c);
  k.L_tangent = tangent(ctx.loss_constant(), k.L_ox, k.L_expm_y, k.L_expm_x, ctx.L_f, k.L_logm_y, ctx.a_norm);
  k.E_ly = ctx.tangent_point_norm * k.L_tangent;
  k.E_ly_hyperbolic = k.L_tangent / ctx.c;
  return k;
}

double generalization_radical(std::size_t n, std::size_t d, double delta, double w_norm, double rho) {
  if (n < 2) throw ContractViolation("bound terms need n >= 2");
  if (d < 1) throw ContractViolation("bound terms need d >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("delta must lie in (0,1)");
  const double nd = static_cast<double>(n), dd = static_cast<double>(d);
  double first = 0.0;
  if (w_norm > 0.0) {
    if (!(rho > 0.0)) throw ContractViolation("rho must be positive when w is nonzero");
    first = dd * std::log(1.0 + sq(w_norm) / sq(rho) * sq(1.0 + std::sqrt(std::log(nd) / dd)));
  }
  return std::sqrt((first + 4.0 * std::log(nd / delta) + 8.0 * std::log(6.0 * nd + 3.0 * dd)) / (nd - 1.0));
}

BoundTerms bound_terms(const LipschitzContext& ctx, const ConstantSet& k, std::size_t n, std::size_t d,
                       double delta, double w_norm) {
  ctx.validate();
  const double L = ctx.loss_constant();
  const double root4 = std::pow(ctx.c, 0.25);
  const double curv = root4 >= 1.0 ? kInf : std::atanh(root4) / std::sqrt(ctx.c);
  BoundTerms t;
  t.E_lgen_prime = generalization_radical(n, d, delta, w_norm, ctx.rho);
  t.E_lc = L * k.L_oc0 + L * k.L_ox * ctx.a_norm * curv * (ctx.L_f + 1.0);
  t.E_lc_prime = L * k.L_oc0 + L * k.L_ox * curv * (ctx.L_f + 1.0) * (ctx.a_norm + ctx.rho);
  t.E_ly_prime = L * k.L_ox / ctx.c * (k.L_expm_y + k.L_expm_x * ctx.L_f * k.L_logm_y * (ctx.a_norm + ctx.rho));
  t.E_ly = k.E_ly;
  t.E_lgen = t.E_lgen_prime + t.E_ly + t.E_lc + t.E_ly_prime + t.E_lc_prime;
  return t;
}

double estimate_n_tilde(const HnnModel& model, const Tensor& w, const Tensor& inputs, double c) {
  ad::NoGradGuard guard;
  const Tensor f = model.tangent_features(ad::constant(w), inputs, c).value();
  double best = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i) best = std::max(best, norm(f.row(i)));
  return 1.1 * best;
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::MobiusC: return "mobius_c";
    case Theorem::MobiusY: return "mobius_y";
    case Theorem::MobiusX: return "mobius_x";
    case Theorem::ExpmapY: return "expmap_y";
    case Theorem::ExpmapX: return "expmap_x";
    case Theorem::LogmapY: return "logmap_y";
    case Theorem::Tangent: return "tangent";
  }
  return "?";
}

const std::vector<Theorem>& all_theorems() {
  static const std::vector<Theorem> all{Theorem::MobiusC, Theorem::MobiusY, Theorem::MobiusX, Theorem::ExpmapY,
                                        Theorem::ExpmapX, Theorem::LogmapY, Theorem::Tangent};
  return all;
}

Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : all_theorems()) {
    if (to_string(t) == s) return t;
  }
  throw ConfigurationError("unknown theorem id: " + s);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Draw {
 public:
  Draw(const SamplerConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    std::uniform_int_distribution<std::size_t> dd(cfg.min_dim, cfg.max_dim);
    dim_ = dd(rng_);
  }

  std::size_t dim() const { return dim_; }

  Tensor direction() {
    Tensor v(Shape{dim_});
    for (auto& x : v.storage()) x = nd_(rng_);
    const double n = norm(v);
    return n > 0.0 ? v / n : direction();
  }

  Tensor point() { return direction() * (uniform(0.0, cfg_.radius_fraction) / std::sqrt(cfg_.c)); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Tensor matrix() {
    Tensor m(Shape{dim_, dim_});
    for (auto& x : m.storage()) x = nd_(rng_) / std::sqrt(static_cast<double>(dim_));
    return m;
  }

 private:
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> nd_;
  std::size_t dim_;
};

bool cos_ok(const Tensor& a, const Tensor& b, double bound) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return true;
  return dot(a, b) / (na * nb) >= bound;
}

struct Instance {
  double lhs = 0.0;
  double constant = 0.0;
  double rhs = 0.0;
};

Tensor matvec(const Tensor& m, const Tensor& v) {
  const std::size_t d = v.numel();
  Tensor out(Shape{d});
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += m.at(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

// Scaled tangent entering y ⊕ (·) in the exponential map.
Tensor expm_shift(const Tensor& y, const Tensor& v, double c) {
  const double nv = norm(v);
  if (nv < 1e-15) return Tensor::zeros_like(v);
  const double rc = std::sqrt(c);
  const double lam = 2.0 / (1.0 - c * squared_norm(y));
  return v * (std::tanh(rc * lam * nv / 2.0) / (rc * nv));
}

Tensor expm(const Tensor& y, const Tensor& v, double c) { return geo::expmap(geo::BallPoint(y, c), v).coords(); }

Tensor logm(const Tensor& y, const Tensor& x, double c) {
  return geo::logmap(geo::BallPoint(y, c), geo::BallPoint(x, c)).coords;
}

using Attempt = std::function<bool(Draw&, Instance&)>;

Attempt make_attempt(Theorem which, Form form, const SamplerConfig& cfg, const LipschitzContext& ctx) {
  const double c = cfg.c;
  const double cb = cfg.cos_theta_bound;
  const bool constrained = form == Form::Constrained;
  switch (which) {
    case Theorem::MobiusC:
      return [=](Draw& d, Instance& in) {
        const Tensor x = d.point(), y = d.point();
        if (constrained && !cos_ok(x, y, cb)) return false;
        const double c1 = c, c2 = c * d.uniform(cfg.c2_low, 1.0);
        const double lhs1 = norm(geo::mobius_add_raw(x, y, c1) - geo::mobius_add_raw(x, y, c2));
        const double L = constrained ? mobius_c_angular(c, c1, c2, cb) : mobius_c(x, y, c1, c2);
        const double lhs2 = norm(geo::mobius_add_raw(x, y, c) - (x + y));
        const double L0 = constrained ? mobius_c0_angular(c, cb) : mobius_c0(x, y, c);
        const double r1 = L * std::abs(c1 - c2), r2 = L0;
        // report whichever inequality is tighter
        if ((r2 > 0 ? lhs2 / r2 : 0.0) > (r1 > 0 ? lhs1 / r1 : 0.0)) {
          in = {lhs2, L0, r2};
        } else {
          in = {lhs1, L, r1};
        }
        return true;
      };
    case Theorem::MobiusY:
      return [=](Draw& d, Instance& in) {
        const Tensor x = d.point(), y1 = d.point(), y2 = d.point();
        if (constrained && !(cos_ok(x, y1, cb) && cos_ok(x, y2, cb))) return false;
        const double L = constrained ? mobius_y_angular(cb) : mobius_y(x, y1, y2, c);
        in = {norm(geo::mobius_add_raw(x, y1, c) - geo::mobius_add_raw(x, y2, c)), L, L * norm(y1 - y2)};
        return true;
      };
    case Theorem::MobiusX:
      return [=](Draw& d, Instance& in) {
        const Tensor x1 = d.point(), x2 = d.point(), y = d.point();
        if (constrained && !(cos_ok(x1, y, cb) && cos_ok(x2, y, cb))) return false;
        const double L = constrained ? mobius_x_angular(cb) : mobius_x(x1, x2, y, c);
        in = {norm(geo::mobius_add_raw(x1, y, c) - geo::mobius_add_raw(x2, y, c)), L, L * norm(x1 - x2)};
        return true;
      };
    case Theorem::ExpmapY:
      return [=](Draw& d, Instance& in) {
        const Tensor y1 = d.point(), y2 = d.point(), v = d.point();
        if (constrained && !(cos_ok(y1, v, cb) && cos_ok(y2, v, cb))) return false;
        double L;
        if (constrained) {
          L = expmap_y_constrained(mobius_y_angular(cb), mobius_x_angular(cb), c, norm(v));
        } else {
          const Tensor s1 = expm_shift(y1, v, c), s2 = expm_shift(y2, v, c);
          L = expmap_y(mobius_y(y2, s1, s2, c), mobius_x(y1, y2, s1, c), c, norm(v), norm(y1), norm(y2));
        }
        in = {norm(expm(y1, v, c) - expm(y2, v, c)), L, L * norm(y1 - y2)};
        return true;
      };
    case Theorem::ExpmapX:
      return [=](Draw& d, Instance& in) {
        const Tensor y = d.point(), v1 = d.point(), v2 = d.point();
        if (constrained && !(cos_ok(y, v1, cb) && cos_ok(y, v2, cb))) return false;
        if (norm(v2) == 0.0) return false;
        double L;
        if (constrained) {
          L = expmap_x_constrained(mobius_y_angular(cb), c, norm(v2));
        } else {
          L = expmap_x(mobius_y(y, expm_shift(y, v1, c), expm_shift(y, v2, c), c), c, norm(y), norm(v2));
        }
        in = {norm(expm(y, v1, c) - expm(y, v2, c)), L, L * norm(v1 - v2)};
        return true;
      };
    case Theorem::LogmapY:
      return [=](Draw& d, Instance& in) {
        const Tensor y1 = d.point(), y2 = d.point(), x = d.point();
        if (constrained && !(cos_ok(-y1, x, cb) && cos_ok(-y2, x, cb))) return false;
        const double L = constrained ? logmap_y_constrained(mobius_x_angular(cb), c)
                                     : logmap_y(mobius_x(-y1, -y2, x, c), c, norm(x), norm(y1), norm(y1 + y2));
        in = {norm(logm(y1, x, c) - logm(y2, x, c)), L, L * norm(y1 - y2)};
        return true;
      };
    case Theorem::Tangent:
      return [=](Draw& d, Instance& in) {
        const Tensor x = d.point(), y1 = d.point(), y2 = d.point(), b = d.point(), t = d.point();
        const Tensor A = d.matrix();
        const double a_norm = norm(A);
        const Tensor v1 = matvec(A, logm(y1, x, c)), v2 = matvec(A, logm(y2, x, c));
        const Tensor p1 = expm(y1, v1, c), p2 = expm(y2, v2, c);
        if (constrained) {
          if (!(cos_ok(p1, b, cb) && cos_ok(p2, b, cb) && cos_ok(y1, v1, cb) && cos_ok(y2, v1, cb) &&
                cos_ok(y2, v2, cb) && cos_ok(-y1, x, cb) && cos_ok(-y2, x, cb))) {
            return false;
          }
          if (norm(v2) == 0.0) return false;
        }
        const double Lloss = ctx.loss_constant();
        double L;
        if (constrained) {
          const double loy = mobius_y_angular(cb), lox = mobius_x_angular(cb);
          L = tangent(Lloss, lox, expmap_y_constrained(loy, lox, c, norm(v1)), expmap_x_constrained(loy, c, norm(v2)),
                      1.0, logmap_y_constrained(lox, c), a_norm);
        } else {
          const Tensor s1 = expm_shift(y1, v1, c), s2 = expm_shift(y2, v1, c);
          const double ley =
              expmap_y(mobius_y(y2, s1, s2, c), mobius_x(y1, y2, s1, c), c, norm(v1), norm(y1), norm(y2));
          const double lex =
              expmap_x(mobius_y(y2, expm_shift(y2, v1, c), expm_shift(y2, v2, c), c), c, norm(y2), norm(v2));
          const double lly = logmap_y(mobius_x(-y1, -y2, x, c), c, norm(x), norm(y1), norm(y1 + y2));
          L = tangent(Lloss, mobius_x(p1, p2, b, c), ley, lex, 1.0, lly, a_norm);
        }
        const auto loss = [&](const Tensor& p) { return Lloss * norm(geo::mobius_add_raw(p, b, c) - t); };
        in = {std::abs(loss(p1) - loss(p2)), L, L * norm(y1 - y2)};
        return true;
      };
  }
  throw ConfigurationError("unknown theorem");
}

}  // namespace

CertificateReport verify_inequality(Theorem which, Form form, const SamplerConfig& sampler, std::size_t n_samples,
                                    const LipschitzContext& ctx) {
  require_positive_c(sampler.c);
  if (sampler.min_dim < 1 || sampler.min_dim > sampler.max_dim) throw ConfigurationError("bad sampler dimensions");
  if (!(sampler.radius_fraction > 0.0 && sampler.radius_fraction < 1.0)) {
    throw ConfigurationError("radius_fraction must lie in (0,1)");
  }
  const auto attempt = make_attempt(which, form, sampler, ctx);
  CertificateReport r;
  r.name = to_string(which);
  r.form = form;
  r.curvature = sampler.c;
  r.n_samples = n_samples;
  const std::uint64_t base = splitmix64(sampler.seed ^ (static_cast<std::uint64_t>(which) << 56) ^
                                        (static_cast<std::uint64_t>(form) << 48));
  for (std::size_t i = 0; i < n_samples; ++i) {
    Draw d(sampler, splitmix64(base + i));
    Instance in;
    int tries = 0;
    while (!attempt(d, in)) {
      if (++tries >= sampler.max_rejections) {
        throw SamplerError("sampler rejected " + std::to_string(tries) + " draws for " + r.name);
      }
    }
    r.formula_value = std::max(r.formula_value, in.constant);
    double ratio;
    if (std::isinf(in.rhs)) {
      ++r.unbounded;
      ratio = 0.0;
    } else if (in.rhs == 0.0) {
      ratio = in.lhs == 0.0 ? 0.0 : kInf;
    } else {
      ratio = in.lhs / in.rhs;
    }
    r.max_ratio = std::max(r.max_ratio, ratio);
    if (!(ratio <= 1.0 + kRatioSlack)) ++r.violations;
  }
  return r;
}

std::vector<MonotonicityFlag> monotonicity_scan(double c, int grid) {
  require_positive_c(c);
  std::vector<MonotonicityFlag> flags;
  const double rmax = 0.9 / std::sqrt(c);
  const Tensor e1 = Tensor::vector({1.0, 0.0});
  const Tensor e2 = Tensor::vector({0.5, std::sqrt(0.75)});
  const double mid = 0.5 * rmax;
  // one scalar argument swept while the others sit at mid radius
  const std::vector<std::pair<std::string, std::function<double(double, int)>>> cases{
      {"mobius_c", [&](double r, int k) {
         return mobius_c(e1 * (k == 0 ? r : mid), e2 * (k == 1 ? r : mid), 0.5 * c, c);
       }},
      {"mobius_c0", [&](double r, int k) { return mobius_c0(e1 * (k == 0 ? r : mid), e2 * (k == 1 ? r : mid), c); }},
      {"mobius_y", [&](double r, int k) {
         return mobius_y(e1 * (k == 0 ? r : mid), e2 * (k == 1 ? r : mid), e2 * (k == 2 ? r : mid), c);
       }},
      {"mobius_x", [&](double r, int k) {
         return mobius_x(e1 * (k == 0 ? r : mid), e1 * (k == 1 ? r : mid), e2 * (k == 2 ? r : mid), c);
       }},
      {"expmap_x", [&](double r, int k) { return expmap_x(1.0, c, k == 0 ? r : mid, k == 1 ? r : mid); }},
      {"logmap_y", [&](double r, int k) { return logmap_y(1.0, c, k == 0 ? r : mid, k == 1 ? r : mid, mid); }},
  };
  const std::vector<int> arity{2, 2, 3, 3, 2, 2};
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    for (int k = 0; k < arity[ci]; ++k) {
      double prev = cases[ci].second(0.0, k);
      for (int g = 1; g <= grid; ++g) {
        const double r = rmax * g / grid;
        const double v = cases[ci].second(r, k);
        if (v < prev * (1.0 - 1e-12)) {
          flags.push_back({cases[ci].first, "arg" + std::to_string(k), r});
          break;
        }
        prev = v;
      }
    }
  }
  return flags;
}

std::string to_json(const std::vector<CertificateReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["form"] = r.form == Form::General ? "general" : "constrained";
    j["curvature"] = r.curvature;
    j["formula_value"] = std::isfinite(r.formula_value) ? nlohmann::ordered_json(r.formula_value)
                                                         : nlohmann::ordered_json();
    j["n_samples"] = r.n_samples;
    j["max_ratio"] = r.max_ratio;
    j["violations"] = r.violations;
    j["unbounded"] = r.unbounded;
    arr.push_back(j);
  }
  return arr.dump(2);
}

}  // namespace hypercurv::lip
