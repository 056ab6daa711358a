#include "hypercurv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hypercurv/error.hpp"

namespace hypercurv::ad {

using Forward = std::function<Tensor(const std::vector<const Tensor*>&)>;
using Backward = std::function<std::vector<Var>(const std::vector<Var>& parents, const Var& out_grad)>;

struct Node {
  Tensor value;
  std::vector<Var> parents;
  Forward forward;
  Backward backward;
  bool requires_grad = false;
  std::weak_ptr<TapeState> tape;
  std::size_t index = 0;
};

struct TapeState {
  std::vector<std::shared_ptr<Node>> nodes;
  bool consumed = false;
};

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TapeState> tape_of(const std::vector<Var>& parents) {
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      if (auto t = p.node()->tape.lock()) return t;
    }
  }
  return nullptr;
}

Var make_op(std::vector<Var> parents, Forward fwd, Backward bwd) {
  std::vector<const Tensor*> vals;
  vals.reserve(parents.size());
  for (const auto& p : parents) {
    if (!p.defined()) throw ContractViolation("operation on an undefined Var");
    vals.push_back(&p.value());
  }
  auto node = std::make_shared<Node>();
  node->value = fwd(vals);
  if (!g_grad_enabled) return Var(node);
  auto tape = tape_of(parents);
  if (!tape) return Var(node);
  node->requires_grad = true;
  node->parents = std::move(parents);
  node->forward = std::move(fwd);
  node->backward = std::move(bwd);
  node->tape = tape;
  node->index = tape->nodes.size();
  tape->nodes.push_back(node);
  return Var(node);
}

struct View {
  std::size_t r, c;
};

View view_of(const Shape& s) {
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}

std::size_t bdim(std::size_t a, std::size_t b, const Shape& sa, const Shape& sb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ContractViolation("incompatible broadcast " + shape_to_string(sa) + " vs " + shape_to_string(sb));
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (shape_numel(a) == 1 && a.size() <= b.size()) return b;
  if (shape_numel(b) == 1 && b.size() <= a.size()) return a;
  const View va = view_of(a), vb = view_of(b);
  const std::size_t r = bdim(va.r, vb.r, a, b);
  const std::size_t c = bdim(va.c, vb.c, a, b);
  if (a.size() == 2 || b.size() == 2) return {r, c};
  if (a.size() == 1 || b.size() == 1) return {c};
  return {};
}

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, F f) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(out_shape);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const View vo = view_of(out_shape), va = view_of(a.shape()), vb = view_of(b.shape());
  const bool a1 = a.numel() == 1, b1 = b.numel() == 1;
  for (std::size_t i = 0; i < vo.r; ++i) {
    for (std::size_t j = 0; j < vo.c; ++j) {
      const double x = a1 ? a[0] : a[(va.r == 1 ? 0 : i) * va.c + (va.c == 1 ? 0 : j)];
      const double y = b1 ? b[0] : b[(vb.r == 1 ? 0 : i) * vb.c + (vb.c == 1 ? 0 : j)];
      out[i * vo.c + j] = f(x, y);
    }
  }
  return out;
}

template <class F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

Var unary(const Var& a, std::function<double(double)> f, std::function<Var(const Var& x, const Var& g)> df) {
  return make_op(
      {a}, [f](const std::vector<const Tensor*>& v) { return map_values(*v[0], f); },
      [df](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{df(p[0], g)}; });
}

Var mask_like(const Var& x, std::function<bool(double)> keep) {
  return constant(map_values(x.value(), [&](double v) { return keep(v) ? 1.0 : 0.0; }));
}

}  // namespace

const Tensor& Var::value() const {
  if (!node_) throw ContractViolation("value() on an undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return Var(node);
}

Var constant(double v) { return constant(Tensor::scalar(v)); }

GradTape::GradTape() : state_(std::make_shared<TapeState>()) {}
GradTape::~GradTape() = default;

Var GradTape::leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->tape = state_;
  node->index = state_->nodes.size();
  state_->nodes.push_back(node);
  return Var(node);
}

std::vector<Var> GradTape::gradient(const Var& root, const std::vector<Var>& wrt, bool create_graph) {
  if (state_->consumed) throw ContractViolation("gradient tape already consumed by a backward pass");
  if (!root.defined() || root.numel() != 1) {
    throw ContractViolation("gradient requires a scalar output, got shape " +
                            (root.defined() ? shape_to_string(root.shape()) : std::string("<undefined>")));
  }
  std::vector<Var> result;
  result.reserve(wrt.size());
  if (!root.requires_grad() || root.node()->tape.lock() != state_) {
    for (const auto& w : wrt) result.push_back(constant(Tensor::zeros_like(w.value())));
    if (!create_graph) state_->consumed = true;
    return result;
  }

  const bool previous = g_grad_enabled;
  g_grad_enabled = create_graph;
  std::unordered_map<const Node*, Var> grads;
  grads[root.node().get()] = constant(Tensor(root.shape(), 1.0));
  const std::size_t top = root.node()->index;
  try {
    for (std::size_t k = top + 1; k-- > 0;) {
      const auto node = state_->nodes[k];
      auto it = grads.find(node.get());
      if (it == grads.end() || !node->backward) continue;
      const Var g = it->second;
      const auto pg = node->backward(node->parents, g);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const Var& p = node->parents[i];
        if (!p.requires_grad() || !pg[i].defined()) continue;
        auto& slot = grads[p.node().get()];
        slot = slot.defined() ? add(slot, pg[i]) : pg[i];
      }
    }
  } catch (...) {
    g_grad_enabled = previous;
    throw;
  }
  g_grad_enabled = previous;

  for (const auto& w : wrt) {
    auto it = grads.find(w.node().get());
    if (it == grads.end()) {
      result.push_back(constant(Tensor::zeros_like(w.value())));
    } else {
      result.push_back(it->second);
    }
  }
  if (!create_graph) state_->consumed = true;
  return result;
}

Tensor GradTape::replay(const Var& root) const {
  if (!root.requires_grad() || root.node()->tape.lock() != state_) return root.value();
  const std::size_t top = root.node()->index;
  std::vector<Tensor> values(top + 1);
  for (std::size_t k = 0; k <= top; ++k) {
    const auto& node = state_->nodes[k];
    if (!node->forward) {
      values[k] = node->value;
      continue;
    }
    std::vector<const Tensor*> in;
    in.reserve(node->parents.size());
    for (const auto& p : node->parents) {
      if (p.requires_grad() && p.node()->tape.lock() == state_ && p.node()->index <= top) {
        in.push_back(&values[p.node()->index]);
      } else {
        in.push_back(&p.value());
      }
    }
    values[k] = node->forward(in);
  }
  return values[top];
}

std::size_t GradTape::size() const { return state_->nodes.size(); }
bool GradTape::consumed() const { return state_->consumed; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var add(const Var& a, const Var& b) {
  return make_op(
      {a, b},
      [](const std::vector<const Tensor*>& v) {
        return broadcast_apply(*v[0], *v[1], [](double x, double y) { return x + y; });
      },
      [](const std::vector<Var>& p, const Var& g) {
        return std::vector<Var>{sum_to(g, p[0].shape()), sum_to(g, p[1].shape())};
      });
}

Var sub(const Var& a, const Var& b) {
  return make_op(
      {a, b},
      [](const std::vector<const Tensor*>& v) {
        return broadcast_apply(*v[0], *v[1], [](double x, double y) { return x - y; });
      },
      [](const std::vector<Var>& p, const Var& g) {
        return std::vector<Var>{sum_to(g, p[0].shape()), sum_to(neg(g), p[1].shape())};
      });
}

Var mul(const Var& a, const Var& b) {
  return make_op(
      {a, b},
      [](const std::vector<const Tensor*>& v) {
        return broadcast_apply(*v[0], *v[1], [](double x, double y) { return x * y; });
      },
      [](const std::vector<Var>& p, const Var& g) {
        Var ga, gb;
        if (p[0].requires_grad()) ga = sum_to(mul(g, p[1]), p[0].shape());
        if (p[1].requires_grad()) gb = sum_to(mul(g, p[0]), p[1].shape());
        return std::vector<Var>{ga, gb};
      });
}

Var div(const Var& a, const Var& b) {
  return make_op(
      {a, b},
      [](const std::vector<const Tensor*>& v) {
        return broadcast_apply(*v[0], *v[1], [](double x, double y) { return x / y; });
      },
      [](const std::vector<Var>& p, const Var& g) {
        Var ga, gb;
        if (p[0].requires_grad()) ga = sum_to(div(g, p[1]), p[0].shape());
        if (p[1].requires_grad()) gb = sum_to(neg(div(mul(g, p[0]), square(p[1]))), p[1].shape());
        return std::vector<Var>{ga, gb};
      });
}

Var neg(const Var& a) {
  return make_op(
      {a}, [](const std::vector<const Tensor*>& v) { return map_values(*v[0], [](double x) { return -x; }); },
      [](const std::vector<Var>&, const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return neg(a); }
Var operator+(const Var& a, double b) { return add(a, constant(b)); }
Var operator+(double a, const Var& b) { return add(constant(a), b); }
Var operator-(const Var& a, double b) { return sub(a, constant(b)); }
Var operator-(double a, const Var& b) { return sub(constant(a), b); }
Var operator*(const Var& a, double b) { return mul(a, constant(b)); }
Var operator*(double a, const Var& b) { return mul(constant(a), b); }
Var operator/(const Var& a, double b) { return div(a, constant(b)); }
Var operator/(double a, const Var& b) { return div(constant(a), b); }

Var matmul(const Var& a, const Var& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ContractViolation("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                            shape_to_string(b.shape()));
  }
  return make_op(
      {a, b},
      [](const std::vector<const Tensor*>& v) {
        const Tensor& x = *v[0];
        const Tensor& y = *v[1];
        const std::size_t n = x.shape()[0], k = x.shape()[1], m = y.shape()[1];
        Tensor out(Shape{n, m});
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t l = 0; l < k; ++l) {
            const double xv = x[i * k + l];
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += xv * y[l * m + j];
          }
        }
        return out;
      },
      [](const std::vector<Var>& p, const Var& g) {
        Var ga, gb;
        if (p[0].requires_grad()) ga = matmul(g, transpose(p[1]));
        if (p[1].requires_grad()) gb = matmul(transpose(p[0]), g);
        return std::vector<Var>{ga, gb};
      });
}

Var transpose(const Var& a) {
  if (a.shape().size() != 2) throw ContractViolation("transpose requires a rank-2 value");
  return make_op(
      {a},
      [](const std::vector<const Tensor*>& v) {
        const Tensor& x = *v[0];
        const std::size_t n = x.shape()[0], m = x.shape()[1];
        Tensor out(Shape{m, n});
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x[i * m + j];
        return out;
      },
      [](const std::vector<Var>&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var sum(const Var& a) {
  return make_op(
      {a},
      [](const std::vector<const Tensor*>& v) {
        double s = 0.0;
        for (double x : v[0]->data()) s += x;
        return Tensor::scalar(s);
      },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{expand(g, p[0].shape())}; });
}

Var sum_canonical(const Var& a) {
  return make_op(
      {a},
      [](const std::vector<const Tensor*>& v) {
        std::vector<double> sorted(v[0]->storage());
        std::sort(sorted.begin(), sorted.end());
        double s = 0.0;
        for (double x : sorted) s += x;
        return Tensor::scalar(s);
      },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{expand(g, p[0].shape())}; });
}

Var row_sums(const Var& a) {
  return make_op(
      {a},
      [](const std::vector<const Tensor*>& v) {
        const Tensor& x = *v[0];
        const std::size_t n = x.rows(), m = x.cols();
        Tensor out(Shape{n, 1});
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) out[i] += x[i * m + j];
        return out;
      },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{expand(g, p[0].shape())}; });
}

Var col_sums(const Var& a) {
  return make_op(
      {a},
      [](const std::vector<const Tensor*>& v) {
        const Tensor& x = *v[0];
        const std::size_t n = x.rows(), m = x.cols();
        Tensor out(Shape{1, m});
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) out[j] += x[i * m + j];
        return out;
      },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{expand(g, p[0].shape())}; });
}

Var expand(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  return make_op(
      {a},
      [shape](const std::vector<const Tensor*>& v) {
        const Tensor& x = *v[0];
        if (x.numel() == shape_numel(shape)) return x.reshaped(shape);
        return broadcast_apply(Tensor(shape, 0.0), x, [](double, double y) { return y; });
      },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{sum_to(g, p[0].shape())}; });
}

Var sum_to(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (a.numel() == shape_numel(shape)) return reshape(a, shape);
  if (shape_numel(shape) == 1) return reshape(sum(a), shape);
  const View va = view_of(a.shape()), vt = view_of(shape);
  Var r = a;
  if (vt.r == 1 && va.r != 1) r = col_sums(r);
  if (vt.c == 1 && va.c != 1) r = row_sums(r);
  return reshape(r, shape);
}

Var reshape(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (a.numel() != shape_numel(shape)) {
    throw ContractViolation("cannot reshape " + shape_to_string(a.shape()) + " to " + shape_to_string(shape));
  }
  return make_op(
      {a}, [shape](const std::vector<const Tensor*>& v) { return v[0]->reshaped(shape); },
      [](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{reshape(g, p[0].shape())}; });
}

namespace {

// Inverse of slice: places `a` at a flat offset inside zeros of `shape`.
Var pad(const Var& a, std::size_t offset, const Shape& shape) {
  return make_op(
      {a},
      [offset, shape](const std::vector<const Tensor*>& v) {
        Tensor out(shape, 0.0);
        for (std::size_t i = 0; i < v[0]->numel(); ++i) out[offset + i] = (*v[0])[i];
        return out;
      },
      [offset](const std::vector<Var>& p, const Var& g) {
        return std::vector<Var>{slice(g, offset, p[0].shape())};
      });
}

Var place_column(const Var& a, std::size_t k, std::size_t ncols) {
  return make_op(
      {a},
      [k, ncols](const std::vector<const Tensor*>& v) {
        const std::size_t n = v[0]->numel();
        Tensor out(Shape{n, ncols}, 0.0);
        for (std::size_t i = 0; i < n; ++i) out[i * ncols + k] = (*v[0])[i];
        return out;
      },
      [k](const std::vector<Var>& p, const Var& g) { return std::vector<Var>{reshape(column(g, k), p[0].shape())}; });
}

}  // namespace

Var slice(const Var& a, std::size_t offset, const Shape& shape) {
  const std::size_t n = shape_numel(shape);
  if (offset + n > a.numel()) throw ContractViolation("slice out of range");
  return make_op(
      {a},
      [offset, shape, n](const std::vector<const Tensor*>& v) {
        const auto& s = v[0]->storage();
        return Tensor(shape, std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(offset),
                                                 s.begin() + static_cast<std::ptrdiff_t>(offset + n)));
      },
      [offset](const std::vector<Var>& p, const Var& g) {
        return std::vector<Var>{pad(g, offset, p[0].shape())};
      });
}

Var column(const Var& a, std::size_t k) {
  if (a.shape().size() != 2 || k >= a.shape()[1]) throw ContractViolation("column index out of range");
  return make_op(
      {a},
      [k](const std::vector<const Tensor*>& v) {
        const std::size_t n = v[0]->shape()[0], m = v[0]->shape()[1];
        Tensor out(Shape{n, 1});
        for (std::size_t i = 0; i < n; ++i) out[i] = (*v[0])[i * m + k];
        return out;
      },
      [k](const std::vector<Var>& p, const Var& g) {
        return std::vector<Var>{place_column(g, k, p[0].shape()[1])};
      });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols of nothing");
  Var out;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[0] != parts[0].shape()[0]) {
      throw ContractViolation("concat_cols: row counts differ");
    }
    total += p.shape()[1];
  }
  std::size_t at = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[1];
    Var placed;
    if (w == 1) {
      placed = place_column(p, at, total);
    } else {
      Var acc;
      for (std::size_t j = 0; j < w; ++j) {
        Var cj = place_column(column(p, j), at + j, total);
        acc = acc.defined() ? add(acc, cj) : cj;
      }
      placed = acc;
    }
    out = out.defined() ? add(out, placed) : placed;
    at += w;
  }
  return out;
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](const Var& x, const Var& g) { return mul(g, sub(constant(1.0), square(tanh(x)))); });
}

Var atanh(const Var& a) {
  return unary(
      a, [](double x) { return std::atanh(x); },
      [](const Var& x, const Var& g) { return div(g, sub(constant(1.0), square(x))); });
}

Var asinh(const Var& a) {
  return unary(
      a, [](double x) { return std::asinh(x); },
      [](const Var& x, const Var& g) { return div(g, sqrt(add(square(x), constant(1.0)))); });
}

Var acosh(const Var& a) {
  return unary(
      a, [](double x) { return std::acosh(x); },
      [](const Var& x, const Var& g) { return div(g, sqrt(sub(square(x), constant(1.0)))); });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](const Var& x, const Var& g) { return mul(g, exp(x)); });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](const Var& x, const Var& g) { return div(g, x); });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](const Var& x, const Var& g) { return div(mul(g, constant(0.5)), sqrt(x)); });
}

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](const Var& x, const Var& g) { return mul(g, mul(x, constant(2.0))); });
}

Var pow(const Var& a, double p) {
  if (p == 1.0) return a;
  return unary(
      a, [p](double x) { return std::pow(x, p); },
      [p](const Var& x, const Var& g) { return mul(g, mul(constant(p), pow(x, p - 1.0))); });
}

Var clamp(const Var& a, double lo, double hi) {
  if (lo > hi) throw ContractViolation("clamp with lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](const Var& x, const Var& g) {
        return mul(g, mask_like(x, [lo, hi](double v) { return v >= lo && v <= hi; }));
      });
}

Var clamp_min(const Var& a, double lo) { return clamp(a, lo, std::numeric_limits<double>::infinity()); }
Var clamp_max(const Var& a, double hi) { return clamp(a, -std::numeric_limits<double>::infinity(), hi); }

Var dot(const Var& a, const Var& b) {
  if (a.numel() != b.numel()) throw ContractViolation("dot: length mismatch");
  return sum(mul(a, reshape(b, a.shape())));
}

Var norm(const Var& a) { return sqrt(clamp_min(sum(square(a)), 1e-300)); }

Var detach(const Var& a) { return constant(a.value()); }

const std::vector<std::string>& supported_unary_names() {
  static const std::vector<std::string> names = {"tanh", "atanh", "asinh", "acosh", "exp",
                                                 "log",  "sqrt",  "square", "neg"};
  return names;
}

Var apply_unary(const std::string& name, const Var& a) {
  if (name == "tanh") return tanh(a);
  if (name == "atanh") return atanh(a);
  if (name == "asinh") return asinh(a);
  if (name == "acosh") return acosh(a);
  if (name == "exp") return exp(a);
  if (name == "log") return log(a);
  if (name == "sqrt") return sqrt(a);
  if (name == "square") return square(a);
  if (name == "neg") return neg(a);
  throw ConfigurationError("unsupported primitive: " + name);
}

}  // namespace hypercurv::ad
