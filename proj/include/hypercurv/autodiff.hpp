#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hypercurv/tensor.hpp"

namespace hypercurv::ad {

struct Node;
struct TapeState;

/// Handle to a value in a differentiation graph.
///
/// A Var created outside of any tape (or from constants only) is a plain
/// constant. Operations on Vars that require gradients are recorded on the
/// tape that owns their leaves.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  bool requires_grad() const;
  bool defined() const { return node_ != nullptr; }
  /// Value of a one-element Var.
  double item() const { return value().item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor t);
Var constant(double v);

/// Ordered record of the primitive operations feeding one scalar output.
///
/// Backward passes sweep the record in reverse creation order. A pass that
/// does not build a graph consumes the tape; a second pass then throws.
/// Graph-building passes append their derivative operations to the same
/// record, which is what second-order products differentiate through.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  /// Registers an input that gradients are taken with respect to.
  Var leaf(Tensor value);

  std::vector<Var> gradient(const Var& root, const std::vector<Var>& wrt, bool create_graph = false);

  /// Recomputes every recorded value from the leaves and returns root's value.
  Tensor replay(const Var& root) const;

  std::size_t size() const;
  bool consumed() const;

 private:
  std::shared_ptr<TapeState> state_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Binary elementwise ops broadcast over rank <= 2: equal shapes, one-element
// operands, and (n,1)/(1,d) against (n,d).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var sum(const Var& a);
/// Sum accumulated in ascending value order, so permuting the input leaves
/// the result bit-identical.
Var sum_canonical(const Var& a);
/// (n,d) -> (n,1)
Var row_sums(const Var& a);
/// (n,d) -> (1,d)
Var col_sums(const Var& a);
Var expand(const Var& a, const Shape& shape);
/// Sums broadcast dimensions away so the result has `shape`.
Var sum_to(const Var& a, const Shape& shape);
Var reshape(const Var& a, const Shape& shape);

/// Contiguous flat range [offset, offset + numel(shape)) viewed as `shape`.
Var slice(const Var& a, std::size_t offset, const Shape& shape);
/// Column k of a rank-2 value as (n,1).
Var column(const Var& a, std::size_t k);
Var concat_cols(const std::vector<Var>& parts);

Var tanh(const Var& a);
Var atanh(const Var& a);
Var asinh(const Var& a);
Var acosh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var pow(const Var& a, double p);
Var clamp(const Var& a, double lo, double hi);
Var clamp_min(const Var& a, double lo);
Var clamp_max(const Var& a, double hi);

Var dot(const Var& a, const Var& b);
Var norm(const Var& a);
Var detach(const Var& a);

/// Elementwise primitive looked up by name; throws ConfigurationError for
/// names outside the supported set.
Var apply_unary(const std::string& name, const Var& a);
const std::vector<std::string>& supported_unary_names();

}  // namespace hypercurv::ad
