#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hypercurv/autodiff.hpp"
#include "hypercurv/derivatives.hpp"
#include "hypercurv/poincare.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv {

struct Batch {
  Tensor inputs;  // n x d_in
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

void validate_batch(const Batch& batch, std::size_t d_in, std::size_t n_classes);
Batch subset(const Batch& batch, const std::vector<std::size_t>& rows);

struct ModelConfig {
  std::size_t d_in = 2;
  std::size_t n_classes = 2;
  /// Hidden widths of the tanh extractor; empty means identity features.
  std::vector<std::size_t> widths{16, 16};
  std::size_t d_emb = 2;
  bool clip = false;
  double clip_radius = 1.0;
  /// Optional ½λ‖w‖² added to the loss.
  double weight_decay = 0.0;
  double init_scale = 1.0;
};

struct ParamBlock {
  std::string name;
  std::size_t offset;
  Shape shape;
};

/// Structured view of the flat parameter vector.
struct HnnParams {
  std::vector<Tensor> extractor_weights;  // W1, b1, W2, b2, ...
  Tensor a;                               // d_emb x feature width
  geo::BallPoint b;
  std::vector<Tensor> mlr_normals;        // a'_k at the origin
  std::vector<geo::BallPoint> mlr_shifts; // b'_k
};

class HnnModel {
 public:
  explicit HnnModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  const ParamBlock& block(const std::string& name) const;
  std::size_t num_params() const { return n_params_; }
  std::size_t feature_width() const;

  Tensor init_params(std::uint64_t seed) const;

  ad::Var features(const ad::Var& w, const Tensor& inputs) const;
  /// Hyperbolic embeddings, one row per input.
  ad::Var embed(const ad::Var& w, const Tensor& inputs, double c) const;
  /// f_a(logm0(x)) for the points entering the hyperbolic layer.
  ad::Var tangent_features(const ad::Var& w, const Tensor& inputs, double c) const;
  ad::Var logits(const ad::Var& w, const ad::Var& points, double c) const;
  ad::Var loss(const ad::Var& w, const Batch& batch, double c) const;
  CurvedFn loss_fn(const Batch& batch) const;

  std::vector<int> predict(const Tensor& w, const Tensor& inputs, double c) const;
  double accuracy(const Tensor& w, const Batch& batch, double c) const;

  HnnParams unpack(const Tensor& w, double c) const;
  Tensor pack(const HnnParams& p) const;

 private:
  ad::Var param(const ad::Var& w, const std::string& name) const;

  ModelConfig config_;
  std::vector<ParamBlock> layout_;
  std::size_t n_params_ = 0;
};

/// Mean softmax cross-entropy; the sample sum is order independent.
ad::Var cross_entropy(const ad::Var& logits, const std::vector<int>& labels);

int argmax_lowest(std::span<const double> row);

struct Checkpoint {
  ModelConfig model;
  Tensor params;
  double curvature = 1.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hypercurv
