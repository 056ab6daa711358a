#pragma once

#include <cstdint>
#include <string>

#include "hypercurv/bilevel.hpp"
#include "hypercurv/harness/dataset.hpp"
#include "hypercurv/hnn_model.hpp"
#include "hypercurv/sharpness.hpp"

namespace hypercurv::harness {

enum class Mode { Hnn, CHnn, FixedCurvature, CurvatureLearning };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct DataConfig {
  std::string source = "tree";  // "tree" or "csv"
  std::string path;
  std::string label_column = "label";
  TreeSpec tree;
};

struct ModelSettings {
  std::vector<std::size_t> widths{16, 16};
  std::size_t d_emb = 2;
  double clip_radius = 1.0;
  double weight_decay = 0.0;
  double init_scale = 1.0;
};

struct CurvatureSettings {
  double init = 1.0;
  double min = 1e-6;
  double max = 1.0;
};

struct RunConfig {
  Mode mode = Mode::CurvatureLearning;
  std::uint64_t seed = 0;
  DataConfig data;
  ModelSettings model;
  BilevelConfig bilevel;
  SharpnessConfig sharpness;
  CurvatureSettings curvature;
  std::string output_dir = "run";

  void validate() const;
  /// Bilevel settings as the mode runs them: plain GD for hnn/c-hnn, frozen c unless learning.
  BilevelConfig effective_bilevel() const;
  ModelConfig model_config(std::size_t d_in, std::size_t n_classes) const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise ConfigurationError
/// naming the offending key. Missing keys keep their defaults.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
/// Canonical form: every key present, sorted, two-space indent, trailing newline.
std::string serialize_config(const RunConfig& cfg);

}  // namespace hypercurv::harness
