#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypercurv/hnn_model.hpp"
#include "hypercurv/tensor.hpp"

namespace hypercurv::harness {

struct Dataset {
  Tensor features;  // n x d_in
  std::vector<int> labels;
  std::string name;
  /// File path or generator description.
  std::string provenance;
  /// Original label strings, index = label id; empty for generated data.
  std::vector<std::string> label_names;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t n_classes() const;
  Batch batch() const { return {features, labels}; }
  void validate(bool classification = true) const;
};

struct TreeSpec {
  int depth = 4;
  int branching = 3;
  double noise_sigma = 0.2;
  std::size_t d_in = 2;
  /// Noisy copies drawn around every leaf.
  int samples_per_leaf = 1;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxTreeLeaves = 100000;

/// Leaves of a balanced tree: each child is its parent plus a random unit step
/// scaled by 2^-level; labels are the root's subtrees.
Dataset gen_tree_dataset(const TreeSpec& spec);

/// Hop distances between the leaves of the same balanced tree (leaf order matches gen_tree_dataset).
Tensor tree_leaf_path_distances(int depth, int branching);

Dataset load_csv(const std::string& path, const std::string& label_column = "label");
void save_csv(const Dataset& d, const std::string& path, const std::string& label_column = "label");

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded disjoint split, stratified by label; test receives whatever the two fractions leave over
/// and has no rows when they sum to 1.
Split split_dataset(const Dataset& d, double train_fraction, double val_fraction, std::uint64_t seed);

}  // namespace hypercurv::harness
