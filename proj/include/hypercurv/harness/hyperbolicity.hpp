#pragma once

#include <cstdint>

#include "hypercurv/harness/dataset.hpp"

namespace hypercurv::harness {

inline constexpr std::size_t kDefaultQuadruples = 50000;

struct DeltaEstimate {
  double delta = 0.0;
  /// delta divided by the largest sampled distance.
  double relative = 0.0;
  double max_distance = 0.0;
};

/// Sampled Gromov four-point delta over a symmetric distance matrix.
DeltaEstimate delta_from_distances(const Tensor& dist, std::size_t n_quadruples, std::uint64_t seed);

/// Relative four-point delta of the Euclidean distances between dataset rows.
double delta_hyperbolicity(const Dataset& d, std::size_t n_quadruples = kDefaultQuadruples, std::uint64_t seed = 0);

Tensor euclidean_distances(const Tensor& points);

}  // namespace hypercurv::harness
