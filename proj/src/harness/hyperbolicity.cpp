#include "hypercurv/harness/hyperbolicity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "hypercurv/error.hpp"

namespace hypercurv::harness {

namespace {

void check_distances(const Tensor& dist) {
  if (dist.rank() != 2 || dist.rows() != dist.cols()) throw ContractViolation("distance matrix must be square");
  if (!dist.all_finite()) throw DomainError("distance matrix must be finite");
}

}  // namespace

DeltaEstimate delta_from_distances(const Tensor& dist, std::size_t n_quadruples, std::uint64_t seed) {
  check_distances(dist);
  const std::size_t n = dist.rows();
  if (n < 4) throw SizeError("four-point delta needs at least 4 points");
  if (n_quadruples == 0) throw ConfigurationError("need at least one quadruple");

  DeltaEstimate out;
  const auto visit = [&](std::size_t x, std::size_t y, std::size_t z, std::size_t w) {
    std::array<double, 3> s{dist.at(x, y) + dist.at(z, w), dist.at(x, z) + dist.at(y, w),
                            dist.at(x, w) + dist.at(y, z)};
    std::sort(s.begin(), s.end(), std::greater<>());
    out.delta = std::max(out.delta, 0.5 * (s[0] - s[1]));
    for (double d : {dist.at(x, y), dist.at(z, w), dist.at(x, z), dist.at(y, w), dist.at(x, w), dist.at(y, z)}) {
      out.max_distance = std::max(out.max_distance, d);
    }
  };

  const double all = static_cast<double>(n) * (n - 1) * (n - 2) * (n - 3) / 24.0;
  if (all <= static_cast<double>(n_quadruples)) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c)
          for (std::size_t d = c + 1; d < n; ++d) visit(a, b, c, d);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t q = 0; q < n_quadruples; ++q) {
      std::array<std::size_t, 4> idx{};
      for (std::size_t k = 0; k < 4; ++k) {
        bool fresh = false;
        while (!fresh) {
          idx[k] = pick(rng);
          fresh = std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx[k]) ==
                  idx.begin() + static_cast<std::ptrdiff_t>(k);
        }
      }
      visit(idx[0], idx[1], idx[2], idx[3]);
    }
  }
  out.relative = out.max_distance > 0.0 ? out.delta / out.max_distance : 0.0;
  return out;
}

Tensor euclidean_distances(const Tensor& points) {
  if (points.rank() != 2) throw ContractViolation("points must be a matrix");
  const std::size_t n = points.rows(), d = points.cols();
  Tensor D(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double t = points.at(i, k) - points.at(j, k);
        s += t * t;
      }
      D.at(i, j) = D.at(j, i) = std::sqrt(s);
    }
  }
  return D;
}

double delta_hyperbolicity(const Dataset& d, std::size_t n_quadruples, std::uint64_t seed) {
  return delta_from_distances(euclidean_distances(d.features), n_quadruples, seed).relative;
}

}  // namespace hypercurv::harness
