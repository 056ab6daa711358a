#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "reference_models.hpp"
#include "hypercurv/error.hpp"
#include "hypercurv/hnn_model.hpp"

using namespace hypercurv;
using testutil::block_of;
using testutil::euclidean_reference_loss;

namespace {

void set_block(const HnnModel& m, Tensor& w, const std::string& name, std::vector<double> v) {
  const auto& b = m.block(name);
  REQUIRE(v.size() == shape_numel(b.shape));
  for (std::size_t i = 0; i < v.size(); ++i) w[b.offset + i] = v[i];
}

Tensor embed_value(const HnnModel& m, const Tensor& w, const Tensor& x, double c) {
  ad::NoGradGuard g;
  return m.embed(ad::constant(w), x, c).value();
}

Tensor logits_value(const HnnModel& m, const Tensor& w, const Tensor& x, double c) {
  ad::NoGradGuard g;
  const auto wv = ad::constant(w);
  return m.logits(wv, ad::constant(x), c).value();
}

Batch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t k, double scale = 1.0) {
  Batch b{Tensor(Shape{n, d}), {}};
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& x : b.inputs.storage()) x = nd(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % k));
  return b;
}

}  // namespace

TEST_CASE("identity composition in the hyperbolic layer") {
  HnnModel m({.d_in = 2, .n_classes = 2, .widths = {}, .d_emb = 2});
  Tensor w = m.init_params(1);
  set_block(m, w, "A", {1, 0, 0, 1});
  set_block(m, w, "b", {0, 0});
  const Tensor out = embed_value(m, w, Tensor::matrix(1, 2, {0.2, 0.0}), 1.0);
  CHECK(out[0] == doctest::Approx(std::tanh(0.2)).epsilon(1e-14));
  CHECK(std::abs(out[1]) <= 1e-16);
}

TEST_CASE("zero linear map yields the bias point") {
  HnnModel m({.d_in = 3, .n_classes = 2, .widths = {4, 4}, .d_emb = 2});
  Tensor w = m.init_params(2);
  set_block(m, w, "A", std::vector<double>(8, 0.0));
  set_block(m, w, "b", {0.3, -0.4});
  const Tensor out = embed_value(m, w, Tensor::matrix(2, 3, {1, 2, 3, -1, 0.5, 0.2}), 0.7);
  const auto b = geo::expmap0(Tensor::vector({0.3, -0.4}), 0.7).coords();
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out.at(i, 0) == doctest::Approx(b[0]).epsilon(1e-14));
    CHECK(out.at(i, 1) == doctest::Approx(b[1]).epsilon(1e-14));
  }
}

TEST_CASE("embedding tends to the affine map at small curvature") {
  std::mt19937_64 rng(4);
  HnnModel m({.d_in = 3, .n_classes = 2, .widths = {}, .d_emb = 2});
  Tensor w = m.init_params(3);
  set_block(m, w, "b", {0.1, -0.2});
  const Batch batch = random_batch(rng, 6, 3, 2, 0.3);
  const Tensor out = embed_value(m, w, batch.inputs, 1e-8);
  const Tensor A = block_of(m, w, "A");
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t r = 0; r < 2; ++r) {
      double s = r == 0 ? 0.1 : -0.2;
      for (std::size_t j = 0; j < 3; ++j) s += A.at(r, j) * batch.inputs.at(i, j);
      CHECK(std::abs(out.at(i, r) - s) <= 1e-5);
    }
  }
}

TEST_CASE("MLR logit examples") {
  HnnModel m1({.d_in = 1, .n_classes = 2, .widths = {}, .d_emb = 1});
  Tensor w = m1.init_params(5);
  set_block(m1, w, "a_mlr", {1.0, -1.0});
  set_block(m1, w, "b_mlr", {0.0, 0.0});
  const Tensor l = logits_value(m1, w, Tensor::matrix(1, 1, {0.3}), 1.0);
  CHECK(l[0] == doctest::Approx(2.0 * std::asinh(0.6 / 0.91)).epsilon(1e-14));
  CHECK(l[0] == doctest::Approx(1.2380784).epsilon(1e-7));

  HnnModel m({.d_in = 2, .n_classes = 2, .widths = {}, .d_emb = 2});
  Tensor v = m.init_params(6);
  set_block(m, v, "a_mlr", {0.4, -0.7, -0.4, 0.7});
  set_block(m, v, "b_mlr", {0.2, 0.1, -0.2, -0.1});
  const Tensor at_origin = logits_value(m, v, Tensor::matrix(1, 2, {0, 0}), 0.8);
  CHECK(at_origin[0] == doctest::Approx(at_origin[1]).epsilon(1e-14));
  CHECK(cross_entropy(ad::constant(at_origin), {0}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const auto p0 = geo::expmap0(Tensor::vector({0.2, 0.1}), 0.8).coords();
  const Tensor at_shift = logits_value(m, v, Tensor::matrix(1, 2, {p0[0], p0[1]}), 0.8);
  CHECK(std::abs(at_shift[0]) <= 1e-15);
}

TEST_CASE("MLR rejects a vanishing normal vector") {
  HnnModel m({.d_in = 2, .n_classes = 2, .widths = {}, .d_emb = 2});
  Tensor w = m.init_params(7);
  set_block(m, w, "a_mlr", {0, 0, 1, 0});
  CHECK_THROWS_AS(logits_value(m, w, Tensor::matrix(1, 2, {0.1, 0.1}), 1.0), DomainError);
}

TEST_CASE("cross-entropy limits") {
  CHECK(cross_entropy(ad::constant(Tensor::matrix(1, 2, {0.3, 0.3})), {1}).item() ==
        doctest::Approx(0.69314718).epsilon(1e-8));
  CHECK(cross_entropy(ad::constant(Tensor::matrix(1, 3, {0, 0, 0})), {2}).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));
  double prev = 1e9;
  for (double gap : {0.0, 1.0, 5.0, 20.0, 100.0}) {
    const double l = cross_entropy(ad::constant(Tensor::matrix(1, 2, {gap, 0.0})), {0}).item();
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 1e-40);
}

TEST_CASE("loss matches the Euclidean reference network at small curvature") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    HnnModel m({.d_in = 4, .n_classes = 3, .widths = {6, 5}, .d_emb = 3});
    const Tensor w = m.init_params(100 + trial) * 0.5;
    const Batch batch = random_batch(rng, 12, 4, 3);
    const double hyp = evaluate(at_curvature(m.loss_fn(batch), 1e-8), w);
    CHECK(std::abs(hyp - euclidean_reference_loss(m, w, batch)) <= 1e-4);
  }
}

TEST_CASE("loss gradient matches central differences per parameter block") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d_in = 2 + trial % 7, k = 2 + trial % 3;
    for (bool clip : {false, true}) {
      HnnModel m({.d_in = d_in, .n_classes = k, .widths = {8, 16}, .d_emb = 3, .clip = clip});
      const Tensor w = m.init_params(200 + trial);
      const Batch batch = random_batch(rng, 10, d_in, k);
      const double c = std::vector<double>{1e-3, 0.1, 0.5, 1.0}[trial % 4];
      const auto f = at_curvature(m.loss_fn(batch), c);
      const Tensor g = grad(f, w);
      const Tensor fd = testutil::central_grad(f, w);
      for (const auto& b : m.layout()) {
        CAPTURE(b.name);
        const Tensor gb = block_of(m, g, b.name), fb = block_of(m, fd, b.name);
        CHECK(testutil::vec_rel_err(gb, fb, 1e-9) <= 1e-4);
      }
    }
  }
}

TEST_CASE("loss is invariant under permuting samples") {
  std::mt19937_64 rng(13);
  HnnModel m({.d_in = 3, .n_classes = 3, .widths = {5, 5}, .d_emb = 2});
  const Tensor w = m.init_params(3);
  const Batch batch = random_batch(rng, 17, 3, 3);
  std::vector<std::size_t> perm(17);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (int t = 0; t < 5; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const Batch shuffled = subset(batch, perm);
    CHECK(evaluate(at_curvature(m.loss_fn(batch), 0.4), w) ==
          evaluate(at_curvature(m.loss_fn(shuffled), 0.4), w));
  }
}

TEST_CASE("logits are continuous in curvature") {
  std::mt19937_64 rng(14);
  HnnModel m({.d_in = 3, .n_classes = 4, .widths = {5, 5}, .d_emb = 3});
  for (int t = 0; t < 10; ++t) {
    const Tensor w = m.init_params(50 + t);
    const Batch batch = random_batch(rng, 5, 3, 4);
    for (double c : {1e-4, 1e-2, 0.3, 0.9}) {
      ad::NoGradGuard g;
      const auto wv = ad::constant(w);
      const Tensor a = m.logits(wv, m.embed(wv, batch.inputs, c), c).value();
      const Tensor b = m.logits(wv, m.embed(wv, batch.inputs, c + 1e-7), c + 1e-7).value();
      for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-3);
    }
  }
}

TEST_CASE("prediction ties go to the lowest class") {
  const std::vector<double> row{0.5, 0.9, 0.9, 0.1};
  CHECK(argmax_lowest(row) == 1);
}

TEST_CASE("structured parameters round-trip through the flat layout") {
  HnnModel m({.d_in = 3, .n_classes = 3, .widths = {4, 2}, .d_emb = 2});
  const Tensor w = m.init_params(9);
  const Tensor back = m.pack(m.unpack(w, 0.6));
  for (std::size_t i = 0; i < w.numel(); ++i) CHECK(back[i] == doctest::Approx(w[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("checkpoint round-trip is exact") {
  Checkpoint ck{{.d_in = 3, .n_classes = 2, .widths = {4, 3}, .d_emb = 2, .clip = true}, {}, 0.125};
  ck.params = HnnModel(ck.model).init_params(10);
  const std::string path = "ckpt_roundtrip_test.txt";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  std::remove(path.c_str());
  CHECK(back.params == ck.params);
  CHECK(back.curvature == 0.125);
  CHECK(back.model.widths == ck.model.widths);
  CHECK(back.model.clip);
  CHECK_THROWS_AS(load_checkpoint("does-not-exist.ckpt"), ParseError);
}
