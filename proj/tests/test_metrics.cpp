#include <algorithm>
#include <cmath>

#include "augnet/augnet.hpp"
#include "augnet/error.hpp"
#include "augnet/metrics.hpp"
#include "augnet/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace augnet;
using augnet::testing::random_tensor;

TEST_CASE("cosine distance") {
  const std::vector<double> v{0.3, -1.2, 2.5};
  const std::vector<double> neg{-0.3, 1.2, -2.5};
  CHECK(cosine_distance(v, v) == 0.0);
  CHECK(cosine_distance(v, neg) == doctest::Approx(2.0));
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(1.0));
  CHECK(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{0, 1}) == 1.0);
  CHECK(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{0, 0}) == 0.0);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = testing::random_vector(rng, 5), b = testing::random_vector(rng, 5);
    const double d = cosine_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    CHECK(cosine_distance(a, a) == 0.0);
  }
}

TEST_CASE("accuracy and balanced accuracy") {
  const std::vector<int> y{0, 1, 2, 3, 1};
  CHECK(accuracy(y, y) == 1.0);
  const std::vector<int> zeros(4, 0), binary{0, 0, 1, 1};
  CHECK(balanced_accuracy(zeros, binary) == 0.5);
  CHECK(accuracy(zeros, binary) == 0.5);
  // Imbalanced: balanced accuracy weighs classes, plain accuracy weighs examples.
  const std::vector<int> labels{0, 0, 0, 1}, pred{0, 0, 0, 0};
  CHECK(accuracy(pred, labels) == 0.75);
  CHECK(balanced_accuracy(pred, labels) == 0.5);

  Rng rng(2);
  std::vector<int> p(50), l(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = static_cast<int>(rng.index(3));
    l[i] = static_cast<int>(rng.index(3));
  }
  const double acc = accuracy(p, l), bacc = balanced_accuracy(p, l);
  const auto perm = rng.permutation(50);
  std::vector<int> p2(50), l2(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p2[i] = p[perm[i]];
    l2[i] = l[perm[i]];
  }
  CHECK(accuracy(p2, l2) == acc);
  CHECK(balanced_accuracy(p2, l2) == doctest::Approx(bacc).epsilon(1e-15));

  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ConfigError);
  CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{1}, std::vector<int>{}), ShapeError);
}

TEST_CASE("argmax ties go to the lowest index") {
  const Tensor out({2, 3}, {1.0, 3.0, 3.0, -1.0, -1.0, -2.0});
  CHECK(argmax_rows(out) == std::vector<int>{1, 0});
  CHECK(accuracy(out, std::vector<int>{1, 1}) == 0.5);
}

TEST_CASE("percentiles and derangements") {
  CHECK(percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
  CHECK(percentile({0.0, 10.0}, 12.5) == doctest::Approx(1.25));
  CHECK(percentile({4.0}, 87.5) == 4.0);
  CHECK_THROWS_AS(percentile({}, 50.0), ConfigError);
  Rng rng(3);
  for (std::size_t n : {2, 3, 10, 101}) {
    const auto p = derangement(n, rng);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] != i);
      CHECK(sorted[i] == i);
    }
  }
}

namespace {

struct SmallTrunk {
  ParameterStore store;
  Trunk trunk;
  SmallTrunk(TrunkConfig c, Rng& rng) : trunk(c, store, rng) {}
  Tensor operator()(const Tensor& x) { return trunk.forward(store.bind(nullptr), x, Mode::eval); }
};

TrunkConfig image_trunk() {
  TrunkConfig c;
  c.kind = TrunkKind::mlp;
  c.mlp_widths = {16};
  c.input_shape = {2, 6, 6};
  return c;
}

}  // namespace

TEST_CASE("identity transform scores exactly one, even for a randomized model") {
  Rng rng(4);
  AugNetModel model(image_trunk(), rng);
  model.add_layer({TransformSpec::defaults(TransformKind::rotate), TransformSpec::defaults(TransformKind::brightness)}, 0.5);
  const Tensor x = random_tensor(rng, {20, 2, 6, 6});
  const OutputFn f = [&](const Tensor& in, Rng& r) { return predict(model, in, 4, r); };
  const auto identity = [](const Tensor& t, Rng&) { return t; };
  const auto rep = invariance(f, x, identity, rng);
  for (double s : rep.scores) CHECK(s == 1.0);
  CHECK(rep.median == 1.0);
}

TEST_CASE("group-averaged model is exactly flip invariant") {
  Rng rng(5);
  SmallTrunk t(image_trunk(), rng);
  const auto group = flip_group();
  const OutputFn f = [&](const Tensor& in, Rng&) {
    return group_average_exact([&](const Tensor& z) { return t(z); }, group, in);
  };
  const auto flip = [](const Tensor& in, Rng&) { return flip_horizontal(in); };
  const auto rep = invariance(f, random_tensor(rng, {30, 2, 6, 6}), flip, rng);
  for (double s : rep.scores) CHECK(std::abs(s - 1.0) < 1e-9);
  CHECK(rep.lower <= rep.median);
  CHECK(rep.median <= rep.upper);
  CHECK(rep.baseline > 0.0);
}

TEST_CASE("untrained trunk is not invariant to a strong transform") {
  Rng rng(6);
  SmallTrunk t(image_trunk(), rng);
  const OutputFn f = [&](const Tensor& in, Rng&) { return t(in); };
  const auto spec = TransformSpec::defaults(TransformKind::rotate);
  const auto rotate = [&](const Tensor& in, Rng& r) {
    return apply_transform(spec, in, Tensor::scalar(1.0), sample_draw(spec, in.shape(), r));
  };
  const auto rep = invariance(f, random_tensor(rng, {50, 2, 6, 6}), rotate, rng);
  CHECK(rep.median < 0.99);
  CHECK(*std::max_element(rep.scores.begin(), rep.scores.end()) <= 1.0 + 1e-12);
}

TEST_CASE("scores are unchanged by positive output rescaling") {
  Rng rng(7);
  SmallTrunk t(image_trunk(), rng);
  const auto noise = [](const Tensor& in, Rng& r) { return add(in, random_tensor(r, in.shape(), -0.3, 0.3)); };
  const Tensor x = random_tensor(rng, {25, 2, 6, 6});
  Rng a(8), b(8);
  const auto r1 = invariance([&](const Tensor& in, Rng&) { return t(in); }, x, noise, a);
  const auto r2 = invariance([&](const Tensor& in, Rng&) { return scale(t(in), 37.5); }, x, noise, b);
  for (std::size_t i = 0; i < r1.scores.size(); ++i) CHECK(std::abs(r1.scores[i] - r2.scores[i]) < 1e-9);
}

TEST_CASE("degenerate inputs") {
  Rng rng(9);
  const auto identity = [](const Tensor& t, Rng&) { return t; };
  const OutputFn constant = [](const Tensor& in, Rng&) { return Tensor({in.dim(0), 3}, 1.0); };
  CHECK_THROWS_AS(invariance(constant, random_tensor(rng, {5, 1, 4}), identity, rng), DegenerateMetricError);
  const OutputFn any = [](const Tensor& in, Rng&) { return reshape(in, {in.dim(0), 4}); };
  CHECK_THROWS_AS(invariance(any, random_tensor(rng, {1, 1, 4}), identity, rng), ConfigError);
}
