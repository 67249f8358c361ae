#include <cmath>

#include "augnet/augnet.hpp"
#include "augnet/error.hpp"
#include "augnet/grad_check.hpp"
#include "augnet/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace augnet;
using augnet::testing::max_abs_diff;
using augnet::testing::random_tensor;
using augnet::testing::random_vector;

namespace {

TrunkConfig small_mlp(std::size_t length = 32) {
  TrunkConfig c;
  c.kind = TrunkKind::mlp;
  c.mlp_widths = {6};
  c.input_shape = {1, length};
  return c;
}

TransformSpec spec(TransformKind kind) {
  auto s = TransformSpec::defaults(kind);
  if (kind == TransformKind::frequency_shift) s.sample_rate = 16.0;
  return s;
}

std::vector<TransformSpec> signal_transforms() {
  return {spec(TransformKind::frequency_shift), spec(TransformKind::gaussian_noise), spec(TransformKind::brightness)};
}

void set_param(AugNetModel& m, const std::string& name, std::vector<double> v) { m.params()[*m.params().find(name)].value = std::move(v); }

bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("effective weights") {
  CHECK(effective_weights(Tensor::vector({0.0, 0.0})).data()[0] == doctest::Approx(0.5));
  const Tensor sat = effective_weights(Tensor::vector({30.0, 0.0}));
  CHECK(std::abs(sat.data()[0] - 1.0) < 1e-12);
  CHECK(std::abs(sat.data()[1]) < 1e-12);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Tensor w = effective_weights(random_tensor(rng, {5}, -20.0, 20.0));
    double s = 0.0;
    for (double v : w.data()) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(effective_weights(Tensor(Shape{0})), ShapeError);
}

TEST_CASE("model construction validates layers") {
  Rng rng(2);
  AugNetModel m(small_mlp(), rng);
  CHECK_THROWS_AS(m.add_layer({}, 0.0), ConfigError);
  CHECK_THROWS_AS(m.add_layer(signal_transforms(), 1.5), ConfigError);
  m.add_layer(signal_transforms(), 0.25);
  CHECK(m.weights(0) == std::vector<double>(3, 1.0 / 3.0));
  CHECK(m.magnitudes(0) == std::vector<double>(3, 0.25));
  set_param(m, "aug.0.magnitudes", {-0.5, 0.5, 2.0});
  m.project_magnitudes();
  CHECK(m.magnitudes(0) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(reg_kind_from_string("augerino") == RegKind::augerino);
  CHECK_THROWS_AS(reg_kind_from_string("l1"), ConfigError);
}

TEST_CASE("augmentation layer examples") {
  Rng rng(3);
  AugNetModel m(small_mlp(), rng);
  m.add_layer(signal_transforms(), 0.0);
  const Tensor x = random_tensor(rng, {4, 1, 32});

  SUBCASE("zero magnitudes give the identity") {
    const Tensor y = aug_layer_forward(x, m.layers()[0], m.params().bind(nullptr), rng);
    CHECK(max_abs_diff(x.data(), y.data()) < 1e-9);
  }
  SUBCASE("one-hot weight reduces to that transform") {
    set_param(m, "aug.0.hidden_weights", {-1e3, 1e3, -1e3});
    set_param(m, "aug.0.magnitudes", {0.7, 0.4, 0.9});
    Rng a(42);
    const Tensor y = aug_layer_forward(x, m.layers()[0], m.params().bind(nullptr), a);
    Rng b(42);
    const auto& ts = m.layers()[0].transforms;
    sample_draw(ts[0], x.shape(), b);
    const auto draw = sample_draw(ts[1], x.shape(), b);
    const Tensor expected = apply_transform(ts[1], x, Tensor::scalar(0.4), draw);
    CHECK(max_abs_diff(y.data(), expected.data()) < 1e-12);
  }
  SUBCASE("even mixture is the midpoint of the transformed copies") {
    AugNetModel two(small_mlp(), rng);
    two.add_layer({spec(TransformKind::brightness), spec(TransformKind::gaussian_noise)}, 0.0);
    set_param(two, "aug.0.magnitudes", {0.6, 0.0});
    Rng a(7);
    const Tensor y = aug_layer_forward(x, two.layers()[0], two.params().bind(nullptr), a);
    Rng b(7);
    const auto d = sample_draw(two.layers()[0].transforms[0], x.shape(), b);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double bright = x.data()[i] + 0.5 * 0.6 * d.epsilon[i / 32];
      CHECK(y.data()[i] == doctest::Approx(0.5 * bright + 0.5 * x.data()[i]).epsilon(1e-12));
    }
  }
  SUBCASE("modality mismatch") {
    AugNetModel img(small_mlp(), rng);
    img.add_layer({spec(TransformKind::rotate)}, 0.5);
    CHECK_THROWS_AS(aug_layer_forward(x, img.layers()[0], img.params().bind(nullptr), rng), ConfigError);
  }
}

TEST_CASE("augmentation module composition") {
  Rng rng(4);
  AugNetModel m(small_mlp(), rng);
  const Tensor x = random_tensor(rng, {3, 1, 32});
  CHECK(identical(augmentation_forward(x, m.layers(), m.params().bind(nullptr), rng), x));
  m.add_layer(signal_transforms(), 0.0);
  m.add_layer(signal_transforms(), 0.0);
  CHECK(max_abs_diff(augmentation_forward(x, m.layers(), m.params().bind(nullptr), rng).data(), x.data()) < 1e-9);

  set_param(m, "aug.0.magnitudes", {0.3, 0.2, 0.5});
  set_param(m, "aug.1.magnitudes", {0.8, 0.1, 0.4});
  const auto params = m.params().bind(nullptr);
  Rng a(9);
  const Tensor composed = augmentation_forward(x, m.layers(), params, a);
  Rng b(9);
  const Tensor nested = aug_layer_forward(aug_layer_forward(x, m.layers()[0], params, b), m.layers()[1], params, b);
  CHECK(identical(composed, nested));
}

TEST_CASE("forward with copies") {
  Rng rng(5);
  AugNetModel m(small_mlp(), rng);
  m.add_layer(signal_transforms(), 0.0);
  const Tensor x = random_tensor(rng, {3, 1, 32});
  const auto params = m.params().bind(nullptr);
  CHECK_THROWS_AS(augnet_forward(x, m, 0, params, rng, Mode::eval), ConfigError);

  const Tensor bare = m.trunk().forward(params, x, Mode::eval);
  for (std::size_t c : {1, 2, 4, 10}) {
    CHECK(max_abs_diff(augnet_forward(x, m, c, params, rng, Mode::eval).data(), bare.data()) < 1e-9);
  }

  set_param(m, "aug.0.magnitudes", {0.5, 0.5, 0.5});
  const auto live = m.params().bind(nullptr);
  Rng a(11);
  const Tensor one = augnet_forward(x, m, 1, live, a, Mode::eval);
  Rng b(11);
  const Tensor manual = m.trunk().forward(live, augmentation_forward(x, m.layers(), live, b), Mode::eval);
  CHECK(identical(one, manual));
}

TEST_CASE("copy averaging is unbiased") {
  Rng rng(6);
  AugNetModel m(small_mlp(), rng);
  m.add_layer(signal_transforms(), 0.6);
  const Tensor x = random_tensor(rng, {1, 1, 32});
  const auto params = m.params().bind(nullptr);
  constexpr std::size_t n = 10000;
  // Two independent estimates of E[f(T x)]: single-copy forwards and 4-copy forwards.
  auto moments = [&](std::size_t copies, std::size_t reps, Rng& r) {
    std::vector<double> s(4, 0.0), s2(4, 0.0);
    for (std::size_t i = 0; i < reps; ++i) {
      const Tensor y = augnet_forward(x, m, copies, params, r, Mode::eval);
      for (std::size_t k = 0; k < 4; ++k) {
        s[k] += y.data()[k];
        s2[k] += y.data()[k] * y.data()[k];
      }
    }
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 0; k < 4; ++k) {
      const double mean = s[k] / static_cast<double>(reps);
      const double var = (s2[k] - static_cast<double>(reps) * mean * mean) / static_cast<double>(reps - 1);
      out.emplace_back(mean, var / static_cast<double>(reps));
    }
    return out;
  };
  Rng a(100), b(200);
  const auto single = moments(1, n, a);
  const auto reference = moments(1, n, b);
  const auto four = moments(4, n / 4, b);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(single[k].second > 0.0);
    CHECK(std::abs(single[k].first - reference[k].first) < 3.0 * std::sqrt(single[k].second + reference[k].second));
    CHECK(std::abs(four[k].first - reference[k].first) < 3.0 * std::sqrt(four[k].second + reference[k].second));
  }
}

TEST_CASE("selective regularizer") {
  Rng rng(7);
  AugNetModel m(small_mlp(), rng);
  m.add_layer({spec(TransformKind::brightness), spec(TransformKind::gaussian_noise)}, 0.0);
  set_param(m, "aug.0.hidden_weights", {1e3, -1e3});
  set_param(m, "aug.0.magnitudes", {0.5, 0.3});
  CHECK(selective_regularizer(m.layers(), m.params().bind(nullptr)).item() == doctest::Approx(-0.5).epsilon(1e-10));
  set_param(m, "aug.0.hidden_weights", {0.0, 0.0});
  set_param(m, "aug.0.magnitudes", {0.0, 0.0});
  CHECK(std::abs(selective_regularizer(m.layers(), m.params().bind(nullptr)).item()) < 1e-5);
  CHECK(regularizer(RegKind::none, m.layers(), m.params().bind(nullptr)).item() == 0.0);

  m.add_layer(signal_transforms(), 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    set_param(m, "aug.0.hidden_weights", random_vector(rng, 2, -2.0, 2.0));
    set_param(m, "aug.0.magnitudes", random_vector(rng, 2, 0.05, 1.0));
    set_param(m, "aug.1.hidden_weights", random_vector(rng, 3, -2.0, 2.0));
    set_param(m, "aug.1.magnitudes", random_vector(rng, 3, 0.05, 1.0));
    const ScalarFn f = [&](Tape&, const Tensor& flat) {
      return selective_regularizer(m.layers(), split_flat(flat, m.params()));
    };
    CHECK(grad_check(f, Tensor::vector(flatten_values(m.params())), 1e-6).max_rel_error < 1e-6);
  }
}

TEST_CASE("dead transforms get no weight gradient from the selective penalty") {
  Rng rng(8);
  AugNetModel m(small_mlp(), rng);
  m.add_layer({spec(TransformKind::brightness), spec(TransformKind::gaussian_noise), spec(TransformKind::contrast)}, 0.0);
  set_param(m, "aug.0.magnitudes", {0.4, 0.0, 0.7});
  const std::size_t h = m.layers()[0].hidden;
  const std::size_t mu = m.layers()[0].magnitude;
  // Gradient of R wrt w (not w'): the q-th product term is w_q * 0.
  const ScalarFn f = [&](Tape&, const Tensor& w) {
    return negate(sqrt(add_constant(sum(square(mul(w, Tensor::vector(m.params()[mu].value)))), kNormSmoothing)));
  };
  const auto g = autodiff_gradient(f, effective_weights(Tensor::vector(m.params()[h].value)));
  CHECK(g[1] == 0.0);
  CHECK(g[0] != 0.0);
}

TEST_CASE("augerino regularizer") {
  Rng rng(9);
  AugNetModel m(small_mlp(), rng);
  m.add_layer(signal_transforms(), 0.0);
  set_param(m, "aug.0.magnitudes", {1.0, 0.0, 0.0});
  const double before = augerino_regularizer(m.layers(), m.params().bind(nullptr)).item();
  CHECK(before == doctest::Approx(-1.0).epsilon(1e-10));
  set_param(m, "aug.0.hidden_weights", {3.0, -1.0, 0.25});
  CHECK(augerino_regularizer(m.layers(), m.params().bind(nullptr)).item() == before);
  set_param(m, "aug.0.magnitudes", {0.0, 0.0, 0.0});
  CHECK(std::abs(augerino_regularizer(m.layers(), m.params().bind(nullptr)).item()) < 1e-5);
}

TEST_CASE("analytic regularizer gradient") {
  const auto even = reg_grad_analytic({0.5, 0.5}, {0.5, 0.5});
  CHECK(std::abs(even[0]) < 1e-15);
  CHECK(even[0] == even[1]);
  const auto g = reg_grad_analytic({0.5, 0.5}, {0.0, 1.0});
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(g[1] == doctest::Approx(1.0));

  // Autodiff of (w1 m1)^2 + (w2 m2)^2 along each simplex coordinate, the other weight eliminated.
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform();
    const std::array<double, 2> mu{rng.uniform(), rng.uniform()};
    const Tensor mus = Tensor::vector({mu[0], mu[1]});
    auto along = [&](std::size_t i_coord) {
      const ScalarFn f = [&](Tape&, const Tensor& s) {
        const Tensor other = add_constant(negate(s), 1.0);
        const Tensor w = i_coord == 0 ? concat(std::vector<Tensor>{s, other}) : concat(std::vector<Tensor>{other, s});
        return sum(square(mul(w, mus)));
      };
      return autodiff_gradient(f, Tensor::vector({i_coord == 0 ? t : 1.0 - t}))[0];
    };
    const auto a = reg_grad_analytic({t, 1.0 - t}, mu);
    CHECK(std::abs(a[0] - along(0)) < 1e-8);
    CHECK(std::abs(a[1] - along(1)) < 1e-8);
    // The smaller magnitude gets the smaller gradient whenever its weight is no larger.
    if (mu[0] < mu[1] && t <= 0.5) CHECK(a[0] < a[1]);
  }
  // The ordering does not hold for every simplex point: a heavy weight on the
  // smaller magnitude flips it.
  const auto flipped = reg_grad_analytic({0.9, 0.1}, {0.3, 0.6});
  CHECK(flipped[0] > flipped[1]);
}

TEST_CASE("gradient flow on the negative squared selective norm picks the larger magnitude") {
  const Tensor mus = Tensor::vector({0.3, 0.6});
  const ScalarFn f = [&](Tape&, const Tensor& hidden) {
    return negate(sum(square(mul(effective_weights(hidden), mus))));
  };
  Tensor hidden = Tensor::vector({0.0, 0.0});
  for (int step = 0; step < 20000; ++step) {
    const auto g = autodiff_gradient(f, hidden);
    hidden = Tensor::vector({hidden.data()[0] - 0.5 * g[0], hidden.data()[1] - 0.5 * g[1]});
  }
  CHECK(effective_weights(hidden).data()[1] > 0.99);
}

TEST_CASE("training loss") {
  Rng rng(11);
  AugNetModel m(small_mlp(), rng);
  m.add_layer(signal_transforms(), 0.0);
  const Tensor x = random_tensor(rng, {4, 1, 32});
  const std::vector<int> labels{0, 3, 1, 2};
  const auto params = m.params().bind(nullptr);
  CHECK_THROWS_AS(training_loss(x, labels, m, params, -1.0, RegKind::selective, 2, rng), ConfigError);

  SUBCASE("reduces to the trunk loss") {
    const auto t = training_loss(x, labels, m, params, 0.0, RegKind::selective, 4, rng);
    const double plain = softmax_cross_entropy(m.trunk().forward(params, x, Mode::train), labels).item();
    CHECK(std::abs(t.total.item() - plain) < 1e-9);
  }
  SUBCASE("adds the penalty") {
    set_param(m, "aug.0.hidden_weights", {1e3, -1e3, -1e3});
    set_param(m, "aug.0.magnitudes", {0.35, 0.8, 0.1});
    const auto live = m.params().bind(nullptr);
    const auto t = training_loss(x, labels, m, live, 1.0, RegKind::selective, 2, rng);
    CHECK(t.total.item() == doctest::Approx(t.cross_entropy - 0.35).epsilon(1e-10));
    CHECK(t.penalty == doctest::Approx(-0.35).epsilon(1e-10));
    const auto none = training_loss(x, labels, m, live, 1.0, RegKind::none, 2, rng);
    CHECK(none.total.item() == none.cross_entropy);
  }
  SUBCASE("gradient with frozen draws") {
    set_param(m, "aug.0.hidden_weights", {0.3, -0.2, 0.1});
    set_param(m, "aug.0.magnitudes", {0.4, 0.3, 0.6});
    for (auto reg : {RegKind::selective, RegKind::augerino}) {
      const ScalarFn f = [&](Tape&, const Tensor& flat) {
        Rng frozen(77);
        return training_loss(x, labels, m, split_flat(flat, m.params()), 0.7, reg, 2, frozen).total;
      };
      CAPTURE(to_string(reg));
      CHECK(grad_check(f, Tensor::vector(flatten_values(m.params())), 1e-6).max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("exact group averages") {
  Rng rng(12);
  TrunkConfig c;
  c.kind = TrunkKind::sprite_cnn;
  c.input_shape = {3, 32, 32};
  ParameterStore store;
  Trunk trunk(c, store, rng);
  const auto params = store.bind(nullptr);
  const auto f = [&](const Tensor& x) { return trunk.forward(params, x, Mode::eval); };
  const Tensor x = random_tensor(rng, {2, 3, 32, 32});

  const auto trivial = trivial_group();
  CHECK(identical(group_average_exact(f, trivial, x), f(x)));

  const auto flips = flip_group();
  const Tensor a = group_average_exact(f, flips, x);
  const Tensor b = group_average_exact(f, flips, flip_horizontal(x));
  CHECK(max_abs_diff(a.data(), b.data()) < 1e-12);

  const auto rot = rotation_group();
  const Tensor r0 = group_average_exact(f, rot, x);
  for (int k = 1; k < 4; ++k) {
    CHECK(max_abs_diff(r0.data(), group_average_exact(f, rot, rotate90(x, k)).data()) < 1e-9);
  }
  // The plain trunk is not invariant, so the check above is not vacuous.
  CHECK(max_abs_diff(f(x).data(), f(rotate90(x, 1)).data()) > 1e-6);
}

TEST_CASE("element sets that are not groups are rejected") {
  Rng rng(13);
  const Tensor x = random_tensor(rng, {1, 1, 4, 4});
  const auto id = [](const Tensor& t) { return t; };
  const std::vector<GroupElement> not_closed{id, [](const Tensor& t) { return rotate90(t, 1); }};
  CHECK_THROWS_AS(check_group(not_closed, x), ConfigError);
  const std::vector<GroupElement> no_identity{[](const Tensor& t) { return flip_horizontal(t); }};
  CHECK_THROWS_AS(check_group(no_identity, x), ConfigError);
  CHECK_THROWS_AS(check_group(std::vector<GroupElement>{}, x), ConfigError);
  CHECK_NOTHROW(check_group(rotation_group(), x));
  const auto f = [](const Tensor& t) { return t; };
  CHECK_THROWS_AS(group_average_exact(f, not_closed, x), ConfigError);
}
