#include "dsfl/tensor.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

using namespace dsfl;

TEST_CASE("elementwise basics") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  CHECK(add(a, b).data() == std::vector<double>{4, 6});
  CHECK(sub(b, a).data() == std::vector<double>{2, 2});
  CHECK(mul(a, b).data() == std::vector<double>{3, 8});

  Tensor r = relu(Tensor::from_data({3}, {-1, 0, 2}));
  CHECK(r.data() == std::vector<double>{0, 0, 2});

  CHECK(neg(a).data() == std::vector<double>{-1, -2});
  CHECK(dsfl::abs(Tensor::from_data({3}, {-1, 2, -3})).data() == std::vector<double>{1, 2, 3});
  CHECK(square(a).data() == std::vector<double>{1, 4});
}

TEST_CASE("sigmoid matches the scalar oracle") {
  Rng rng(11);
  Tensor x = oracle::random_tensor(rng, {4}, -3, 3);
  Tensor y = sigmoid(x);
  for (int i = 0; i < 4; ++i) {
    const double expected = 1.0 / (1.0 + std::exp(-x.at(i)));
    CHECK(std::abs(y.at(i) - expected) < 1e-12);
  }
}

TEST_CASE("leaky_relu slope") {
  Tensor y = leaky_relu(Tensor::from_data({2}, {-1.0, 2.0}), 0.2);
  CHECK(y.at(0) == doctest::Approx(-0.2));
  CHECK(y.at(1) == 2.0);
}

TEST_CASE("scalar broadcast works on either side") {
  Tensor v = Tensor::from_data({3}, {1, 2, 3});
  CHECK(add(v, Tensor::scalar(10)).data() == std::vector<double>{11, 12, 13});
  CHECK(sub(Tensor::scalar(10), v).data() == std::vector<double>{9, 8, 7});
  CHECK(mul_scalar(v, 2).data() == std::vector<double>{2, 4, 6});
}

TEST_CASE("shape mismatch and non-finite are errors") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({3}, {1, 2, 3});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(Tensor::from_data({1}, {std::nan("")}), NonFiniteError);
  Tensor huge = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(mul(huge, huge), NonFiniteError);
  CHECK_THROWS_AS(log(Tensor::from_data({1}, {0.0})), NonFiniteError);
}

TEST_CASE("forward ops never mutate inputs") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  std::vector<double> before = a.data();
  (void)add(a, a);
  (void)relu(a);
  (void)sum(a);
  (void)reshape(a, {2, 1});
  CHECK(a.data() == before);
}

TEST_CASE("elementwise dispatcher covers every kind") {
  Tensor a = Tensor::from_data({2}, {0.5, -0.5});
  Tensor b = Tensor::from_data({2}, {1.0, 2.0});
  CHECK(elementwise(EwOp::add, a, &b).at(0) == doctest::Approx(1.5));
  CHECK(elementwise(EwOp::mul, a, &b).at(1) == doctest::Approx(-1.0));
  CHECK(elementwise(EwOp::relu, a).at(1) == 0.0);
  CHECK(elementwise(EwOp::leaky_relu, a, nullptr, 0.1).at(1) == doctest::Approx(-0.05));
  CHECK(elementwise(EwOp::clamp, a, nullptr, 0.0, 0.3).at(0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(elementwise(EwOp::add, a), ValueError);
}

TEST_CASE("reduce: spec examples") {
  CHECK(sq_l2_norm(Tensor::from_data({2}, {3, 4})).value() == 25.0);
  CHECK(l1_norm(Tensor::from_data({3}, {-1, 2, -3})).value() == 6.0);

  Rng rng(5);
  Tensor m = oracle::random_tensor(rng, {5, 5});
  double total = 0;
  for (int i = 0; i < 25; ++i) total += m.at(i);
  CHECK(mean(m).value() == doctest::Approx(total / 25).epsilon(1e-12));
}

TEST_CASE("reduce over axes") {
  // [2,3] summed over axis 1 -> [2]
  Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor s = sum(m, {1});
  CHECK(s.shape() == Shape{2});
  CHECK(s.data() == std::vector<double>{6, 15});
  Tensor s0 = sum(m, {0});
  CHECK(s0.data() == std::vector<double>{5, 7, 9});
  CHECK(mean(m, {0, 1}).shape() == Shape{1});
  CHECK_THROWS_AS(sum(m, {2}), ShapeError);
  CHECK_THROWS_AS(sum(m, {0, 0}), ShapeError);
}

TEST_CASE("reduce identities") {
  Rng rng(7);
  Tensor x = oracle::random_tensor(rng, {4, 3});
  CHECK(sq_l2_norm(x).value() == doctest::Approx(sum(square(x)).value()).epsilon(1e-14));
  CHECK(l1_norm(x).value() == doctest::Approx(sum(dsfl::abs(x)).value()).epsilon(1e-14));
}

TEST_CASE("slice and concat round trip") {
  Rng rng(13);
  Tensor x = oracle::random_tensor(rng, {2, 5, 3});
  Tensor left = slice(x, 1, 0, 2);
  Tensor right = slice(x, 1, 2, 3);
  CHECK(left.shape() == Shape{2, 2, 3});
  Tensor glued = concat({left, right}, 1);
  CHECK(glued.shape() == x.shape());
  CHECK(glued.data() == x.data());
  CHECK_THROWS_AS(slice(x, 1, 4, 2), ShapeError);
  CHECK_THROWS_AS(concat({left, oracle::random_tensor(rng, {2, 2, 4})}, 1), ShapeError);
}

TEST_CASE("determinism: same inputs, same bits") {
  Rng rng1(42), rng2(42);
  Tensor a1 = oracle::random_tensor(rng1, {16});
  Tensor a2 = oracle::random_tensor(rng2, {16});
  CHECK(a1.data() == a2.data());
  CHECK(sigmoid(a1).data() == sigmoid(a2).data());
}

// ---- tape / backward ---------------------------------------------------------------

TEST_CASE("d(sum)/dx is ones and d(sq_l2)/dx is 2x") {
  Rng rng(3);
  Tensor x = oracle::random_tensor(rng, {5}).with_grad(true);
  {
    Tape tape;
    GradMap g = tape.backward(sum(x));
    CHECK(g.at(x.id()).data() == std::vector<double>(5, 1.0));
  }
  {
    Tape tape;
    GradMap g = tape.backward(sq_l2_norm(x));
    for (int i = 0; i < 5; ++i) CHECK(g.at(x.id()).at(i) == doctest::Approx(2 * x.at(i)).epsilon(1e-14));
  }
}

TEST_CASE("backward contract violations") {
  Tensor x = Tensor::param({2}, {1, 2});
  {
    Tape tape;
    Tensor y = add(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);  // non-scalar loss
  }
  {
    Tape tape;
    // loss built before this tape existed is not on it
    Tensor loss = Tensor::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(loss), Error);
  }
  {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), Error);  // tape consumed
  }
}

TEST_CASE("no recording without grad-enabled inputs") {
  Tensor x = Tensor::from_data({2}, {1, 2});
  Tape tape;
  Tensor y = sum(add(x, x));
  CHECK(tape.num_nodes() == 0);
  CHECK_THROWS_AS(tape.backward(y), Error);
}

TEST_CASE("gradients accumulate across reuse") {
  Tensor x = Tensor::param({1}, {3.0});
  Tape tape;
  Tensor y = add(mul(x, x), x);  // x^2 + x -> dy/dx = 2x + 1
  GradMap g = tape.backward(reshape(y, {1}));
  CHECK(g.at(x.id()).at(0) == doctest::Approx(7.0));
}

TEST_CASE("frozen leaves get no gradient entry; unreached leaves get zeros") {
  Tensor frozen = Tensor::param({2}, {1, 2}).with_grad(false);
  Tensor live = Tensor::param({2}, {1, 1});
  Tensor unused = Tensor::param({2}, {5, 5});
  Tape tape;
  Tensor loss = sum(mul(frozen, live));
  (void)sum(unused);  // on tape but not feeding the loss
  GradMap g = tape.backward(loss);
  CHECK(g.count(frozen.id()) == 0);
  CHECK(g.count(live.id()) == 1);
  REQUIRE(g.count(unused.id()) == 1);
  CHECK(g.at(unused.id()).data() == std::vector<double>(2, 0.0));
}

TEST_CASE("finite differences validate elementwise and reduce gradients") {
  Rng rng(99);
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    bool kinked;  // inputs must stay away from 0
  };
  const Case cases[] = {
      {"sigmoid+mul", [](const Tensor& t) { return sum(mul(sigmoid(t), t)); }, false},
      {"tanh", [](const Tensor& t) { return sq_l2_norm(dsfl::tanh(t)); }, false},
      {"relu", [](const Tensor& t) { return sum(relu(t)); }, true},
      {"leaky_relu", [](const Tensor& t) { return sum(leaky_relu(t, 0.2)); }, true},
      {"abs", [](const Tensor& t) { return sum(dsfl::abs(t)); }, true},
      {"square-mean", [](const Tensor& t) { return mean(square(t)); }, false},
      {"l1", [](const Tensor& t) { return l1_norm(t); }, true},
      {"axis-mean", [](const Tensor& t) { return sq_l2_norm(mean(t, {0})); }, false},
      {"slice", [](const Tensor& t) { return sum(square(slice(t, 0, 1, 2))); }, false},
      {"concat",
       [](const Tensor& t) { return sum(square(concat({slice(t, 0, 0, 1), slice(t, 0, 1, 3)}, 0))); },
       false},
      {"log", [](const Tensor& t) { return sum(log(add_scalar(square(t), 1.0))); }, false},
      {"clamp", [](const Tensor& t) { return sum(clamp(t, -0.5, 0.5)); }, true},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    Tensor x = (c.kinked ? oracle::random_tensor_nonzero(rng, {4, 3}) : oracle::random_tensor(rng, {4, 3}))
                   .with_grad(true);
    Tensor analytic;
    {
      Tape tape;
      GradMap g = tape.backward(c.f(x));
      analytic = g.at(x.id());
    }
    const double err = oracle::fd_check([&](const Tensor& t) { return c.f(t).value(); }, x, analytic);
    CHECK(err < 1e-4);
  }
}
