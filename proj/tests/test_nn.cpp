#include "dsfl/nn.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace dsfl;

TEST_CASE("conv2d: identity kernel") {
  Rng rng(1);
  Tensor x = oracle::random_tensor(rng, {1, 1, 3, 3});
  Tensor k = Tensor::from_data({1, 1, 1, 1}, {1.0});
  Tensor y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == x.shape());
  CHECK(y.data() == x.data());
}

TEST_CASE("conv2d: 2x2 ones over 4x4 ones, stride 2") {
  Tensor x = Tensor::full({1, 1, 4, 4}, 1.0);
  Tensor k = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor y = conv2d(x, k, 2, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.data() == std::vector<double>(4, 4.0));
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 8; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 2));
    Tensor x = oracle::random_tensor(rng, {2, 3, 8, 8});
    Tensor k = oracle::random_tensor(rng, {4, 3, 3, 3});
    Tensor y = conv2d(x, k, stride, pad);
    std::vector<double> expect = oracle::conv2d_loops(x.data(), 2, 3, 8, 8, k.data(), 4, 3, 3, stride, pad);
    REQUIRE(y.data().size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(y.at(static_cast<int64_t>(i)) - expect[i]) < 1e-10);
  }
}

TEST_CASE("conv2d rejects mismatched channels and bad geometry") {
  Rng rng(3);
  Tensor x = oracle::random_tensor(rng, {1, 3, 8, 8});
  Tensor k = oracle::random_tensor(rng, {4, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k, 1, 0), ShapeError);
  Tensor kbig = oracle::random_tensor(rng, {1, 3, 9, 9});
  CHECK_THROWS_AS(conv2d(x, kbig, 1, 0), ShapeError);
  Tensor kok = oracle::random_tensor(rng, {1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(x, kok, 0, 0), ValueError);
}

TEST_CASE("conv2d_transpose: 1x1 input broadcasts the kernel") {
  Tensor x = Tensor::from_data({1, 1, 1, 1}, {2.5});
  Tensor k = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor y = conv2d_transpose(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.data() == std::vector<double>(4, 2.5));
}

TEST_CASE("conv2d_transpose: stride-2 doubles spatial dims with k=4,p=1") {
  Rng rng(4);
  Tensor x = oracle::random_tensor(rng, {1, 2, 5, 5});
  Tensor k = oracle::random_tensor(rng, {2, 3, 4, 4});
  Tensor y = conv2d_transpose(x, k, 2, 1);
  CHECK(y.shape() == Shape{1, 3, 10, 10});
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int C = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int K = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int H = 4 + static_cast<int>(rng.uniform_int(0, 4));
    const int kh = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 1));
    Tensor x = oracle::random_tensor(rng, {2, C, H, H});
    Tensor k = oracle::random_tensor(rng, {K, C, kh, kh});
    Tensor cx = conv2d(x, k, stride, pad);
    Tensor y = oracle::random_tensor(rng, cx.shape());
    Tensor ty = conv2d_transpose(y, k, stride, pad);
    // <conv(x,k), y> == <x, convT(y,k)> when convT output matches x's size
    if (ty.shape() != x.shape()) continue;
    const double lhs = oracle::inner(cx.data(), y.data());
    const double rhs = oracle::inner(x.data(), ty.data());
    CHECK(std::abs(lhs - rhs) < 1e-9);
  }
}

TEST_CASE("linear: identity, zero weight, random oracle") {
  Rng rng(6);
  Tensor x = oracle::random_tensor(rng, {3, 4});
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<size_t>(i * 4 + i)] = 1.0;
  Tensor w_eye = Tensor::from_data({4, 4}, eye);
  Tensor zero_bias = Tensor::zeros({4});
  CHECK(linear(x, w_eye, zero_bias).data() == x.data());

  Tensor w_zero = Tensor::zeros({4, 2});
  Tensor b = Tensor::from_data({2}, {1.5, -2.5});
  Tensor y = linear(x, w_zero, b);
  for (int n = 0; n < 3; ++n) {
    CHECK(y.at(n * 2 + 0) == 1.5);
    CHECK(y.at(n * 2 + 1) == -2.5);
  }

  Tensor w = oracle::random_tensor(rng, {4, 5});
  Tensor bb = oracle::random_tensor(rng, {5});
  Tensor out = linear(x, w, bb);
  std::vector<double> expect = oracle::linear_loops(x.data(), 3, 4, w.data(), 5, bb.data());
  for (size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(out.at(static_cast<int64_t>(i)) - expect[i]) < 1e-10);

  CHECK_THROWS_AS(linear(x, oracle::random_tensor(rng, {5, 2}), b), ShapeError);
}

TEST_CASE("instance_norm normalizes per sample and channel") {
  Rng rng(7);
  Tensor x = oracle::random_tensor(rng, {2, 3, 4, 4});
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta = Tensor::zeros({3});
  Tensor y = instance_norm(x, gamma, beta);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double mu = 0, var = 0;
      for (int i = 0; i < 16; ++i) mu += y.at(((n * 3 + c) * 16) + i);
      mu /= 16;
      for (int i = 0; i < 16; ++i) {
        const double d = y.at(((n * 3 + c) * 16) + i) - mu;
        var += d * d;
      }
      var /= 16;
      CHECK(std::abs(mu) < 1e-12);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
    }
}

TEST_CASE("gradients of the nn primitives pass finite differences") {
  Rng rng(8);

  SUBCASE("conv2d wrt input and kernel") {
    Tensor x = oracle::random_tensor(rng, {2, 2, 5, 5}).with_grad(true);
    Tensor k = oracle::random_tensor(rng, {3, 2, 3, 3}).with_grad(true);
    auto loss = [&](const Tensor& xx, const Tensor& kk) { return sq_l2_norm(conv2d(xx, kk, 2, 1)); };
    Tensor gx, gk;
    {
      Tape tape;
      GradMap g = tape.backward(loss(x, k));
      gx = g.at(x.id());
      gk = g.at(k.id());
    }
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t, k).value(); }, x, gx) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, t).value(); }, k, gk) < 1e-4);
  }

  SUBCASE("conv2d_transpose wrt input and kernel") {
    Tensor x = oracle::random_tensor(rng, {1, 3, 4, 4}).with_grad(true);
    Tensor k = oracle::random_tensor(rng, {3, 2, 4, 4}).with_grad(true);
    auto loss = [&](const Tensor& xx, const Tensor& kk) { return sq_l2_norm(conv2d_transpose(xx, kk, 2, 1)); };
    Tensor gx, gk;
    {
      Tape tape;
      GradMap g = tape.backward(loss(x, k));
      gx = g.at(x.id());
      gk = g.at(k.id());
    }
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t, k).value(); }, x, gx) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, t).value(); }, k, gk) < 1e-4);
  }

  SUBCASE("linear wrt all three operands") {
    Tensor x = oracle::random_tensor(rng, {3, 4}).with_grad(true);
    Tensor w = oracle::random_tensor(rng, {4, 2}).with_grad(true);
    Tensor b = oracle::random_tensor(rng, {2}).with_grad(true);
    auto loss = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
      return mean(square(linear(xx, ww, bb)));
    };
    Tensor gx, gw, gb;
    {
      Tape tape;
      GradMap g = tape.backward(loss(x, w, b));
      gx = g.at(x.id());
      gw = g.at(w.id());
      gb = g.at(b.id());
    }
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t, w, b).value(); }, x, gx) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, t, b).value(); }, w, gw) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, w, t).value(); }, b, gb) < 1e-4);
  }

  SUBCASE("instance_norm wrt input, gamma, beta") {
    Tensor x = oracle::random_tensor(rng, {2, 2, 3, 3}).with_grad(true);
    Tensor gm = oracle::random_tensor(rng, {2}, 0.5, 1.5).with_grad(true);
    Tensor bt = oracle::random_tensor(rng, {2}).with_grad(true);
    auto loss = [&](const Tensor& xx, const Tensor& g, const Tensor& b) {
      return mean(square(instance_norm(xx, g, b)));
    };
    Tensor gx, gg, gb;
    {
      Tape tape;
      GradMap g = tape.backward(loss(x, gm, bt));
      gx = g.at(x.id());
      gg = g.at(gm.id());
      gb = g.at(bt.id());
    }
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t, gm, bt).value(); }, x, gx) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, t, bt).value(); }, gm, gg) < 1e-4);
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(x, gm, t).value(); }, bt, gb) < 1e-4);
  }

  SUBCASE("add_channel_bias wrt bias") {
    Tensor x = oracle::random_tensor(rng, {2, 3, 4, 4});
    Tensor b = oracle::random_tensor(rng, {3}).with_grad(true);
    auto loss = [&](const Tensor& bb) { return sq_l2_norm(add_channel_bias(x, bb)); };
    Tensor gb;
    {
      Tape tape;
      GradMap g = tape.backward(loss(b));
      gb = g.at(b.id());
    }
    CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t).value(); }, b, gb) < 1e-4);
  }
}

TEST_CASE("composite graph: conv -> relu -> linear -> mse passes finite differences") {
  Rng rng(9);
  Tensor x = oracle::random_tensor(rng, {2, 2, 6, 6});
  Tensor k = oracle::random_tensor(rng, {4, 2, 3, 3}).with_grad(true);
  Tensor w = oracle::random_tensor(rng, {4 * 4 * 4, 3}).with_grad(true);
  Tensor b = oracle::random_tensor(rng, {3}).with_grad(true);
  Tensor target = oracle::random_tensor(rng, {2, 3});
  auto loss = [&](const Tensor& kk, const Tensor& ww, const Tensor& bb) {
    Tensor h = relu(conv2d(x, kk, 1, 0));
    Tensor flat = reshape(h, {2, 4 * 4 * 4});
    return mean(square(sub(linear(flat, ww, bb), target)));
  };
  Tensor gk, gw, gb;
  {
    Tape tape;
    GradMap g = tape.backward(loss(k, w, b));
    gk = g.at(k.id());
    gw = g.at(w.id());
    gb = g.at(b.id());
  }
  CHECK(oracle::fd_check([&](const Tensor& t) { return loss(t, w, b).value(); }, k, gk) < 1e-4);
  CHECK(oracle::fd_check([&](const Tensor& t) { return loss(k, t, b).value(); }, w, gw) < 1e-4);
  CHECK(oracle::fd_check([&](const Tensor& t) { return loss(k, w, t).value(); }, b, gb) < 1e-4);
}
