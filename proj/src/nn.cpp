#include "dsfl/nn.hpp"

#include <cmath>

namespace dsfl {

namespace {

void check_image(const char* name, const Tensor& t) {
  if (t.rank() != 4) throw ShapeError(std::string(name) + ": expected rank-4 NCHW tensor, got " + shape_str(t.shape()));
}

bool taped(const Tensor& t) {
  Tape* tape = Tape::active();
  return tape && tape->wants(t);
}

Tensor wrap(const char* name, Shape shape, std::vector<double> data,
            const std::vector<Tensor>& inputs, BackwardFn fn) {
  for (double x : data)
    if (!std::isfinite(x)) throw NonFiniteError(std::string("non-finite value in ") + name);
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  Tape* tape = Tape::active();
  if (tape) {
    bool any = false;
    for (const Tensor& in : inputs) any = any || tape->wants(in);
    if (any) tape->record(out, inputs, std::move(fn));
  }
  return out;
}

inline size_t idx4(int a, int b, int c, int d, int B, int C, int D) {
  return static_cast<size_t>(((static_cast<int64_t>(a) * B + b) * C + c) * D + d);
}

}  // namespace

// ---- conv2d --------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  check_image("conv2d", input);
  check_image("conv2d", kernel);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = kernel.dim(0), KC = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (KC != C) throw ShapeError("conv2d: kernel expects " + std::to_string(KC) + " channels, input has " + std::to_string(C));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d: negative padding");
  if (kh > H + 2 * padding || kw > W + 2 * padding) throw ShapeError("conv2d: kernel larger than padded input");
  const int Ho = (H + 2 * padding - kh) / stride + 1;
  const int Wo = (W + 2 * padding - kw) / stride + 1;

  const auto& x = input.data();
  const auto& w = kernel.data();
  std::vector<double> out(static_cast<size_t>(N) * K * Ho * Wo, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i) {
              const int y = oy * stride - padding + i;
              if (y < 0 || y >= H) continue;
              for (int j = 0; j < kw; ++j) {
                const int xx = ox * stride - padding + j;
                if (xx < 0 || xx >= W) continue;
                acc += x[idx4(n, c, y, xx, C, H, W)] * w[idx4(k, c, i, j, C, kh, kw)];
              }
            }
          out[idx4(n, k, oy, ox, K, Ho, Wo)] = acc;
        }

  bool nx = taped(input), nw = taped(kernel);
  return wrap("conv2d", {N, K, Ho, Wo}, std::move(out), {input, kernel},
              [input, kernel, stride, padding, N, C, H, W, K, kh, kw, Ho, Wo, nx,
               nw](const Tensor& g) -> std::vector<Tensor> {
                const auto& gd = g.data();
                const auto& x = input.data();
                const auto& w = kernel.data();
                std::vector<Tensor> result(2);
                if (nx) {
                  std::vector<double> gx(x.size(), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int k = 0; k < K; ++k)
                      for (int oy = 0; oy < Ho; ++oy)
                        for (int ox = 0; ox < Wo; ++ox) {
                          const double go = gd[idx4(n, k, oy, ox, K, Ho, Wo)];
                          for (int c = 0; c < C; ++c)
                            for (int i = 0; i < kh; ++i) {
                              const int y = oy * stride - padding + i;
                              if (y < 0 || y >= H) continue;
                              for (int j = 0; j < kw; ++j) {
                                const int xx = ox * stride - padding + j;
                                if (xx < 0 || xx >= W) continue;
                                gx[idx4(n, c, y, xx, C, H, W)] += go * w[idx4(k, c, i, j, C, kh, kw)];
                              }
                            }
                        }
                  result[0] = Tensor::from_data(input.shape(), std::move(gx));
                }
                if (nw) {
                  std::vector<double> gw(w.size(), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int k = 0; k < K; ++k)
                      for (int oy = 0; oy < Ho; ++oy)
                        for (int ox = 0; ox < Wo; ++ox) {
                          const double go = gd[idx4(n, k, oy, ox, K, Ho, Wo)];
                          for (int c = 0; c < C; ++c)
                            for (int i = 0; i < kh; ++i) {
                              const int y = oy * stride - padding + i;
                              if (y < 0 || y >= H) continue;
                              for (int j = 0; j < kw; ++j) {
                                const int xx = ox * stride - padding + j;
                                if (xx < 0 || xx >= W) continue;
                                gw[idx4(k, c, i, j, C, kh, kw)] += go * x[idx4(n, c, y, xx, C, H, W)];
                              }
                            }
                        }
                  result[1] = Tensor::from_data(kernel.shape(), std::move(gw));
                }
                return result;
              });
}

// ---- conv2d_transpose ------------------------------------------------------------

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  check_image("conv2d_transpose", input);
  check_image("conv2d_transpose", kernel);
  const int N = input.dim(0), K = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int KK = kernel.dim(0), C = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (KK != K) throw ShapeError("conv2d_transpose: kernel expects " + std::to_string(KK) + " input channels, got " + std::to_string(K));
  if (stride < 1) throw ValueError("conv2d_transpose: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d_transpose: negative padding");
  const int Ho = (H - 1) * stride - 2 * padding + kh;
  const int Wo = (W - 1) * stride - 2 * padding + kw;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d_transpose: non-positive output size");

  const auto& x = input.data();
  const auto& w = kernel.data();
  // scatter form: every input element contributes a kh x kw patch
  std::vector<double> out(static_cast<size_t>(N) * C * Ho * Wo, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          const double v = x[idx4(n, k, iy, ix, K, H, W)];
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i) {
              const int y = iy * stride - padding + i;
              if (y < 0 || y >= Ho) continue;
              for (int j = 0; j < kw; ++j) {
                const int xx = ix * stride - padding + j;
                if (xx < 0 || xx >= Wo) continue;
                out[idx4(n, c, y, xx, C, Ho, Wo)] += v * w[idx4(k, c, i, j, C, kh, kw)];
              }
            }
        }

  bool nx = taped(input), nw = taped(kernel);
  return wrap("conv2d_transpose", {N, C, Ho, Wo}, std::move(out), {input, kernel},
              [input, kernel, stride, padding, N, C, H, W, K, kh, kw, Ho, Wo, nx,
               nw](const Tensor& g) -> std::vector<Tensor> {
                const auto& gd = g.data();
                const auto& x = input.data();
                const auto& w = kernel.data();
                std::vector<Tensor> result(2);
                if (nx) {
                  // adjoint of the scatter: gather the patch back
                  std::vector<double> gx(x.size(), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int k = 0; k < K; ++k)
                      for (int iy = 0; iy < H; ++iy)
                        for (int ix = 0; ix < W; ++ix) {
                          double acc = 0.0;
                          for (int c = 0; c < C; ++c)
                            for (int i = 0; i < kh; ++i) {
                              const int y = iy * stride - padding + i;
                              if (y < 0 || y >= Ho) continue;
                              for (int j = 0; j < kw; ++j) {
                                const int xx = ix * stride - padding + j;
                                if (xx < 0 || xx >= Wo) continue;
                                acc += gd[idx4(n, c, y, xx, C, Ho, Wo)] * w[idx4(k, c, i, j, C, kh, kw)];
                              }
                            }
                          gx[idx4(n, k, iy, ix, K, H, W)] = acc;
                        }
                  result[0] = Tensor::from_data(input.shape(), std::move(gx));
                }
                if (nw) {
                  std::vector<double> gw(w.size(), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int k = 0; k < K; ++k)
                      for (int iy = 0; iy < H; ++iy)
                        for (int ix = 0; ix < W; ++ix) {
                          const double v = x[idx4(n, k, iy, ix, K, H, W)];
                          for (int c = 0; c < C; ++c)
                            for (int i = 0; i < kh; ++i) {
                              const int y = iy * stride - padding + i;
                              if (y < 0 || y >= Ho) continue;
                              for (int j = 0; j < kw; ++j) {
                                const int xx = ix * stride - padding + j;
                                if (xx < 0 || xx >= Wo) continue;
                                gw[idx4(k, c, i, j, C, kh, kw)] += v * gd[idx4(n, c, y, xx, C, Ho, Wo)];
                              }
                            }
                        }
                  result[1] = Tensor::from_data(kernel.shape(), std::move(gw));
                }
                return result;
              });
}

// ---- linear --------------------------------------------------------------------

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2) throw ShapeError("linear: input must be [N,F], got " + shape_str(input.shape()));
  if (weight.rank() != 2) throw ShapeError("linear: weight must be [F,G], got " + shape_str(weight.shape()));
  const int N = input.dim(0), F = input.dim(1);
  const int WF = weight.dim(0), G = weight.dim(1);
  if (WF != F) throw ShapeError("linear: inner dims disagree, input F=" + std::to_string(F) + " weight F=" + std::to_string(WF));
  if (bias.rank() != 1 || bias.dim(0) != G) throw ShapeError("linear: bias must be [G]");

  const auto& x = input.data();
  const auto& w = weight.data();
  const auto& b = bias.data();
  std::vector<double> out(static_cast<size_t>(N) * G);
  for (int n = 0; n < N; ++n)
    for (int g = 0; g < G; ++g) {
      double acc = b[static_cast<size_t>(g)];
      for (int f = 0; f < F; ++f)
        acc += x[static_cast<size_t>(n) * F + f] * w[static_cast<size_t>(f) * G + g];
      out[static_cast<size_t>(n) * G + g] = acc;
    }

  bool nx = taped(input), nw = taped(weight), nb = taped(bias);
  return wrap("linear", {N, G}, std::move(out), {input, weight, bias},
              [input, weight, bias, N, F, G, nx, nw, nb](const Tensor& g) -> std::vector<Tensor> {
                const auto& gd = g.data();
                const auto& x = input.data();
                const auto& w = weight.data();
                std::vector<Tensor> result(3);
                if (nx) {
                  std::vector<double> gx(x.size(), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int f = 0; f < F; ++f) {
                      double acc = 0.0;
                      for (int k = 0; k < G; ++k)
                        acc += gd[static_cast<size_t>(n) * G + k] * w[static_cast<size_t>(f) * G + k];
                      gx[static_cast<size_t>(n) * F + f] = acc;
                    }
                  result[0] = Tensor::from_data(input.shape(), std::move(gx));
                }
                if (nw) {
                  std::vector<double> gw(w.size(), 0.0);
                  for (int f = 0; f < F; ++f)
                    for (int k = 0; k < G; ++k) {
                      double acc = 0.0;
                      for (int n = 0; n < N; ++n)
                        acc += x[static_cast<size_t>(n) * F + f] * gd[static_cast<size_t>(n) * G + k];
                      gw[static_cast<size_t>(f) * G + k] = acc;
                    }
                  result[1] = Tensor::from_data(weight.shape(), std::move(gw));
                }
                if (nb) {
                  std::vector<double> gb(static_cast<size_t>(G), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int k = 0; k < G; ++k) gb[static_cast<size_t>(k)] += gd[static_cast<size_t>(n) * G + k];
                  result[2] = Tensor::from_data(bias.shape(), std::move(gb));
                }
                return result;
              });
}

// ---- instance_norm ----------------------------------------------------------------

Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  check_image("instance_norm", input);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (gamma.rank() != 1 || gamma.dim(0) != C) throw ShapeError("instance_norm: gamma must be [C]");
  if (beta.rank() != 1 || beta.dim(0) != C) throw ShapeError("instance_norm: beta must be [C]");
  const int64_t M = static_cast<int64_t>(H) * W;

  const auto& x = input.data();
  const auto& gm = gamma.data();
  const auto& bt = beta.data();
  // keep normalized values and inverse stddev for the backward pass
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * C);
  std::vector<double> out(x.size());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
      double mu = 0.0;
      for (int64_t i = 0; i < M; ++i) mu += x[base + static_cast<size_t>(i)];
      mu /= static_cast<double>(M);
      double var = 0.0;
      for (int64_t i = 0; i < M; ++i) {
        double d = x[base + static_cast<size_t>(i)] - mu;
        var += d * d;
      }
      var /= static_cast<double>(M);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<size_t>(n) * C + c] = is;
      for (int64_t i = 0; i < M; ++i) {
        double xh = (x[base + static_cast<size_t>(i)] - mu) * is;
        (*xhat)[base + static_cast<size_t>(i)] = xh;
        out[base + static_cast<size_t>(i)] = gm[static_cast<size_t>(c)] * xh + bt[static_cast<size_t>(c)];
      }
    }

  bool nx = taped(input), ng = taped(gamma), nb = taped(beta);
  return wrap("instance_norm", input.shape(), std::move(out), {input, gamma, beta},
              [input, gamma, beta, xhat, inv_std, N, C, M, nx, ng, nb](const Tensor& g) -> std::vector<Tensor> {
                const auto& gd = g.data();
                const auto& gm = gamma.data();
                std::vector<Tensor> result(3);
                if (nx) {
                  std::vector<double> gx(gd.size());
                  for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
                      const double is = (*inv_std)[static_cast<size_t>(n) * C + c];
                      double mean_g = 0.0, mean_gx = 0.0;
                      for (int64_t i = 0; i < M; ++i) {
                        mean_g += gd[base + static_cast<size_t>(i)];
                        mean_gx += gd[base + static_cast<size_t>(i)] * (*xhat)[base + static_cast<size_t>(i)];
                      }
                      mean_g /= static_cast<double>(M);
                      mean_gx /= static_cast<double>(M);
                      const double gscale = gm[static_cast<size_t>(c)] * is;
                      for (int64_t i = 0; i < M; ++i) {
                        gx[base + static_cast<size_t>(i)] =
                            gscale * (gd[base + static_cast<size_t>(i)] - mean_g -
                                      (*xhat)[base + static_cast<size_t>(i)] * mean_gx);
                      }
                    }
                  result[0] = Tensor::from_data(input.shape(), std::move(gx));
                }
                if (ng) {
                  std::vector<double> gg(static_cast<size_t>(C), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
                      for (int64_t i = 0; i < M; ++i)
                        gg[static_cast<size_t>(c)] += gd[base + static_cast<size_t>(i)] * (*xhat)[base + static_cast<size_t>(i)];
                    }
                  result[1] = Tensor::from_data(gamma.shape(), std::move(gg));
                }
                if (nb) {
                  std::vector<double> gb(static_cast<size_t>(C), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
                      for (int64_t i = 0; i < M; ++i) gb[static_cast<size_t>(c)] += gd[base + static_cast<size_t>(i)];
                    }
                  result[2] = Tensor::from_data(beta.shape(), std::move(gb));
                }
                return result;
              });
}

// ---- add_channel_bias --------------------------------------------------------------

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  check_image("add_channel_bias", input);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (bias.rank() != 1 || bias.dim(0) != C) throw ShapeError("add_channel_bias: bias must be [C]");
  const int64_t M = static_cast<int64_t>(H) * W;
  const auto& x = input.data();
  const auto& b = bias.data();
  std::vector<double> out(x.size());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
      for (int64_t i = 0; i < M; ++i) out[base + static_cast<size_t>(i)] = x[base + static_cast<size_t>(i)] + b[static_cast<size_t>(c)];
    }
  bool nx = taped(input), nb = taped(bias);
  return wrap("add_channel_bias", input.shape(), std::move(out), {input, bias},
              [input, bias, N, C, M, nx, nb](const Tensor& g) -> std::vector<Tensor> {
                const auto& gd = g.data();
                std::vector<Tensor> result(2);
                if (nx) result[0] = Tensor::from_data(input.shape(), gd);
                if (nb) {
                  std::vector<double> gb(static_cast<size_t>(C), 0.0);
                  for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                      const size_t base = (static_cast<size_t>(n) * C + c) * static_cast<size_t>(M);
                      for (int64_t i = 0; i < M; ++i) gb[static_cast<size_t>(c)] += gd[base + static_cast<size_t>(i)];
                    }
                  result[1] = Tensor::from_data(bias.shape(), std::move(gb));
                }
                return result;
              });
}

}  // namespace dsfl
