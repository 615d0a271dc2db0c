// Test-only reference implementations, independent of the library's op code.
// Everything here is written as straightforward loops over raw values.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "dsfl/eval.hpp"
#include "dsfl/losses.hpp"
#include "dsfl/rng.hpp"
#include "dsfl/tensor.hpp"

namespace oracle {

using dsfl::Label;
using dsfl::Rng;
using dsfl::ScoreRecord;
using dsfl::Shape;
using dsfl::Tensor;

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> d(static_cast<size_t>(dsfl::numel(shape)));
  for (double& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d));
}

/// Random values bounded away from zero, for ops with kinks at 0.
inline Tensor random_tensor_nonzero(Rng& rng, Shape shape, double margin = 1e-2) {
  std::vector<double> d(static_cast<size_t>(dsfl::numel(shape)));
  for (double& v : d) {
    double x = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -x : x;
  }
  return Tensor::from_data(std::move(shape), std::move(d));
}

// ---- dense linear algebra oracles ------------------------------------------------------

inline std::vector<double> conv2d_loops(const std::vector<double>& x, int N, int C, int H, int W,
                                        const std::vector<double>& w, int K, int kh, int kw, int stride,
                                        int pad) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<size_t>(N) * K * Ho * Wo, 0.0);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j)
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k)
            for (int oy = 0; oy < Ho; ++oy)
              for (int ox = 0; ox < Wo; ++ox) {
                const int y = oy * stride - pad + i;
                const int xx = ox * stride - pad + j;
                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                out[static_cast<size_t>(((n * K + k) * Ho + oy) * Wo + ox)] +=
                    x[static_cast<size_t>(((n * C + c) * H + y) * W + xx)] *
                    w[static_cast<size_t>(((k * C + c) * kh + i) * kw + j)];
              }
  return out;
}

inline std::vector<double> linear_loops(const std::vector<double>& x, int N, int F,
                                        const std::vector<double>& w, int G, const std::vector<double>& b) {
  std::vector<double> out(static_cast<size_t>(N) * G);
  for (int n = 0; n < N; ++n)
    for (int g = 0; g < G; ++g) {
      double acc = b[static_cast<size_t>(g)];
      for (int f = 0; f < F; ++f) acc += x[static_cast<size_t>(n * F + f)] * w[static_cast<size_t>(f * G + g)];
      out[static_cast<size_t>(n * G + g)] = acc;
    }
  return out;
}

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// ---- gradient checking ------------------------------------------------------------------

/// Max elementwise error between an analytic gradient and central finite
/// differences of `f` at `x`, relative to max(|a|,|n|,1e-4).
inline double fd_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                       const Tensor& analytic, double h = 1e-5) {
  double worst = 0.0;
  const auto& base = x.data();
  for (int64_t i = 0; i < x.size(); ++i) {
    std::vector<double> up = base, dn = base;
    up[static_cast<size_t>(i)] += h;
    dn[static_cast<size_t>(i)] -= h;
    const double fu = f(Tensor::from_data(x.shape(), up));
    const double fd = f(Tensor::from_data(x.shape(), dn));
    const double numeric = (fu - fd) / (2.0 * h);
    const double a = analytic.at(i);
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

// ---- triplet enumeration oracles ----------------------------------------------------------

inline double sq_dist(const std::vector<double>& f, int dim, int i, int j) {
  double acc = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double delta = f[static_cast<size_t>(i * dim + d)] - f[static_cast<size_t>(j * dim + d)];
    acc += delta * delta;
  }
  return acc;
}

inline double triplet_normal_bruteforce(const std::vector<double>& features, int n, int dim,
                                        const std::vector<Label>& labels, double alpha,
                                        bool positive_only = true) {
  double total = 0.0;
  int64_t count_all = 0, count_pos = 0;
  for (int a = 0; a < n; ++a) {
    if (labels[static_cast<size_t>(a)] != Label::live) continue;
    for (int p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<size_t>(p)] != Label::live) continue;
      for (int k = 0; k < n; ++k) {
        if (labels[static_cast<size_t>(k)] != Label::spoof) continue;
        ++count_all;
        const double v = sq_dist(features, dim, a, p) - sq_dist(features, dim, a, k) + alpha;
        if (v > 0) {
          total += v;
          ++count_pos;
        }
      }
    }
  }
  if (positive_only) return count_pos == 0 ? 0.0 : total / static_cast<double>(count_pos);
  return count_all == 0 ? 0.0 : total / static_cast<double>(count_all);
}

inline double triplet_hard_bruteforce(const std::vector<double>& features, int n, int dim,
                                      const std::vector<Label>& labels, double m) {
  double total = 0.0;
  int64_t anchors = 0;
  for (int a = 0; a < n; ++a) {
    if (labels[static_cast<size_t>(a)] != Label::live) continue;
    double hard_pos = -1.0, hard_neg = std::numeric_limits<double>::infinity();
    for (int p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<size_t>(p)] != Label::live) continue;
      hard_pos = std::max(hard_pos, sq_dist(features, dim, a, p));
    }
    for (int k = 0; k < n; ++k) {
      if (labels[static_cast<size_t>(k)] != Label::spoof) continue;
      hard_neg = std::min(hard_neg, sq_dist(features, dim, a, k));
    }
    total += std::max(hard_pos - hard_neg + m, 0.0);
    ++anchors;
  }
  return total / static_cast<double>(anchors);
}

// ---- metric oracles --------------------------------------------------------------------------

inline void step_rates(const std::vector<ScoreRecord>& scores, double t, double& far, double& frr) {
  int spoof_total = 0, live_total = 0, spoof_le = 0, live_gt = 0;
  for (const ScoreRecord& s : scores) {
    if (s.label == Label::spoof) {
      ++spoof_total;
      spoof_le += s.score <= t;
    } else {
      ++live_total;
      live_gt += s.score > t;
    }
  }
  far = static_cast<double>(spoof_le) / spoof_total;
  frr = static_cast<double>(live_gt) / live_total;
}

/// EER from a dense threshold sweep: sample FAR/FRR on a uniform grid, locate
/// the sign change of FAR-FRR, interpolate linearly across it.
inline double eer_sweep(const std::vector<ScoreRecord>& scores, int n_thresholds = 10000) {
  double lo = scores[0].score, hi = scores[0].score;
  for (const ScoreRecord& s : scores) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  const double margin = std::max(1e-6, (hi - lo) * 0.01);
  lo -= margin;
  hi += margin;
  double prev_far, prev_frr;
  step_rates(scores, lo, prev_far, prev_frr);
  for (int i = 1; i <= n_thresholds; ++i) {
    const double t = lo + (hi - lo) * i / n_thresholds;
    double far, frr;
    step_rates(scores, t, far, frr);
    const double d0 = prev_far - prev_frr;
    const double d1 = far - frr;
    if (d0 == 0.0) return prev_far;
    if (d0 < 0.0 && d1 >= 0.0) {
      if (d1 == 0.0) return far;
      const double u = -d0 / (d1 - d0);
      return prev_far + u * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;
}

/// AUC by counting all spoof/live pairs, ties half.
inline double auc_pairwise(const std::vector<ScoreRecord>& scores) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (const ScoreRecord& s : scores) {
    if (s.label != Label::spoof) continue;
    for (const ScoreRecord& l : scores) {
      if (l.label != Label::live) continue;
      ++pairs;
      if (s.score > l.score) wins += 1.0;
      else if (s.score == l.score) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

/// Smallest achievable |FAR-FRR| over a dense grid plus all score midpoints.
inline double best_rate_gap(const std::vector<ScoreRecord>& scores, int n_thresholds = 10000) {
  std::vector<double> cands;
  double lo = scores[0].score, hi = scores[0].score;
  for (const ScoreRecord& s : scores) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  for (int i = 0; i <= n_thresholds; ++i) cands.push_back(lo - 0.01 + (hi - lo + 0.02) * i / n_thresholds);
  std::vector<double> sorted;
  for (const ScoreRecord& s : scores) sorted.push_back(s.score);
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i + 1 < sorted.size(); ++i) cands.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  double best = 2.0;
  for (double t : cands) {
    double far, frr;
    step_rates(scores, t, far, frr);
    best = std::min(best, std::abs(far - frr));
  }
  return best;
}

// ---- spectral oracle ----------------------------------------------------------------------------

/// Mean |DFT|^2 of the channel-averaged image over radial frequencies in
/// [k_lo, k_hi]. Direct O(S^4) transform.
inline double band_energy(const Tensor& image, double k_lo, double k_hi) {
  const int S = image.dim(1);
  std::vector<double> gray(static_cast<size_t>(S) * S, 0.0);
  const auto& d = image.data();
  for (int c = 0; c < image.dim(0); ++c)
    for (int i = 0; i < S * S; ++i)
      gray[static_cast<size_t>(i)] += d[static_cast<size_t>(c * S * S + i)] / image.dim(0);

  double energy = 0.0;
  int count = 0;
  for (int ky = 0; ky < S; ++ky)
    for (int kx = 0; kx < S; ++kx) {
      const int fx = std::min(kx, S - kx);
      const int fy = std::min(ky, S - ky);
      const double kr = std::sqrt(static_cast<double>(fx * fx + fy * fy));
      if (kr < k_lo || kr > k_hi) continue;
      std::complex<double> acc(0.0, 0.0);
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          const double phase = -2.0 * M_PI * (static_cast<double>(kx) * x + static_cast<double>(ky) * y) / S;
          acc += gray[static_cast<size_t>(y * S + x)] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
      energy += std::norm(acc);
      ++count;
    }
  return energy / count;
}

/// Mean squared 4-neighbour Laplacian of the channel-averaged image.
inline double laplacian_energy(const Tensor& image) {
  const int S = image.dim(1);
  const auto& d = image.data();
  auto gray = [&](int y, int x) {
    double acc = 0.0;
    for (int c = 0; c < image.dim(0); ++c) acc += d[static_cast<size_t>((c * S + y) * S + x)];
    return acc / image.dim(0);
  };
  double energy = 0.0;
  for (int y = 1; y < S - 1; ++y)
    for (int x = 1; x < S - 1; ++x) {
      const double lap = 4 * gray(y, x) - gray(y - 1, x) - gray(y + 1, x) - gray(y, x - 1) - gray(y, x + 1);
      energy += lap * lap;
    }
  return energy / ((S - 2) * (S - 2));
}

/// Fraction of interior pixels identical to all 4 neighbours in all channels.
inline double flat_fraction(const Tensor& image) {
  const int S = image.dim(1);
  const auto& d = image.data();
  auto px = [&](int c, int y, int x) { return d[static_cast<size_t>((c * S + y) * S + x)]; };
  int flat = 0;
  for (int y = 1; y < S - 1; ++y)
    for (int x = 1; x < S - 1; ++x) {
      bool same = true;
      for (int c = 0; c < image.dim(0) && same; ++c) {
        same = px(c, y, x) == px(c, y - 1, x) && px(c, y, x) == px(c, y + 1, x) &&
               px(c, y, x) == px(c, y, x - 1) && px(c, y, x) == px(c, y, x + 1);
      }
      flat += same;
    }
  return static_cast<double>(flat) / ((S - 2) * (S - 2));
}

}  // namespace oracle
