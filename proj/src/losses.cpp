#include "dsfl/losses.hpp"

#include <cmath>

namespace dsfl {

namespace {

void check_same_shape(const char* name, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_finite_scalar(const char* name, const Tensor& t) {
  if (!std::isfinite(t.value())) throw NonFiniteError(std::string(name) + ": non-finite input");
}

/// Taped squared distances between all rows of a [N,F] feature tensor.
/// Entry (i,j) is only materialized for i != j pairs that mining may select.
struct PairwiseDistances {
  std::vector<Tensor> dist;  // row-major N*N, undefined on the diagonal
  int n = 0;

  const Tensor& operator()(int i, int j) const { return dist[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)]; }
  double value(int i, int j) const { return (*this)(i, j).value(); }
};

PairwiseDistances pairwise_sq_distances(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("triplet features must be [N,F], got " + shape_str(features.shape()));
  const int n = features.dim(0);
  PairwiseDistances out;
  out.n = n;
  out.dist.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
  std::vector<Tensor> rows;
  rows.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) rows.push_back(slice(features, 0, i, 1));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Tensor d = sq_l2_norm(sub(rows[static_cast<size_t>(i)], rows[static_cast<size_t>(j)]));
      out.dist[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] = d;
      out.dist[static_cast<size_t>(j) * static_cast<size_t>(n) + static_cast<size_t>(i)] = d;
    }
  return out;
}

void split_indices(const BatchFeatures& batch, std::vector<int>& live, std::vector<int>& spoof) {
  if (batch.features.rank() != 2) throw ShapeError("triplet features must be [N,F]");
  if (static_cast<int>(batch.labels.size()) != batch.features.dim(0))
    throw ValueError("feature/label count mismatch");
  for (size_t i = 0; i < batch.labels.size(); ++i) {
    (batch.labels[i] == Label::live ? live : spoof).push_back(static_cast<int>(i));
  }
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  Tensor acc = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return mul_scalar(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Tensor l_live(const Tensor& x_real, const Tensor& x_hat) {
  check_same_shape("l_live", x_real, x_hat);
  return mean(square(sub(x_real, x_hat)));
}

Tensor l_recon(const Tensor& x, const Tensor& x_syn) {
  check_same_shape("l_recon", x, x_syn);
  return mean(square(sub(x, x_syn)));
}

Tensor l_gen(const Tensor& d_scores_fake) {
  if (d_scores_fake.size() == 0) throw ValueError("l_gen: empty batch");
  return mean(square(add_scalar(d_scores_fake, -1.0)));
}

Tensor l_dis(const Tensor& d_scores_real, const Tensor& d_scores_fake) {
  if (d_scores_real.size() == 0 || d_scores_fake.size() == 0) throw ValueError("l_dis: empty batch");
  return add(mean(square(add_scalar(d_scores_real, -1.0))), mean(square(d_scores_fake)));
}

Tensor triplet_normal(const BatchFeatures& batch, double alpha, bool positive_only) {
  if (alpha <= 0) throw ValueError("triplet_normal: alpha must be positive");
  std::vector<int> live, spoof;
  split_indices(batch, live, spoof);
  if (live.size() < 2 || spoof.empty())
    throw ValueError("triplet_normal: need >=2 live and >=1 spoof samples, got " +
                     std::to_string(live.size()) + "/" + std::to_string(spoof.size()));

  PairwiseDistances d = pairwise_sq_distances(batch.features);
  std::vector<Tensor> active;
  int64_t total = 0;
  for (int a : live)
    for (int p : live) {
      if (p == a) continue;
      for (int n : spoof) {
        ++total;
        double v = d.value(a, p) - d.value(a, n) + alpha;
        if (positive_only && v <= 0.0) continue;
        Tensor term = relu(add_scalar(sub(d(a, p), d(a, n)), alpha));
        active.push_back(term);
      }
    }
  if (positive_only) return mean_of(active);
  if (active.empty()) return Tensor::scalar(0.0);
  Tensor acc = active[0];
  for (size_t i = 1; i < active.size(); ++i) acc = add(acc, active[i]);
  return mul_scalar(acc, 1.0 / static_cast<double>(total));
}

Tensor triplet_hard(const BatchFeatures& batch, double m) {
  if (m <= 0) throw ValueError("triplet_hard: margin must be positive");
  std::vector<int> live, spoof;
  split_indices(batch, live, spoof);
  if (live.size() < 2 || spoof.empty())
    throw ValueError("triplet_hard: need >=2 live and >=1 spoof samples, got " +
                     std::to_string(live.size()) + "/" + std::to_string(spoof.size()));

  PairwiseDistances d = pairwise_sq_distances(batch.features);
  std::vector<Tensor> terms;
  terms.reserve(live.size());
  for (int a : live) {
    int hard_pos = -1, hard_neg = -1;
    double max_dp = -1.0, min_dn = 0.0;
    for (int p : live) {
      if (p == a) continue;
      double v = d.value(a, p);
      if (v > max_dp) {
        max_dp = v;
        hard_pos = p;
      }
    }
    for (int n : spoof) {
      double v = d.value(a, n);
      if (hard_neg < 0 || v < min_dn) {
        min_dn = v;
        hard_neg = n;
      }
    }
    terms.push_back(relu(add_scalar(sub(d(a, hard_pos), d(a, hard_neg)), m)));
  }
  // Eq. 6 averages over all anchors, zero or not
  return mean_of(terms);
}

Tensor l_t(const std::array<BatchFeatures, 3>& tail_features, const TripletConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  for (const BatchFeatures& layer : tail_features) {
    total = add(total, add(triplet_normal(layer, cfg.alpha, cfg.positive_only), triplet_hard(layer, cfg.m)));
  }
  return total;
}

Tensor l_r(const Tensor& spoof_maps_live) {
  if (spoof_maps_live.size() == 0) throw ValueError("l_r: empty batch");
  return mean(abs(spoof_maps_live));
}

Tensor l_c(const std::vector<Label>& labels, const Tensor& y_hat) {
  if (static_cast<int64_t>(labels.size()) != y_hat.size())
    throw ValueError("l_c: " + std::to_string(labels.size()) + " labels vs " + std::to_string(y_hat.size()) + " predictions");
  if (labels.empty()) throw ValueError("l_c: empty batch");
  Tensor p = clamp(y_hat, kBceEps, 1.0 - kBceEps);
  Tensor flat = reshape(p, {static_cast<int>(labels.size())});
  std::vector<double> y(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == Label::spoof ? 1.0 : 0.0;
  Tensor yt = Tensor::from_data({static_cast<int>(labels.size())}, std::move(y));
  // -[y log p + (1-y) log(1-p)]
  Tensor pos = mul(yt, log(flat));
  Tensor negt = mul(add_scalar(neg(yt), 1.0), log(add_scalar(neg(flat), 1.0)));
  return neg(mean(add(pos, negt)));
}

Tensor combined_loss(const Tensor& recon, const Tensor& gen, const Tensor& triplet,
                     const Tensor& map_reg, const Tensor& cls, const LossWeights& w) {
  check_finite_scalar("combined_loss", recon);
  check_finite_scalar("combined_loss", gen);
  check_finite_scalar("combined_loss", triplet);
  check_finite_scalar("combined_loss", map_reg);
  check_finite_scalar("combined_loss", cls);
  Tensor total = mul_scalar(recon, w.recon);
  total = add(total, mul_scalar(gen, w.gen));
  total = add(total, mul_scalar(triplet, w.triplet));
  total = add(total, mul_scalar(map_reg, w.map_reg));
  total = add(total, mul_scalar(cls, w.cls));
  return total;
}

}  // namespace dsfl
