#pragma once

#include <array>
#include <vector>

#include "dsfl/tensor.hpp"

namespace dsfl {

enum class Label { live, spoof };

/// Margins for the two triplet variants. positive_only selects averaging over
/// strictly-positive triplets only (the default); the all-triplets variant
/// divides by the full triplet count instead.
struct TripletConfig {
  double alpha = 0.2;  // normal triplet margin
  double m = 0.5;      // hard triplet margin
  bool positive_only = true;
};

/// Weights of the combined stage-2 objective, in order:
/// reconstruction, adversarial (generator), triplet, live-map, classifier.
struct LossWeights {
  double recon = 4.0;
  double gen = 1.0;
  double triplet = 3.0;
  double map_reg = 5.0;
  double cls = 5.0;
};

/// Per-sample feature vectors [N,F] from one map-decoder tail layer, with
/// parallel labels. Mining needs at least 2 live and 1 spoof sample.
struct BatchFeatures {
  Tensor features;
  std::vector<Label> labels;
};

/// Mean over all elements of the squared difference: the batch-averaged,
/// element-normalized squared L2 distance. Stage-1 objective.
Tensor l_live(const Tensor& x_real, const Tensor& x_hat);

/// Same formula over the mixed live+spoof batch of stage 2.
Tensor l_recon(const Tensor& x, const Tensor& x_syn);

/// Generator side of the least-squares adversarial pair: mean (d-1)^2 over
/// discriminator scores of synthesized images (post-sigmoid, in [0,1]).
Tensor l_gen(const Tensor& d_scores_fake);

/// Discriminator side: mean (d_real-1)^2 + mean d_fake^2.
Tensor l_dis(const Tensor& d_scores_real, const Tensor& d_scores_fake);

/// All-triplet loss with live anchors, live positives (distinct), spoof
/// negatives: mean over strictly-positive max(|fa-fp|^2 - |fa-fn|^2 + alpha, 0)
/// (or over all triplets when positive_only is false). Zero when no triplet
/// violates the margin.
Tensor triplet_normal(const BatchFeatures& batch, double alpha, bool positive_only = true);

/// Batch-hard variant: per live anchor, the farthest live is the positive and
/// the nearest spoof the negative; mean over anchors of the hinged loss.
Tensor triplet_hard(const BatchFeatures& batch, double m);

/// Sum over the three tail layers of (normal + hard) triplet losses.
Tensor l_t(const std::array<BatchFeatures, 3>& tail_features, const TripletConfig& cfg);

/// Mean absolute pixel value of live-sample spoof maps [Nlive,1,H,W].
Tensor l_r(const Tensor& spoof_maps_live);

/// Mean binary cross-entropy of predicted spoof probabilities against labels
/// (spoof = 1). Probabilities are clamped to [1e-7, 1-1e-7].
Tensor l_c(const std::vector<Label>& labels, const Tensor& y_hat);

inline constexpr double kBceEps = 1e-7;

/// lambda1*L_recon + lambda2*L_Gen + lambda3*L_t + lambda4*L_r + lambda5*L_c.
Tensor combined_loss(const Tensor& recon, const Tensor& gen, const Tensor& triplet,
                     const Tensor& map_reg, const Tensor& cls, const LossWeights& w);

}  // namespace dsfl
