#pragma once

#include <string>
#include <vector>

#include "dsfl/data.hpp"
#include "dsfl/models.hpp"
#include "dsfl/trainer.hpp"

namespace dsfl {

struct ScoreRecord {
  std::string id;
  double score = 0.0;  // mean spoof-map value; higher means more likely spoof
  Label label = Label::live;
  std::string attack_type = "none";
};

struct MetricsReport {
  double threshold = 0.0;
  double apcer = 0.0;  // attack samples classified live
  double bpcer = 0.0;  // live samples classified spoof
  double acer = 0.0;   // (apcer + bpcer) / 2
  double eer = 0.0;
  double auc = 0.0;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& json);
};

/// Spoof score of a single [3,S,S] image: runs only spoof_encoder and
/// map_decoder; the score is the mean of the decoded spoof map [1,S,S].
std::pair<double, Tensor> spoof_score(const Checkpoint& ckpt, const Tensor& image);

/// Batched scoring of a whole dataset (bit-identical to per-image scoring).
std::vector<ScoreRecord> score_dataset(const Checkpoint& ckpt, const Dataset& data);

/// Decision threshold fixed at the training-score EER point: candidate
/// thresholds are midpoints between consecutive distinct scores; the one
/// minimizing |FAR - FRR| wins (lowest such on ties). Decision rule
/// everywhere: spoof iff score > threshold.
double fix_threshold(const std::vector<ScoreRecord>& train_scores);

struct ClassificationRates {
  double apcer, bpcer, acer;
};
ClassificationRates classification_metrics(const std::vector<ScoreRecord>& test_scores, double threshold);

/// Equal error rate: FAR/FRR operating points at distinct score values
/// (ties collapse into one point), linear interpolation across the
/// sign change of FAR - FRR.
double eer(const std::vector<ScoreRecord>& scores);

/// Probability a random spoof outscores a random live sample, ties counting
/// one half (Mann-Whitney, computed via the rank-sum formula).
double auc(const std::vector<ScoreRecord>& scores);

struct ProtocolResult {
  ProtocolSpec protocol;
  MetricsReport report;
  std::vector<ScoreRecord> train_scores;
  std::vector<ScoreRecord> test_scores;
  Checkpoint stage1;  // valid unless cfg.disable_stage1
  Checkpoint stage2;
  TrainLog stage1_log;
  TrainLog stage2_log;
  bool has_stage1 = true;
};

/// Full leave-one-attack-type-out run: stage-1 on the live-train split,
/// stage-2 on live-train + non-held-out attacks, threshold fixed on training
/// scores, metrics computed on live-test + the held-out attack type.
ProtocolResult run_protocol(const TrainConfig& cfg, const Dataset& dataset, const ProtocolSpec& protocol);

/// Feature-swap translation: re-encode both images, swap spoof features,
/// decode through synth_decoder. Returns (a_translated, b_translated).
std::pair<Tensor, Tensor> translate(const Checkpoint& ckpt, const Tensor& image_a, const Tensor& image_b);

/// One CSV row per sample: id, label, attack_type, flattened live features,
/// flattened spoof features.
void export_features(const Checkpoint& ckpt, const Dataset& data, const std::string& path);

void write_scores_csv(const std::vector<ScoreRecord>& scores, const std::string& path);

/// Table mirroring the per-held-out-type columns plus an Average column
/// (mean +/- std over protocols) for APCER/BPCER/ACER/EER/AUC, in percent.
std::string format_summary_table(const std::vector<std::pair<std::string, MetricsReport>>& reports);

}  // namespace dsfl
