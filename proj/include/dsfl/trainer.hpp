#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsfl/data.hpp"
#include "dsfl/losses.hpp"
#include "dsfl/models.hpp"

namespace dsfl {

struct TrainConfig {
  int image_size = 32;
  int latent_channels = 16;
  int batch_size = 16;  // even, >= 4: batches are stratified half live, half spoof
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int stage1_epochs = 10;
  int stage2_epochs = 20;
  int disc_switch_k = 1;  // generator steps per discriminator step
  LossWeights weights;
  TripletConfig triplet;
  uint64_t seed = 0;
  double live_train_fraction = 0.8;

  // ablation switches
  bool disable_stage1 = false;
  bool disable_discriminator = false;
  bool disable_aux_classifier = false;
  bool disable_triplet = false;
  bool normal_triplet_only = false;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& json);
};

/// One row per epoch. Losses are evaluated on the epoch's batch partition
/// *before* that epoch's updates, so row 0 reflects the initial parameters;
/// the combined column is the weighted sum of the logged component columns.
struct TrainLog {
  std::vector<std::string> columns;  // first column is "epoch"
  std::vector<std::vector<double>> rows;
  std::set<std::string> seen_attack_types;  // attack types that entered training batches

  bool has_column(const std::string& name) const;
  double value(size_t row, const std::string& name) const;
  void append_row(std::vector<double> row);
  void write_csv(const std::string& path) const;
};

/// Adam with bias correction; per-parameter first/second moment state.
struct AdamState {
  struct Slot {
    std::vector<double> m, v;
    int64_t t = 0;
  };
  std::map<std::string, Slot> slots;
};

/// One optimizer step over the trainable parameters of a ParamSet. Parameters
/// without a gradient entry are left untouched (state included); a zero
/// gradient advances state but leaves the value unchanged.
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps);

/// Stratified balanced batches: per batch, batch_size/2 live samples first,
/// then batch_size/2 spoof. Deterministic shuffle per (seed, epoch); each
/// sample appears at most once per epoch, trailing remainder (< batch_size)
/// is dropped.
struct Batch {
  std::vector<size_t> indices;  // lives first
  size_t n_live = 0;
};
std::vector<Batch> batch_iterator(const Dataset& data, int batch_size, uint64_t seed, int epoch);

/// Stage 1: one-class autoencoder on live data only (spoof input is an
/// error). Trains live_encoder + live_decoder for stage1_epochs.
std::pair<Checkpoint, TrainLog> train_stage1(const TrainConfig& cfg, const Dataset& live_data);

/// Stage 2: disentanglement training on live + spoof data. The live encoder
/// comes frozen from stage1 (or, with disable_stage1, is randomly initialized
/// and frozen); generator-side networks minimize the combined loss, the
/// discriminator alternates on its least-squares loss every disc_switch_k
/// batches. stage1 may be null only when cfg.disable_stage1 is set.
std::pair<Checkpoint, TrainLog> train_stage2(const TrainConfig& cfg, const Checkpoint* stage1,
                                             const Dataset& train_data);

}  // namespace dsfl
