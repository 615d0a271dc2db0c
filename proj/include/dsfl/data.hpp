#pragma once

#include <set>
#include <string>
#include <vector>

#include "dsfl/losses.hpp"
#include "dsfl/tensor.hpp"

namespace dsfl {

struct Sample {
  std::string id;
  Tensor image;  // [3,H,W] in [0,1]
  Label label = Label::live;
  std::string attack_type = "none";  // "none" iff live
  std::string source = "synthetic";  // file path for loaded data
};

struct Dataset {
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
  std::set<std::string> attack_types() const;  // excludes "none"
  size_t count(Label label) const;
};

const std::vector<std::string>& known_patterns();  // stripes dots checker blur blocks rings

struct SynthSpec {
  int image_size = 32;
  int n_live = 40;
  int n_per_attack = 20;
  std::vector<std::string> patterns = {"stripes", "dots", "checker", "rings"};
  double noise = 0.02;
  uint64_t seed = 0;

  void validate() const;
};

/// Deterministic toy dataset: smooth "face" compositions for live samples and
/// the same style of base image with a superimposed attack pattern for spoof
/// samples. Pure function of the spec.
Dataset generate_dataset(const SynthSpec& spec);

/// Load root/{live|<attack_type>}/*.png; images resized bilinearly to
/// image_size and scaled to [0,1]. Unreadable files are skipped and counted,
/// an empty class directory is an error.
Dataset load_directory(const std::string& root, int image_size, int* skipped = nullptr);

/// Leave-one-attack-type-out experiment definition.
struct ProtocolSpec {
  std::set<std::string> train_attack_types;
  std::string heldout_attack_type;
  double live_train_fraction = 0.8;
};

/// One protocol per attack type present (>= 2 required).
std::vector<ProtocolSpec> make_protocols(const Dataset& dataset, double live_train_fraction = 0.8);

/// Deterministic live split: ids ordered by FNV-1a hash, first
/// ceil(fraction*n) are train. Independent of dataset ordering.
void split_live(const Dataset& dataset, double fraction, std::vector<size_t>& train_idx,
                std::vector<size_t>& test_idx);

/// Oversample the minority class with replacement until live:spoof is 1:1.
/// Already-balanced input is returned unchanged.
Dataset resample_balanced(const Dataset& train, uint64_t seed);

/// id,label,attack_type,source rows; stable order.
void write_manifest_csv(const Dataset& dataset, const std::string& path);

}  // namespace dsfl
