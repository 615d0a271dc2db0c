#pragma once

#include <map>
#include <string>
#include <vector>

#include "dsfl/data.hpp"
#include "dsfl/trainer.hpp"

namespace dsfl {

/// Flat key=value configuration ('#' starts a comment). Resolution order is
/// defaults, then file contents, then command-line overrides.
struct KvConfig {
  std::map<std::string, std::string> values;

  void load_file(const std::string& path);
  void apply_override(const std::string& key_eq_value);  // "key=value"
};

TrainConfig train_config_from_kv(const KvConfig& kv);
std::string train_config_to_kv(const TrainConfig& cfg);

SynthSpec synth_spec_from_kv(const KvConfig& kv);
std::string synth_spec_to_kv(const SynthSpec& spec);

/// Create an output directory. An existing non-empty directory is an error
/// unless force is set.
void ensure_output_dir(const std::string& path, bool force);

/// Write via temp file + rename so readers never observe partial content.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace dsfl
