#include "dsfl/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace dsfl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos;
    uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad seed for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void KvConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

void KvConfig::apply_override(const std::string& key_eq_value) {
  size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value, got '" + key_eq_value + "'");
  values[trim(key_eq_value.substr(0, eq))] = trim(key_eq_value.substr(eq + 1));
}

TrainConfig train_config_from_kv(const KvConfig& kv) {
  TrainConfig cfg;
  for (const auto& [key, v] : kv.values) {
    if (key == "image_size") cfg.image_size = to_int(key, v);
    else if (key == "latent_channels") cfg.latent_channels = to_int(key, v);
    else if (key == "batch_size") cfg.batch_size = to_int(key, v);
    else if (key == "lr") cfg.lr = to_double(key, v);
    else if (key == "beta1") cfg.beta1 = to_double(key, v);
    else if (key == "beta2") cfg.beta2 = to_double(key, v);
    else if (key == "adam_eps") cfg.adam_eps = to_double(key, v);
    else if (key == "stage1_epochs") cfg.stage1_epochs = to_int(key, v);
    else if (key == "stage2_epochs") cfg.stage2_epochs = to_int(key, v);
    else if (key == "disc_switch_k") cfg.disc_switch_k = to_int(key, v);
    else if (key == "lambda_recon") cfg.weights.recon = to_double(key, v);
    else if (key == "lambda_gen") cfg.weights.gen = to_double(key, v);
    else if (key == "lambda_triplet") cfg.weights.triplet = to_double(key, v);
    else if (key == "lambda_map_reg") cfg.weights.map_reg = to_double(key, v);
    else if (key == "lambda_cls") cfg.weights.cls = to_double(key, v);
    else if (key == "triplet_alpha") cfg.triplet.alpha = to_double(key, v);
    else if (key == "triplet_margin") cfg.triplet.m = to_double(key, v);
    else if (key == "triplet_positive_only") cfg.triplet.positive_only = to_bool(key, v);
    else if (key == "seed") cfg.seed = to_u64(key, v);
    else if (key == "live_train_fraction") cfg.live_train_fraction = to_double(key, v);
    else if (key == "disable_stage1") cfg.disable_stage1 = to_bool(key, v);
    else if (key == "disable_discriminator") cfg.disable_discriminator = to_bool(key, v);
    else if (key == "disable_aux_classifier") cfg.disable_aux_classifier = to_bool(key, v);
    else if (key == "disable_triplet") cfg.disable_triplet = to_bool(key, v);
    else if (key == "normal_triplet_only") cfg.normal_triplet_only = to_bool(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_kv(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "image_size = " << cfg.image_size << "\n";
  os << "latent_channels = " << cfg.latent_channels << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "lr = " << fmt(cfg.lr) << "\n";
  os << "beta1 = " << fmt(cfg.beta1) << "\n";
  os << "beta2 = " << fmt(cfg.beta2) << "\n";
  os << "adam_eps = " << fmt(cfg.adam_eps) << "\n";
  os << "stage1_epochs = " << cfg.stage1_epochs << "\n";
  os << "stage2_epochs = " << cfg.stage2_epochs << "\n";
  os << "disc_switch_k = " << cfg.disc_switch_k << "\n";
  os << "lambda_recon = " << fmt(cfg.weights.recon) << "\n";
  os << "lambda_gen = " << fmt(cfg.weights.gen) << "\n";
  os << "lambda_triplet = " << fmt(cfg.weights.triplet) << "\n";
  os << "lambda_map_reg = " << fmt(cfg.weights.map_reg) << "\n";
  os << "lambda_cls = " << fmt(cfg.weights.cls) << "\n";
  os << "triplet_alpha = " << fmt(cfg.triplet.alpha) << "\n";
  os << "triplet_margin = " << fmt(cfg.triplet.m) << "\n";
  os << "triplet_positive_only = " << (cfg.triplet.positive_only ? "true" : "false") << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "live_train_fraction = " << fmt(cfg.live_train_fraction) << "\n";
  os << "disable_stage1 = " << (cfg.disable_stage1 ? "true" : "false") << "\n";
  os << "disable_discriminator = " << (cfg.disable_discriminator ? "true" : "false") << "\n";
  os << "disable_aux_classifier = " << (cfg.disable_aux_classifier ? "true" : "false") << "\n";
  os << "disable_triplet = " << (cfg.disable_triplet ? "true" : "false") << "\n";
  os << "normal_triplet_only = " << (cfg.normal_triplet_only ? "true" : "false") << "\n";
  return os.str();
}

SynthSpec synth_spec_from_kv(const KvConfig& kv) {
  SynthSpec spec;
  for (const auto& [key, v] : kv.values) {
    if (key == "image_size") spec.image_size = to_int(key, v);
    else if (key == "n_live") spec.n_live = to_int(key, v);
    else if (key == "n_per_attack") spec.n_per_attack = to_int(key, v);
    else if (key == "noise") spec.noise = to_double(key, v);
    else if (key == "seed") spec.seed = to_u64(key, v);
    else if (key == "patterns") {
      spec.patterns.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::string p = trim(item);
        if (!p.empty()) spec.patterns.push_back(p);
      }
    } else {
      throw ConfigError("synth config: unknown key '" + key + "'");
    }
  }
  try {
    spec.validate();
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

std::string synth_spec_to_kv(const SynthSpec& spec) {
  std::ostringstream os;
  os << "image_size = " << spec.image_size << "\n";
  os << "n_live = " << spec.n_live << "\n";
  os << "n_per_attack = " << spec.n_per_attack << "\n";
  os << "patterns = ";
  for (size_t i = 0; i < spec.patterns.size(); ++i) os << (i ? "," : "") << spec.patterns[i];
  os << "\n";
  os << "noise = " << fmt(spec.noise) << "\n";
  os << "seed = " << spec.seed << "\n";
  return os.str();
}

void ensure_output_dir(const std::string& path, bool force) {
  fs::path p(path);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) throw IoError("output path exists and is not a directory: " + path);
    if (!fs::is_empty(p) && !force)
      throw IoError("output directory " + path + " is not empty (use --force to overwrite)");
  } else {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + path + ": " + ec.message());
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp + " to " + path);
}

}  // namespace dsfl
