#include "dsfl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dsfl {

// ---- report json -------------------------------------------------------------------

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["apcer"] = apcer;
  j["bpcer"] = bpcer;
  j["acer"] = acer;
  j["eer"] = eer;
  j["auc"] = auc;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& json) {
  nlohmann::json j = nlohmann::json::parse(json);
  MetricsReport r;
  r.threshold = j.at("threshold").get<double>();
  r.apcer = j.at("apcer").get<double>();
  r.bpcer = j.at("bpcer").get<double>();
  r.acer = j.at("acer").get<double>();
  r.eer = j.at("eer").get<double>();
  r.auc = j.at("auc").get<double>();
  return r;
}

// ---- scoring -----------------------------------------------------------------------

namespace {

struct InferenceNets {
  NetworkSpec enc_spec, map_spec;
  const ParamSet *enc, *map;
  int image_size;
};

InferenceNets inference_nets(const Checkpoint& ckpt) {
  require_stage(ckpt, "stage2");
  TrainConfig cfg = TrainConfig::from_json(ckpt.config_json);
  InferenceNets nets;
  nets.enc_spec = make_network_spec(NetworkRole::spoof_encoder, cfg.image_size, cfg.latent_channels);
  nets.map_spec = make_network_spec(NetworkRole::map_decoder, cfg.image_size, cfg.latent_channels);
  nets.enc = &ckpt.networks.at("spoof_encoder");
  nets.map = &ckpt.networks.at("map_decoder");
  nets.image_size = cfg.image_size;
  return nets;
}

Tensor as_batch_of_one(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("expected a [3,H,W] image, got " + shape_str(image.shape()));
  return reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
}

void check_both_classes(const char* op, const std::vector<ScoreRecord>& scores) {
  size_t live = 0, spoof = 0;
  for (const ScoreRecord& s : scores) (s.label == Label::live ? live : spoof)++;
  if (live == 0 || spoof == 0)
    throw ValueError(std::string(op) + ": both classes required, got " + std::to_string(live) + " live / " +
                     std::to_string(spoof) + " spoof");
}

// FAR: spoof accepted as live (score <= t); FRR: live rejected (score > t)
void rates_at(const std::vector<ScoreRecord>& scores, double t, double& far, double& frr) {
  size_t spoof_total = 0, live_total = 0, spoof_le = 0, live_gt = 0;
  for (const ScoreRecord& s : scores) {
    if (s.label == Label::spoof) {
      ++spoof_total;
      if (s.score <= t) ++spoof_le;
    } else {
      ++live_total;
      if (s.score > t) ++live_gt;
    }
  }
  far = static_cast<double>(spoof_le) / static_cast<double>(spoof_total);
  frr = static_cast<double>(live_gt) / static_cast<double>(live_total);
}

}  // namespace

std::pair<double, Tensor> spoof_score(const Checkpoint& ckpt, const Tensor& image) {
  InferenceNets nets = inference_nets(ckpt);
  Tensor x = as_batch_of_one(image);
  Tensor features = forward(nets.enc_spec, *nets.enc, x).output;
  Tensor maps = forward(nets.map_spec, *nets.map, features).output;
  double score = mean(maps).value();
  return {score, reshape(maps, {maps.dim(1), maps.dim(2), maps.dim(3)})};
}

std::vector<ScoreRecord> score_dataset(const Checkpoint& ckpt, const Dataset& data) {
  InferenceNets nets = inference_nets(ckpt);
  std::vector<ScoreRecord> out;
  out.reserve(data.size());
  const size_t chunk = 32;
  for (size_t start = 0; start < data.size(); start += chunk) {
    const size_t end = std::min(data.size(), start + chunk);
    std::vector<double> buf;
    buf.reserve((end - start) * 3u * static_cast<size_t>(nets.image_size) * static_cast<size_t>(nets.image_size));
    for (size_t i = start; i < end; ++i) {
      const Tensor& im = data.samples[i].image;
      if (im.rank() != 3 || im.dim(1) != nets.image_size || im.dim(2) != nets.image_size)
        throw ShapeError("sample " + data.samples[i].id + " does not match checkpoint image size");
      buf.insert(buf.end(), im.data().begin(), im.data().end());
    }
    Tensor x = Tensor::from_data({static_cast<int>(end - start), 3, nets.image_size, nets.image_size}, std::move(buf));
    Tensor features = forward(nets.enc_spec, *nets.enc, x).output;
    Tensor maps = forward(nets.map_spec, *nets.map, features).output;
    const int64_t per = maps.size() / maps.dim(0);
    for (size_t i = start; i < end; ++i) {
      double acc = 0.0;
      const int64_t base = static_cast<int64_t>(i - start) * per;
      for (int64_t k = 0; k < per; ++k) acc += maps.at(base + k);
      const Sample& s = data.samples[i];
      out.push_back({s.id, acc / static_cast<double>(per), s.label, s.attack_type});
    }
  }
  return out;
}

// ---- thresholds and metrics -----------------------------------------------------------

double fix_threshold(const std::vector<ScoreRecord>& train_scores) {
  check_both_classes("fix_threshold", train_scores);
  std::vector<double> distinct;
  distinct.reserve(train_scores.size());
  for (const ScoreRecord& s : train_scores) distinct.push_back(s.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw ValueError("fix_threshold: degenerate score distribution (all scores equal)");

  double best_t = 0.0, best_diff = 2.0;
  for (size_t i = 0; i + 1 < distinct.size(); ++i) {
    const double t = 0.5 * (distinct[i] + distinct[i + 1]);
    double far, frr;
    rates_at(train_scores, t, far, frr);
    const double diff = std::abs(far - frr);
    if (diff < best_diff) {
      best_diff = diff;
      best_t = t;
    }
  }
  return best_t;
}

ClassificationRates classification_metrics(const std::vector<ScoreRecord>& test_scores, double threshold) {
  check_both_classes("classification_metrics", test_scores);
  size_t spoof_total = 0, live_total = 0, spoof_as_live = 0, live_as_spoof = 0;
  for (const ScoreRecord& s : test_scores) {
    const bool decided_spoof = s.score > threshold;
    if (s.label == Label::spoof) {
      ++spoof_total;
      if (!decided_spoof) ++spoof_as_live;
    } else {
      ++live_total;
      if (decided_spoof) ++live_as_spoof;
    }
  }
  ClassificationRates r{};
  r.apcer = static_cast<double>(spoof_as_live) / static_cast<double>(spoof_total);
  r.bpcer = static_cast<double>(live_as_spoof) / static_cast<double>(live_total);
  r.acer = (r.apcer + r.bpcer) / 2.0;
  return r;
}

double eer(const std::vector<ScoreRecord>& scores) {
  check_both_classes("eer", scores);
  // operating points: one per distinct score value s_k, rates for t in
  // [s_k, next), plus the point below all scores
  std::vector<double> distinct;
  for (const ScoreRecord& s : scores) distinct.push_back(s.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> fars{0.0}, frrs{1.0};
  {
    double f0, r0;
    rates_at(scores, distinct.front() - 1.0, f0, r0);
    fars[0] = f0;  // 0
    frrs[0] = r0;  // 1
  }
  for (double s : distinct) {
    double far, frr;
    rates_at(scores, s, far, frr);
    fars.push_back(far);
    frrs.push_back(frr);
  }

  for (size_t k = 0; k + 1 < fars.size(); ++k) {
    const double d0 = fars[k] - frrs[k];
    const double d1 = fars[k + 1] - frrs[k + 1];
    if (d0 == 0.0) return fars[k];
    if (d0 < 0.0 && d1 >= 0.0) {
      if (d1 == 0.0) return fars[k + 1];
      // linear interpolation between the two adjacent operating points
      const double u = -d0 / (d1 - d0);
      return fars[k] + u * (fars[k + 1] - fars[k]);
    }
  }
  return fars.back();  // FAR and FRR never cross below the top score
}

double auc(const std::vector<ScoreRecord>& scores) {
  check_both_classes("auc", scores);
  // rank-sum formulation with average ranks on ties
  struct Item {
    double score;
    Label label;
  };
  std::vector<Item> items;
  items.reserve(scores.size());
  for (const ScoreRecord& s : scores) items.push_back({s.score, s.label});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  double rank_sum_spoof = 0.0;
  size_t n_spoof = 0, n_live = 0;
  size_t i = 0;
  while (i < items.size()) {
    size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
    for (size_t k = i; k < j; ++k) {
      if (items[k].label == Label::spoof) {
        rank_sum_spoof += avg_rank;
        ++n_spoof;
      } else {
        ++n_live;
      }
    }
    i = j;
  }
  const double ns = static_cast<double>(n_spoof), nl = static_cast<double>(n_live);
  return (rank_sum_spoof - ns * (ns + 1.0) / 2.0) / (ns * nl);
}

// ---- protocol runs ---------------------------------------------------------------------

ProtocolResult run_protocol(const TrainConfig& cfg, const Dataset& dataset, const ProtocolSpec& protocol) {
  cfg.validate();
  if (protocol.train_attack_types.count(protocol.heldout_attack_type))
    throw ValueError("protocol: held-out type also listed for training");
  const std::set<std::string> present = dataset.attack_types();
  if (!present.count(protocol.heldout_attack_type))
    throw ValueError("protocol: held-out type '" + protocol.heldout_attack_type + "' absent from dataset");

  std::vector<size_t> live_train, live_test;
  split_live(dataset, protocol.live_train_fraction, live_train, live_test);
  if (live_train.empty() || live_test.empty()) throw ValueError("protocol: live split produced an empty side");

  Dataset stage1_data, train_data, test_data;
  for (size_t i : live_train) stage1_data.samples.push_back(dataset.samples[i]);
  train_data = stage1_data;
  for (const Sample& s : dataset.samples) {
    if (s.label != Label::spoof) continue;
    if (protocol.train_attack_types.count(s.attack_type)) train_data.samples.push_back(s);
    if (s.attack_type == protocol.heldout_attack_type) test_data.samples.push_back(s);
  }
  for (size_t i : live_test) test_data.samples.push_back(dataset.samples[i]);
  if (train_data.count(Label::spoof) == 0) throw ValueError("protocol: no training attacks selected");

  ProtocolResult result;
  result.protocol = protocol;

  const Checkpoint* stage1_ptr = nullptr;
  if (!cfg.disable_stage1) {
    auto [ckpt1, log1] = train_stage1(cfg, stage1_data);
    result.stage1 = std::move(ckpt1);
    result.stage1_log = std::move(log1);
    stage1_ptr = &result.stage1;
  } else {
    result.has_stage1 = false;
  }

  auto [ckpt2, log2] = train_stage2(cfg, stage1_ptr, train_data);
  result.stage2 = std::move(ckpt2);
  result.stage2_log = std::move(log2);

  result.train_scores = score_dataset(result.stage2, train_data);
  result.test_scores = score_dataset(result.stage2, test_data);

  MetricsReport report;
  report.threshold = fix_threshold(result.train_scores);
  const ClassificationRates rates = classification_metrics(result.test_scores, report.threshold);
  report.apcer = rates.apcer;
  report.bpcer = rates.bpcer;
  report.acer = rates.acer;
  report.eer = eer(result.test_scores);
  report.auc = auc(result.test_scores);
  result.report = report;
  return result;
}

// ---- translation and export ----------------------------------------------------------

std::pair<Tensor, Tensor> translate(const Checkpoint& ckpt, const Tensor& image_a, const Tensor& image_b) {
  require_stage(ckpt, "stage2");
  if (image_a.shape() != image_b.shape())
    throw ShapeError("translate: image shapes differ, " + shape_str(image_a.shape()) + " vs " + shape_str(image_b.shape()));
  TrainConfig cfg = TrainConfig::from_json(ckpt.config_json);
  NetworkSpec live_spec = make_network_spec(NetworkRole::live_encoder, cfg.image_size, cfg.latent_channels);
  NetworkSpec spoof_spec = make_network_spec(NetworkRole::spoof_encoder, cfg.image_size, cfg.latent_channels);
  NetworkSpec syn_spec = make_network_spec(NetworkRole::synth_decoder, cfg.image_size, cfg.latent_channels);
  const ParamSet& live_p = ckpt.networks.at("live_encoder");
  const ParamSet& spoof_p = ckpt.networks.at("spoof_encoder");
  const ParamSet& syn_p = ckpt.networks.at("synth_decoder");

  Tensor a = as_batch_of_one(image_a);
  Tensor b = as_batch_of_one(image_b);
  Tensor fl_a = forward(live_spec, live_p, a).output;
  Tensor fs_a = forward(spoof_spec, spoof_p, a).output;
  Tensor fl_b = forward(live_spec, live_p, b).output;
  Tensor fs_b = forward(spoof_spec, spoof_p, b).output;

  Tensor a_t = forward(syn_spec, syn_p, fuse_latents(fl_a, fs_b)).output;
  Tensor b_t = forward(syn_spec, syn_p, fuse_latents(fl_b, fs_a)).output;
  auto unbatch = [](const Tensor& t) { return reshape(t, {t.dim(1), t.dim(2), t.dim(3)}); };
  return {unbatch(a_t), unbatch(b_t)};
}

void export_features(const Checkpoint& ckpt, const Dataset& data, const std::string& path) {
  require_stage(ckpt, "stage2");
  TrainConfig cfg = TrainConfig::from_json(ckpt.config_json);
  NetworkSpec live_spec = make_network_spec(NetworkRole::live_encoder, cfg.image_size, cfg.latent_channels);
  NetworkSpec spoof_spec = make_network_spec(NetworkRole::spoof_encoder, cfg.image_size, cfg.latent_channels);
  const ParamSet& live_p = ckpt.networks.at("live_encoder");
  const ParamSet& spoof_p = ckpt.networks.at("spoof_encoder");

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write features to " + path);
  const int64_t feat = numel(live_spec.output_shape);
  f << "id,label,attack_type";
  for (int64_t i = 0; i < feat; ++i) f << ",f_live_" << i;
  for (int64_t i = 0; i < feat; ++i) f << ",f_spoof_" << i;
  f << "\n";
  char buf[64];
  for (const Sample& s : data.samples) {
    Tensor x = as_batch_of_one(s.image);
    Tensor fl = forward(live_spec, live_p, x).output;
    Tensor fs = forward(spoof_spec, spoof_p, x).output;
    f << s.id << "," << (s.label == Label::live ? "live" : "spoof") << "," << s.attack_type;
    for (int64_t i = 0; i < fl.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", fl.at(i));
      f << "," << buf;
    }
    for (int64_t i = 0; i < fs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", fs.at(i));
      f << "," << buf;
    }
    f << "\n";
  }
}

void write_scores_csv(const std::vector<ScoreRecord>& scores, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write scores to " + path);
  f << "id,label,attack_type,score\n";
  char buf[64];
  for (const ScoreRecord& s : scores) {
    std::snprintf(buf, sizeof buf, "%.17g", s.score);
    f << s.id << "," << (s.label == Label::live ? "live" : "spoof") << "," << s.attack_type << "," << buf << "\n";
  }
}

std::string format_summary_table(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  if (reports.empty()) throw ValueError("format_summary_table: no reports");
  auto mean_std = [&](auto get) {
    double m = 0.0;
    for (const auto& [name, r] : reports) m += get(r);
    m /= static_cast<double>(reports.size());
    double var = 0.0;
    for (const auto& [name, r] : reports) var += (get(r) - m) * (get(r) - m);
    var /= static_cast<double>(reports.size());
    return std::pair<double, double>(m, std::sqrt(var));
  };

  std::ostringstream os;
  auto cell = [&](const std::string& s) {
    os << s;
    for (size_t i = s.size(); i < 16; ++i) os << ' ';
  };
  cell("Metric(%)");
  for (const auto& [name, r] : reports) cell(name);
  cell("Average");
  os << "\n";

  struct RowDef {
    const char* name;
    double (*get)(const MetricsReport&);
  };
  const RowDef rows[] = {
      {"APCER", [](const MetricsReport& r) { return r.apcer; }},
      {"BPCER", [](const MetricsReport& r) { return r.bpcer; }},
      {"ACER", [](const MetricsReport& r) { return r.acer; }},
      {"EER", [](const MetricsReport& r) { return r.eer; }},
      {"AUC", [](const MetricsReport& r) { return r.auc; }},
  };
  char buf[64];
  for (const RowDef& row : rows) {
    cell(row.name);
    for (const auto& [name, r] : reports) {
      std::snprintf(buf, sizeof buf, "%.2f", row.get(r) * 100.0);
      cell(buf);
    }
    auto [m, sd] = mean_std(row.get);
    std::snprintf(buf, sizeof buf, "%.2f+-%.2f", m * 100.0, sd * 100.0);
    cell(buf);
    os << "\n";
  }
  return os.str();
}

}  // namespace dsfl
