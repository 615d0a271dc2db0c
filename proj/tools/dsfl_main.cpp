// dsfl: dual-stage feature learning for face anti-spoofing, at toy scale.
//
// Subcommands: synth, train, protocol, translate, export-features.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "dsfl/config.hpp"
#include "dsfl/eval.hpp"
#include "dsfl/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dsfl;

namespace {

std::string resolve_out_dir(const std::string& out, const std::string& subcommand) {
  if (!out.empty()) return out;
  const char* root = std::getenv("DSFL_OUTPUT_ROOT");
  if (!root || !*root)
    throw ConfigError("--out not given and DSFL_OUTPUT_ROOT is not set");
  return (fs::path(root) / subcommand).string();
}

KvConfig gather_kv(const std::string& config_file, const std::vector<std::string>& overrides,
                   const std::string& seed_flag) {
  KvConfig kv;
  if (!config_file.empty()) kv.load_file(config_file);
  for (const std::string& o : overrides) kv.apply_override(o);
  if (!seed_flag.empty()) kv.apply_override("seed=" + seed_flag);
  return kv;
}

void apply_ablations(TrainConfig& cfg, const std::vector<std::string>& ablations) {
  for (const std::string& a : ablations) {
    if (a == "no-stage1") cfg.disable_stage1 = true;
    else if (a == "no-discriminator") cfg.disable_discriminator = true;
    else if (a == "no-aux-classifier") cfg.disable_aux_classifier = true;
    else if (a == "no-triplet") cfg.disable_triplet = true;
    else if (a == "normal-triplet-only") cfg.normal_triplet_only = true;
    else throw ConfigError("unknown ablation '" + a + "'");
  }
}

int cmd_synth(const std::string& out_arg, const std::string& config_file,
              const std::vector<std::string>& overrides, const std::string& seed_flag, bool force) {
  const std::string out = resolve_out_dir(out_arg, "synth");
  SynthSpec spec = synth_spec_from_kv(gather_kv(config_file, overrides, seed_flag));
  ensure_output_dir(out, force);

  Dataset ds = generate_dataset(spec);
  for (Sample& s : ds.samples) {
    const std::string cls = s.label == Label::live ? "live" : s.attack_type;
    fs::create_directories(fs::path(out) / cls);
    const std::string rel = cls + "/" + s.id + ".png";
    write_png((fs::path(out) / rel).string(), s.image);
    s.source = rel;
  }
  write_manifest_csv(ds, (fs::path(out) / "manifest.csv").string());
  write_text_atomic((fs::path(out) / "synth_config.txt").string(), synth_spec_to_kv(spec));
  std::cout << "wrote " << ds.size() << " samples (" << ds.count(Label::live) << " live) to " << out << "\n";
  return 0;
}

int cmd_train(int stage, const std::string& data_dir, const std::string& out_arg,
              const std::string& config_file, const std::vector<std::string>& overrides,
              const std::string& seed_flag, const std::string& stage1_ckpt_path,
              const std::vector<std::string>& ablations, bool force) {
  const std::string out = resolve_out_dir(out_arg, "train");
  TrainConfig cfg = train_config_from_kv(gather_kv(config_file, overrides, seed_flag));
  apply_ablations(cfg, ablations);
  if (stage == 2 && stage1_ckpt_path.empty() && !cfg.disable_stage1)
    throw ConfigError("stage 2 needs --stage1-ckpt (or --ablate no-stage1)");
  ensure_output_dir(out, force);
  write_text_atomic((fs::path(out) / "config.txt").string(), train_config_to_kv(cfg));

  Dataset data = load_directory(data_dir, cfg.image_size);
  if (stage == 1) {
    auto [ckpt, log] = train_stage1(cfg, data);
    save_checkpoint(ckpt, (fs::path(out) / "stage1.ckpt").string());
    log.write_csv((fs::path(out) / "train_log.csv").string());
    std::cout << "stage 1 done: l_live " << log.value(0, "l_live") << " -> "
              << log.value(log.rows.size() - 1, "l_live") << "\n";
  } else {
    Checkpoint stage1;
    const Checkpoint* stage1_ptr = nullptr;
    if (!cfg.disable_stage1) {
      stage1 = load_checkpoint(stage1_ckpt_path);
      stage1_ptr = &stage1;
    }
    auto [ckpt, log] = train_stage2(cfg, stage1_ptr, data);
    save_checkpoint(ckpt, (fs::path(out) / "stage2.ckpt").string());
    log.write_csv((fs::path(out) / "train_log.csv").string());
    std::cout << "stage 2 done: combined " << log.value(0, "combined") << " -> "
              << log.value(log.rows.size() - 1, "combined") << "\n";
  }
  return 0;
}

int cmd_protocol(const std::string& data_dir, const std::string& out_arg, const std::string& config_file,
                 const std::vector<std::string>& overrides, const std::string& seed_flag, int jobs,
                 bool force) {
  const std::string out = resolve_out_dir(out_arg, "protocol");
  TrainConfig cfg = train_config_from_kv(gather_kv(config_file, overrides, seed_flag));
  ensure_output_dir(out, force);
  write_text_atomic((fs::path(out) / "config.txt").string(), train_config_to_kv(cfg));

  Dataset data = load_directory(data_dir, cfg.image_size);
  std::vector<ProtocolSpec> protocols = make_protocols(data, cfg.live_train_fraction);

  std::vector<ProtocolResult> results(protocols.size());
  std::vector<std::string> failures(protocols.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= protocols.size()) break;
      try {
        results[i] = run_protocol(cfg, data, protocols[i]);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(protocols.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (size_t i = 0; i < protocols.size(); ++i) {
    if (!failures[i].empty())
      throw Error("protocol '" + protocols[i].heldout_attack_type + "' failed: " + failures[i]);
  }

  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (size_t i = 0; i < protocols.size(); ++i) {
    const ProtocolResult& r = results[i];
    const fs::path dir = fs::path(out) / protocols[i].heldout_attack_type;
    fs::create_directories(dir);
    write_text_atomic((dir / "report.json").string(), r.report.to_json());
    write_scores_csv(r.train_scores, (dir / "scores_train.csv").string());
    write_scores_csv(r.test_scores, (dir / "scores_test.csv").string());
    if (r.has_stage1) {
      save_checkpoint(r.stage1, (dir / "stage1.ckpt").string());
      r.stage1_log.write_csv((dir / "stage1_log.csv").string());
    }
    save_checkpoint(r.stage2, (dir / "stage2.ckpt").string());
    r.stage2_log.write_csv((dir / "stage2_log.csv").string());
    reports.emplace_back(protocols[i].heldout_attack_type, r.report);
  }

  nlohmann::json summary;
  for (const auto& [name, rep] : reports) summary["protocols"][name] = nlohmann::json::parse(rep.to_json());
  auto avg = [&](auto get) {
    double m = 0;
    for (const auto& [name, rep] : reports) m += get(rep);
    return m / static_cast<double>(reports.size());
  };
  summary["average"]["acer"] = avg([](const MetricsReport& r) { return r.acer; });
  summary["average"]["eer"] = avg([](const MetricsReport& r) { return r.eer; });
  summary["average"]["auc"] = avg([](const MetricsReport& r) { return r.auc; });
  write_text_atomic((fs::path(out) / "summary.json").string(), summary.dump(2));

  const std::string table = format_summary_table(reports);
  write_text_atomic((fs::path(out) / "summary.txt").string(), table);
  std::cout << table;
  return 0;
}

int cmd_translate(const std::string& ckpt_path, const std::string& image_a_path,
                  const std::string& image_b_path, const std::string& out_arg, bool force) {
  const std::string out = resolve_out_dir(out_arg, "translate");
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  require_stage(ckpt, "stage2");
  TrainConfig cfg = TrainConfig::from_json(ckpt.config_json);
  ensure_output_dir(out, force);

  Tensor a = read_png(image_a_path, cfg.image_size);
  Tensor b = read_png(image_b_path, cfg.image_size);
  auto [a_t, b_t] = translate(ckpt, a, b);
  write_png((fs::path(out) / "A.png").string(), a);
  write_png((fs::path(out) / "B.png").string(), b);
  write_png((fs::path(out) / "A_translated.png").string(), a_t);
  write_png((fs::path(out) / "B_translated.png").string(), b_t);
  write_png((fs::path(out) / "grid.png").string(), image_grid({a, b, a_t, b_t}));
  std::cout << "translation grid written to " << out << "\n";
  return 0;
}

int cmd_export_features(const std::string& ckpt_path, const std::string& data_dir,
                        const std::string& out_arg, bool force) {
  const std::string out = resolve_out_dir(out_arg, "features");
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainConfig cfg = TrainConfig::from_json(ckpt.config_json);
  ensure_output_dir(out, force);
  Dataset data = load_directory(data_dir, cfg.image_size);
  export_features(ckpt, data, (fs::path(out) / "features.csv").string());
  std::cout << "features for " << data.size() << " samples written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-stage disentangled face anti-spoofing pipeline"};
  app.require_subcommand(1);

  std::string out, config_file, seed_flag, data_dir, ckpt, stage1_ckpt, image_a, image_b;
  std::vector<std::string> overrides, ablations;
  bool force = false;
  int stage = 1, jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "output directory (default: $DSFL_OUTPUT_ROOT/<subcommand>)");
    cmd->add_flag("--force", force, "allow writing into a non-empty output directory");
  };
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value config file");
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
    cmd->add_option("--seed", seed_flag, "seed override");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  add_common(synth);
  add_config(synth);
  std::string patterns_flag;
  int n_live = -1, n_per_attack = -1, image_size = -1;
  double noise = -1;
  synth->add_option("--patterns", patterns_flag, "comma-separated attack patterns");
  synth->add_option("--n-live", n_live, "number of live samples");
  synth->add_option("--n-per-attack", n_per_attack, "spoof samples per pattern");
  synth->add_option("--image-size", image_size, "square image size");
  synth->add_option("--noise", noise, "additive noise level");

  CLI::App* train = app.add_subcommand("train", "run one training stage");
  add_common(train);
  add_config(train);
  train->add_option("--stage", stage, "1 or 2")->required()->check(CLI::Range(1, 2));
  train->add_option("--data", data_dir, "dataset directory (root/{live|<attack>}/*.png)")->required();
  train->add_option("--stage1-ckpt", stage1_ckpt, "stage-1 checkpoint (required for stage 2)");
  train->add_option("--ablate", ablations,
                    "no-stage1 | no-discriminator | no-aux-classifier | no-triplet | normal-triplet-only");

  CLI::App* protocol = app.add_subcommand("protocol", "leave-one-attack-type-out experiment");
  add_common(protocol);
  add_config(protocol);
  protocol->add_option("--data", data_dir, "dataset directory")->required();
  protocol->add_option("--jobs", jobs, "parallel protocol runs")->check(CLI::PositiveNumber);

  CLI::App* translate_cmd = app.add_subcommand("translate", "swap spoof features between two images");
  add_common(translate_cmd);
  translate_cmd->add_option("--ckpt", ckpt, "stage-2 checkpoint")->required();
  translate_cmd->add_option("--image-a", image_a, "first image")->required();
  translate_cmd->add_option("--image-b", image_b, "second image")->required();

  CLI::App* exportf = app.add_subcommand("export-features", "dump live/spoof latents as CSV");
  add_common(exportf);
  exportf->add_option("--ckpt", ckpt, "stage-2 checkpoint")->required();
  exportf->add_option("--data", data_dir, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      if (!patterns_flag.empty()) overrides.push_back("patterns=" + patterns_flag);
      if (n_live >= 0) overrides.push_back("n_live=" + std::to_string(n_live));
      if (n_per_attack >= 0) overrides.push_back("n_per_attack=" + std::to_string(n_per_attack));
      if (image_size >= 0) overrides.push_back("image_size=" + std::to_string(image_size));
      if (noise >= 0) overrides.push_back("noise=" + std::to_string(noise));
      return cmd_synth(out, config_file, overrides, seed_flag, force);
    }
    if (train->parsed())
      return cmd_train(stage, data_dir, out, config_file, overrides, seed_flag, stage1_ckpt, ablations, force);
    if (protocol->parsed()) return cmd_protocol(data_dir, out, config_file, overrides, seed_flag, jobs, force);
    if (translate_cmd->parsed()) return cmd_translate(ckpt, image_a, image_b, out, force);
    if (exportf->parsed()) return cmd_export_features(ckpt, data_dir, out, force);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
