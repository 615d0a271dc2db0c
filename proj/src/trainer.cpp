#include "dsfl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dsfl/rng.hpp"
#include "json.hpp"

namespace dsfl {

// ---- TrainConfig -----------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (image_size < 16 || (image_size & (image_size - 1)) != 0) fail("image_size must be a power of two >= 16");
  if (latent_channels < 1) fail("latent_channels must be >= 1");
  if (batch_size < 4 || batch_size % 2 != 0) fail("batch_size must be even and >= 4");
  if (!(lr > 0)) fail("lr must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) fail("adam betas must be in (0,1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (stage1_epochs < 1 || stage2_epochs < 1) fail("epoch counts must be >= 1");
  if (disc_switch_k < 1) fail("disc_switch_k must be >= 1");
  if (weights.recon < 0 || weights.gen < 0 || weights.triplet < 0 || weights.map_reg < 0 || weights.cls < 0)
    fail("loss weights must be nonnegative");
  if (!(triplet.alpha > 0) || !(triplet.m > 0)) fail("triplet margins must be positive");
  if (!(live_train_fraction > 0 && live_train_fraction < 1)) fail("live_train_fraction must be in (0,1)");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["image_size"] = image_size;
  j["latent_channels"] = latent_channels;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["stage1_epochs"] = stage1_epochs;
  j["stage2_epochs"] = stage2_epochs;
  j["disc_switch_k"] = disc_switch_k;
  j["lambda_recon"] = weights.recon;
  j["lambda_gen"] = weights.gen;
  j["lambda_triplet"] = weights.triplet;
  j["lambda_map_reg"] = weights.map_reg;
  j["lambda_cls"] = weights.cls;
  j["triplet_alpha"] = triplet.alpha;
  j["triplet_margin"] = triplet.m;
  j["triplet_positive_only"] = triplet.positive_only;
  j["seed"] = seed;
  j["live_train_fraction"] = live_train_fraction;
  j["disable_stage1"] = disable_stage1;
  j["disable_discriminator"] = disable_discriminator;
  j["disable_aux_classifier"] = disable_aux_classifier;
  j["disable_triplet"] = disable_triplet;
  j["normal_triplet_only"] = normal_triplet_only;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  TrainConfig cfg;
  try {
    cfg.image_size = j.at("image_size").get<int>();
    cfg.latent_channels = j.at("latent_channels").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.adam_eps = j.at("adam_eps").get<double>();
    cfg.stage1_epochs = j.at("stage1_epochs").get<int>();
    cfg.stage2_epochs = j.at("stage2_epochs").get<int>();
    cfg.disc_switch_k = j.at("disc_switch_k").get<int>();
    cfg.weights.recon = j.at("lambda_recon").get<double>();
    cfg.weights.gen = j.at("lambda_gen").get<double>();
    cfg.weights.triplet = j.at("lambda_triplet").get<double>();
    cfg.weights.map_reg = j.at("lambda_map_reg").get<double>();
    cfg.weights.cls = j.at("lambda_cls").get<double>();
    cfg.triplet.alpha = j.at("triplet_alpha").get<double>();
    cfg.triplet.m = j.at("triplet_margin").get<double>();
    cfg.triplet.positive_only = j.at("triplet_positive_only").get<bool>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.live_train_fraction = j.at("live_train_fraction").get<double>();
    cfg.disable_stage1 = j.at("disable_stage1").get<bool>();
    cfg.disable_discriminator = j.at("disable_discriminator").get<bool>();
    cfg.disable_aux_classifier = j.at("disable_aux_classifier").get<bool>();
    cfg.disable_triplet = j.at("disable_triplet").get<bool>();
    cfg.normal_triplet_only = j.at("normal_triplet_only").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config json missing field: ") + e.what());
  }
  return cfg;
}

// ---- TrainLog --------------------------------------------------------------------

bool TrainLog::has_column(const std::string& name) const {
  for (const std::string& c : columns)
    if (c == name) return true;
  return false;
}

double TrainLog::value(size_t row, const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return rows.at(row).at(i);
  throw ValueError("train log has no column " + name);
}

void TrainLog::append_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw ValueError("train log row width mismatch");
  for (double v : row)
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value in train log");
  rows.push_back(std::move(row));
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write train log " + path);
  for (size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << columns[i];
  f << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      f << (i ? "," : "") << buf;
    }
    f << "\n";
  }
}

// ---- Adam ------------------------------------------------------------------------

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  for (Param& p : params.params) {
    if (!p.trainable) continue;
    auto it = grads.find(p.value.id());
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (g.shape() != p.value.shape())
      throw ShapeError("adam_step: gradient shape " + shape_str(g.shape()) + " vs param " + shape_str(p.value.shape()));

    AdamState::Slot& slot = state.slots[p.name];
    const size_t n = static_cast<size_t>(p.value.size());
    if (slot.m.empty()) {
      slot.m.assign(n, 0.0);
      slot.v.assign(n, 0.0);
    }
    slot.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(slot.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(slot.t));
    const auto& gd = g.data();
    std::vector<double> next = p.value.data();
    for (size_t i = 0; i < n; ++i) {
      slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * gd[i];
      slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * gd[i] * gd[i];
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      next[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    p.value = Tensor::param(p.value.shape(), std::move(next));
  }
}

// ---- batching ----------------------------------------------------------------------

std::vector<Batch> batch_iterator(const Dataset& data, int batch_size, uint64_t seed, int epoch) {
  if (batch_size < 4 || batch_size % 2 != 0) throw ValueError("batch_size must be even and >= 4");
  std::vector<size_t> live, spoof;
  for (size_t i = 0; i < data.samples.size(); ++i)
    (data.samples[i].label == Label::live ? live : spoof).push_back(i);
  const size_t half = static_cast<size_t>(batch_size) / 2;
  if (live.size() < half || spoof.size() < half)
    throw ValueError("batch_size " + std::to_string(batch_size) + " exceeds class counts (" +
                     std::to_string(live.size()) + " live, " + std::to_string(spoof.size()) + " spoof)");

  Rng rng(Rng::derive(seed, "batches:epoch" + std::to_string(epoch)));
  rng.shuffle(live);
  rng.shuffle(spoof);
  const size_t n_batches = std::min(live.size() / half, spoof.size() / half);
  std::vector<Batch> batches;
  batches.reserve(n_batches);
  for (size_t b = 0; b < n_batches; ++b) {
    Batch batch;
    batch.n_live = half;
    for (size_t i = 0; i < half; ++i) batch.indices.push_back(live[b * half + i]);
    for (size_t i = 0; i < half; ++i) batch.indices.push_back(spoof[b * half + i]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

// ---- shared helpers -----------------------------------------------------------------

namespace {

Tensor stack_images(const Dataset& data, const std::vector<size_t>& indices, int image_size) {
  const size_t per = static_cast<size_t>(3) * image_size * image_size;
  std::vector<double> buf(indices.size() * per);
  for (size_t i = 0; i < indices.size(); ++i) {
    const Tensor& im = data.samples[indices[i]].image;
    if (im.rank() != 3 || im.dim(0) != 3 || im.dim(1) != image_size || im.dim(2) != image_size)
      throw ShapeError("sample " + data.samples[indices[i]].id + " has shape " + shape_str(im.shape()) +
                       ", config expects [3," + std::to_string(image_size) + "," + std::to_string(image_size) + "]");
    const auto& d = im.data();
    std::copy(d.begin(), d.end(), buf.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor::from_data({static_cast<int>(indices.size()), 3, image_size, image_size}, std::move(buf));
}

std::vector<Label> batch_labels(const Dataset& data, const Batch& batch) {
  std::vector<Label> labels;
  labels.reserve(batch.indices.size());
  for (size_t idx : batch.indices) labels.push_back(data.samples[idx].label);
  return labels;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

// ---- stage 1 -------------------------------------------------------------------------

std::pair<Checkpoint, TrainLog> train_stage1(const TrainConfig& cfg, const Dataset& live_data) {
  cfg.validate();
  if (live_data.samples.empty()) throw ValueError("train_stage1: empty dataset");
  for (const Sample& s : live_data.samples)
    if (s.label != Label::live)
      throw ValueError("train_stage1: spoof sample '" + s.id + "' in live-only training data");

  auto [enc_spec, enc] = build_network(NetworkRole::live_encoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  auto [dec_spec, dec] = build_network(NetworkRole::live_decoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  AdamState enc_state, dec_state;

  std::vector<size_t> all(live_data.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Tensor full = stack_images(live_data, all, cfg.image_size);

  TrainLog log;
  log.columns = {"epoch", "l_live", "seconds"};

  const size_t bs = std::min<size_t>(static_cast<size_t>(cfg.batch_size), live_data.size());
  for (int epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
    const double t0 = now_seconds();

    // pre-update evaluation over the whole dataset; row 0 is the initial loss
    double eval_loss;
    {
      Tensor recon = forward(dec_spec, dec, forward(enc_spec, enc, full).output).output;
      eval_loss = l_live(full, recon).value();
    }

    std::vector<size_t> order = all;
    Rng rng(Rng::derive(cfg.seed, "stage1:epoch" + std::to_string(epoch)));
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += bs) {
      const size_t end = std::min(order.size(), start + bs);
      std::vector<size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor x = stack_images(live_data, idx, cfg.image_size);
      try {
        Tape tape;
        Tensor recon = forward(dec_spec, dec, forward(enc_spec, enc, x).output).output;
        Tensor loss = l_live(x, recon);
        GradMap grads = tape.backward(loss);
        adam_step(enc, grads, enc_state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        adam_step(dec, grads, dec_state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      } catch (const NonFiniteError& e) {
        throw DivergenceError("stage1 diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    log.append_row({static_cast<double>(epoch), eval_loss, now_seconds() - t0});
  }

  Checkpoint ckpt;
  ckpt.stage = "stage1";
  ckpt.networks.emplace("live_encoder", enc);
  ckpt.networks.emplace("live_decoder", dec);
  ckpt.config_json = cfg.to_json();
  ckpt.seed = cfg.seed;
  ckpt.epochs = static_cast<uint32_t>(cfg.stage1_epochs);
  return {std::move(ckpt), std::move(log)};
}

// ---- stage 2 -------------------------------------------------------------------------

namespace {

struct Net {
  NetworkSpec spec;
  ParamSet params;
  AdamState opt;
};

struct StepLosses {
  double recon = 0, gen = 0, dis = 0, triplet = 0, map_reg = 0, cls = 0;
  double disc_correct = 0, disc_total = 0;
};

std::array<BatchFeatures, 3> pool_taps(const std::vector<Tensor>& taps, const std::vector<Label>& labels) {
  if (taps.size() != 3) throw Error("map_decoder must expose exactly 3 tail layers");
  std::array<BatchFeatures, 3> out;
  for (size_t i = 0; i < 3; ++i) {
    out[i].features = mean(taps[i], {2, 3});  // global average pool to [N,C]
    out[i].labels = labels;
  }
  return out;
}

}  // namespace

std::pair<Checkpoint, TrainLog> train_stage2(const TrainConfig& cfg, const Checkpoint* stage1,
                                             const Dataset& train_data) {
  cfg.validate();
  if (train_data.count(Label::live) == 0 || train_data.count(Label::spoof) == 0)
    throw ValueError("train_stage2: training data must contain both classes");

  Net live_enc, live_dec;
  if (cfg.disable_stage1) {
    // ablation: random frozen extractor instead of the pre-trained one
    std::tie(live_enc.spec, live_enc.params) =
        build_network(NetworkRole::live_encoder, cfg.image_size, cfg.latent_channels, cfg.seed);
    std::tie(live_dec.spec, live_dec.params) =
        build_network(NetworkRole::live_decoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  } else {
    if (!stage1) throw ValueError("train_stage2: stage-1 checkpoint required unless disable_stage1 is set");
    require_stage(*stage1, "stage1");
    live_enc.spec = make_network_spec(NetworkRole::live_encoder, cfg.image_size, cfg.latent_channels);
    live_enc.params = stage1->networks.at("live_encoder");
    live_dec.spec = make_network_spec(NetworkRole::live_decoder, cfg.image_size, cfg.latent_channels);
    live_dec.params = stage1->networks.at("live_decoder");
  }
  live_enc.params.set_trainable(false);  // fixed extractor for the whole stage

  Net spoof_enc, synth_dec, disc, map_dec, aux;
  std::tie(spoof_enc.spec, spoof_enc.params) =
      build_network(NetworkRole::spoof_encoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  std::tie(synth_dec.spec, synth_dec.params) =
      build_network(NetworkRole::synth_decoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  std::tie(disc.spec, disc.params) =
      build_network(NetworkRole::discriminator, cfg.image_size, cfg.latent_channels, cfg.seed);
  std::tie(map_dec.spec, map_dec.params) =
      build_network(NetworkRole::map_decoder, cfg.image_size, cfg.latent_channels, cfg.seed);
  std::tie(aux.spec, aux.params) =
      build_network(NetworkRole::aux_classifier, cfg.image_size, cfg.latent_channels, cfg.seed);

  const bool use_disc = !cfg.disable_discriminator;
  const bool use_aux = !cfg.disable_aux_classifier;
  const bool use_triplet = !cfg.disable_triplet;

  Dataset balanced = resample_balanced(train_data, cfg.seed);

  TrainLog log;
  log.columns.push_back("epoch");
  log.columns.push_back("l_recon");
  if (use_disc) {
    log.columns.push_back("l_gen");
    log.columns.push_back("l_dis");
  }
  if (use_triplet) log.columns.push_back("l_t");
  log.columns.push_back("l_r");
  if (use_aux) log.columns.push_back("l_c");
  log.columns.push_back("combined");
  if (use_disc) log.columns.push_back("disc_acc");
  log.columns.push_back("seconds");

  // triplet variant honoring the normal-only ablation
  auto triplet_total = [&](const std::array<BatchFeatures, 3>& tails) {
    Tensor total = Tensor::scalar(0.0);
    for (const BatchFeatures& layer : tails) {
      Tensor t = triplet_normal(layer, cfg.triplet.alpha, cfg.triplet.positive_only);
      if (!cfg.normal_triplet_only) t = add(t, triplet_hard(layer, cfg.triplet.m));
      total = add(total, t);
    }
    return total;
  };

  // forward pass shared by evaluation and the generator step
  struct PassOut {
    Tensor x_syn, maps;
    Tensor l_recon_t, l_gen_t, l_t_t, l_r_t, l_c_t;
  };
  auto generator_pass = [&](const Tensor& x, const std::vector<Label>& labels, size_t n_live) -> PassOut {
    PassOut out;
    Tensor f_live = forward(live_enc.spec, live_enc.params, x).output;
    Tensor f_spoof = forward(spoof_enc.spec, spoof_enc.params, x).output;
    out.x_syn = forward(synth_dec.spec, synth_dec.params, fuse_latents(f_live, f_spoof)).output;
    ForwardResult map_fwd = forward(map_dec.spec, map_dec.params, f_spoof);
    out.maps = map_fwd.output;
    out.l_recon_t = l_recon(x, out.x_syn);
    if (use_disc) out.l_gen_t = l_gen(sigmoid(forward(disc.spec, disc.params, out.x_syn).output));
    if (use_triplet) out.l_t_t = triplet_total(pool_taps(map_fwd.taps, labels));
    out.l_r_t = l_r(slice(out.maps, 0, 0, static_cast<int>(n_live)));
    if (use_aux) {
      Tensor probs = sigmoid(forward(aux.spec, aux.params, concat({x, out.maps}, 1)).output);
      out.l_c_t = l_c(labels, probs);
    }
    return out;
  };

  auto combine = [&](const PassOut& p) {
    Tensor total = mul_scalar(p.l_recon_t, cfg.weights.recon);
    if (use_disc) total = add(total, mul_scalar(p.l_gen_t, cfg.weights.gen));
    if (use_triplet) total = add(total, mul_scalar(p.l_t_t, cfg.weights.triplet));
    total = add(total, mul_scalar(p.l_r_t, cfg.weights.map_reg));
    if (use_aux) total = add(total, mul_scalar(p.l_c_t, cfg.weights.cls));
    return total;
  };

  int64_t gen_steps = 0;
  for (int epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
    const double t0 = now_seconds();
    std::vector<Batch> batches = batch_iterator(balanced, cfg.batch_size, cfg.seed, epoch);
    if (epoch == 0) {
      for (const Batch& b : batches)
        for (size_t idx : b.indices)
          if (balanced.samples[idx].label == Label::spoof) log.seen_attack_types.insert(balanced.samples[idx].attack_type);
    }

    // pre-update evaluation over this epoch's batches
    StepLosses acc;
    for (const Batch& batch : batches) {
      Tensor x = stack_images(balanced, batch.indices, cfg.image_size);
      std::vector<Label> labels = batch_labels(balanced, batch);
      PassOut p = generator_pass(x, labels, batch.n_live);
      acc.recon += p.l_recon_t.value();
      if (use_triplet) acc.triplet += p.l_t_t.value();
      acc.map_reg += p.l_r_t.value();
      if (use_aux) acc.cls += p.l_c_t.value();
      if (use_disc) {
        Tensor d_real = sigmoid(forward(disc.spec, disc.params, x).output);
        Tensor d_fake = sigmoid(forward(disc.spec, disc.params, p.x_syn).output);
        acc.gen += l_gen(d_fake).value();
        acc.dis += l_dis(d_real, d_fake).value();
        for (int i = 0; i < d_real.size(); ++i) acc.disc_correct += d_real.at(i) > 0.5 ? 1.0 : 0.0;
        for (int i = 0; i < d_fake.size(); ++i) acc.disc_correct += d_fake.at(i) < 0.5 ? 1.0 : 0.0;
        acc.disc_total += static_cast<double>(d_real.size() + d_fake.size());
      }
    }
    const double nb = static_cast<double>(batches.size());
    const double m_recon = acc.recon / nb;
    const double m_gen = acc.gen / nb;
    const double m_dis = acc.dis / nb;
    const double m_t = acc.triplet / nb;
    const double m_r = acc.map_reg / nb;
    const double m_c = acc.cls / nb;
    // combined column: weighted sum of the logged component columns, in order
    double combined = cfg.weights.recon * m_recon;
    if (use_disc) combined += cfg.weights.gen * m_gen;
    if (use_triplet) combined += cfg.weights.triplet * m_t;
    combined += cfg.weights.map_reg * m_r;
    if (use_aux) combined += cfg.weights.cls * m_c;

    // updates
    for (const Batch& batch : batches) {
      Tensor x = stack_images(balanced, batch.indices, cfg.image_size);
      std::vector<Label> labels = batch_labels(balanced, batch);
      Tensor x_syn_value;
      try {
        Tape tape;
        PassOut p = generator_pass(x, labels, batch.n_live);
        x_syn_value = p.x_syn;
        Tensor total = combine(p);
        GradMap grads = tape.backward(total);
        adam_step(spoof_enc.params, grads, spoof_enc.opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        adam_step(synth_dec.params, grads, synth_dec.opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        adam_step(map_dec.params, grads, map_dec.opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        if (use_aux) adam_step(aux.params, grads, aux.opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      } catch (const NonFiniteError& e) {
        throw DivergenceError("stage2 generator diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      ++gen_steps;
      if (use_disc && gen_steps % cfg.disc_switch_k == 0) {
        try {
          Tape tape;
          // x_syn_value carries no history on this fresh tape: the
          // discriminator trains against a detached fake batch
          Tensor d_real = sigmoid(forward(disc.spec, disc.params, x).output);
          Tensor d_fake = sigmoid(forward(disc.spec, disc.params, x_syn_value).output);
          Tensor loss = l_dis(d_real, d_fake);
          GradMap grads = tape.backward(loss);
          adam_step(disc.params, grads, disc.opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        } catch (const NonFiniteError& e) {
          throw DivergenceError("stage2 discriminator diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }
    }

    std::vector<double> row;
    row.push_back(static_cast<double>(epoch));
    row.push_back(m_recon);
    if (use_disc) {
      row.push_back(m_gen);
      row.push_back(m_dis);
    }
    if (use_triplet) row.push_back(m_t);
    row.push_back(m_r);
    if (use_aux) row.push_back(m_c);
    row.push_back(combined);
    if (use_disc) row.push_back(acc.disc_correct / acc.disc_total);
    row.push_back(now_seconds() - t0);
    log.append_row(std::move(row));
  }

  Checkpoint ckpt;
  ckpt.stage = "stage2";
  ckpt.networks.emplace("live_encoder", live_enc.params);
  ckpt.networks.emplace("live_decoder", live_dec.params);
  ckpt.networks.emplace("spoof_encoder", spoof_enc.params);
  ckpt.networks.emplace("synth_decoder", synth_dec.params);
  ckpt.networks.emplace("discriminator", disc.params);
  ckpt.networks.emplace("map_decoder", map_dec.params);
  ckpt.networks.emplace("aux_classifier", aux.params);
  ckpt.config_json = cfg.to_json();
  ckpt.seed = cfg.seed;
  ckpt.epochs = static_cast<uint32_t>(cfg.stage2_epochs);
  return {std::move(ckpt), std::move(log)};
}

}  // namespace dsfl
