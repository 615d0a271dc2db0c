#include "dsfl/models.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "dsfl/rng.hpp"

namespace dsfl {

const char* role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::live_encoder: return "live_encoder";
    case NetworkRole::live_decoder: return "live_decoder";
    case NetworkRole::spoof_encoder: return "spoof_encoder";
    case NetworkRole::synth_decoder: return "synth_decoder";
    case NetworkRole::discriminator: return "discriminator";
    case NetworkRole::map_decoder: return "map_decoder";
    case NetworkRole::aux_classifier: return "aux_classifier";
  }
  throw ValueError("unknown network role");
}

NetworkRole role_from_name(const std::string& name) {
  for (NetworkRole r : {NetworkRole::live_encoder, NetworkRole::live_decoder, NetworkRole::spoof_encoder,
                        NetworkRole::synth_decoder, NetworkRole::discriminator, NetworkRole::map_decoder,
                        NetworkRole::aux_classifier}) {
    if (name == role_name(r)) return r;
  }
  throw ValueError("unknown network role name: " + name);
}

// ---- ParamSet ------------------------------------------------------------------

Param& ParamSet::find(const std::string& name) {
  for (Param& p : params)
    if (p.name == name) return p;
  throw ValueError("parameter not found: " + network + "." + name);
}

const Param& ParamSet::find(const std::string& name) const {
  for (const Param& p : params)
    if (p.name == name) return p;
  throw ValueError("parameter not found: " + network + "." + name);
}

void ParamSet::set_trainable(bool trainable) {
  for (Param& p : params) {
    p.trainable = trainable;
    p.value = p.value.with_grad(trainable);
  }
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

// ---- architecture -----------------------------------------------------------------

namespace {

bool power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

// stride-2 4x4 conv block: conv -> instance norm -> leaky_relu
void down_block(std::vector<LayerSpec>& layers, int in_ch, int out_ch, bool norm = true) {
  layers.push_back({LayerSpec::Kind::conv, in_ch, out_ch, 4, 2, 1, !norm});
  if (norm) layers.push_back({LayerSpec::Kind::instance_norm, out_ch, out_ch});
  LayerSpec act{LayerSpec::Kind::activation};
  act.act = ActKind::leaky_relu;
  layers.push_back(act);
}

// stride-2 4x4 transpose-conv block
void up_block(std::vector<LayerSpec>& layers, int in_ch, int out_ch, ActKind final_act = ActKind::none) {
  const bool mid = final_act == ActKind::none;
  layers.push_back({LayerSpec::Kind::conv_transpose, in_ch, out_ch, 4, 2, 1, !mid});
  if (mid) {
    layers.push_back({LayerSpec::Kind::instance_norm, out_ch, out_ch});
    LayerSpec act{LayerSpec::Kind::activation};
    act.act = ActKind::leaky_relu;
    layers.push_back(act);
  } else {
    LayerSpec act{LayerSpec::Kind::activation};
    act.act = final_act;
    layers.push_back(act);
  }
}

constexpr int kWidth1 = 16;  // channels after the first encoder block
constexpr int kWidth2 = 32;  // channels after the second

}  // namespace

NetworkSpec make_network_spec(NetworkRole role, int image_size, int latent_channels) {
  if (!power_of_two(image_size) || image_size < 16)
    throw ValueError("unsupported image size " + std::to_string(image_size) + " (need a power of two >= 16)");
  if (latent_channels < 1) throw ValueError("latent_channels must be >= 1");

  const int s8 = image_size / 8;
  NetworkSpec spec;
  spec.role = role;

  auto classifier_head = [&](int in_ch) {
    down_block(spec.layers, in_ch, kWidth1, /*norm=*/false);
    down_block(spec.layers, kWidth1, kWidth2);
    down_block(spec.layers, kWidth2, kWidth2);
    spec.layers.push_back({LayerSpec::Kind::flatten});
    LayerSpec fc{LayerSpec::Kind::linear};
    fc.in_features = kWidth2 * s8 * s8;
    fc.out_features = 1;
    fc.bias = true;
    spec.layers.push_back(fc);
  };

  switch (role) {
    case NetworkRole::live_encoder:
    case NetworkRole::spoof_encoder:
      spec.input_shape = {3, image_size, image_size};
      down_block(spec.layers, 3, kWidth1);
      down_block(spec.layers, kWidth1, kWidth2);
      down_block(spec.layers, kWidth2, latent_channels);
      spec.output_shape = {latent_channels, s8, s8};
      break;
    case NetworkRole::live_decoder:
      spec.input_shape = {latent_channels, s8, s8};
      up_block(spec.layers, latent_channels, kWidth2);
      up_block(spec.layers, kWidth2, kWidth1);
      up_block(spec.layers, kWidth1, 3, ActKind::tanh_unit);
      spec.output_shape = {3, image_size, image_size};
      break;
    case NetworkRole::synth_decoder:
      spec.input_shape = {2 * latent_channels, s8, s8};
      up_block(spec.layers, 2 * latent_channels, kWidth2);
      up_block(spec.layers, kWidth2, kWidth1);
      up_block(spec.layers, kWidth1, 3, ActKind::tanh_unit);
      spec.output_shape = {3, image_size, image_size};
      break;
    case NetworkRole::map_decoder:
      spec.input_shape = {latent_channels, s8, s8};
      up_block(spec.layers, latent_channels, kWidth2);
      spec.tap_layers.push_back(static_cast<int>(spec.layers.size()) - 1);
      up_block(spec.layers, kWidth2, kWidth1);
      spec.tap_layers.push_back(static_cast<int>(spec.layers.size()) - 1);
      up_block(spec.layers, kWidth1, 1, ActKind::sigmoid);
      spec.tap_layers.push_back(static_cast<int>(spec.layers.size()) - 1);
      spec.output_shape = {1, image_size, image_size};
      break;
    case NetworkRole::discriminator:
      spec.input_shape = {3, image_size, image_size};
      classifier_head(3);
      spec.output_shape = {1};
      break;
    case NetworkRole::aux_classifier:
      spec.input_shape = {4, image_size, image_size};
      classifier_head(4);
      spec.output_shape = {1};
      break;
  }
  return spec;
}

ParamSet init_params(const NetworkSpec& spec, uint64_t seed) {
  Rng rng(Rng::derive(seed, role_name(spec.role)));
  ParamSet set;
  set.network = role_name(spec.role);
  const double weight_std = 0.02;  // DCGAN-style init

  auto normal_vec = [&](int64_t n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.normal(0.0, weight_std);
    return v;
  };

  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& layer = spec.layers[li];
    const std::string prefix = "layer" + std::to_string(li);
    switch (layer.kind) {
      case LayerSpec::Kind::conv: {
        Shape ws{layer.out_ch, layer.in_ch, layer.kernel, layer.kernel};
        set.params.push_back({prefix + ".weight", Tensor::param(ws, normal_vec(numel(ws)))});
        if (layer.bias)
          set.params.push_back({prefix + ".bias", Tensor::param({layer.out_ch}, std::vector<double>(static_cast<size_t>(layer.out_ch), 0.0))});
        break;
      }
      case LayerSpec::Kind::conv_transpose: {
        Shape ws{layer.in_ch, layer.out_ch, layer.kernel, layer.kernel};
        set.params.push_back({prefix + ".weight", Tensor::param(ws, normal_vec(numel(ws)))});
        if (layer.bias)
          set.params.push_back({prefix + ".bias", Tensor::param({layer.out_ch}, std::vector<double>(static_cast<size_t>(layer.out_ch), 0.0))});
        break;
      }
      case LayerSpec::Kind::instance_norm:
        set.params.push_back({prefix + ".gamma", Tensor::param({layer.out_ch}, std::vector<double>(static_cast<size_t>(layer.out_ch), 1.0))});
        set.params.push_back({prefix + ".beta", Tensor::param({layer.out_ch}, std::vector<double>(static_cast<size_t>(layer.out_ch), 0.0))});
        break;
      case LayerSpec::Kind::linear: {
        Shape ws{layer.in_features, layer.out_features};
        set.params.push_back({prefix + ".weight", Tensor::param(ws, normal_vec(numel(ws)))});
        set.params.push_back({prefix + ".bias", Tensor::param({layer.out_features}, std::vector<double>(static_cast<size_t>(layer.out_features), 0.0))});
        break;
      }
      case LayerSpec::Kind::activation:
      case LayerSpec::Kind::flatten:
        break;
    }
  }
  return set;
}

std::pair<NetworkSpec, ParamSet> build_network(NetworkRole role, int image_size, int latent_channels,
                                               uint64_t seed) {
  NetworkSpec spec = make_network_spec(role, image_size, latent_channels);
  ParamSet params = init_params(spec, seed);
  return {std::move(spec), std::move(params)};
}

// ---- forward ------------------------------------------------------------------------

namespace {
thread_local ForwardTrace* g_trace = nullptr;
}

ForwardTrace::ForwardTrace() {
  prev_ = g_trace;
  g_trace = this;
}

ForwardTrace::~ForwardTrace() { g_trace = prev_; }

ForwardResult forward(const NetworkSpec& spec, const ParamSet& params, const Tensor& input) {
  if (input.rank() != static_cast<int>(spec.input_shape.size()) + 1)
    throw ShapeError(std::string(role_name(spec.role)) + ": expected batched input of rank " +
                     std::to_string(spec.input_shape.size() + 1) + ", got " + shape_str(input.shape()));
  for (size_t i = 0; i < spec.input_shape.size(); ++i) {
    if (input.dim(static_cast<int>(i) + 1) != spec.input_shape[i])
      throw ShapeError(std::string(role_name(spec.role)) + ": input shape " + shape_str(input.shape()) +
                       " does not match spec " + shape_str(spec.input_shape));
  }
  if (g_trace) g_trace->names_.push_back(role_name(spec.role));

  ForwardResult result;
  Tensor x = input;
  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& layer = spec.layers[li];
    const std::string prefix = "layer" + std::to_string(li);
    switch (layer.kind) {
      case LayerSpec::Kind::conv:
        x = conv2d(x, params.find(prefix + ".weight").value, layer.stride, layer.padding);
        if (layer.bias) x = add_channel_bias(x, params.find(prefix + ".bias").value);
        break;
      case LayerSpec::Kind::conv_transpose:
        x = conv2d_transpose(x, params.find(prefix + ".weight").value, layer.stride, layer.padding);
        if (layer.bias) x = add_channel_bias(x, params.find(prefix + ".bias").value);
        break;
      case LayerSpec::Kind::instance_norm:
        x = instance_norm(x, params.find(prefix + ".gamma").value, params.find(prefix + ".beta").value);
        break;
      case LayerSpec::Kind::activation:
        switch (layer.act) {
          case ActKind::leaky_relu: x = leaky_relu(x, 0.2); break;
          case ActKind::sigmoid: x = sigmoid(x); break;
          case ActKind::tanh_unit: x = add_scalar(mul_scalar(tanh(x), 0.5), 0.5); break;
          case ActKind::none: break;
        }
        break;
      case LayerSpec::Kind::flatten: {
        int64_t features = x.size() / x.dim(0);
        x = reshape(x, {x.dim(0), static_cast<int>(features)});
        break;
      }
      case LayerSpec::Kind::linear:
        x = linear(x, params.find(prefix + ".weight").value, params.find(prefix + ".bias").value);
        break;
    }
    for (int tap : spec.tap_layers) {
      if (tap == static_cast<int>(li)) result.taps.push_back(x);
    }
  }
  result.output = x;
  return result;
}

Tensor fuse_latents(const Tensor& f_live, const Tensor& f_spoof) {
  if (f_live.rank() != f_spoof.rank() || (f_live.rank() != 3 && f_live.rank() != 4))
    throw ShapeError("fuse_latents: expected matching [C,h,w] or [N,C,h,w] tensors");
  const int axis = f_live.rank() == 4 ? 1 : 0;
  for (int i = 0; i < f_live.rank(); ++i) {
    if (i == axis) continue;
    if (f_live.dim(i) != f_spoof.dim(i))
      throw ShapeError("fuse_latents: spatial/batch mismatch " + shape_str(f_live.shape()) + " vs " +
                       shape_str(f_spoof.shape()));
  }
  return concat({f_live, f_spoof}, axis);
}

// ---- checkpoint serialization ----------------------------------------------------------

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void require(size_t n) {
    if (pos + n > buf.size()) throw CheckpointError("corrupt checkpoint: truncated file");
  }
  uint32_t u32() {
    require(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    require(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    require(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

std::string serialize_paramset(const ParamSet& set) {
  std::string out;
  put_str(out, set.network);
  put_u32(out, static_cast<uint32_t>(set.params.size()));
  for (const Param& p : set.params) {
    put_str(out, p.name);
    out.push_back(p.trainable ? 1 : 0);
    put_u32(out, static_cast<uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) put_u32(out, static_cast<uint32_t>(d));
    for (double v : p.value.data()) put_f64(out, v);
  }
  return out;
}

ParamSet deserialize_paramset(Reader& r) {
  ParamSet set;
  set.network = r.str();
  uint32_t n_params = r.u32();
  for (uint32_t i = 0; i < n_params; ++i) {
    Param p;
    p.name = r.str();
    r.require(1);
    p.trainable = r.buf[r.pos++] != 0;
    uint32_t rank = r.u32();
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
    std::vector<double> data(static_cast<size_t>(numel(shape)));
    for (double& v : data) v = r.f64();
    p.value = p.trainable ? Tensor::param(shape, std::move(data)) : Tensor::from_data(shape, std::move(data));
    set.params.push_back(std::move(p));
  }
  return set;
}

void validate_stage_contents(const Checkpoint& ckpt) {
  if (ckpt.stage != "stage1" && ckpt.stage != "stage2")
    throw CheckpointError("unknown checkpoint stage: " + ckpt.stage);
  auto has = [&](const char* name) { return ckpt.networks.count(name) > 0; };
  if (ckpt.stage == "stage1") {
    if (ckpt.networks.size() != 2 || !has("live_encoder") || !has("live_decoder"))
      throw CheckpointError("stage1 checkpoint must contain exactly live_encoder and live_decoder");
  } else {
    for (NetworkRole r : {NetworkRole::live_encoder, NetworkRole::live_decoder, NetworkRole::spoof_encoder,
                          NetworkRole::synth_decoder, NetworkRole::discriminator, NetworkRole::map_decoder,
                          NetworkRole::aux_classifier}) {
      if (!has(role_name(r))) throw CheckpointError(std::string("stage2 checkpoint missing network ") + role_name(r));
    }
  }
}

}  // namespace

std::vector<uint8_t> Checkpoint::network_bytes(const std::string& name) const {
  auto it = networks.find(name);
  if (it == networks.end()) throw ValueError("checkpoint has no network " + name);
  std::string s = serialize_paramset(it->second);
  return {s.begin(), s.end()};
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  validate_stage_contents(ckpt);
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_str(out, ckpt.stage);
  put_u64(out, ckpt.seed);
  put_u32(out, ckpt.epochs);
  put_str(out, ckpt.config_json);
  put_u32(out, static_cast<uint32_t>(ckpt.networks.size()));
  for (const auto& [name, set] : ckpt.networks) {
    std::string blob = serialize_paramset(set);
    put_u32(out, static_cast<uint32_t>(blob.size()));
    out.append(blob);
  }
  // write-temp-then-rename keeps readers from ever seeing partial state
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp + " to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 8 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError("corrupt checkpoint: bad magic in " + path);
  Reader r{buf, 4};
  uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  Checkpoint ckpt;
  ckpt.stage = r.str();
  ckpt.seed = r.u64();
  ckpt.epochs = r.u32();
  ckpt.config_json = r.str();
  uint32_t n_networks = r.u32();
  for (uint32_t i = 0; i < n_networks; ++i) {
    uint32_t blob_size = r.u32();
    r.require(blob_size);
    Reader sub{buf, r.pos};
    ParamSet set = deserialize_paramset(sub);
    if (sub.pos != r.pos + blob_size) throw CheckpointError("corrupt checkpoint: network blob size mismatch");
    r.pos += blob_size;
    ckpt.networks.emplace(set.network, std::move(set));
  }
  if (r.pos != buf.size()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  validate_stage_contents(ckpt);
  return ckpt;
}

void require_stage(const Checkpoint& ckpt, const std::string& stage) {
  if (ckpt.stage != stage)
    throw CheckpointError("checkpoint stage mismatch: have " + ckpt.stage + ", need " + stage);
}

}  // namespace dsfl
