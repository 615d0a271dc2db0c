#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsfl/nn.hpp"
#include "dsfl/tensor.hpp"

namespace dsfl {

/// The seven networks of the pipeline.
enum class NetworkRole {
  live_encoder,     // E_L: image -> live features
  live_decoder,     // D_L: live features -> image (stage 1 only)
  spoof_encoder,    // E_S: image -> spoof features
  synth_decoder,    // D_syn: fused features -> image
  discriminator,    // D: image -> real/synthetic logit
  map_decoder,      // D_map: spoof features -> spoof map, taps its 3 blocks
  aux_classifier,   // C_aux: image + map -> live/spoof logit
};

const char* role_name(NetworkRole role);
NetworkRole role_from_name(const std::string& name);

enum class ActKind { none, leaky_relu, sigmoid, tanh_unit };  // tanh_unit: (tanh+1)/2

struct LayerSpec {
  enum class Kind { conv, conv_transpose, instance_norm, activation, flatten, linear } kind;
  int in_ch = 0, out_ch = 0;
  int kernel = 0, stride = 0, padding = 0;
  bool bias = false;
  ActKind act = ActKind::none;
  int in_features = 0, out_features = 0;  // linear
};

struct NetworkSpec {
  NetworkRole role;
  std::vector<LayerSpec> layers;
  Shape input_shape;   // per sample, no batch dim
  Shape output_shape;  // per sample
  std::vector<int> tap_layers;  // layer indices whose outputs are reported as intermediates
};

struct Param {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Named, ordered parameter collection for one network. Tensors of trainable
/// params are grad-enabled; frozen params never show up in gradient maps.
struct ParamSet {
  std::string network;
  std::vector<Param> params;

  Param& find(const std::string& name);
  const Param& find(const std::string& name) const;
  void set_trainable(bool trainable);
  int64_t total_elements() const;
};

/// Spec and freshly initialized parameters for a role. Deterministic in seed.
/// image_size must be a power of two >= 16; encoders map to
/// [latent_channels, image_size/8, image_size/8].
NetworkSpec make_network_spec(NetworkRole role, int image_size, int latent_channels);
ParamSet init_params(const NetworkSpec& spec, uint64_t seed);
std::pair<NetworkSpec, ParamSet> build_network(NetworkRole role, int image_size,
                                               int latent_channels, uint64_t seed);

struct ForwardResult {
  Tensor output;
  std::vector<Tensor> taps;  // map_decoder: the three block outputs, low to high resolution
};

/// Run a network on a batched input [N, ...input_shape].
ForwardResult forward(const NetworkSpec& spec, const ParamSet& params, const Tensor& input);

/// Channel-wise concatenation of live and spoof latents, live first.
/// Accepts [C,h,w] or [N,C,h,w]; spatial dims must agree.
Tensor fuse_latents(const Tensor& f_live, const Tensor& f_spoof);

/// Records which networks ran while in scope (innermost scope wins).
/// Used to assert inference-path contracts.
class ForwardTrace {
 public:
  ForwardTrace();
  ~ForwardTrace();
  ForwardTrace(const ForwardTrace&) = delete;
  ForwardTrace& operator=(const ForwardTrace&) = delete;
  const std::vector<std::string>& names() const { return names_; }

 private:
  friend ForwardResult forward(const NetworkSpec&, const ParamSet&, const Tensor&);
  std::vector<std::string> names_;
  ForwardTrace* prev_ = nullptr;
};

// ---- checkpoints -------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'D', 'S', 'F', 'L'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string stage;  // "stage1" | "stage2"
  std::map<std::string, ParamSet> networks;  // keyed by role name
  std::string config_json;                   // training config snapshot
  uint64_t seed = 0;
  uint32_t epochs = 0;

  /// Serialized image of one network's parameters; handy for bit-equality checks.
  std::vector<uint8_t> network_bytes(const std::string& name) const;
};

/// Little-endian binary: magic "DSFL", version u32, stage, seed, epoch,
/// config blob, then a manifest (names, shapes, trainable flags) followed by
/// raw f64 payloads. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Throws CheckpointError unless the checkpoint is of the expected stage.
void require_stage(const Checkpoint& ckpt, const std::string& stage);

}  // namespace dsfl
