#include "dsfl/models.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dsfl/trainer.hpp"
#include "oracles.hpp"

using namespace dsfl;

namespace {

Tensor batched_random(Rng& rng, const Shape& per_sample, int n) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return oracle::random_tensor(rng, s, 0.0, 1.0);
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("shape chain holds for every role at sizes 16/32/64") {
  Rng rng(1);
  for (int size : {16, 32, 64}) {
    for (NetworkRole role : {NetworkRole::live_encoder, NetworkRole::live_decoder, NetworkRole::spoof_encoder,
                             NetworkRole::synth_decoder, NetworkRole::discriminator, NetworkRole::map_decoder,
                             NetworkRole::aux_classifier}) {
      auto [spec, params] = build_network(role, size, 8, 7);
      Tensor x = batched_random(rng, spec.input_shape, 2);
      ForwardResult out = forward(spec, params, x);
      Shape expect{2};
      expect.insert(expect.end(), spec.output_shape.begin(), spec.output_shape.end());
      CHECK(out.output.shape() == expect);
    }
  }
}

TEST_CASE("encoder latent shape is latent_channels x size/8 squared") {
  auto [spec, params] = build_network(NetworkRole::live_encoder, 32, 16, 0);
  CHECK(spec.output_shape == Shape{16, 4, 4});
  Rng rng(2);
  Tensor x = batched_random(rng, {3, 32, 32}, 1);
  CHECK(forward(spec, params, x).output.shape() == Shape{1, 16, 4, 4});
}

TEST_CASE("synth_decoder maps fused latents back to a 3x32x32 image") {
  Rng rng(3);
  auto [spec, params] = build_network(NetworkRole::synth_decoder, 32, 16, 0);
  Tensor f_live = batched_random(rng, {16, 4, 4}, 2);
  Tensor f_spoof = batched_random(rng, {16, 4, 4}, 2);
  Tensor out = forward(spec, params, fuse_latents(f_live, f_spoof)).output;
  CHECK(out.shape() == Shape{2, 3, 32, 32});
  // tanh-unit output stays in [0,1]
  for (int64_t i = 0; i < out.size(); ++i) {
    CHECK(out.at(i) >= 0.0);
    CHECK(out.at(i) <= 1.0);
  }
}

TEST_CASE("unsupported image sizes are rejected") {
  CHECK_THROWS_AS(build_network(NetworkRole::live_encoder, 24, 8, 0), ValueError);
  CHECK_THROWS_AS(build_network(NetworkRole::live_encoder, 8, 8, 0), ValueError);
  CHECK_THROWS_AS(build_network(NetworkRole::live_encoder, 32, 0, 0), ValueError);
}

TEST_CASE("same seed gives bit-identical parameters, different seed does not") {
  auto [spec1, p1] = build_network(NetworkRole::spoof_encoder, 32, 8, 123);
  auto [spec2, p2] = build_network(NetworkRole::spoof_encoder, 32, 8, 123);
  auto [spec3, p3] = build_network(NetworkRole::spoof_encoder, 32, 8, 124);
  REQUIRE(p1.params.size() == p2.params.size());
  bool all_same = true, any_diff_seed3 = false;
  for (size_t i = 0; i < p1.params.size(); ++i) {
    all_same = all_same && p1.params[i].value.data() == p2.params[i].value.data();
    any_diff_seed3 = any_diff_seed3 || p1.params[i].value.data() != p3.params[i].value.data();
  }
  CHECK(all_same);
  CHECK(any_diff_seed3);
}

TEST_CASE("networks differ from each other under one seed") {
  auto [es, ep] = build_network(NetworkRole::live_encoder, 32, 8, 5);
  auto [ss, sp] = build_network(NetworkRole::spoof_encoder, 32, 8, 5);
  CHECK(ep.params[0].value.data() != sp.params[0].value.data());
}

TEST_CASE("forward is deterministic and validates input shape") {
  Rng rng(4);
  auto [spec, params] = build_network(NetworkRole::discriminator, 16, 4, 9);
  Tensor x = batched_random(rng, {3, 16, 16}, 3);
  Tensor a = forward(spec, params, x).output;
  Tensor b = forward(spec, params, x).output;
  CHECK(a.data() == b.data());
  Tensor bad = batched_random(rng, {3, 32, 32}, 1);
  CHECK_THROWS_AS(forward(spec, params, bad), ShapeError);
}

TEST_CASE("zero input through a zeroed linear head gives a zero logit") {
  auto [spec, params] = build_network(NetworkRole::discriminator, 16, 4, 0);
  for (Param& p : params.params)
    p.value = Tensor::param(p.value.shape(), std::vector<double>(static_cast<size_t>(p.value.size()), 0.0));
  Tensor x = Tensor::zeros({1, 3, 16, 16});
  CHECK(forward(spec, params, x).output.value() == 0.0);
}

TEST_CASE("map_decoder taps three blocks with strictly increasing resolution") {
  Rng rng(5);
  auto [spec, params] = build_network(NetworkRole::map_decoder, 32, 8, 11);
  Tensor f = batched_random(rng, {8, 4, 4}, 2);
  ForwardResult out = forward(spec, params, f);
  REQUIRE(out.taps.size() == 3);
  CHECK(out.taps[0].dim(2) == 8);
  CHECK(out.taps[1].dim(2) == 16);
  CHECK(out.taps[2].dim(2) == 32);
  CHECK(out.taps[2].data() == out.output.data());  // final tap is the map itself
  // sigmoid map lives in [0,1]
  for (int64_t i = 0; i < out.output.size(); ++i) {
    CHECK(out.output.at(i) > 0.0);
    CHECK(out.output.at(i) < 1.0);
  }
}

TEST_CASE("fuse_latents concatenates channels, order matters, slicing inverts") {
  Rng rng(6);
  Tensor a = oracle::random_tensor(rng, {4, 4, 4});
  Tensor b = oracle::random_tensor(rng, {4, 4, 4});
  Tensor ab = fuse_latents(a, b);
  CHECK(ab.shape() == Shape{8, 4, 4});
  Tensor ba = fuse_latents(b, a);
  CHECK(ab.data() != ba.data());
  CHECK(slice(ab, 0, 0, 4).data() == a.data());
  CHECK(slice(ab, 0, 4, 4).data() == b.data());

  Tensor batched =
      fuse_latents(oracle::random_tensor(rng, {2, 4, 4, 4}), oracle::random_tensor(rng, {2, 4, 4, 4}));
  CHECK(batched.shape() == Shape{2, 8, 4, 4});
  CHECK_THROWS_AS(fuse_latents(a, oracle::random_tensor(rng, {4, 2, 2})), ShapeError);
}

TEST_CASE("frozen ParamSet gets no gradients and keeps its bits") {
  auto [spec, params] = build_network(NetworkRole::live_encoder, 16, 4, 3);
  params.set_trainable(false);
  std::vector<std::vector<double>> before;
  for (const Param& p : params.params) before.push_back(p.value.data());

  Rng rng(7);
  Tensor x = oracle::random_tensor(rng, {2, 3, 16, 16}, 0.0, 1.0);
  Tape tape;
  Tensor out = forward(spec, params, x).output;
  GradMap grads = tape.backward(mean(square(out)));
  for (const Param& p : params.params) CHECK(grads.count(p.value.id()) == 0);

  AdamState state;
  adam_step(params, grads, state, 1e-3, 0.9, 0.999, 1e-8);
  for (size_t i = 0; i < params.params.size(); ++i) CHECK(params.params[i].value.data() == before[i]);
}

TEST_CASE("forward trace records executed networks") {
  Rng rng(8);
  auto [enc_spec, enc] = build_network(NetworkRole::spoof_encoder, 16, 4, 3);
  auto [map_spec, mapd] = build_network(NetworkRole::map_decoder, 16, 4, 3);
  Tensor x = oracle::random_tensor(rng, {1, 3, 16, 16}, 0.0, 1.0);
  ForwardTrace trace;
  Tensor f = forward(enc_spec, enc, x).output;
  forward(map_spec, mapd, f);
  CHECK(trace.names() == std::vector<std::string>{"spoof_encoder", "map_decoder"});
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

Checkpoint tiny_stage1_checkpoint(uint64_t seed) {
  Checkpoint ckpt;
  ckpt.stage = "stage1";
  ckpt.networks.emplace("live_encoder", build_network(NetworkRole::live_encoder, 16, 4, seed).second);
  ckpt.networks.emplace("live_decoder", build_network(NetworkRole::live_decoder, 16, 4, seed).second);
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.latent_channels = 4;
  cfg.seed = seed;
  ckpt.config_json = cfg.to_json();
  ckpt.seed = seed;
  ckpt.epochs = 10;
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint ckpt = tiny_stage1_checkpoint(21);
  const std::string path = temp_path("dsfl_ckpt_roundtrip.bin");
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.stage == "stage1");
  CHECK(loaded.seed == ckpt.seed);
  CHECK(loaded.epochs == ckpt.epochs);
  CHECK(loaded.config_json == ckpt.config_json);
  CHECK(loaded.network_bytes("live_encoder") == ckpt.network_bytes("live_encoder"));
  CHECK(loaded.network_bytes("live_decoder") == ckpt.network_bytes("live_decoder"));

  // save the loaded copy again: identical file bytes
  const std::string path2 = temp_path("dsfl_ckpt_roundtrip2.bin");
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("stage mismatch is an explicit error") {
  Checkpoint ckpt = tiny_stage1_checkpoint(4);
  CHECK_THROWS_AS(require_stage(ckpt, "stage2"), CheckpointError);
  CHECK_NOTHROW(require_stage(ckpt, "stage1"));
}

TEST_CASE("truncated and corrupted files are rejected") {
  Checkpoint ckpt = tiny_stage1_checkpoint(5);
  const std::string path = temp_path("dsfl_ckpt_trunc.bin");
  save_checkpoint(ckpt, path);
  std::ifstream f(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  f.close();
  auto rewrite = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SUBCASE("truncated") {
    rewrite(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    rewrite(bytes);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("version mismatch") {
    bytes[4] = 99;  // little-endian low byte of the version field
    rewrite(bytes);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("trailing garbage") {
    rewrite(bytes + "junk");
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  std::remove(path.c_str());
}

TEST_CASE("stage contents are validated on save") {
  Checkpoint ckpt = tiny_stage1_checkpoint(6);
  ckpt.stage = "stage2";  // seven networks required, only two present
  CHECK_THROWS_AS(save_checkpoint(ckpt, temp_path("dsfl_bad.bin")), CheckpointError);
  ckpt.stage = "nonsense";
  CHECK_THROWS_AS(save_checkpoint(ckpt, temp_path("dsfl_bad.bin")), CheckpointError);
}
