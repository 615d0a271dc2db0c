#include "dsfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dsfl/image_io.hpp"
#include "dsfl/rng.hpp"

namespace fs = std::filesystem;

namespace dsfl {

std::set<std::string> Dataset::attack_types() const {
  std::set<std::string> types;
  for (const Sample& s : samples)
    if (s.label == Label::spoof) types.insert(s.attack_type);
  return types;
}

size_t Dataset::count(Label label) const {
  size_t n = 0;
  for (const Sample& s : samples) n += s.label == label;
  return n;
}

const std::vector<std::string>& known_patterns() {
  static const std::vector<std::string> patterns = {"stripes", "dots", "checker", "blur", "blocks", "rings"};
  return patterns;
}

void SynthSpec::validate() const {
  if (image_size < 8) throw ValueError("synth: image_size too small");
  if (n_live < 1 || n_per_attack < 1) throw ValueError("synth: counts must be >= 1");
  if (patterns.size() < 2) throw ValueError("synth: need at least 2 attack patterns for leave-one-out");
  if (noise < 0) throw ValueError("synth: negative noise level");
  for (const std::string& p : patterns) {
    const auto& known = known_patterns();
    if (std::find(known.begin(), known.end(), p) == known.end()) throw ValueError("synth: unknown pattern " + p);
  }
}

// ---- face painter ----------------------------------------------------------------

namespace {

struct Canvas {
  int size;
  std::vector<double> px;  // [3,S,S]

  double& at(int c, int y, int x) { return px[static_cast<size_t>((c * size + y) * size + x)]; }
};

double smoothstep(double edge0, double edge1, double x) {
  double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// Smooth low-frequency composition: gradient background, elliptical face
/// region, two eye blobs, a mouth bar. All geometry/colors from rng.
void paint_face(Canvas& cv, Rng& rng) {
  const int S = cv.size;
  const double bg0[3] = {rng.uniform(0.25, 0.85), rng.uniform(0.25, 0.85), rng.uniform(0.25, 0.85)};
  const double bg1[3] = {rng.uniform(0.25, 0.85), rng.uniform(0.25, 0.85), rng.uniform(0.25, 0.85)};
  const double bg_theta = rng.uniform(0.0, 2.0 * M_PI);

  const double fcx = 0.5 + rng.uniform(-0.06, 0.06);
  const double fcy = 0.48 + rng.uniform(-0.06, 0.06);
  const double fa = rng.uniform(0.26, 0.36);  // horizontal semi-axis
  const double fb = rng.uniform(0.32, 0.44);  // vertical semi-axis
  const double skin_r = rng.uniform(0.55, 0.88);
  const double skin[3] = {skin_r, skin_r * rng.uniform(0.72, 0.88), skin_r * rng.uniform(0.55, 0.75)};

  const double eye_dx = rng.uniform(0.11, 0.16);
  const double eye_dy = rng.uniform(0.08, 0.14);
  const double eye_sigma = rng.uniform(0.03, 0.045);
  const double eye_col[3] = {rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.25)};

  const double mouth_dy = rng.uniform(0.13, 0.2);
  const double mouth_hw = rng.uniform(0.07, 0.13);
  const double mouth_hh = rng.uniform(0.015, 0.03);
  const double mouth_col[3] = {rng.uniform(0.3, 0.55), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)};

  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double u = (x + 0.5) / S;
      const double v = (y + 0.5) / S;
      const double t = std::clamp(0.5 + 0.5 * ((u - 0.5) * std::cos(bg_theta) + (v - 0.5) * std::sin(bg_theta)) * 2.0, 0.0, 1.0);
      double col[3];
      for (int c = 0; c < 3; ++c) col[c] = bg0[c] + (bg1[c] - bg0[c]) * t;

      const double de = (u - fcx) * (u - fcx) / (fa * fa) + (v - fcy) * (v - fcy) / (fb * fb);
      const double face_alpha = smoothstep(1.2, 0.85, de);
      for (int c = 0; c < 3; ++c) col[c] += (skin[c] - col[c]) * face_alpha;

      for (int side = -1; side <= 1; side += 2) {
        const double ex = fcx + side * eye_dx;
        const double ey = fcy - eye_dy;
        const double r2 = (u - ex) * (u - ex) + (v - ey) * (v - ey);
        const double a = std::exp(-r2 / (2.0 * eye_sigma * eye_sigma)) * face_alpha;
        for (int c = 0; c < 3; ++c) col[c] += (eye_col[c] - col[c]) * a;
      }

      const double mx = std::abs(u - fcx);
      const double my = std::abs(v - (fcy + mouth_dy));
      const double ma = smoothstep(mouth_hw * 1.4, mouth_hw * 0.7, mx) * smoothstep(mouth_hh * 2.2, mouth_hh, my) * face_alpha;
      for (int c = 0; c < 3; ++c) col[c] += (mouth_col[c] - col[c]) * ma;

      for (int c = 0; c < 3; ++c) cv.at(c, y, x) = col[c];
    }
}

void add_noise(Canvas& cv, Rng& rng, double level) {
  if (level <= 0) return;
  for (double& v : cv.px) v += rng.normal(0.0, level);
}

void apply_pattern(Canvas& cv, const std::string& pattern, Rng& rng) {
  const int S = cv.size;
  if (pattern == "stripes") {
    // sinusoidal bands in a mid-frequency band, like replay moire
    const double freq = rng.uniform(6.0, 9.0);
    const double theta = rng.uniform(0.0, M_PI);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double amp = 0.18;
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double u = (x + 0.5) / S, v = (y + 0.5) / S;
        const double s = amp * std::sin(2.0 * M_PI * freq * (u * std::cos(theta) + v * std::sin(theta)) + phase);
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) += s;
      }
  } else if (pattern == "dots") {
    // halftone grid of dark dots, like print artifacts
    const double cell = rng.uniform(S / 10.0, S / 6.0);
    const double radius = 0.34 * cell;
    const double ox = rng.uniform(0.0, cell), oy = rng.uniform(0.0, cell);
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double gx = std::fmod(x + ox, cell) - cell / 2.0;
        const double gy = std::fmod(y + oy, cell) - cell / 2.0;
        const double d = std::sqrt(gx * gx + gy * gy);
        const double a = smoothstep(radius, radius * 0.5, d);
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) *= 1.0 - 0.55 * a;
      }
  } else if (pattern == "checker") {
    const int block = std::max(2, static_cast<int>(std::lround(rng.uniform(S / 10.0, S / 6.0))));
    const double amp = 0.13;
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double s = ((x / block + y / block) % 2 == 0) ? amp : -amp;
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) += s;
      }
  } else if (pattern == "blur") {
    // separable box blur: low-pass of the whole (already noisy) image
    const int r = static_cast<int>(rng.uniform_int(2, 3));
    std::vector<double> tmp(cv.px.size());
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          double acc = 0.0;
          for (int k = -r; k <= r; ++k) acc += cv.at(c, y, std::clamp(x + k, 0, S - 1));
          tmp[static_cast<size_t>((c * S + y) * S + x)] = acc / (2 * r + 1);
        }
    cv.px = tmp;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          double acc = 0.0;
          for (int k = -r; k <= r; ++k) acc += tmp[static_cast<size_t>((c * S + std::clamp(y + k, 0, S - 1)) * S + x)];
          cv.at(c, y, x) = acc / (2 * r + 1);
        }
  } else if (pattern == "blocks") {
    // flat occluding rectangle
    const int w = static_cast<int>(std::lround(rng.uniform(0.35, 0.55) * S));
    const int h = static_cast<int>(std::lround(rng.uniform(0.35, 0.55) * S));
    const int x0 = static_cast<int>(rng.uniform_int(0, S - w));
    const int y0 = static_cast<int>(rng.uniform_int(0, S - h));
    const double col[3] = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x)
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) = col[c];
  } else if (pattern == "rings") {
    const double freq = rng.uniform(5.0, 8.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double ccx = 0.5 + rng.uniform(-0.1, 0.1), ccy = 0.5 + rng.uniform(-0.1, 0.1);
    const double amp = 0.16;
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double u = (x + 0.5) / S - ccx, v = (y + 0.5) / S - ccy;
        const double r = std::sqrt(u * u + v * v);
        const double s = amp * std::sin(2.0 * M_PI * freq * r * 2.0 + phase);
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) += s;
      }
  } else {
    throw ValueError("unknown pattern " + pattern);
  }
}

Tensor finish(Canvas& cv) {
  for (double& v : cv.px) v = std::clamp(v, 0.0, 1.0);
  return Tensor::from_data({3, cv.size, cv.size}, std::move(cv.px));
}

std::string zero_pad(int v, int width = 4) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  for (int i = 0; i < spec.n_live; ++i) {
    const std::string id = "live_" + zero_pad(i);
    Rng rng(Rng::derive(spec.seed, id));
    Canvas cv{spec.image_size, std::vector<double>(static_cast<size_t>(3) * spec.image_size * spec.image_size)};
    paint_face(cv, rng);
    add_noise(cv, rng, spec.noise);
    ds.samples.push_back({id, finish(cv), Label::live, "none", "synthetic"});
  }
  for (const std::string& pattern : spec.patterns) {
    for (int i = 0; i < spec.n_per_attack; ++i) {
      const std::string id = pattern + "_" + zero_pad(i);
      Rng rng(Rng::derive(spec.seed, id));
      Canvas cv{spec.image_size, std::vector<double>(static_cast<size_t>(3) * spec.image_size * spec.image_size)};
      paint_face(cv, rng);
      add_noise(cv, rng, spec.noise);
      apply_pattern(cv, pattern, rng);
      ds.samples.push_back({id, finish(cv), Label::spoof, pattern, "synthetic"});
    }
  }
  return ds;
}

Dataset load_directory(const std::string& root, int image_size, int* skipped) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw IoError("no class directories under " + root);

  Dataset ds;
  int skip_count = 0;
  for (const std::string& cls : classes) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / cls)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    size_t loaded = 0;
    for (const std::string& file : files) {
      Tensor image;
      try {
        image = read_png(file, image_size);
      } catch (const IoError&) {
        ++skip_count;
        continue;
      }
      Sample s;
      s.id = cls + "/" + fs::path(file).stem().string();
      s.image = std::move(image);
      s.label = cls == "live" ? Label::live : Label::spoof;
      s.attack_type = cls == "live" ? "none" : cls;
      s.source = file;
      ds.samples.push_back(std::move(s));
      ++loaded;
    }
    if (loaded == 0) throw IoError("class directory " + cls + " has no readable PNG files");
  }
  if (skipped) *skipped = skip_count;
  return ds;
}

std::vector<ProtocolSpec> make_protocols(const Dataset& dataset, double live_train_fraction) {
  std::set<std::string> types = dataset.attack_types();
  if (types.size() < 2) throw ValueError("make_protocols: need >= 2 attack types, have " + std::to_string(types.size()));
  std::vector<ProtocolSpec> protocols;
  for (const std::string& heldout : types) {
    ProtocolSpec p;
    p.heldout_attack_type = heldout;
    p.live_train_fraction = live_train_fraction;
    for (const std::string& t : types)
      if (t != heldout) p.train_attack_types.insert(t);
    protocols.push_back(std::move(p));
  }
  return protocols;
}

void split_live(const Dataset& dataset, double fraction, std::vector<size_t>& train_idx,
                std::vector<size_t>& test_idx) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValueError("live_train_fraction must be in (0,1)");
  struct Entry {
    uint64_t hash;
    std::string id;
    size_t index;
  };
  std::vector<Entry> lives;
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    if (dataset.samples[i].label == Label::live) lives.push_back({fnv1a(dataset.samples[i].id), dataset.samples[i].id, i});
  }
  std::sort(lives.begin(), lives.end(), [](const Entry& a, const Entry& b) {
    return a.hash != b.hash ? a.hash < b.hash : a.id < b.id;
  });
  const size_t n_train = static_cast<size_t>(std::ceil(fraction * static_cast<double>(lives.size())));
  train_idx.clear();
  test_idx.clear();
  for (size_t i = 0; i < lives.size(); ++i) (i < n_train ? train_idx : test_idx).push_back(lives[i].index);
}

Dataset resample_balanced(const Dataset& train, uint64_t seed) {
  size_t n_live = train.count(Label::live);
  size_t n_spoof = train.size() - n_live;
  if (n_live == 0 || n_spoof == 0) throw ValueError("resample_balanced: both classes must be nonempty");
  if (n_live == n_spoof) return train;

  const Label minority = n_live < n_spoof ? Label::live : Label::spoof;
  const size_t deficit = (n_live < n_spoof ? n_spoof - n_live : n_live - n_spoof);
  std::vector<size_t> pool;
  for (size_t i = 0; i < train.samples.size(); ++i)
    if (train.samples[i].label == minority) pool.push_back(i);

  Dataset out = train;
  Rng rng(Rng::derive(seed, "resample_balanced"));
  for (size_t k = 0; k < deficit; ++k) {
    size_t pick = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    out.samples.push_back(train.samples[pick]);
  }
  return out;
}

void write_manifest_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write manifest " + path);
  f << "id,label,attack_type,source\n";
  for (const Sample& s : dataset.samples) {
    f << s.id << "," << (s.label == Label::live ? "live" : "spoof") << "," << s.attack_type << "," << s.source << "\n";
  }
}

}  // namespace dsfl
