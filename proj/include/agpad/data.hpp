#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "agpad/image.hpp"
#include "agpad/rng.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

// ---------------------------------------------------------------------------
// Manifests

struct ManifestRecord {
  std::string path;   // relative to the manifest's directory
  int label = 0;      // 0 = live, 1 = pa
  std::string pa_type;
  std::string split;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace detail

/// CSV manifest `path,label[,pa_type][,split]`, one record per line, optional
/// header, `#` comment lines allowed. Paths must be unique.
inline Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path();
  std::set<std::string> seen;
  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto fields = detail::split_csv_line(stripped);
    if (row == 1 && !fields.empty() && fields[0] == "path") continue;  // header
    if (fields.size() < 2 || fields.size() > 4) {
      throw DataError(path + ":" + std::to_string(row) +
                      ": expected 2-4 fields (path,label[,pa_type][,split])");
    }
    ManifestRecord rec;
    rec.path = fields[0];
    if (rec.path.empty()) {
      throw DataError(path + ":" + std::to_string(row) + ": empty image path");
    }
    if (fields[1] == "live") {
      rec.label = 0;
    } else if (fields[1] == "pa") {
      rec.label = 1;
    } else {
      throw DataError(path + ":" + std::to_string(row) + ": unknown label '" +
                      fields[1] + "' (expected live|pa)");
    }
    if (fields.size() > 2) rec.pa_type = fields[2];
    if (fields.size() > 3) rec.split = fields[3];
    if (!seen.insert(rec.path).second) {
      throw DataError(path + ":" + std::to_string(row) + ": duplicate path '" +
                      rec.path + "'");
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty()) throw DataError(path + ": no records");
  return m;
}

/// Decode an image to a 1xHxW tensor in [0,1]; resized bilinearly to
/// target_size x target_size when target_size > 0.
inline Tensor<float> load_image(const std::string& path, int target_size = 0) {
  Tensor<float> t = tensor_from_image(read_pnm(path));
  if (target_size > 0 &&
      (t.dim(1) != target_size || t.dim(2) != target_size)) {
    t = resize_bilinear(t, target_size, target_size);
  }
  return t;
}

struct Sample {
  Tensor<float> image;
  int label = 0;
  std::string path;
};

struct Dataset {
  std::vector<Sample> samples;

  bool has_both_classes() const {
    bool live = false, pa = false;
    for (const auto& s : samples) (s.label == 0 ? live : pa) = true;
    return live && pa;
  }
};

/// Materialize every manifest record whose split matches (empty = all).
inline Dataset load_dataset(const Manifest& m, const std::string& split,
                            int input_size) {
  Dataset ds;
  for (const auto& rec : m.records) {
    if (!split.empty() && rec.split != split) continue;
    const std::string full = (m.base_dir / rec.path).string();
    ds.samples.push_back(Sample{load_image(full, input_size), rec.label,
                                rec.path});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class PaStyle { lattice_overlay, flat_disc };

inline std::string to_string(PaStyle s) {
  return s == PaStyle::lattice_overlay ? "lattice_overlay" : "flat_disc";
}

inline PaStyle pa_style_from_string(const std::string& s) {
  if (s == "lattice_overlay") return PaStyle::lattice_overlay;
  if (s == "flat_disc") return PaStyle::flat_disc;
  throw ConfigError("unknown PA style '" + s +
                    "' (expected lattice_overlay|flat_disc)");
}

/// Deterministic synthetic iris-like corpus standing in for real PAD data.
/// Live images are a concentric annulus with smooth radial/angular texture
/// plus fine grain; PA images carry either a high-frequency print lattice
/// (contact-lens-like) or a flattened low-texture disc (fake-eye-like).
/// `quality` in [0,1] degrades capture quality (blur + reflections), which
/// shrinks the live/PA texture margin.
struct SynthConfig {
  std::uint64_t seed = 7;
  int size = 64;
  int train_live = 500;
  int train_pa = 500;
  int test_live = 200;
  int test_pa = 200;
  PaStyle style = PaStyle::lattice_overlay;
  double noise = 0.03;
  double quality = 0.0;
};

struct SynthStats {
  double live_laplacian_variance = 0.0;
  double pa_laplacian_variance = 0.0;
};

/// Variance of the 4-neighbour Laplacian response over the interior; the
/// high-frequency energy statistic behind the constructed class margin.
template <typename S>
double laplacian_variance(const Tensor<S>& img) {
  const int h = img.dim(1), w = img.dim(2);
  double sum = 0.0, sum2 = 0.0;
  std::int64_t n = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double v = 4.0 * img(0, y, x) - img(0, y - 1, x) -
                       img(0, y + 1, x) - img(0, y, x - 1) - img(0, y, x + 1);
      sum += v;
      sum2 += v * v;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  return sum2 / static_cast<double>(n) - mean * mean;
}

namespace detail {

inline double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

inline void gaussian_blur_inplace(Tensor<float>& img, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    ksum += v;
  }
  for (auto& v : kernel) v /= ksum;
  const int h = img.dim(1), w = img.dim(2);
  Tensor<float> tmp(img.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = std::clamp(x + i, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * img(0, y, xi);
      }
      tmp(0, y, x) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = std::clamp(y + i, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(0, yi, x);
      }
      img(0, y, x) = static_cast<float>(acc);
    }
  }
}

inline Tensor<float> synth_image(const SynthConfig& cfg, int label,
                                 std::uint64_t image_seed) {
  const int s = cfg.size;
  Rng rng(image_seed);
  const double cx = s / 2.0 + rng.uniform(-0.04, 0.04) * s;
  const double cy = s / 2.0 + rng.uniform(-0.04, 0.04) * s;
  const double r_pupil = rng.uniform(0.10, 0.15) * s;
  const double r_iris = rng.uniform(0.30, 0.38) * s;

  const double sclera = rng.uniform(0.72, 0.82);
  const double pupil = rng.uniform(0.05, 0.09);
  const double iris_base = rng.uniform(0.40, 0.50);
  const int k_radial = rng.uniform_int(3, 5);
  const int k_angular = rng.uniform_int(8, 14);
  const double phase_r = rng.uniform(0.0, 2.0 * M_PI);
  const double phase_a = rng.uniform(0.0, 2.0 * M_PI);
  const double flat_value = rng.uniform(0.48, 0.56);
  const double lattice_phase_x = rng.uniform(0.0, 4.0);
  const double lattice_phase_y = rng.uniform(0.0, 4.0);

  Tensor<float> img({1, s, s});
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double theta = std::atan2(dy, dx);
      double v = sclera;
      const double w_iris = smoothstep(r_iris + 1.0, r_iris - 1.0, r);
      const double w_pupil = smoothstep(r_pupil + 1.0, r_pupil - 1.0, r);
      if (w_iris > 0.0) {
        double iris;
        if (label == 1 && cfg.style == PaStyle::flat_disc) {
          iris = flat_value + rng.uniform(-1.0, 1.0) * 0.004;
        } else {
          const double u = std::clamp((r - r_pupil) / (r_iris - r_pupil),
                                      0.0, 1.0);
          iris = iris_base + 0.07 * std::sin(2.0 * M_PI * k_radial * u + phase_r) +
                 0.08 * std::sin(k_angular * theta + phase_a) * (0.3 + 0.7 * u) +
                 rng.uniform(-1.0, 1.0) * cfg.noise;
          if (label == 1 && cfg.style == PaStyle::lattice_overlay) {
            // contact-lens print pattern: period-4 dot grid over the annulus
            const double gx =
                0.5 * (1.0 + std::cos(2.0 * M_PI * (x + lattice_phase_x) / 4.0));
            const double gy =
                0.5 * (1.0 + std::cos(2.0 * M_PI * (y + lattice_phase_y) / 4.0));
            const double dot = gx * gy;
            iris += 0.35 * (dot * dot - 0.25) * u;
          }
        }
        v = v * (1.0 - w_iris) + iris * w_iris;
      }
      if (w_pupil > 0.0 && !(label == 1 && cfg.style == PaStyle::flat_disc)) {
        v = v * (1.0 - w_pupil) + pupil * w_pupil;
      }
      img(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  if (cfg.quality > 0.0) {
    // smooth bright reflections, then blur; both scale with the knob
    for (int blob = 0; blob < 2; ++blob) {
      const double bx = cx + rng.uniform(-0.8, 0.8) * r_iris;
      const double by = cy + rng.uniform(-0.8, 0.8) * r_iris;
      const double br = rng.uniform(0.06, 0.12) * s;
      const double amp = 0.5 * cfg.quality * rng.uniform(0.6, 1.0);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          const double g = amp * std::exp(-0.5 * d2 / (br * br));
          img(0, y, x) = static_cast<float>(
              std::clamp(img(0, y, x) + g, 0.0, 1.0));
        }
      }
    }
    gaussian_blur_inplace(img, 1.4 * cfg.quality);
  }
  return img;
}

}  // namespace detail

/// Render one synthetic image (used by the generator and by tests that probe
/// the statistic sweep without touching the filesystem).
inline Tensor<float> synth_image(const SynthConfig& cfg, int label,
                                 const std::string& split, int index) {
  std::uint64_t h = hash_str(split);
  h = hash_mix(h, static_cast<std::uint64_t>(label));
  h = hash_mix(h, static_cast<std::uint64_t>(index));
  return detail::synth_image(cfg, label, derive_seed(cfg.seed, "synth", h));
}

/// Write the corpus (PGM images + manifest.csv + synth_stats.txt) under
/// out_dir. Deterministic: the same config yields byte-identical output.
inline SynthStats generate_synth(const SynthConfig& cfg,
                                 const std::string& out_dir) {
  if (cfg.train_live <= 0 || cfg.train_pa <= 0 || cfg.test_live <= 0 ||
      cfg.test_pa <= 0) {
    throw ConfigError("synthetic corpus needs positive per-class counts");
  }
  if (cfg.size < 16) throw ConfigError("synthetic image size too small");

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "test");

  std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
  if (!manifest) throw DataError("cannot write manifest under " + out_dir);
  manifest << "path,label,pa_type,split\n";

  const std::string pa_tag =
      cfg.style == PaStyle::lattice_overlay ? "lattice" : "disc";
  SynthStats stats;
  double live_acc = 0.0, pa_acc = 0.0;

  auto emit = [&](const std::string& split, int label, int count) {
    for (int i = 0; i < count; ++i) {
      Tensor<float> img = synth_image(cfg, label, split, i);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.pgm",
                    label == 0 ? "live" : "pa", i);
      const std::string rel = split + "/" + name;
      write_pgm((fs::path(out_dir) / rel).string(), image_from_tensor(img));
      manifest << rel << "," << (label == 0 ? "live" : "pa") << ","
               << (label == 0 ? "" : pa_tag) << "," << split << "\n";
      if (split == "train") {
        (label == 0 ? live_acc : pa_acc) += laplacian_variance(img);
      }
    }
  };
  emit("train", 0, cfg.train_live);
  emit("train", 1, cfg.train_pa);
  emit("test", 0, cfg.test_live);
  emit("test", 1, cfg.test_pa);
  manifest.close();

  stats.live_laplacian_variance = live_acc / cfg.train_live;
  stats.pa_laplacian_variance = pa_acc / cfg.train_pa;

  {
    std::ofstream os(fs::path(out_dir) / "synth_stats.txt");
    os << "live_laplacian_variance=" << stats.live_laplacian_variance << "\n"
       << "pa_laplacian_variance=" << stats.pa_laplacian_variance << "\n"
       << "pa_to_live_ratio="
       << stats.pa_laplacian_variance / stats.live_laplacian_variance << "\n";
  }

  // The lattice corpus is constructed to be learnable: at full quality the
  // PA class must carry at least twice the live high-frequency energy.
  if (cfg.style == PaStyle::lattice_overlay && cfg.quality == 0.0 &&
      stats.pa_laplacian_variance < 2.0 * stats.live_laplacian_variance) {
    throw NumericError("synthetic corpus lost its constructed margin");
  }
  return stats;
}

}  // namespace agpad
