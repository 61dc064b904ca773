#pragma once

// Synthetic paired dataset: gt/NNNN.png, lq/NNNN.png and manifest.csv
// (id,split,gt,lq). The last tenth of the ids form the test split.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "freqdoor/evaluation.hpp"
#include "freqdoor/resample.hpp"
#include "freqdoor/triggers.hpp"

namespace freqdoor {

namespace detail {
// Soft coverage of a signed distance (negative inside), about one pixel wide.
inline double cover(double sd) { return std::clamp(0.5 - sd, 0.0, 1.0); }

inline double ellipse_sd(double y, double x, double cy, double cx, double ry, double rx) {
  const double dy = (y - cy) / ry, dx = (x - cx) / rx;
  return (std::sqrt(dy * dy + dx * dx) - 1.0) * std::min(ry, rx);
}

inline void paint(Image& img, int y, int x, const std::array<double, 3>& col, double a) {
  for (int c = 0; c < img.channels(); ++c) {
    const double v = img.channels() == 1 ? (col[0] + col[1] + col[2]) / 3.0 : col[std::size_t(c)];
    img.at(y, x, c) = (1.0 - a) * img.at(y, x, c) + a * v;
  }
}
}  // namespace detail

/// Seeded face-like image: textured background with blobs and edges, a head
/// ellipse with hair, eyes, brows, nose and mouth.
inline Image synth_face(int size, int channels, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto jitter = [&](double base, double amt) { return base + amt * (u(rng) - 0.5); };
  const double s = size;
  Image img = procedural_texture(size, size, channels, derive_seed(seed, 1));
  for (auto& v : img.tensor().vec()) v = 0.3 + 0.4 * v;

  // Background blobs and a hard-edged bar.
  const int blobs = 2 + int(u(rng) * 3);
  for (int b = 0; b < blobs; ++b) {
    const auto col = detail::random_color(rng);
    const double cy = u(rng) * s, cx = u(rng) * s, r = s * (0.08 + 0.15 * u(rng));
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r * r);
        detail::paint(img, y, x, col, 0.8 * std::exp(-d2));
      }
  }
  {
    const auto col = detail::random_color(rng);
    const bool vertical = u(rng) < 0.5;
    const double p0 = u(rng) * s, width = s * (0.04 + 0.08 * u(rng));
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double t = vertical ? x : y;
        detail::paint(img, y, x, col, detail::cover(std::abs(t - p0) - width / 2));
      }
  }

  const double cy = jitter(0.54, 0.08) * s, cx = jitter(0.5, 0.08) * s;
  const double ry = jitter(0.34, 0.06) * s, rx = jitter(0.26, 0.05) * s;
  const std::array<double, 3> skin{jitter(0.78, 0.2), jitter(0.6, 0.2), jitter(0.48, 0.2)};
  const std::array<double, 3> hair{jitter(0.25, 0.3), jitter(0.17, 0.2), jitter(0.1, 0.15)};
  const std::array<double, 3> iris{jitter(0.3, 0.4), jitter(0.35, 0.4), jitter(0.45, 0.4)};
  const std::array<double, 3> lips{jitter(0.7, 0.2), jitter(0.3, 0.2), jitter(0.3, 0.2)};
  const std::array<double, 3> white{0.95, 0.95, 0.93};
  const double eye_dx = rx * jitter(0.42, 0.08), eye_y = cy - ry * jitter(0.15, 0.08);
  const double eye_rx = rx * 0.2, eye_ry = ry * 0.09;
  const double mouth_y = cy + ry * jitter(0.5, 0.1), mouth_rx = rx * jitter(0.42, 0.15);
  const double tex_f = 2 * M_PI / (3.0 + 3.0 * u(rng));

  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double fy = y + 0.5, fx = x + 0.5;
      // Hair: larger ellipse behind the head, upper part only.
      const double hair_sd = detail::ellipse_sd(fy, fx, cy - ry * 0.12, cx, ry * 1.08, rx * 1.15);
      if (fy < cy + ry * 0.1) detail::paint(img, y, x, hair, detail::cover(hair_sd));
      const double face = detail::cover(detail::ellipse_sd(fy, fx, cy, cx, ry, rx));
      if (face > 0) {
        const double shade = 0.92 + 0.08 * std::sin(tex_f * fx) * std::sin(tex_f * fy) - 0.15 * (fx - cx) / s;
        const std::array<double, 3> sk{skin[0] * shade, skin[1] * shade, skin[2] * shade};
        detail::paint(img, y, x, sk, face);
      }
      for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * eye_dx;
        detail::paint(img, y, x, white, detail::cover(detail::ellipse_sd(fy, fx, eye_y, ex, eye_ry, eye_rx)));
        detail::paint(img, y, x, iris, detail::cover(detail::ellipse_sd(fy, fx, eye_y, ex, eye_ry * 0.9, eye_ry * 0.9)));
        const double brow = std::abs(fy - (eye_y - eye_ry * 2.6 + 0.02 * (fx - ex) * (fx - ex) / rx)) - 0.8;
        if (std::abs(fx - ex) < eye_rx * 1.2) detail::paint(img, y, x, hair, detail::cover(brow));
      }
      // Nose: short vertical stroke.
      if (fy > eye_y + eye_ry && fy < mouth_y - ry * 0.15)
        detail::paint(img, y, x, {skin[0] * 0.7, skin[1] * 0.7, skin[2] * 0.7}, 0.7 * detail::cover(std::abs(fx - cx) - 0.6));
      detail::paint(img, y, x, lips,
                    detail::cover(detail::ellipse_sd(fy, fx, mouth_y, cx, ry * 0.07, mouth_rx)));
    }
  img.clamp01();
  return img;
}

struct DatasetEntry {
  int id = 0;
  std::string split;  ///< "train" or "test"
};

/// Writes `count` synthetic pairs and the manifest; returns the entries.
inline std::vector<DatasetEntry> synth_dataset(int count, int size, std::uint64_t seed,
                                               const std::filesystem::path& out_dir,
                                               DegradationConfig degradation = {}, int channels = 3, int workers = 1) {
  require(count >= 10, "synth_dataset: count must be >= 10");
  require(size >= 32, "synth_dataset: size must be >= 32");
  degradation.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "gt", ec);
  std::filesystem::create_directories(out_dir / "lq", ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());
  const int test_from = count - count / 10;
  std::vector<DatasetEntry> entries;
  entries.resize(std::size_t(count));
  nn::parallel_for(std::size_t(count), workers, [&](std::size_t i) {
    const Image gt = quantize8(synth_face(size, channels, derive_seed(seed, i)));
    DegradationConfig d = degradation;
    d.seed = derive_seed(seed ^ 0x5eedULL, i);
    const Image lq = quantize8(degrade(gt, d));
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.png", i);
    save_png(gt, out_dir / "gt" / name);
    save_png(lq, out_dir / "lq" / name);
    entries[i] = {int(i), int(i) >= test_from ? "test" : "train"};
  });
  CsvTable man;
  man.header = {"id", "split", "gt", "lq"};
  for (const auto& e : entries) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.png", e.id);
    man.add({std::to_string(e.id), e.split, std::string("gt/") + name, std::string("lq/") + name});
  }
  man.write(out_dir / "manifest.csv");
  return entries;
}

struct Dataset {
  PairedSet train;
  PairedSet test;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto man_path = dir / "manifest.csv";
  if (!std::filesystem::exists(man_path)) throw DependencyError("dataset manifest missing: " + man_path.string());
  const auto man = read_csv(man_path);
  require(man.header == std::vector<std::string>({"id", "split", "gt", "lq"}), "unexpected dataset manifest header");
  Dataset ds;
  for (const auto& r : man.rows) {
    const int id = std::stoi(r[0]);
    Image gt = load_png(dir / r[2]), lq = load_png(dir / r[3]);
    require_same_shape(gt, lq, "dataset pair");
    auto& set = r[1] == "test" ? ds.test : ds.train;
    (r[1] == "test" ? ds.test_ids : ds.train_ids).push_back(id);
    set.gt.push_back(std::move(gt));
    set.lq.push_back(std::move(lq));
  }
  require(ds.train.size() > 0 && ds.test.size() > 0, "dataset needs both train and test entries");
  return ds;
}

}  // namespace freqdoor
