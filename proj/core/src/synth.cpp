#include "dfcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dfcnn/params.hpp"

namespace dfcnn {

namespace {

constexpr std::uint64_t kBlobStream = 0x9E3779B97F4A7C15ULL;

std::vector<double> background(int size, Rng& rng, double noise_sigma) {
  const double level = rng.uniform(0.25, 0.6);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double slope = rng.uniform(0.0, 0.25);
  const double freq = rng.uniform(0.5, 1.5);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wave = rng.uniform(0.0, 0.08);
  const double bowl = rng.uniform(-0.4, 0.4);
  std::vector<double> img(static_cast<std::size_t>(size) * size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double u = (j + 0.5) / size - 0.5;
      const double v = (i + 0.5) / size - 0.5;
      const double along = u * std::cos(angle) + v * std::sin(angle);
      // The random bowl hides where the blobs tend to sit from a per-pixel
      // linear model; local contrast is unaffected.
      const double broad = bowl * (u * u + v * v);
      img[static_cast<std::size_t>(i) * size + j] =
          level + slope * along + broad +
          wave * std::sin(2.0 * std::numbers::pi * freq * (u - v) + phase) +
          noise_sigma * rng.normal();
    }
  }
  return img;
}

void add_blobs(std::vector<double>& img, int size, Rng& rng) {
  const int count = 1 + static_cast<int>(rng.below(3));
  for (int b = 0; b < count; ++b) {
    const double cy = rng.uniform(0.15, 0.85) * size;
    const double cx = rng.uniform(0.15, 0.85) * size;
    const double ry = rng.uniform(0.07, 0.14) * size;
    const double rx = rng.uniform(0.07, 0.14) * size;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.3, 0.45);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        const double dy = i + 0.5 - cy;
        const double dx = j + 0.5 - cx;
        const double a = (dx * ct + dy * st) / rx;
        const double c = (-dx * st + dy * ct) / ry;
        img[static_cast<std::size_t>(i) * size + j] += amp * std::exp(-0.5 * (a * a + c * c));
      }
    }
  }
}

TensorF to_tensor(const std::vector<double>& img, int size) {
  TensorF t({1, size, size, 3});
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const float v = static_cast<float>(
          std::clamp(img[static_cast<std::size_t>(i) * size + j], 0.0, 1.0));
      for (int c = 0; c < 3; ++c) t(0, i, j, c) = v;
    }
  }
  return t;
}

RawImage to_raw(const TensorF& t) {
  RawImage raw;
  raw.width = static_cast<int>(t.w());
  raw.height = static_cast<int>(t.h());
  raw.channels = 1;
  raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height);
  for (int i = 0; i < raw.height; ++i) {
    for (int j = 0; j < raw.width; ++j) {
      raw.pixels[static_cast<std::size_t>(i) * raw.width + j] =
          static_cast<std::uint8_t>(std::lround(t(0, i, j, 0) * 255.0f));
    }
  }
  return raw;
}

}  // namespace

std::vector<LabeledImage> synth_generate(const SynthOptions& options) {
  if (options.per_class < 1) throw Error("synth: need at least one image per class");
  if (options.size < 1 || options.size_multiple < 1 ||
      options.size % options.size_multiple != 0) {
    throw Error("synth: image size " + std::to_string(options.size) +
                " must be positive and divisible by " + std::to_string(options.size_multiple));
  }
  if (options.noise_sigma < 0.0) throw Error("synth: noise sigma must be >= 0");
  std::vector<LabeledImage> normals;
  std::vector<LabeledImage> opacities;
  for (int k = 0; k < options.per_class; ++k) {
    Rng bg_rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(k));
    Rng blob_rng((options.seed * 1000003ULL + static_cast<std::uint64_t>(k)) ^ kBlobStream);
    std::vector<double> img = background(options.size, bg_rng, options.noise_sigma);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%05d", k);
    normals.push_back({to_tensor(img, options.size), kNormal, std::string(name) + "_n"});
    add_blobs(img, options.size, blob_rng);
    opacities.push_back({to_tensor(img, options.size), kOpacity, std::string(name) + "_o"});
  }
  std::vector<LabeledImage> out = std::move(normals);
  for (auto& img : opacities) out.push_back(std::move(img));
  return out;
}

void write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& train,
                         int val_per_class) {
  SynthOptions val = train;
  val.per_class = val_per_class;
  val.seed = train.seed ^ 0xA5A5A5A5ULL;
  const std::pair<const char*, SynthOptions> splits[] = {{"train", train}, {"val", val}};
  for (const auto& [split, opts] : splits) {
    for (const LabeledImage& img : synth_generate(opts)) {
      const auto folder = dir / split / (img.label == kOpacity ? "OPACITY" : "NORMAL");
      std::filesystem::create_directories(folder);
      write_png(folder / (img.source + ".png"), to_raw(img.pixels));
    }
  }
}

}  // namespace dfcnn
