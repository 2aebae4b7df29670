#include "dfcnn/data_io.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace dfcnn {

TensorF resize_normalize(const RawImage& image, int target) {
  if (image.width <= 0 || image.height <= 0) throw Error("resize_normalize: empty image");
  if (target <= 0) throw Error("resize_normalize: target size must be positive");
  if (image.channels != 1 && image.channels != 3) {
    throw Error("resize_normalize: expected 1 or 3 channels, got " +
                std::to_string(image.channels));
  }
  if (image.pixels.size() !=
      static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw Error("resize_normalize: pixel buffer does not match dimensions");
  }
  TensorF out({1, target, target, 3});
  const double sy = static_cast<double>(image.height) / target;
  const double sx = static_cast<double>(image.width) / target;
  auto px = [&](int y, int x, int c) {
    const int ch = image.channels == 1 ? 0 : c;
    return static_cast<double>(
        image.pixels[(static_cast<std::size_t>(y) * image.width + x) * image.channels + ch]);
  };
  for (int i = 0; i < target; ++i) {
    const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int j = 0; j < target; ++j) {
      const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = px(y0, x0, c) * (1.0 - wx) + px(y0, x1, c) * wx;
        const double bottom = px(y1, x0, c) * (1.0 - wx) + px(y1, x1, c) * wx;
        out(0, i, j, c) = static_cast<float>((top * (1.0 - wy) + bottom * wy) / 255.0);
      }
    }
  }
  return out;
}

DatasetStats compute_stats(std::span<const std::pair<int, int>> width_height,
                           std::size_t normal, std::size_t opacity) {
  DatasetStats s;
  s.normal = normal;
  s.opacity = opacity;
  if (width_height.empty()) return s;
  const double n = static_cast<double>(width_height.size());
  for (auto [w, h] : width_height) {
    s.width_mean += w;
    s.height_mean += h;
  }
  s.width_mean /= n;
  s.height_mean /= n;
  for (auto [w, h] : width_height) {
    s.width_std += (w - s.width_mean) * (w - s.width_mean);
    s.height_std += (h - s.height_mean) * (h - s.height_mean);
  }
  s.width_std = std::sqrt(s.width_std / n);
  s.height_std = std::sqrt(s.height_std / n);
  return s;
}

Dataset Dataset::from_images(std::vector<LabeledImage> images) {
  Dataset ds;
  std::stable_sort(images.begin(), images.end(),
                   [](const LabeledImage& a, const LabeledImage& b) { return a.label < b.label; });
  for (LabeledImage& img : images) {
    const Shape& s = img.pixels.shape();
    if (s.n != 1 || s.h != s.w || s.c != 3) {
      throw ShapeError("dataset images must be (1, S, S, 3), got " + s.str());
    }
    if (ds.image_size_ == 0) ds.image_size_ = static_cast<int>(s.h);
    if (s.h != ds.image_size_) throw ShapeError("dataset images differ in size");
    if (img.label != kNormal && img.label != kOpacity) throw Error("label must be 0 or 1");
    Sample sample;
    sample.source = std::move(img.source);
    sample.label = img.label;
    sample.pixels = std::move(img.pixels);
    ds.samples_.push_back(std::move(sample));
  }
  return ds;
}

TensorF Dataset::image(std::size_t i) const {
  const Sample& s = samples_.at(i);
  if (s.pixels) return *s.pixels;
  return resize_normalize(decode_image(s.path), image_size_);
}

TensorF Dataset::batch(std::span<const std::size_t> indices) const {
  const std::int64_t per = std::int64_t{image_size_} * image_size_ * 3;
  TensorF out({static_cast<std::int64_t>(indices.size()), image_size_, image_size_, 3});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const TensorF img = image(indices[k]);
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + k * per);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].label == label) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("missing directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

}  // namespace

SplitDataset load_dataset(const std::filesystem::path& root, int image_size, bool preload) {
  if (image_size <= 0) throw Error("image size must be positive");
  SplitDataset split;
  const std::pair<Dataset*, DatasetStats*> targets[] = {{&split.train, &split.train_stats},
                                                        {&split.val, &split.val_stats}};
  const char* names[] = {"train", "val"};
  for (int s = 0; s < 2; ++s) {
    Dataset& ds = *targets[s].first;
    ds.image_size_ = image_size;
    std::vector<std::pair<int, int>> dims;
    std::size_t counts[2] = {0, 0};
    const char* classes[] = {"NORMAL", "OPACITY"};
    for (int label = 0; label < 2; ++label) {
      for (const auto& file : sorted_files(root / names[s] / classes[label])) {
        RawImage raw;
        try {
          raw = decode_image(file);
        } catch (const Error& e) {
          spdlog::warn("skipping unreadable image: {}", e.what());
          continue;
        }
        dims.emplace_back(raw.width, raw.height);
        ++counts[label];
        Dataset::Sample sample;
        sample.source = std::string(names[s]) + "/" + classes[label] + "/" +
                        file.filename().string();
        sample.label = label;
        sample.path = file;
        if (preload) sample.pixels = resize_normalize(raw, image_size);
        ds.samples_.push_back(std::move(sample));
      }
    }
    *targets[s].second = compute_stats(dims, counts[0], counts[1]);
  }
  return split;
}

std::string stats_json(const DatasetStats& train, const DatasetStats& val) {
  auto one = [](const DatasetStats& s) {
    return nlohmann::json{{"normal", s.normal},         {"opacity", s.opacity},
                          {"width_mean", s.width_mean}, {"width_std", s.width_std},
                          {"height_mean", s.height_mean}, {"height_std", s.height_std}};
  };
  return nlohmann::json{{"train", one(train)}, {"val", one(val)}}.dump(2);
}

}  // namespace dfcnn
