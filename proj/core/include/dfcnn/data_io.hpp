#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfcnn/tensor.hpp"

namespace dfcnn {

inline constexpr int kNormal = 0;
inline constexpr int kOpacity = 1;

/// Decoded 8-bit image, interleaved row-major, 1 (gray) or 3 (RGB) channels.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes a PNG or JPEG file (detected by signature). Alpha is dropped.
RawImage decode_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

/// Bilinear resize (half-pixel centres, edge clamped) to target x target,
/// scaled to [0, 1] by /255; grayscale is replicated to three channels.
/// Returns (1, target, target, 3).
TensorF resize_normalize(const RawImage& image, int target);

struct LabeledImage {
  TensorF pixels;
  int label = kNormal;
  std::string source;
};

/// Raw-dimension statistics of a split, gathered before resizing.
/// Standard deviations are population (divide by N) values.
struct DatasetStats {
  std::size_t normal = 0;
  std::size_t opacity = 0;
  double width_mean = 0.0;
  double width_std = 0.0;
  double height_mean = 0.0;
  double height_std = 0.0;
};

DatasetStats compute_stats(std::span<const std::pair<int, int>> width_height,
                           std::size_t normal, std::size_t opacity);

/// Ordered collection of labeled images. Samples are either held in memory or
/// decoded from disk on access. Order is: all normal images, then all opacity
/// images, each lexicographic by file name.
class Dataset {
 public:
  Dataset() = default;
  static Dataset from_images(std::vector<LabeledImage> images);

  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] int label(std::size_t i) const { return samples_.at(i).label; }
  [[nodiscard]] const std::string& source(std::size_t i) const { return samples_.at(i).source; }
  [[nodiscard]] int image_size() const { return image_size_; }

  /// (1, S, S, 3) pixels of sample i.
  [[nodiscard]] TensorF image(std::size_t i) const;
  /// (n, S, S, 3) stacked pixels of the given samples.
  [[nodiscard]] TensorF batch(std::span<const std::size_t> indices) const;

  /// Dataset positions of one class, in dataset order.
  [[nodiscard]] std::vector<std::size_t> indices_of(int label) const;

 private:
  friend struct SplitDataset load_dataset(const std::filesystem::path&, int, bool);
  struct Sample {
    std::string source;
    int label = kNormal;
    std::filesystem::path path;
    std::optional<TensorF> pixels;
  };
  std::vector<Sample> samples_;
  int image_size_ = 0;
};

struct SplitDataset {
  Dataset train;
  Dataset val;
  DatasetStats train_stats;
  DatasetStats val_stats;
};

/// Reads `<root>/{train,val}/{NORMAL,OPACITY}/*`. Every file is decoded once
/// to collect statistics; unreadable files are skipped with a warning and do
/// not count. Pixels are decoded again lazily unless `preload` is set.
SplitDataset load_dataset(const std::filesystem::path& root, int image_size = 256,
                          bool preload = false);

/// Statistics summary as JSON text.
std::string stats_json(const DatasetStats& train, const DatasetStats& val);

}  // namespace dfcnn
