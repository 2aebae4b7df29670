#pragma once

// Deterministic stand-in for chest radiographs: smooth backgrounds with noise,
// plus blurred bright ellipses on the opacity class.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dfcnn/data_io.hpp"

namespace dfcnn {

struct SynthOptions {
  int per_class = 100;
  int size = 64;
  std::uint64_t seed = 0;
  double noise_sigma = 0.06;
  /// Required divisor of `size` (pool product of the consuming network).
  int size_multiple = 1;
};

/// per_class normal images followed by per_class opacity images. Image i of
/// each class shares its background and noise, so every opacity image is its
/// normal partner plus blobs.
std::vector<LabeledImage> synth_generate(const SynthOptions& options);

/// Writes PNGs in the `<dir>/{train,val}/{NORMAL,OPACITY}/` layout read by
/// load_dataset. The validation split uses a derived seed.
void write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& train,
                         int val_per_class);

}  // namespace dfcnn
