#pragma once

#include <string>
#include <vector>

#include "deepfgs/rng.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

// Binary PPM (P6) or PGM (P5), 8-bit, maxval 255. Grayscale loads as three
// identical channels. Returns (1,3,H,W) with values in [0,1] (v/255).
Tensor load_image(const std::string& path);

// Writes (1,3,H,W) in [0,1] as binary PPM, rounding to 8 bits.
void save_image(const Tensor& image, const std::string& path);

// Sorted list of *.ppm / *.pgm files directly inside `dir`.
std::vector<std::string> list_images(const std::string& dir);

// Center-crops both spatial extents down to multiples of 16 (the codec's
// fixed downsampling factor). Sets *cropped when anything was removed.
// Throws DataError if either extent is below 16.
Tensor center_crop_mult16(const Tensor& image, bool* cropped = nullptr);

// In-memory training set: every image loaded once up front (desk scale).
class Dataset {
 public:
  // loads every listed image; throws DataError when the directory has none
  explicit Dataset(const std::string& dir);

  int count() const { return int(images_.size()); }
  const Tensor& image(int i) const { return images_[size_t(i)]; }
  const std::string& path(int i) const { return paths_[size_t(i)]; }

  // (batch,3,crop,crop): uniformly random image index and top-left corner
  // per item; every image must be at least crop×crop
  Tensor sample_crop_batch(Rng& rng, int crop, int batch) const;

 private:
  std::vector<Tensor> images_;
  std::vector<std::string> paths_;
};

// Deterministic synthetic texture: smooth color ramp + a few oriented
// sinusoidal gratings + soft blobs + faint noise, clamped to [0,1]. Gives
// the trainer compressible structure without bundling photographs.
Tensor synth_texture(Rng& rng, int h, int w);

// Writes `count` synthetic images (synth_000.ppm, …) sized h×w into `dir`,
// creating it if needed; image i derives its stream from (seed, i) so any
// prefix of the set is stable as count grows.
std::vector<std::string> generate_dataset(const std::string& dir, int count, int h, int w,
                                          std::uint64_t seed);

}  // namespace dfgs
