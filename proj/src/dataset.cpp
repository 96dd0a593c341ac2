#include "deepfgs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepfgs/error.hpp"

namespace fs = std::filesystem;

namespace dfgs {

namespace {

// Next whitespace-delimited token, '#'-to-end-of-line comments skipped.
// Leaves the terminating whitespace in the stream: the caller consumes the
// single separator byte between the header and the raster itself.
std::string next_token(std::istream& in, const std::string& path) {
  for (;;) {
    int ch = in.peek();
    if (ch == EOF) throw DataError("image " + path + ": truncated header");
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      in.get();
      continue;
    }
    break;
  }
  std::string tok;
  int ch;
  while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#') {
    tok.push_back(char(in.get()));
  }
  return tok;
}

long parse_count(const std::string& tok, const std::string& path, const char* what) {
  try {
    size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError("image " + path + ": bad " + what + " '" + tok + "'");
  }
}

}  // namespace

Tensor load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("image " + path + ": cannot open");
  std::string magic = next_token(in, path);
  bool color;
  if (magic == "P6") {
    color = true;
  } else if (magic == "P5") {
    color = false;
  } else {
    throw DataError("image " + path + ": unsupported magic '" + magic +
                    "' (binary PPM P6 or PGM P5 required)");
  }
  long w = parse_count(next_token(in, path), path, "width");
  long h = parse_count(next_token(in, path), path, "height");
  long maxval = parse_count(next_token(in, path), path, "maxval");
  if (maxval != 255) {
    throw DataError("image " + path + ": maxval " + std::to_string(maxval) +
                    " unsupported (only 255)");
  }
  // exactly one whitespace byte separates the header from the raster
  int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) throw DataError("image " + path + ": truncated header");

  const long npx = w * h;
  const long want = npx * (color ? 3 : 1);
  std::vector<unsigned char> raw(static_cast<size_t>(want));
  in.read(reinterpret_cast<char*>(raw.data()), want);
  if (in.gcount() != want) {
    throw DataError("image " + path + ": raster has " + std::to_string(in.gcount()) +
                    " bytes, expected " + std::to_string(want));
  }

  Tensor img({1, 3, int(h), int(w)});
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        unsigned char byte = color ? raw[size_t((y * w + x) * 3 + c)] : raw[size_t(y * w + x)];
        img.at(0, c, int(y), int(x)) = double(byte) / 255.0;
      }
    }
  }
  return img;
}

void save_image(const Tensor& image, const std::string& path) {
  if (image.shape.n != 1 || image.shape.c != 3) {
    throw DataError("save_image: need shape (1,3,H,W), got " + image.shape.str());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("image " + path + ": cannot open for writing");
  out << "P6\n" << image.shape.w << " " << image.shape.h << "\n255\n";
  std::vector<unsigned char> raw(size_t(image.shape.h) * size_t(image.shape.w) * 3);
  size_t i = 0;
  for (int y = 0; y < image.shape.h; ++y) {
    for (int x = 0; x < image.shape.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = image.at(0, c, y, x);
        v = std::min(1.0, std::max(0.0, v));
        raw[i++] = (unsigned char)(std::lround(v * 255.0));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!out) throw DataError("image " + path + ": write failed");
}

std::vector<std::string> list_images(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("dataset: " + dir + " is not a directory");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Tensor center_crop_mult16(const Tensor& image, bool* cropped) {
  int h = image.shape.h, w = image.shape.w;
  int ch = (h / 16) * 16, cw = (w / 16) * 16;
  if (ch == 0 || cw == 0) {
    throw DataError("image " + image.shape.str() + " smaller than one 16x16 tile");
  }
  if (cropped) *cropped = (ch != h || cw != w);
  if (ch == h && cw == w) return image;
  int y0 = (h - ch) / 2, x0 = (w - cw) / 2;
  Tensor out({image.shape.n, image.shape.c, ch, cw});
  for (int n = 0; n < image.shape.n; ++n) {
    for (int c = 0; c < image.shape.c; ++c) {
      for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
          out.at(n, c, y, x) = image.at(n, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

Dataset::Dataset(const std::string& dir) {
  for (const std::string& f : list_images(dir)) {
    images_.push_back(load_image(f));
    paths_.push_back(f);
  }
  if (images_.empty()) throw DataError("dataset: no .ppm/.pgm images in " + dir);
}

Tensor Dataset::sample_crop_batch(Rng& rng, int crop, int batch) const {
  if (crop <= 0 || batch <= 0) throw UsageError("sample_crop_batch: crop and batch must be > 0");
  Tensor out({batch, 3, crop, crop});
  for (int b = 0; b < batch; ++b) {
    int idx = int(rng.uniform_int(0, count() - 1));
    const Tensor& img = images_[size_t(idx)];
    if (img.shape.h < crop || img.shape.w < crop) {
      throw DataError("dataset: image " + paths_[size_t(idx)] + " is " + img.shape.str() +
                      ", smaller than the " + std::to_string(crop) + "px crop");
    }
    int y0 = int(rng.uniform_int(0, img.shape.h - crop));
    int x0 = int(rng.uniform_int(0, img.shape.w - crop));
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < crop; ++y) {
        for (int x = 0; x < crop; ++x) {
          out.at(b, c, y, x) = img.at(0, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

Tensor synth_texture(Rng& rng, int h, int w) {
  if (h <= 0 || w <= 0) throw UsageError("synth_texture: extents must be > 0");
  Tensor img({1, 3, h, w});
  const double pi = 3.14159265358979323846;

  // smooth ramp between two random colors along a random direction
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  double theta = rng.uniform(0.0, pi);
  double dx = std::cos(theta), dy = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double t = 0.5 + 0.5 * ((x - w / 2.0) / w * dx + (y - h / 2.0) / h * dy);
      for (int c = 0; c < 3; ++c) {
        img.at(0, c, y, x) = c0[c] + (c1[c] - c0[c]) * t;
      }
    }
  }

  // oriented gratings, partially correlated across channels
  int n_waves = int(rng.uniform_int(2, 4));
  for (int k = 0; k < n_waves; ++k) {
    double freq = rng.uniform(1.5, 6.0);
    double phi = rng.uniform(0.0, 2.0 * pi);
    double ang = rng.uniform(0.0, pi);
    double fx = freq * std::cos(ang) / w, fy = freq * std::sin(ang) / h;
    double amp = rng.uniform(0.02, 0.12);
    double cw_[3];
    for (int c = 0; c < 3; ++c) cw_[c] = rng.uniform(0.3, 1.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = amp * std::sin(2.0 * pi * (fx * x + fy * y) + phi);
        for (int c = 0; c < 3; ++c) img.at(0, c, y, x) += cw_[c] * s;
      }
    }
  }

  // soft blobs: local color shifts with Gaussian falloff
  int n_blobs = int(rng.uniform_int(1, 3));
  for (int k = 0; k < n_blobs; ++k) {
    double cy = rng.uniform(0.0, double(h)), cx = rng.uniform(0.0, double(w));
    double r = rng.uniform(0.10, 0.30) * std::min(h, w);
    double dc[3];
    for (int c = 0; c < 3; ++c) dc[c] = rng.uniform(-0.25, 0.25);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r * r);
        double g = std::exp(-0.5 * d2);
        for (int c = 0; c < 3; ++c) img.at(0, c, y, x) += dc[c] * g;
      }
    }
  }

  // faint sensor-like noise, then clamp
  for (double& v : img.v) {
    v += 0.008 * rng.normal();
    v = std::min(1.0, std::max(0.0, v));
  }
  return img;
}

std::vector<std::string> generate_dataset(const std::string& dir, int count, int h, int w,
                                          std::uint64_t seed) {
  if (count <= 0) throw UsageError("generate_dataset: count must be > 0");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("dataset: cannot create directory " + dir + ": " + ec.message());
  Rng root(seed);
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) {
    Rng item = root.split("synth:" + std::to_string(i));
    Tensor img = synth_texture(item, h, w);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d.ppm", i);
    std::string path = (fs::path(dir) / name).string();
    save_image(img, path);
    out.push_back(path);
  }
  return out;
}

}  // namespace dfgs
