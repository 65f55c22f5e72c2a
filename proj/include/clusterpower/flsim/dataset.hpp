#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "clusterpower/error.hpp"

namespace clusterpower::fl {

/// Dense row-major features with integer labels, split into train and test.
struct Dataset {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> train_x;
  std::vector<int> train_y;
  std::vector<double> test_x;
  std::vector<int> test_y;

  std::size_t n_train() const { return train_y.size(); }
  std::size_t n_test() const { return test_y.size(); }
  const double* train_row(std::size_t i) const { return train_x.data() + i * n_features; }
  const double* test_row(std::size_t i) const { return test_x.data() + i * n_features; }
};

struct BlobsSpec {
  std::size_t n_train = 60000;
  std::size_t n_test = 10000;
  std::size_t n_features = 32;
  std::size_t n_classes = 10;
  double class_spread = 0.75;  // std of the class-mean coordinates; noise has unit std
};

/// Isotropic Gaussian blobs: class means ~ N(0, spread^2 I), samples
/// ~ N(mean, I), labels uniform. Train and test come from one seeded stream.
inline Dataset make_blobs(const BlobsSpec& spec, std::uint64_t seed) {
  if (spec.n_train == 0 || spec.n_test == 0 || spec.n_features == 0 || spec.n_classes < 2)
    throw Error(ErrorKind::dataset, "blobs need n_train, n_test, n_features > 0 and n_classes >= 2");
  if (!(spec.class_spread > 0.0)) throw Error(ErrorKind::dataset, "class_spread must be > 0");

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xB10Bu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(spec.n_classes) - 1);

  std::vector<double> means(spec.n_classes * spec.n_features);
  for (auto& m : means) m = spec.class_spread * normal(rng);

  Dataset d;
  d.n_features = spec.n_features;
  d.n_classes = spec.n_classes;
  auto fill = [&](std::size_t n, std::vector<double>& x, std::vector<int>& y) {
    x.resize(n * spec.n_features);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = label(rng);
      const double* mu = means.data() + static_cast<std::size_t>(y[i]) * spec.n_features;
      for (std::size_t j = 0; j < spec.n_features; ++j) x[i * spec.n_features + j] = mu[j] + normal(rng);
    }
  };
  fill(spec.n_train, d.train_x, d.train_y);
  fill(spec.n_test, d.test_x, d.test_y);
  return d;
}

// ---------------------------------------------------------------------------
// IDX (MNIST-style) files: big-endian magic 0x00000803 for u8 images,
// 0x00000801 for u8 labels.

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    throw Error(ErrorKind::dataset, path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace detail

struct IdxImages {
  std::size_t count = 0;
  std::size_t pixels = 0;
  std::vector<double> data;  // scaled to [0, 1]
};

inline IdxImages read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::dataset, "cannot open '" + path + "'");
  if (detail::read_be32(in, path) != 0x00000803u)
    throw Error(ErrorKind::dataset, path + ": not an IDX u8 image file");
  IdxImages img;
  img.count = detail::read_be32(in, path);
  const std::size_t rows = detail::read_be32(in, path);
  const std::size_t cols = detail::read_be32(in, path);
  img.pixels = rows * cols;
  std::vector<unsigned char> raw(img.count * img.pixels);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw Error(ErrorKind::dataset, path + ": truncated image data");
  img.data.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

inline std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::dataset, "cannot open '" + path + "'");
  if (detail::read_be32(in, path) != 0x00000801u)
    throw Error(ErrorKind::dataset, path + ": not an IDX u8 label file");
  const std::size_t n = detail::read_be32(in, path);
  std::vector<unsigned char> raw(n);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
    throw Error(ErrorKind::dataset, path + ": truncated label data");
  return {raw.begin(), raw.end()};
}

struct IdxPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

inline Dataset load_idx(const IdxPaths& p) {
  auto tr = read_idx_images(p.train_images);
  auto te = read_idx_images(p.test_images);
  auto ytr = read_idx_labels(p.train_labels);
  auto yte = read_idx_labels(p.test_labels);
  if (tr.count != ytr.size() || te.count != yte.size())
    throw Error(ErrorKind::dataset, "IDX image and label counts differ");
  if (tr.pixels != te.pixels) throw Error(ErrorKind::dataset, "IDX train/test image sizes differ");
  Dataset d;
  d.n_features = tr.pixels;
  int max_label = 0;
  for (int y : ytr) max_label = std::max(max_label, y);
  for (int y : yte) max_label = std::max(max_label, y);
  d.n_classes = static_cast<std::size_t>(max_label) + 1;
  if (d.n_classes < 2) throw Error(ErrorKind::dataset, "IDX labels need at least two classes");
  d.train_x = std::move(tr.data);
  d.test_x = std::move(te.data);
  d.train_y = std::move(ytr);
  d.test_y = std::move(yte);
  return d;
}

}  // namespace clusterpower::fl
