#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leashed/nn.hpp"

namespace leashed {

// Immutable after construction; shared read-only across threads.
struct Dataset {
  nn::Shape shape;  // per-example input shape
  std::size_t classes = 10;
  std::vector<float> features;  // size() * shape.size(), row-major
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_size() const noexcept { return shape.size(); }

  std::span<const float> row(std::size_t i) const {
    return {features.data() + i * feature_size(), feature_size()};
  }

  nn::BatchView view() const noexcept { return {features, labels}; }

  // First n examples (all of them if n >= size()).
  Dataset head(std::size_t n) const {
    n = std::min(n, size());
    Dataset d;
    d.shape = shape;
    d.classes = classes;
    d.features.assign(features.begin(), features.begin() + n * feature_size());
    d.labels.assign(labels.begin(), labels.begin() + n);
    return d;
  }
};

// ---------------------------------------------------------------------------
// IDX files (big-endian): images magic 0x00000803, labels magic 0x00000801.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

inline std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::string hex32(std::uint32_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

}  // namespace detail

inline IdxImages decode_idx_images(std::span<const std::uint8_t> bytes, const std::string& what = "IDX images") {
  if (bytes.size() < 16) throw std::runtime_error(what + ": truncated header");
  const std::uint32_t magic = detail::be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw std::runtime_error(what + ": bad magic " + detail::hex32(magic) + ", expected " +
                             detail::hex32(kIdxImagesMagic));
  }
  IdxImages img;
  img.count = detail::be32(bytes, 4);
  img.rows = detail::be32(bytes, 8);
  img.cols = detail::be32(bytes, 12);
  const std::uint64_t n = std::uint64_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < n) {
    throw std::runtime_error(what + ": truncated, header announces " + std::to_string(n) +
                             " pixel bytes but only " + std::to_string(bytes.size() - 16) +
                             " present");
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(n));
  return img;
}

inline std::vector<std::uint8_t> decode_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what = "IDX labels") {
  if (bytes.size() < 8) throw std::runtime_error(what + ": truncated header");
  const std::uint32_t magic = detail::be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw std::runtime_error(what + ": bad magic " + detail::hex32(magic) + ", expected " +
                             detail::hex32(kIdxLabelsMagic));
  }
  const std::uint32_t count = detail::be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw std::runtime_error(what + ": truncated, header announces " + std::to_string(count) +
                             " labels but only " + std::to_string(bytes.size() - 8) + " present");
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

inline std::vector<std::uint8_t> encode_idx_images(const IdxImages& img) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + img.pixels.size());
  detail::put_be32(out, kIdxImagesMagic);
  detail::put_be32(out, img.count);
  detail::put_be32(out, img.rows);
  detail::put_be32(out, img.cols);
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  detail::put_be32(out, kIdxLabelsMagic);
  detail::put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

// Loads an MNIST-style image/label pair, normalising pixels by 1/255.
// `limit` > 0 keeps only the first `limit` examples.
inline Dataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path, std::size_t limit = 0) {
  const IdxImages img = decode_idx_images(detail::read_file(images_path), images_path.string());
  std::vector<std::uint8_t> labels = decode_idx_labels(detail::read_file(labels_path), labels_path.string());
  if (labels.size() != img.count) {
    throw std::runtime_error("count mismatch: " + images_path.string() + " has " +
                             std::to_string(img.count) + " images, " + labels_path.string() +
                             " has " + std::to_string(labels.size()) + " labels");
  }
  std::size_t n = img.count;
  if (limit > 0) n = std::min(n, limit);

  Dataset d;
  d.shape = {1, img.rows, img.cols};
  d.classes = 10;
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::uint8_t y : d.labels) {
    if (y >= d.classes) throw std::runtime_error(labels_path.string() + ": label " + std::to_string(y) + " out of range");
  }
  const std::size_t pixels = n * d.shape.size();
  d.features.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) d.features[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return d;
}

inline void write_idx_images(const std::filesystem::path& path, const IdxImages& img) {
  detail::write_file(path, encode_idx_images(img));
}

inline void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  detail::write_file(path, encode_idx_labels(labels));
}

// ---------------------------------------------------------------------------
// Synthetic data

struct BlobsOptions {
  std::size_t classes = 10;
  std::size_t dims = 16;
  std::size_t per_class = 200;
  double spread = 1.0;      // per-coordinate standard deviation around a center
  double separation = 4.0;  // standard deviation of center coordinates
  std::uint64_t seed = 1;
};

// Gaussian clusters around random class centers. Examples are interleaved by
// class (0,1,..,k-1,0,1,..) so any prefix is close to balanced.
inline Dataset synthetic_blobs(const BlobsOptions& o) {
  if (o.classes < 2) throw std::invalid_argument("synthetic_blobs: need at least 2 classes");
  if (o.classes > 256) throw std::invalid_argument("synthetic_blobs: at most 256 classes");
  if (o.dims == 0) throw std::invalid_argument("synthetic_blobs: dims must be >= 1");
  std::mt19937_64 gen(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> centers(o.classes * o.dims);
  for (double& c : centers) c = o.separation * normal(gen);

  Dataset d;
  d.shape = nn::Shape::flat(o.dims);
  d.classes = o.classes;
  d.features.reserve(o.classes * o.per_class * o.dims);
  d.labels.reserve(o.classes * o.per_class);
  for (std::size_t i = 0; i < o.per_class; ++i) {
    for (std::size_t k = 0; k < o.classes; ++k) {
      for (std::size_t j = 0; j < o.dims; ++j) {
        const double noise = o.spread == 0.0 ? 0.0 : o.spread * normal(gen);
        d.features.push_back(static_cast<float>(centers[k * o.dims + j] + noise));
      }
      d.labels.push_back(static_cast<std::uint8_t>(k));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Mini-batch sampling (uniform, with replacement)

struct Batch {
  std::vector<float> inputs;
  std::vector<std::uint8_t> labels;

  nn::BatchView view() const noexcept { return {inputs, labels}; }
};

template <typename Rng>
void sample_batch_into(const Dataset& data, std::size_t batch_size, Rng& rng, Batch& out) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("cannot sample from an empty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  const std::size_t f = data.feature_size();
  out.inputs.resize(batch_size * f);
  out.labels.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t i = pick(rng);
    std::copy_n(data.features.begin() + static_cast<std::ptrdiff_t>(i * f), f,
                out.inputs.begin() + static_cast<std::ptrdiff_t>(b * f));
    out.labels[b] = data.labels[i];
  }
}

template <typename Rng>
Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  Batch b;
  sample_batch_into(data, batch_size, rng, b);
  return b;
}

// Per-thread sampler seeded with seed ^ thread_id.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
               std::uint64_t thread_id)
      : data_(&data), batch_size_(batch_size), rng_(seed ^ thread_id) {}

  nn::BatchView next() {
    sample_batch_into(*data_, batch_size_, rng_, batch_);
    return batch_.view();
  }

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  Batch batch_;
};

}  // namespace leashed
