#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "prunetax/common.hpp"
#include "prunetax/network.hpp"
#include "prunetax/rng.hpp"
#include "prunetax/tensor.hpp"

namespace prunetax {

// Labelled image set held in memory. Pixel values are float32 on disk; in
// 64-bit verification mode they widen exactly, so a write/read round trip is
// bit-preserving in either mode.
template <typename T>
struct Dataset {
  Tensor<T> images;             // [count, c, h, w]
  std::vector<uint8_t> labels;  // class ids
  int num_classes = 0;

  int count() const { return images.empty() ? 0 : images.dim(0); }
  Dims dims() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
};

namespace detail {

// Little-endian primitive IO shared by the PRND and PRNW formats.
inline void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}
inline void put_f64(std::string& buf, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string path)
      : data_(data), path_(std::move(path)) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

  void need(size_t n, const char* what) {
    if (remaining() < n)
      fail(strf("%s: truncated while reading %s at byte offset %zu", path_.c_str(), what, pos_));
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<uint64_t>(static_cast<uint8_t>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void expect_magic(const char* magic) {
    need(4, "magic");
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0)
      fail(strf("%s: bad magic at byte offset %zu (expected \"%s\")", path_.c_str(), pos_, magic));
    pos_ += 4;
  }
  const std::string& path() const { return path_; }

 private:
  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), strf("cannot open '%s'", path.c_str()));
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), strf("cannot write '%s'", path.c_str()));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  check(out.good(), strf("write failed for '%s'", path.c_str()));
}

}  // namespace detail

inline constexpr uint32_t kDatasetFormatVersion = 1;

// PRND layout, all little-endian:
//   "PRND" | version u32 | count u32 | channels u32 | height u32 | width u32 |
//   num_classes u32 | count * (channels*height*width float32) | count * u8 label
template <typename T>
void save_dataset(const std::string& path, const Dataset<T>& ds) {
  std::string buf;
  const int n = ds.count();
  buf.reserve(28 + static_cast<size_t>(ds.images.numel()) * 4 + static_cast<size_t>(n));
  buf += "PRND";
  detail::put_u32(buf, kDatasetFormatVersion);
  detail::put_u32(buf, static_cast<uint32_t>(n));
  detail::put_u32(buf, static_cast<uint32_t>(ds.images.dim(1)));
  detail::put_u32(buf, static_cast<uint32_t>(ds.images.dim(2)));
  detail::put_u32(buf, static_cast<uint32_t>(ds.images.dim(3)));
  detail::put_u32(buf, static_cast<uint32_t>(ds.num_classes));
  for (int64_t i = 0; i < ds.images.numel(); ++i)
    detail::put_f32(buf, static_cast<float>(ds.images[i]));
  for (uint8_t l : ds.labels) buf.push_back(static_cast<char>(l));
  detail::write_file(path, buf);
}

template <typename T>
Dataset<T> load_dataset(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data, path);
  r.expect_magic("PRND");
  const uint32_t version = r.u32("version");
  check(version == kDatasetFormatVersion,
        strf("%s: unsupported dataset version %u", path.c_str(), version));
  const uint32_t count = r.u32("count");
  const uint32_t channels = r.u32("channels");
  const uint32_t height = r.u32("height");
  const uint32_t width = r.u32("width");
  const uint32_t num_classes = r.u32("num_classes");
  check(count > 0 && channels > 0 && height > 0 && width > 0 && num_classes > 0,
        strf("%s: zero field in header", path.c_str()));
  const size_t pixels = static_cast<size_t>(count) * channels * height * width;
  const size_t expected = pixels * 4 + count;
  if (r.remaining() != expected)
    fail(strf("%s: payload length %zu does not match header arithmetic %zu at byte offset %zu",
              path.c_str(), r.remaining(), expected, r.offset()));
  Dataset<T> ds;
  ds.num_classes = static_cast<int>(num_classes);
  ds.images = Tensor<T>({static_cast<int>(count), static_cast<int>(channels),
                         static_cast<int>(height), static_cast<int>(width)});
  for (size_t i = 0; i < pixels; ++i)
    ds.images[static_cast<int64_t>(i)] = static_cast<T>(r.f32("pixels"));
  ds.labels.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    ds.labels[i] = r.u8("labels");
    check(ds.labels[i] < num_classes,
          strf("%s: label %u out of range at byte offset %zu", path.c_str(),
               static_cast<unsigned>(ds.labels[i]), r.offset() - 1));
  }
  return ds;
}

// Non-owning index view; batches are cut from the index list in order.
template <typename T>
struct DataView {
  const Dataset<T>* data = nullptr;
  std::vector<int32_t> indices;

  int size() const { return static_cast<int>(indices.size()); }

  Batch<T> batch(int start, int count) const {
    check(data != nullptr && count >= 1 && start >= 0, "DataView::batch: bad request");
    const Dims d = data->dims();
    Batch<T> b;
    b.inputs = Tensor<T>({count, d.c, d.h, d.w});
    b.labels.resize(static_cast<size_t>(count));
    const int64_t stride = d.count();
    for (int i = 0; i < count; ++i) {
      const int32_t src = indices[static_cast<size_t>((start + i) % size())];
      const T* from = data->images.data() + static_cast<int64_t>(src) * stride;
      T* to = b.inputs.data() + static_cast<int64_t>(i) * stride;
      std::copy(from, from + stride, to);
      b.labels[static_cast<size_t>(i)] = data->labels[static_cast<size_t>(src)];
    }
    return b;
  }

  std::vector<Batch<T>> batches(int batch_size, int limit_samples = -1) const {
    std::vector<Batch<T>> out;
    const int total = limit_samples < 0 ? size() : std::min(limit_samples, size());
    for (int start = 0; start < total; start += batch_size)
      out.push_back(batch(start, std::min(batch_size, total - start)));
    return out;
  }

  DataView take(int count) const {
    DataView v;
    v.data = data;
    v.indices.assign(indices.begin(), indices.begin() + std::min<size_t>(indices.size(),
                                                                         static_cast<size_t>(count)));
    return v;
  }
};

struct SplitIndices {
  std::vector<int32_t> retrain;
  std::vector<int32_t> eval;
};

// Disjoint retrain/eval split of a train set (the original train images are
// divided; the test set lives in its own file). Fractions floor to sample
// counts.
inline SplitIndices split_indices(int count, double retrain_frac, double eval_frac,
                                  uint64_t seed) {
  check(retrain_frac >= 0 && eval_frac >= 0 && retrain_frac + eval_frac <= 1.0 + 1e-12,
        "split fractions must be nonnegative and sum to <= 1");
  std::vector<int32_t> idx(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derive(seed, "dataset-split");
  rng.shuffle(idx);
  const int n_retrain = static_cast<int>(retrain_frac * count);
  const int n_eval = static_cast<int>(eval_frac * count);
  SplitIndices s;
  s.retrain.assign(idx.begin(), idx.begin() + n_retrain);
  s.eval.assign(idx.begin() + n_retrain, idx.begin() + n_retrain + n_eval);
  return s;
}

template <typename T>
DataView<T> full_view(const Dataset<T>& ds) {
  DataView<T> v;
  v.data = &ds;
  v.indices.resize(static_cast<size_t>(ds.count()));
  for (int i = 0; i < ds.count(); ++i) v.indices[static_cast<size_t>(i)] = i;
  return v;
}

// Synthetic multi-class set: one fixed random template per class, samples are
// brightness-jittered templates plus pixel noise. Learnable by the desk-scale
// nets but not linearly trivial. All pixel values are rounded through float32
// so datasets are mode-independent.
//
// The class templates (the classification problem) come from problem_seed;
// the drawn samples come from sample_seed. A train/test pair shares the
// problem_seed and varies only the sample_seed.
template <typename T>
Dataset<T> make_blobs_dataset(int count, int num_classes, Dims dims, double noise,
                              uint64_t problem_seed, uint64_t sample_seed) {
  check(count >= 1 && num_classes >= 2, "make_blobs_dataset: need count >= 1, classes >= 2");
  Rng tpl_rng = Rng::derive(problem_seed, "blobs-templates");
  Rng rng = Rng::derive(sample_seed, "blobs-samples");
  const int64_t stride = dims.count();
  std::vector<float> templates(static_cast<size_t>(num_classes) * static_cast<size_t>(stride));
  for (auto& v : templates) v = static_cast<float>(tpl_rng.normal(0.0, 1.0));
  Dataset<T> ds;
  ds.num_classes = num_classes;
  ds.images = Tensor<T>({count, dims.c, dims.h, dims.w});
  ds.labels.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int cls = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(num_classes)));
    ds.labels[static_cast<size_t>(i)] = static_cast<uint8_t>(cls);
    const float gain = static_cast<float>(rng.uniform(0.8, 1.2));
    const float* tpl = templates.data() + static_cast<size_t>(cls) * static_cast<size_t>(stride);
    T* img = ds.images.data() + static_cast<int64_t>(i) * stride;
    for (int64_t p = 0; p < stride; ++p) {
      const float v = tpl[p] * gain + static_cast<float>(rng.normal(0.0, noise));
      img[p] = static_cast<T>(v);
    }
  }
  return ds;
}

template <typename T>
Dataset<T> make_blobs_dataset(int count, int num_classes, Dims dims, double noise,
                              uint64_t seed) {
  return make_blobs_dataset<T>(count, num_classes, dims, noise, seed, seed);
}

// Two-class set that is linearly separable by construction: samples are
// +tpl or -tpl plus bounded noise, so sign(<tpl, x>) recovers the label
// whenever |<tpl, eps>| < |tpl|^2. The noise level keeps that margin.
// Seeds split as in make_blobs_dataset.
template <typename T>
Dataset<T> make_linear2_dataset(int count, Dims dims, uint64_t problem_seed,
                                uint64_t sample_seed,
                                std::vector<float>* template_out = nullptr) {
  Rng tpl_rng = Rng::derive(problem_seed, "linear2-template");
  Rng rng = Rng::derive(sample_seed, "linear2-samples");
  const int64_t stride = dims.count();
  std::vector<float> tpl(static_cast<size_t>(stride));
  double norm2 = 0.0;
  for (auto& v : tpl) {
    v = static_cast<float>(rng.normal(0.0, 1.0));
    norm2 += static_cast<double>(v) * v;
  }
  // Uniform noise bounded so the worst-case inner product stays below the
  // template energy: |<tpl,eps>| <= eps_max * ||tpl||_1 < ||tpl||^2.
  double l1 = 0.0;
  for (float v : tpl) l1 += std::fabs(static_cast<double>(v));
  const float eps_max = static_cast<float>(0.5 * norm2 / l1);
  Dataset<T> ds;
  ds.num_classes = 2;
  ds.images = Tensor<T>({count, dims.c, dims.h, dims.w});
  ds.labels.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int cls = static_cast<int>(rng.uniform_int(2));
    ds.labels[static_cast<size_t>(i)] = static_cast<uint8_t>(cls);
    const float sign = cls == 1 ? 1.0f : -1.0f;
    T* img = ds.images.data() + static_cast<int64_t>(i) * stride;
    for (int64_t p = 0; p < stride; ++p) {
      const float v = sign * tpl[p] + static_cast<float>(rng.uniform(-eps_max, eps_max));
      img[p] = static_cast<T>(v);
    }
  }
  if (template_out) *template_out = tpl;
  return ds;
}

}  // namespace prunetax
