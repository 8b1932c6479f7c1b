#pragma once

#include <cstdint>
#include <string>

#include "prunetax/dataset.hpp"
#include "prunetax/network.hpp"

namespace prunetax {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

// PRNW layout, all little-endian:
//   "PRNW" | version u32 | dtype u32 (1 = float32, 2 = float64) |
//   loss_kind u32 | input c,h,w u32 | num_classes u32 | layer_count u32 |
//   layer table: kind u32, in_c u32, out_c u32, kernel u32, stride u32,
//                pad u32, has_bias u8 | raw tensors per parameterized layer
//   (weights then bias, element count implied by the table) | mask bitmaps:
//   per layer bit count u32 + packed bits (LSB first).
// A checkpoint saved in one arithmetic mode loads in the other; values are
// converted on read.
template <typename T>
void save_checkpoint(const std::string& path, const NetworkGraph<T>& net,
                     const PruneMask& mask) {
  std::string buf;
  buf += "PRNW";
  detail::put_u32(buf, kCheckpointFormatVersion);
  detail::put_u32(buf, sizeof(T) == 4 ? 1u : 2u);
  detail::put_u32(buf, net.loss_kind == LossKind::softmax_xent ? 0u : 1u);
  detail::put_u32(buf, static_cast<uint32_t>(net.input_dims.c));
  detail::put_u32(buf, static_cast<uint32_t>(net.input_dims.h));
  detail::put_u32(buf, static_cast<uint32_t>(net.input_dims.w));
  detail::put_u32(buf, static_cast<uint32_t>(net.num_classes));
  detail::put_u32(buf, static_cast<uint32_t>(net.layer_count()));
  for (const auto& layer : net.layers) {
    const auto& s = layer.spec;
    detail::put_u32(buf, static_cast<uint32_t>(s.kind));
    detail::put_u32(buf, static_cast<uint32_t>(s.in_channels));
    detail::put_u32(buf, static_cast<uint32_t>(s.out_channels));
    detail::put_u32(buf, static_cast<uint32_t>(s.kernel));
    detail::put_u32(buf, static_cast<uint32_t>(s.stride));
    detail::put_u32(buf, static_cast<uint32_t>(s.pad));
    buf.push_back(s.has_bias ? 1 : 0);
  }
  for (const auto& layer : net.layers) {
    for (int64_t i = 0; i < layer.weights.numel(); ++i) {
      if (sizeof(T) == 4)
        detail::put_f32(buf, static_cast<float>(layer.weights[i]));
      else
        detail::put_f64(buf, static_cast<double>(layer.weights[i]));
    }
    for (int64_t i = 0; i < layer.bias.numel(); ++i) {
      if (sizeof(T) == 4)
        detail::put_f32(buf, static_cast<float>(layer.bias[i]));
      else
        detail::put_f64(buf, static_cast<double>(layer.bias[i]));
    }
  }
  for (const auto& bits : mask.out) {
    detail::put_u32(buf, static_cast<uint32_t>(bits.size()));
    uint8_t acc = 0;
    int nbit = 0;
    for (size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) acc |= static_cast<uint8_t>(1u << nbit);
      if (++nbit == 8) {
        buf.push_back(static_cast<char>(acc));
        acc = 0;
        nbit = 0;
      }
    }
    if (nbit > 0) buf.push_back(static_cast<char>(acc));
  }
  detail::write_file(path, buf);
}

template <typename T>
struct Checkpoint {
  NetworkGraph<T> net;
  PruneMask mask;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data, path);
  r.expect_magic("PRNW");
  const uint32_t version = r.u32("version");
  check(version == kCheckpointFormatVersion,
        strf("%s: unsupported checkpoint version %u", path.c_str(), version));
  const uint32_t dtype = r.u32("dtype");
  check(dtype == 1 || dtype == 2, strf("%s: bad dtype %u", path.c_str(), dtype));
  Checkpoint<T> ck;
  ck.net.loss_kind = r.u32("loss_kind") == 0 ? LossKind::softmax_xent : LossKind::mse;
  ck.net.input_dims.c = static_cast<int>(r.u32("input_c"));
  ck.net.input_dims.h = static_cast<int>(r.u32("input_h"));
  ck.net.input_dims.w = static_cast<int>(r.u32("input_w"));
  ck.net.num_classes = static_cast<int>(r.u32("num_classes"));
  const uint32_t layer_count = r.u32("layer_count");
  for (uint32_t l = 0; l < layer_count; ++l) {
    LayerSpec s;
    const uint32_t kind = r.u32("layer_kind");
    check(kind <= static_cast<uint32_t>(LayerKind::flatten),
          strf("%s: bad layer kind %u at byte offset %zu", path.c_str(), kind, r.offset() - 4));
    s.kind = static_cast<LayerKind>(kind);
    s.in_channels = static_cast<int>(r.u32("in_channels"));
    s.out_channels = static_cast<int>(r.u32("out_channels"));
    s.kernel = static_cast<int>(r.u32("kernel"));
    s.stride = static_cast<int>(r.u32("stride"));
    s.pad = static_cast<int>(r.u32("pad"));
    s.has_bias = r.u8("has_bias") != 0;
    ck.net.layers.push_back({s, {}, {}});
  }
  ck.net.finalize();  // allocates parameter tensors and validates shapes
  for (auto& layer : ck.net.layers) {
    for (int64_t i = 0; i < layer.weights.numel(); ++i)
      layer.weights[i] = dtype == 1 ? static_cast<T>(r.f32("weights"))
                                    : static_cast<T>(r.f64("weights"));
    for (int64_t i = 0; i < layer.bias.numel(); ++i)
      layer.bias[i] = dtype == 1 ? static_cast<T>(r.f32("bias")) : static_cast<T>(r.f64("bias"));
  }
  ck.mask.out.resize(layer_count);
  for (uint32_t l = 0; l < layer_count; ++l) {
    const uint32_t nbits = r.u32("mask_bits");
    auto& bits = ck.mask.out[l];
    bits.assign(nbits, 0);
    const uint32_t nbytes = (nbits + 7) / 8;
    for (uint32_t b = 0; b < nbytes; ++b) {
      const uint8_t byte = r.u8("mask");
      for (int j = 0; j < 8; ++j) {
        const uint32_t bit = b * 8 + static_cast<uint32_t>(j);
        if (bit < nbits) bits[bit] = (byte >> j) & 1;
      }
    }
  }
  check(r.remaining() == 0, strf("%s: %zu trailing bytes after mask section", path.c_str(),
                                 r.remaining()));
  return ck;
}

}  // namespace prunetax
