#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/param_vector.hpp"

namespace fedsim {

/// Compressed wire form of a ParamVector: one ASCII payload per layer plus the
/// shape manifest. precision is the number of decimal places kept by the
/// polyline encoding; precision 0 marks the lossless debug mode, whose payload
/// is raw little-endian 64-bit values under the same framing.
struct EncodedModel {
  int precision = 4;
  struct Layer {
    LayerShape shape;
    std::string payload;
  };
  std::vector<Layer> layers;

  bool lossless() const { return precision == 0; }

  /// Bytes charged to the network by the simulator: 1 byte of precision plus,
  /// per layer, a fixed 16-byte shape header and the payload itself.
  std::size_t accounted_bytes() const;
};

// --- Single-value polyline encoding -----------------------------------------
//
// encode_value turns x into a variable-length ASCII string:
//   1. v = round-half-away-from-zero(x * 10^precision), must fit a signed
//      32-bit integer (an overflow throws instead of wrapping);
//   2. u = v << 1, bit-inverted when v < 0;
//   3. u is emitted in 5-bit chunks from the least significant end, every
//      chunk except the last OR-ed with 0x20;
//   4. each chunk + 63 becomes one character, confined to codes [63, 126].
// Values are self-delimiting via the 0x20 continuation bit, so payloads can be
// concatenated and decoded without separators.

std::string encode_value(double x, int precision);
void encode_value_into(double x, int precision, std::string& out);

/// Decodes a payload that must contain exactly one value.
double decode_value(std::string_view payload, int precision);

/// Decodes the next value starting at pos, advancing pos past it.
double decode_next_value(std::string_view payload, std::size_t& pos, int precision);

// --- Whole-model compression -------------------------------------------------

class Codec {
 public:
  static Codec polyline(int precision);
  static Codec lossless();

  /// 0 means lossless.
  int precision() const { return precision_; }
  bool is_lossless() const { return precision_ == 0; }

  EncodedModel compress(const ParamVector& model) const;
  ParamVector decompress(const EncodedModel& encoded) const;

  std::string describe() const;

 private:
  explicit Codec(int precision) : precision_(precision) {}
  int precision_ = 4;
};

/// Decompress using the precision recorded in the EncodedModel itself.
ParamVector decompress(const EncodedModel& encoded);

// --- Wire format --------------------------------------------------------------
//
// Bit-exact framing used for files and tests:
//   magic "FATC", version (u8, =1), precision (u8, 0 = lossless),
//   layer count (u16 LE), then per layer: rank (u16 LE), each dim (u32 LE),
//   payload length (u32 LE), payload bytes.

std::vector<std::uint8_t> serialize_wire(const EncodedModel& encoded);
EncodedModel parse_wire(std::span<const std::uint8_t> bytes);

}  // namespace fedsim
