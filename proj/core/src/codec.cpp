#include "fedsim/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace fedsim {
namespace {

constexpr std::int64_t kInt32Limit = std::int64_t{1} << 31;

// 10^p for p in [0, 9]; all exactly representable.
constexpr double kPow10[10] = {1.0,    1e1, 1e2, 1e3, 1e4, 1e5,
                               1e6, 1e7, 1e8, 1e9};

void require_precision(int precision) {
  if (precision < 1 || precision > 9) {
    throw CodecError(CodecError::Kind::BadFormat,
                     "precision must be in [1, 9], got " + std::to_string(precision));
  }
}

std::int64_t round_to_grid(double x, int precision) {
  const double scaled = x * kPow10[precision];
  // Rejects NaN/Inf and anything llround could not take safely; exact range
  // check happens on the rounded integer below.
  if (!(std::fabs(scaled) < 2.3e9)) {
    throw CodecError(CodecError::Kind::MagnitudeOverflow,
                     "value " + std::to_string(x) + " at precision " + std::to_string(precision) +
                         " does not fit a signed 32-bit integer");
  }
  const std::int64_t v = std::llround(scaled);  // rounds half away from zero
  if (v >= kInt32Limit || v <= -kInt32Limit) {
    throw CodecError(CodecError::Kind::MagnitudeOverflow,
                     "value " + std::to_string(x) + " at precision " + std::to_string(precision) +
                         " does not fit a signed 32-bit integer");
  }
  return v;
}

void append_raw64(double x, std::string& out) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_raw64(std::string_view payload, std::size_t& pos) {
  if (pos + 8 > payload.size()) {
    throw CodecError(CodecError::Kind::MalformedPayload, "truncated raw64 payload");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[pos + i])) << (8 * i);
  }
  pos += 8;
  return std::bit_cast<double>(bits);
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class WireReader {
 public:
  explicit WireReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return out;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CodecError(CodecError::Kind::BadFormat, "truncated wire data");
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t EncodedModel::accounted_bytes() const {
  std::size_t total = 1;  // precision byte
  for (const auto& layer : layers) total += 16 + layer.payload.size();
  return total;
}

void encode_value_into(double x, int precision, std::string& out) {
  require_precision(precision);
  const std::int64_t v = round_to_grid(x, precision);
  std::uint32_t u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v)) << 1;
  if (v < 0) u = ~u;
  while (u >= 0x20) {
    out.push_back(static_cast<char>(((u & 0x1f) | 0x20) + 63));
    u >>= 5;
  }
  out.push_back(static_cast<char>(u + 63));
}

std::string encode_value(double x, int precision) {
  std::string out;
  encode_value_into(x, precision, out);
  return out;
}

double decode_next_value(std::string_view payload, std::size_t& pos, int precision) {
  require_precision(precision);
  std::uint32_t accum = 0;
  int shift = 0;
  while (true) {
    if (pos >= payload.size()) {
      throw CodecError(CodecError::Kind::MalformedPayload,
                       "truncated payload: continuation bit set on final character");
    }
    const int c = static_cast<unsigned char>(payload[pos]);
    if (c < 63 || c > 126) {
      throw CodecError(CodecError::Kind::MalformedPayload,
                       "payload character code " + std::to_string(c) + " outside [63, 126]");
    }
    ++pos;
    const std::uint32_t chunk = static_cast<std::uint32_t>(c - 63);
    if (shift > 30) {
      throw CodecError(CodecError::Kind::MalformedPayload,
                       "payload value exceeds 32-bit range (too many chunks)");
    }
    accum |= (chunk & 0x1f) << shift;
    shift += 5;
    if ((chunk & 0x20) == 0) break;
  }
  const std::uint32_t magnitude = accum >> 1;
  const std::int32_t v =
      (accum & 1) ? static_cast<std::int32_t>(~magnitude) : static_cast<std::int32_t>(magnitude);
  return static_cast<double>(v) / kPow10[precision];
}

double decode_value(std::string_view payload, int precision) {
  std::size_t pos = 0;
  const double v = decode_next_value(payload, pos, precision);
  if (pos != payload.size()) {
    throw CodecError(CodecError::Kind::MalformedPayload,
                     "payload holds more than one value (" +
                         std::to_string(payload.size() - pos) + " trailing bytes)");
  }
  return v;
}

Codec Codec::polyline(int precision) {
  require_precision(precision);
  return Codec(precision);
}

Codec Codec::lossless() { return Codec(0); }

EncodedModel Codec::compress(const ParamVector& model) const {
  model.require_consistent("Codec::compress");
  EncodedModel out;
  out.precision = precision_;
  out.layers.reserve(model.shapes.size());
  for (std::size_t li = 0; li < model.shapes.size(); ++li) {
    EncodedModel::Layer layer;
    layer.shape = model.shapes[li];
    const auto values = model.layer(li);
    if (is_lossless()) {
      layer.payload.reserve(values.size() * 8);
      for (const double v : values) append_raw64(v, layer.payload);
    } else {
      layer.payload.reserve(values.size() * 3);
      for (std::size_t i = 0; i < values.size(); ++i) {
        try {
          encode_value_into(values[i], precision_, layer.payload);
        } catch (const CodecError& e) {
          throw CodecError(e.kind(), "layer " + std::to_string(li) + ", index " +
                                         std::to_string(i) + ": " + e.what());
        }
      }
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

ParamVector Codec::decompress(const EncodedModel& encoded) const {
  return fedsim::decompress(encoded);
}

std::string Codec::describe() const {
  return is_lossless() ? "lossless" : "p" + std::to_string(precision_);
}

ParamVector decompress(const EncodedModel& encoded) {
  ParamVector out;
  out.shapes.reserve(encoded.layers.size());
  for (std::size_t li = 0; li < encoded.layers.size(); ++li) {
    const auto& layer = encoded.layers[li];
    const std::size_t expected = element_count(layer.shape);
    if (encoded.lossless()) {
      if (layer.payload.size() != expected * 8) {
        throw CodecError(CodecError::Kind::ShapeMismatch,
                         "layer " + std::to_string(li) + ": raw payload of " +
                             std::to_string(layer.payload.size()) + " bytes does not hold " +
                             std::to_string(expected) + " values");
      }
      std::size_t pos = 0;
      for (std::size_t i = 0; i < expected; ++i) {
        out.values.push_back(read_raw64(layer.payload, pos));
      }
    } else {
      std::size_t pos = 0;
      std::size_t count = 0;
      while (pos < layer.payload.size()) {
        if (count == expected) break;
        out.values.push_back(decode_next_value(layer.payload, pos, encoded.precision));
        ++count;
      }
      if (count != expected || pos != layer.payload.size()) {
        throw CodecError(CodecError::Kind::ShapeMismatch,
                         "layer " + std::to_string(li) + ": payload decodes to " +
                             std::to_string(count) + (pos != layer.payload.size() ? "+" : "") +
                             " values, shape wants " + std::to_string(expected));
      }
    }
    out.shapes.push_back(layer.shape);
  }
  out.require_consistent("decompress");
  return out;
}

std::vector<std::uint8_t> serialize_wire(const EncodedModel& encoded) {
  if (encoded.layers.size() > 0xffff) {
    throw CodecError(CodecError::Kind::BadFormat, "too many layers for wire format");
  }
  std::vector<std::uint8_t> out;
  out.push_back('F');
  out.push_back('A');
  out.push_back('T');
  out.push_back('C');
  out.push_back(1);  // version
  out.push_back(static_cast<std::uint8_t>(encoded.precision));
  append_u16(out, static_cast<std::uint16_t>(encoded.layers.size()));
  for (const auto& layer : encoded.layers) {
    if (layer.shape.size() > 0xffff) {
      throw CodecError(CodecError::Kind::BadFormat, "layer rank too large for wire format");
    }
    append_u16(out, static_cast<std::uint16_t>(layer.shape.size()));
    for (const std::int64_t dim : layer.shape) {
      if (dim < 0 || dim > std::numeric_limits<std::uint32_t>::max()) {
        throw CodecError(CodecError::Kind::BadFormat, "layer dimension out of wire range");
      }
      append_u32(out, static_cast<std::uint32_t>(dim));
    }
    append_u32(out, static_cast<std::uint32_t>(layer.payload.size()));
    out.insert(out.end(), layer.payload.begin(), layer.payload.end());
  }
  return out;
}

EncodedModel parse_wire(std::span<const std::uint8_t> bytes) {
  WireReader reader(bytes);
  if (reader.u8() != 'F' || reader.u8() != 'A' || reader.u8() != 'T' || reader.u8() != 'C') {
    throw CodecError(CodecError::Kind::BadFormat, "bad magic, expected \"FATC\"");
  }
  const std::uint8_t version = reader.u8();
  if (version != 1) {
    throw CodecError(CodecError::Kind::BadFormat,
                     "unsupported wire version " + std::to_string(version));
  }
  EncodedModel out;
  out.precision = reader.u8();
  if (out.precision > 9) {
    throw CodecError(CodecError::Kind::BadFormat,
                     "invalid precision byte " + std::to_string(out.precision));
  }
  const std::uint16_t layer_count = reader.u16();
  out.layers.reserve(layer_count);
  for (std::uint16_t li = 0; li < layer_count; ++li) {
    EncodedModel::Layer layer;
    const std::uint16_t rank = reader.u16();
    layer.shape.reserve(rank);
    for (std::uint16_t d = 0; d < rank; ++d) layer.shape.push_back(reader.u32());
    const std::uint32_t payload_len = reader.u32();
    layer.payload = reader.bytes(payload_len);
    out.layers.push_back(std::move(layer));
  }
  if (!reader.exhausted()) {
    throw CodecError(CodecError::Kind::BadFormat, "trailing bytes after last layer");
  }
  return out;
}

}  // namespace fedsim
