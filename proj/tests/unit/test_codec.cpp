#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "fedsim/codec.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

ParamVector random_model(std::uint64_t seed, double scale = 1.0) {
  ParamVector m;
  m.shapes = {{4, 3}, {4}, {2, 4}};
  Rng rng(seed);
  m.values.resize(element_count(m.shapes));
  for (double& v : m.values) v = scale * rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("zero encodes to a single question mark at every precision") {
  for (int p = 1; p <= 9; ++p) {
    CHECK(encode_value(0.0, p) == "?");
    CHECK(decode_value("?", p) == 0.0);
  }
}

TEST_CASE("reference worked example round-trips") {
  // The canonical worked example of the polyline algorithm.
  CHECK(encode_value(-179.9832104, 5) == "`~oia@");
  CHECK(decode_value("`~oia@", 5) == doctest::Approx(-179.98321).epsilon(1e-12));
  // First point of the reference three-point example.
  CHECK(encode_value(38.5, 5) == "_p~iF");
  CHECK(encode_value(-120.2, 5) == "~ps|U");
}

TEST_CASE("rounding is half away from zero on the scaled value") {
  // 0.00004 * 10^4 = 0.4 -> rounds to 0.
  CHECK(encode_value(0.00004, 4) == "?");
  // 0.00005 * 10^4 = 0.5 -> away from zero -> 1.
  CHECK(decode_value(encode_value(0.00005, 4), 4) == doctest::Approx(0.0001).epsilon(1e-15));
  CHECK(decode_value(encode_value(-0.00005, 4), 4) == doctest::Approx(-0.0001).epsilon(1e-15));
}

TEST_CASE("roundtrip bound holds for uniform random values") {
  Rng rng(42);
  for (const int p : {3, 4, 5, 6}) {
    const double bound = 0.5 * std::pow(10.0, -p) + 1e-12;
    for (int i = 0; i < 100000; ++i) {
      const double x = rng.uniform(-10.0, 10.0);
      const double back = decode_value(encode_value(x, p), p);
      CHECK(std::fabs(back - x) <= bound);
    }
  }
}

TEST_CASE("payload alphabet is confined to [63, 126]") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::string s = encode_value(rng.uniform(-1000.0, 1000.0), 5);
    for (const char c : s) {
      CHECK(static_cast<unsigned char>(c) >= 63);
      CHECK(static_cast<unsigned char>(c) <= 126);
    }
  }
}

TEST_CASE("values are self-delimiting in a concatenated payload") {
  std::string payload;
  const double xs[] = {1.25, -0.004, 0.0, 12345.6789, -0.0001};
  for (const double x : xs) encode_value_into(x, 4, payload);
  std::size_t pos = 0;
  for (const double x : xs) {
    const double expected = std::llround(x * 1e4) / 1e4;
    CHECK(decode_next_value(payload, pos, 4) == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK(pos == payload.size());
}

TEST_CASE("magnitude overflow is an error, not a wrap") {
  CHECK_THROWS_AS(encode_value(1.0e9, 5), CodecError);
  CHECK_THROWS_AS(encode_value(-1.0e9, 5), CodecError);
  CHECK_THROWS_AS(encode_value(std::nan(""), 4), CodecError);
  CHECK_THROWS_AS(encode_value(INFINITY, 4), CodecError);
  // 2^31 - 1 fits, 2^31 does not.
  CHECK_NOTHROW(encode_value(21474836.47, 2));
  CHECK_THROWS_AS(encode_value(21474836.48, 2), CodecError);
}

TEST_CASE("malformed payloads are rejected") {
  // Continuation bit set on the final character.
  std::string truncated = encode_value(-179.9832104, 5);
  truncated.pop_back();
  CHECK_THROWS_AS(decode_value(truncated, 5), CodecError);
  // Character below the offset.
  CHECK_THROWS_AS(decode_value(std::string(1, '\x20'), 5), CodecError);
  // More than one value where exactly one is expected.
  CHECK_THROWS_AS(decode_value("??", 5), CodecError);
  // Too many continuation chunks for 32 bits.
  CHECK_THROWS_AS(decode_value("~~~~~~~?", 5), CodecError);
  // Empty payload.
  CHECK_THROWS_AS(decode_value("", 5), CodecError);
}

TEST_CASE("all-zero layer compresses to question marks") {
  ParamVector m = ParamVector::zeros({{2, 3}});
  const EncodedModel enc = Codec::polyline(4).compress(m);
  REQUIRE(enc.layers.size() == 1);
  CHECK(enc.layers[0].payload == "??????");
  CHECK(enc.layers[0].shape == LayerShape{2, 3});
  const ParamVector back = decompress(enc);
  CHECK(back.values == m.values);
  CHECK(back.shapes == m.shapes);
}

TEST_CASE("compress/decompress round trip stays within the rounding bound") {
  const ParamVector m = random_model(3);
  const Codec codec = Codec::polyline(4);
  const ParamVector back = codec.decompress(codec.compress(m));
  REQUIRE(back.values.size() == m.values.size());
  CHECK(back.shapes == m.shapes);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    CHECK(std::fabs(back.values[i] - m.values[i]) <= 0.5e-4 + 1e-12);
  }
}

TEST_CASE("lossy fixed point: re-encoding a decoded model is exact") {
  const Codec codec = Codec::polyline(4);
  const ParamVector m = random_model(11);
  const ParamVector once = codec.decompress(codec.compress(m));
  const ParamVector twice = codec.decompress(codec.compress(once));
  CHECK(once.values == twice.values);
  CHECK(once.shapes == twice.shapes);
}

TEST_CASE("compression ratio on Gaussian(0, 0.1) weights at precision 4") {
  Rng rng(5);
  ParamVector m;
  m.shapes = {{100000}};
  m.values.resize(100000);
  for (double& v : m.values) v = 0.1 * rng.normal();
  const EncodedModel enc = Codec::polyline(4).compress(m);
  const double ratio = (8.0 * 100000.0) / static_cast<double>(enc.accounted_bytes());
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 4.0);
}

TEST_CASE("payload value count must match the shape") {
  const Codec codec = Codec::polyline(4);
  EncodedModel enc = codec.compress(ParamVector::zeros({{2, 2}}));
  enc.layers[0].payload += "?";  // one value too many
  CHECK_THROWS_AS(decompress(enc), CodecError);
  EncodedModel enc2 = codec.compress(ParamVector::zeros({{2, 2}}));
  enc2.layers[0].payload.pop_back();  // one too few
  CHECK_THROWS_AS(decompress(enc2), CodecError);
}

TEST_CASE("compress error carries layer and index context") {
  ParamVector m = ParamVector::zeros({{2}, {3}});
  m.values[3] = 1.0e12;  // layer 1, index 1
  try {
    Codec::polyline(4).compress(m);
    FAIL("expected CodecError");
  } catch (const CodecError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("lossless debug codec round-trips bitwise") {
  const ParamVector m = random_model(17, 123.456);
  const Codec codec = Codec::lossless();
  const EncodedModel enc = codec.compress(m);
  CHECK(enc.lossless());
  const ParamVector back = codec.decompress(enc);
  CHECK(back.values == m.values);
  CHECK(enc.accounted_bytes() == 1 + 3 * 16 + 8 * m.values.size());
}

TEST_CASE("accounted bytes follow the documented formula") {
  const ParamVector m = random_model(19);
  const EncodedModel enc = Codec::polyline(4).compress(m);
  std::size_t expected = 1;
  for (const auto& layer : enc.layers) expected += 16 + layer.payload.size();
  CHECK(enc.accounted_bytes() == expected);
}

TEST_CASE("wire format framing is bit-exact") {
  ParamVector m = ParamVector::zeros({{2}});
  const EncodedModel enc = Codec::polyline(4).compress(m);
  const auto bytes = serialize_wire(enc);
  const std::vector<std::uint8_t> expected = {
      'F', 'A', 'T', 'C',      // magic
      1,                       // version
      4,                       // precision
      1, 0,                    // layer count (LE)
      1, 0,                    // rank (LE)
      2, 0, 0, 0,              // dim 2 (LE)
      2, 0, 0, 0,              // payload length (LE)
      '?', '?',
  };
  CHECK(bytes == expected);
  const EncodedModel back = parse_wire(bytes);
  CHECK(back.precision == enc.precision);
  REQUIRE(back.layers.size() == 1);
  CHECK(back.layers[0].shape == enc.layers[0].shape);
  CHECK(back.layers[0].payload == enc.layers[0].payload);
}

TEST_CASE("wire parser rejects malformed data") {
  const auto good = serialize_wire(Codec::polyline(4).compress(random_model(23)));
  // Bad magic.
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_wire(bad), CodecError);
  // Truncated.
  auto cut = good;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(parse_wire(cut), CodecError);
  // Trailing garbage.
  auto extra = good;
  extra.push_back(0);
  CHECK_THROWS_AS(parse_wire(extra), CodecError);
  // Unsupported version.
  auto vers = good;
  vers[4] = 9;
  CHECK_THROWS_AS(parse_wire(vers), CodecError);
}

TEST_CASE("wire round trip preserves lossless payloads") {
  const ParamVector m = random_model(29);
  const EncodedModel enc = Codec::lossless().compress(m);
  const EncodedModel back = parse_wire(serialize_wire(enc));
  CHECK(back.precision == 0);
  const ParamVector restored = decompress(back);
  CHECK(restored.values == m.values);
}

}  // TEST_SUITE
