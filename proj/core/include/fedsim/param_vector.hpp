#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

/// Dimensions of one layer, e.g. {10, 32} for a 10x32 weight matrix.
using LayerShape = std::vector<std::int64_t>;

std::size_t element_count(const LayerShape& shape);
std::size_t element_count(const std::vector<LayerShape>& shapes);
std::string shapes_to_string(const std::vector<LayerShape>& shapes);

/// Flat, ordered vector of model parameters plus the per-layer shape manifest.
/// The flat order is layer-major and row-major within a layer; every model,
/// codec and aggregation operation preserves it.
struct ParamVector {
  std::vector<double> values;
  std::vector<LayerShape> shapes;

  std::size_t size() const { return values.size(); }
  bool same_shape(const ParamVector& other) const { return shapes == other.shapes; }

  std::span<const double> layer(std::size_t index) const;
  std::span<double> layer(std::size_t index);

  /// Throws InternalError when the value count disagrees with the manifest.
  void require_consistent(const char* context) const;
  /// Throws Error when any value is NaN or infinite.
  void require_finite(const char* context) const;

  static ParamVector zeros(std::vector<LayerShape> shapes);
};

void require_same_shape(const ParamVector& a, const ParamVector& b, const char* context);

bool all_finite(std::span<const double> values);
double l2_norm(std::span<const double> values);
double l2_distance(const ParamVector& a, const ParamVector& b);

/// acc += c * x (shapes must already agree).
void add_scaled(ParamVector& acc, const ParamVector& x, double c);
ParamVector scaled(const ParamVector& x, double c);

}  // namespace fedsim
