#include "fedsim/param_vector.hpp"

#include <cmath>
#include <sstream>

namespace fedsim {

std::size_t element_count(const LayerShape& shape) {
  std::size_t n = 1;
  for (const std::int64_t d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::size_t element_count(const std::vector<LayerShape>& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += element_count(s);
  return n;
}

std::string shapes_to_string(const std::vector<LayerShape>& shapes) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i > 0) out << ", ";
    out << '(';
    for (std::size_t j = 0; j < shapes[i].size(); ++j) {
      if (j > 0) out << 'x';
      out << shapes[i][j];
    }
    out << ')';
  }
  out << ']';
  return out.str();
}

std::span<const double> ParamVector::layer(std::size_t index) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < index; ++i) offset += element_count(shapes[i]);
  return {values.data() + offset, element_count(shapes[index])};
}

std::span<double> ParamVector::layer(std::size_t index) {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < index; ++i) offset += element_count(shapes[i]);
  return {values.data() + offset, element_count(shapes[index])};
}

void ParamVector::require_consistent(const char* context) const {
  if (values.size() != element_count(shapes)) {
    throw InternalError(std::string(context) + ": parameter count " +
                        std::to_string(values.size()) + " does not match manifest " +
                        shapes_to_string(shapes));
  }
}

void ParamVector::require_finite(const char* context) const {
  if (!all_finite(values)) {
    throw Error(std::string(context) + ": parameter vector contains non-finite values");
  }
}

ParamVector ParamVector::zeros(std::vector<LayerShape> shapes) {
  ParamVector p;
  p.values.assign(element_count(shapes), 0.0);
  p.shapes = std::move(shapes);
  return p;
}

void require_same_shape(const ParamVector& a, const ParamVector& b, const char* context) {
  if (!a.same_shape(b)) {
    throw ShapeError(shapes_to_string(a.shapes), shapes_to_string(b.shapes), context);
  }
}

bool all_finite(std::span<const double> values) {
  for (const double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (const double v : values) sum += v * v;
  return std::sqrt(sum);
}

double l2_distance(const ParamVector& a, const ParamVector& b) {
  require_same_shape(a, b, "l2_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

void add_scaled(ParamVector& acc, const ParamVector& x, double c) {
  require_same_shape(acc, x, "add_scaled");
  for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += c * x.values[i];
}

ParamVector scaled(const ParamVector& x, double c) {
  ParamVector out = x;
  for (double& v : out.values) v *= c;
  return out;
}

}  // namespace fedsim
