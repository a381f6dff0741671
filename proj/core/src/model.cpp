#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsim {
namespace {

// Stable log-sum-exp; logits buffer is reused by callers.
double log_sum_exp(std::span<const double> logits) {
  double m = logits[0];
  for (const double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (const double v : logits) sum += std::exp(v - m);
  return m + std::log(sum);
}

std::vector<std::uint32_t> full_index(std::size_t n) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  return idx;
}

void check_label(int label, int num_classes, std::size_t example) {
  if (label < 0 || label >= num_classes) {
    throw Error("example " + std::to_string(example) + ": label " + std::to_string(label) +
                " outside [0, " + std::to_string(num_classes) + ")");
  }
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

void apply_update(ParamVector& params, const ParamVector& grad, const SolverConfig& cfg,
                  AdamState& adam) {
  if (cfg.optimizer == OptimizerKind::GradientDescent) {
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      params.values[i] -= cfg.learning_rate * grad.values[i];
    }
    return;
  }
  adam.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const double g = grad.values[i];
    adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
    adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
    const double mh = adam.m[i] / bias1;
    const double vh = adam.v[i] / bias2;
    params.values[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
  }
}

}  // namespace

void Examples::append(std::span<const double> x, int label) {
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

void Model::check_inputs(const ParamVector& params, const Examples& data,
                         const char* context) const {
  if (params.shapes != shapes()) {
    throw ShapeError(shapes_to_string(shapes()), shapes_to_string(params.shapes), context);
  }
  params.require_consistent(context);
  if (data.feature_dim != feature_dim()) {
    throw ShapeError("feature_dim=" + std::to_string(feature_dim()),
                     "feature_dim=" + std::to_string(data.feature_dim), context);
  }
}

double Model::loss(const ParamVector& params, const Examples& data,
                   std::span<const std::uint32_t> idx) const {
  check_inputs(params, data, "Model::loss");
  if (idx.empty()) throw Error("Model::loss: empty index set");
  const int classes = num_classes();
  std::vector<double> z(static_cast<std::size_t>(classes));
  double total = 0.0;
  for (const std::uint32_t i : idx) {
    check_label(data.labels[i], classes, i);
    logits(params, data.row(i), z);
    total += log_sum_exp(z) - z[static_cast<std::size_t>(data.labels[i])];
  }
  return total / static_cast<double>(idx.size());
}

int Model::predict(const ParamVector& params, std::span<const double> x) const {
  std::vector<double> z(static_cast<std::size_t>(num_classes()));
  logits(params, x, z);
  int best = 0;
  for (int c = 1; c < num_classes(); ++c) {
    if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

LogisticModel::LogisticModel(int feature_dim, int num_classes)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
  shapes_ = {{num_classes, feature_dim}, {num_classes}};
}

void LogisticModel::logits(const ParamVector& params, std::span<const double> x,
                           std::span<double> out) const {
  const double* w = params.values.data();
  const double* b = w + static_cast<std::size_t>(num_classes_) * feature_dim_;
  for (int c = 0; c < num_classes_; ++c) {
    const double* row = w + static_cast<std::size_t>(c) * feature_dim_;
    double z = b[c];
    for (int j = 0; j < feature_dim_; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(c)] = z;
  }
}

void LogisticModel::loss_gradient(const ParamVector& params, const Examples& data,
                                  std::span<const std::uint32_t> idx, ParamVector& grad) const {
  check_inputs(params, data, "LogisticModel::loss_gradient");
  grad.shapes = shapes_;
  grad.values.assign(params.values.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(idx.size());
  std::vector<double> z(static_cast<std::size_t>(num_classes_));
  double* gw = grad.values.data();
  double* gb = gw + static_cast<std::size_t>(num_classes_) * feature_dim_;
  for (const std::uint32_t i : idx) {
    check_label(data.labels[i], num_classes_, i);
    const auto x = data.row(i);
    logits(params, x, z);
    const double lse = log_sum_exp(z);
    for (int c = 0; c < num_classes_; ++c) {
      double dz = std::exp(z[static_cast<std::size_t>(c)] - lse);
      if (c == data.labels[i]) dz -= 1.0;
      dz *= inv_batch;
      double* grow = gw + static_cast<std::size_t>(c) * feature_dim_;
      for (int j = 0; j < feature_dim_; ++j) grow[j] += dz * x[static_cast<std::size_t>(j)];
      gb[c] += dz;
    }
  }
}

MlpModel::MlpModel(int feature_dim, int hidden_units, int num_classes)
    : feature_dim_(feature_dim), hidden_units_(hidden_units), num_classes_(num_classes) {
  shapes_ = {{hidden_units, feature_dim}, {hidden_units}, {num_classes, hidden_units},
             {num_classes}};
}

void MlpModel::logits(const ParamVector& params, std::span<const double> x,
                      std::span<double> out) const {
  const std::size_t d = static_cast<std::size_t>(feature_dim_);
  const std::size_t h = static_cast<std::size_t>(hidden_units_);
  const double* w1 = params.values.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + static_cast<std::size_t>(num_classes_) * h;
  std::vector<double> a(h);
  for (std::size_t u = 0; u < h; ++u) {
    const double* row = w1 + u * d;
    double z = b1[u];
    for (std::size_t j = 0; j < d; ++j) z += row[j] * x[j];
    a[u] = std::tanh(z);
  }
  for (int c = 0; c < num_classes_; ++c) {
    const double* row = w2 + static_cast<std::size_t>(c) * h;
    double z = b2[c];
    for (std::size_t u = 0; u < h; ++u) z += row[u] * a[u];
    out[static_cast<std::size_t>(c)] = z;
  }
}

void MlpModel::loss_gradient(const ParamVector& params, const Examples& data,
                             std::span<const std::uint32_t> idx, ParamVector& grad) const {
  check_inputs(params, data, "MlpModel::loss_gradient");
  grad.shapes = shapes_;
  grad.values.assign(params.values.size(), 0.0);
  const std::size_t d = static_cast<std::size_t>(feature_dim_);
  const std::size_t h = static_cast<std::size_t>(hidden_units_);
  const std::size_t c_n = static_cast<std::size_t>(num_classes_);
  const double inv_batch = 1.0 / static_cast<double>(idx.size());

  const double* w1 = params.values.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c_n * h;
  double* g_w1 = grad.values.data();
  double* g_b1 = g_w1 + h * d;
  double* g_w2 = g_b1 + h;
  double* g_b2 = g_w2 + c_n * h;

  std::vector<double> a(h), z(c_n), dz(c_n), da(h);
  for (const std::uint32_t i : idx) {
    check_label(data.labels[i], num_classes_, i);
    const auto x = data.row(i);
    for (std::size_t u = 0; u < h; ++u) {
      const double* row = w1 + u * d;
      double s = b1[u];
      for (std::size_t j = 0; j < d; ++j) s += row[j] * x[j];
      a[u] = std::tanh(s);
    }
    for (std::size_t c = 0; c < c_n; ++c) {
      const double* row = w2 + c * h;
      double s = b2[c];
      for (std::size_t u = 0; u < h; ++u) s += row[u] * a[u];
      z[c] = s;
    }
    const double lse = log_sum_exp(z);
    for (std::size_t c = 0; c < c_n; ++c) {
      double g = std::exp(z[c] - lse);
      if (static_cast<int>(c) == data.labels[i]) g -= 1.0;
      dz[c] = g * inv_batch;
    }
    std::fill(da.begin(), da.end(), 0.0);
    for (std::size_t c = 0; c < c_n; ++c) {
      double* grow = g_w2 + c * h;
      const double* row = w2 + c * h;
      for (std::size_t u = 0; u < h; ++u) {
        grow[u] += dz[c] * a[u];
        da[u] += row[u] * dz[c];
      }
      g_b2[c] += dz[c];
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double dzu = da[u] * (1.0 - a[u] * a[u]);
      double* grow = g_w1 + u * d;
      for (std::size_t j = 0; j < d; ++j) grow[j] += dzu * x[j];
      g_b1[u] += dzu;
    }
  }
}

ParamVector MlpModel::initial_params(Rng& rng) const {
  ParamVector p = zeros();
  const double s1 = std::sqrt(6.0 / static_cast<double>(feature_dim_ + hidden_units_));
  const double s2 = std::sqrt(6.0 / static_cast<double>(hidden_units_ + num_classes_));
  auto w1 = p.layer(0);
  for (double& v : w1) v = rng.uniform(-s1, s1);
  auto w2 = p.layer(2);
  for (double& v : w2) v = rng.uniform(-s2, s2);
  return p;
}

void SolverConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("solver.learning_rate", "must be > 0");
  if (local_epochs < 1) throw ConfigError("solver.local_epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("solver.batch_size", "must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) {
    throw ConfigError("solver.adam_beta1", "must be in (0, 1)");
  }
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("solver.adam_beta2", "must be in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("solver.adam_epsilon", "must be > 0");
}

double forward_loss(const Model& model, const ParamVector& params, const Examples& batch) {
  if (batch.empty()) throw Error("forward_loss: empty batch");
  const auto idx = full_index(batch.size());
  return model.loss(params, batch, idx);
}

ParamVector proximal_gradient(const Model& model, const ParamVector& params,
                              const LocalObjectiveSpec& spec, const Examples& batch,
                              std::span<const std::uint32_t> idx) {
  if (batch.empty()) throw Error("proximal_gradient: empty batch");
  if (spec.lambda < 0.0) throw Error("proximal_gradient: lambda must be >= 0");
  require_same_shape(params, spec.anchor, "proximal_gradient anchor");
  std::vector<std::uint32_t> full;
  if (idx.empty()) {
    full = full_index(batch.size());
    idx = full;
  }
  ParamVector grad;
  model.loss_gradient(params, batch, idx, grad);
  if (spec.lambda != 0.0) {
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
      grad.values[i] += spec.lambda * (params.values[i] - spec.anchor.values[i]);
    }
  }
  return grad;
}

ParamVector local_train(const Model& model, const ParamVector& start,
                        const LocalObjectiveSpec& spec, const Examples& data,
                        const SolverConfig& cfg, std::uint64_t seed) {
  if (data.empty()) throw Error("local_train: empty dataset");
  cfg.validate();
  if (spec.lambda < 0.0) throw Error("local_train: lambda must be >= 0");
  require_same_shape(start, spec.anchor, "local_train anchor");

  ParamVector params = start;
  ParamVector grad;
  AdamState adam;
  if (cfg.optimizer == OptimizerKind::Adam) {
    adam.m.assign(params.values.size(), 0.0);
    adam.v.assign(params.values.size(), 0.0);
  }

  Rng rng(seed);
  std::vector<std::uint32_t> order(data.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    shuffle(order, rng);
    int step = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += batch, ++step) {
      const std::size_t end = std::min(pos + batch, order.size());
      std::vector<std::uint32_t> batch_idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      // Membership is random, accumulation order is not: a full-size batch
      // reduces to the dataset-order full-batch gradient exactly.
      std::sort(batch_idx.begin(), batch_idx.end());
      model.loss_gradient(params, data, batch_idx, grad);
      if (spec.lambda != 0.0) {
        for (std::size_t i = 0; i < grad.values.size(); ++i) {
          grad.values[i] += spec.lambda * (params.values[i] - spec.anchor.values[i]);
        }
      }
      if (!all_finite(grad.values)) {
        throw TrainingError(epoch, step, "non-finite gradient");
      }
      apply_update(params, grad, cfg, adam);
      if (!all_finite(params.values)) {
        throw TrainingError(epoch, step, "non-finite parameters after update");
      }
    }
  }
  return params;
}

double gamma_inexactness(const Model& model, const ParamVector& before, const ParamVector& after,
                         const LocalObjectiveSpec& spec, const Examples& data) {
  require_same_shape(before, after, "gamma_inexactness");
  const ParamVector g0 = proximal_gradient(model, before, spec, data);
  const double n0 = l2_norm(g0.values);
  if (n0 < 1e-12) return kAlreadyStationary;
  const ParamVector g1 = proximal_gradient(model, after, spec, data);
  return l2_norm(g1.values) / n0;
}

}  // namespace fedsim
