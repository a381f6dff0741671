#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

/// Dense labeled examples, features stored row-major.
struct Examples {
  std::vector<double> features;
  std::vector<int> labels;
  int feature_dim = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    const auto d = static_cast<std::size_t>(feature_dim);
    return {features.data() + i * d, d};
  }

  void append(std::span<const double> x, int label);
};

/// A differentiable classifier over flat parameters. Implementations define
/// the shape manifest, per-example logits, and the mean-loss gradient.
class Model {
 public:
  virtual ~Model() = default;

  virtual const std::vector<LayerShape>& shapes() const = 0;
  virtual int feature_dim() const = 0;
  virtual int num_classes() const = 0;

  virtual void logits(const ParamVector& params, std::span<const double> x,
                      std::span<double> out) const = 0;

  /// Gradient of the mean cross-entropy over the index set, written to grad
  /// (resized/zeroed internally). Accumulation follows idx order.
  virtual void loss_gradient(const ParamVector& params, const Examples& data,
                             std::span<const std::uint32_t> idx, ParamVector& grad) const = 0;

  /// Mean cross-entropy over the index set.
  double loss(const ParamVector& params, const Examples& data,
              std::span<const std::uint32_t> idx) const;

  ParamVector zeros() const { return ParamVector::zeros(shapes()); }
  virtual ParamVector initial_params(Rng& rng) const = 0;

  /// Argmax class; ties resolved to the lowest index.
  int predict(const ParamVector& params, std::span<const double> x) const;

 protected:
  void check_inputs(const ParamVector& params, const Examples& data, const char* context) const;
};

/// Multinomial logistic regression: W (C x d) followed by b (C).
class LogisticModel : public Model {
 public:
  LogisticModel(int feature_dim, int num_classes);

  const std::vector<LayerShape>& shapes() const override { return shapes_; }
  int feature_dim() const override { return feature_dim_; }
  int num_classes() const override { return num_classes_; }
  void logits(const ParamVector&, std::span<const double>, std::span<double>) const override;
  void loss_gradient(const ParamVector&, const Examples&, std::span<const std::uint32_t>,
                     ParamVector&) const override;
  /// Zero init, the convex-case convention.
  ParamVector initial_params(Rng&) const override { return zeros(); }

 private:
  int feature_dim_;
  int num_classes_;
  std::vector<LayerShape> shapes_;
};

/// One-hidden-layer tanh MLP: W1 (H x d), b1 (H), W2 (C x H), b2 (C).
class MlpModel : public Model {
 public:
  MlpModel(int feature_dim, int hidden_units, int num_classes);

  const std::vector<LayerShape>& shapes() const override { return shapes_; }
  int feature_dim() const override { return feature_dim_; }
  int num_classes() const override { return num_classes_; }
  int hidden_units() const { return hidden_units_; }
  void logits(const ParamVector&, std::span<const double>, std::span<double>) const override;
  void loss_gradient(const ParamVector&, const Examples&, std::span<const std::uint32_t>,
                     ParamVector&) const override;
  /// Glorot-uniform weights, zero biases.
  ParamVector initial_params(Rng& rng) const override;

 private:
  int feature_dim_;
  int hidden_units_;
  int num_classes_;
  std::vector<LayerShape> shapes_;
};

// --- Local objective and solver ----------------------------------------------

/// The proximal local objective h_k(w) = F_k(w) + lambda/2 * ||w - anchor||^2.
/// The anchor is the global model captured at round start and stays fixed for
/// the whole local round.
struct LocalObjectiveSpec {
  double lambda = 0.0;
  ParamVector anchor;
};

enum class OptimizerKind { GradientDescent, Adam };

struct SolverConfig {
  double learning_rate = 0.01;
  int local_epochs = 3;
  int batch_size = 10;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Mean cross-entropy of the model on a nonempty batch.
double forward_loss(const Model& model, const ParamVector& params, const Examples& batch);

/// Gradient of the proximal objective: mean-loss gradient plus
/// lambda * (params - anchor). An empty idx means the full batch.
ParamVector proximal_gradient(const Model& model, const ParamVector& params,
                              const LocalObjectiveSpec& spec, const Examples& batch,
                              std::span<const std::uint32_t> idx = {});

/// Runs local_epochs of mini-batch steps on the proximal objective. The batch
/// schedule is a pure function of the seed; indices inside each mini-batch are
/// processed in ascending order, so a full-size batch reduces exactly to the
/// full-batch gradient. Optimizer state starts fresh every call.
ParamVector local_train(const Model& model, const ParamVector& start,
                        const LocalObjectiveSpec& spec, const Examples& data,
                        const SolverConfig& cfg, std::uint64_t seed);

/// Sentinel returned by gamma_inexactness when the starting point is already
/// stationary; distinguishable from every genuine (nonnegative) ratio.
inline constexpr double kAlreadyStationary = -1.0;

/// ||grad h(after)|| / ||grad h(before)|| over the full dataset. Diagnostic
/// only; never enforced.
double gamma_inexactness(const Model& model, const ParamVector& before, const ParamVector& after,
                         const LocalObjectiveSpec& spec, const Examples& data);

}  // namespace fedsim
