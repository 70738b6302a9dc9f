#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stsreg/label_map.hpp"
#include "stsreg/tensor.hpp"

namespace stsreg {

enum class LossKind { TranslatedReLU, SmoothK2, L1, MSE, CrossEntropy, InfoNCE };

std::string_view to_string(LossKind kind) noexcept;
/// Accepts the snake_case names printed by to_string ("translated_relu", "smooth_k2", ...).
LossKind parse_loss_kind(std::string_view name);

/// True for the four kinds that score a scalar prediction against a numeric target.
bool is_regression(LossKind kind) noexcept;

/// Loss selection and hyperparameters. Construction enforces k > 0, 0 <= x0 <= d/2,
/// d > 0 and tau > 0, so a LossSpec in hand is always valid.
class LossSpec {
public:
  static constexpr double kDefaultTau = 0.05;

  explicit LossSpec(LossKind kind, double k = 1.0, double x0 = 0.0, double d = 1.0,
                    double tau = kDefaultTau);

  static LossSpec translated_relu(double k, double x0, double d = 1.0) {
    return LossSpec(LossKind::TranslatedReLU, k, x0, d);
  }
  static LossSpec smooth_k2(double k, double x0, double d = 1.0) {
    return LossSpec(LossKind::SmoothK2, k, x0, d);
  }
  static LossSpec l1() { return LossSpec(LossKind::L1); }
  static LossSpec mse() { return LossSpec(LossKind::MSE); }
  static LossSpec cross_entropy() { return LossSpec(LossKind::CrossEntropy); }
  static LossSpec info_nce(double tau) { return LossSpec(LossKind::InfoNCE, 1.0, 0.0, 1.0, tau); }

  LossKind kind() const noexcept { return kind_; }
  double k() const noexcept { return k_; }
  double x0() const noexcept { return x0_; }
  double d() const noexcept { return d_; }
  double tau() const noexcept { return tau_; }

  bool operator==(const LossSpec&) const = default;

private:
  LossKind kind_;
  double k_;
  double x0_;
  double d_;
  double tau_;
};

/// |prediction - label| together with sign(prediction - label) in {-1, 0, +1}.
struct Residual {
  double x = 0.0;
  int sign = 0;
};

/// Loss value and its derivative with respect to the residual x.
struct LossValue {
  double value = 0.0;
  double grad = 0.0;
};

Residual residual(double prediction, double label);

/// max(0, k(x - x0)). The derivative at x = x0 is the right-sided one, k.
LossValue translated_relu(double x, const LossSpec& spec);
/// k(x - x0)^2 for x >= x0, zero below. C1 at x0.
LossValue smooth_k2(double x, const LossSpec& spec);
LossValue l1_loss(double x);
LossValue mse_loss(double x);

/// Dispatches on spec.kind(); only valid for the four regression kinds.
LossValue regression_loss(double x, const LossSpec& spec);

/// Loss and d(loss)/d(prediction) for one sample, chaining the residual sign.
LossValue regression_loss_wrt_prediction(double prediction, double target, const LossSpec& spec);

/// Prediction clamped into [lowest node, highest node] of the mapping.
double clamp_to_range(double prediction, const LabelMapping& mapping);

struct ClampedValue {
  double value = 0.0;
  /// d(clamped)/d(prediction): 1 inside the closed range, 0 outside.
  double grad = 1.0;
};
ClampedValue clamp_to_range(double prediction, double low, double high);

struct CrossEntropyValue {
  double value = 0.0;
  Vector grad;  ///< d(value)/d(logits) = softmax(logits) - one_hot(class_index)
};

/// -log softmax(logits)[class_index], evaluated with the log-sum-exp shift.
CrossEntropyValue cross_entropy(std::span<const double> logits, std::size_t class_index);

struct InfoNceValue {
  double value = 0.0;
  std::vector<Vector> grad_anchors;
  std::vector<Vector> grad_positives;
};

/// Batch-mean InfoNCE over cosine similarities with in-batch positives as negatives.
InfoNceValue info_nce(std::span<const Vector> anchors, std::span<const Vector> positives, double tau);

}  // namespace stsreg
