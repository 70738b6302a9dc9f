#include "stsreg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

constexpr std::array<std::pair<LossKind, std::string_view>, 6> kLossNames{{
    {LossKind::TranslatedReLU, "translated_relu"},
    {LossKind::SmoothK2, "smooth_k2"},
    {LossKind::L1, "l1"},
    {LossKind::MSE, "mse"},
    {LossKind::CrossEntropy, "cross_entropy"},
    {LossKind::InfoNCE, "info_nce"},
}};

void require_kind(const LossSpec& spec, LossKind expected) {
  if (spec.kind() != expected) {
    throw InvalidInput("loss spec is " + std::string(to_string(spec.kind())) + ", expected " +
                       std::string(to_string(expected)));
  }
}

void require_residual(double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw InvalidInput("residual must be finite and non-negative");
  }
}

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
  for (const auto& [k, name] : kLossNames) {
    if (k == kind) {
      return name;
    }
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (const auto& [k, n] : kLossNames) {
    if (n == name) {
      return k;
    }
  }
  throw InvalidInput("unknown loss kind '" + std::string(name) + "'");
}

bool is_regression(LossKind kind) noexcept {
  return kind == LossKind::TranslatedReLU || kind == LossKind::SmoothK2 || kind == LossKind::L1 ||
         kind == LossKind::MSE;
}

LossSpec::LossSpec(LossKind kind, double k, double x0, double d, double tau)
    : kind_(kind), k_(k), x0_(x0), d_(d), tau_(tau) {
  if (!(k_ > 0.0) || !std::isfinite(k_)) {
    throw InvalidInput("loss: k must be positive and finite");
  }
  if (!(d_ > 0.0) || !std::isfinite(d_)) {
    throw InvalidInput("loss: label interval d must be positive and finite");
  }
  if (!(x0_ >= 0.0) || !(x0_ <= d_ / 2.0)) {
    throw InvalidInput("loss: buffer threshold x0 must satisfy 0 <= x0 <= d/2 (x0 = " + std::to_string(x0_) +
                       ", d = " + std::to_string(d_) + ")");
  }
  if (kind_ == LossKind::InfoNCE && (!(tau_ > 0.0) || !std::isfinite(tau_))) {
    throw InvalidInput("loss: InfoNCE temperature must be positive and finite");
  }
}

Residual residual(double prediction, double label) {
  if (!std::isfinite(prediction) || !std::isfinite(label)) {
    throw InvalidInput("residual: prediction and label must be finite");
  }
  const double diff = prediction - label;
  return {std::abs(diff), diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0)};
}

LossValue translated_relu(double x, const LossSpec& spec) {
  require_kind(spec, LossKind::TranslatedReLU);
  require_residual(x);
  if (x < spec.x0()) {
    return {0.0, 0.0};
  }
  return {spec.k() * (x - spec.x0()), spec.k()};
}

LossValue smooth_k2(double x, const LossSpec& spec) {
  require_kind(spec, LossKind::SmoothK2);
  require_residual(x);
  if (x < spec.x0()) {
    return {0.0, 0.0};
  }
  const double excess = x - spec.x0();
  return {spec.k() * excess * excess, 2.0 * spec.k() * excess};
}

LossValue l1_loss(double x) {
  require_residual(x);
  return {x, x > 0.0 ? 1.0 : 0.0};
}

LossValue mse_loss(double x) {
  require_residual(x);
  return {x * x, 2.0 * x};
}

LossValue regression_loss(double x, const LossSpec& spec) {
  switch (spec.kind()) {
    case LossKind::TranslatedReLU:
      return translated_relu(x, spec);
    case LossKind::SmoothK2:
      return smooth_k2(x, spec);
    case LossKind::L1:
      return l1_loss(x);
    case LossKind::MSE:
      return mse_loss(x);
    default:
      throw InvalidInput("regression_loss: " + std::string(to_string(spec.kind())) + " is not a regression loss");
  }
}

LossValue regression_loss_wrt_prediction(double prediction, double target, const LossSpec& spec) {
  const Residual r = residual(prediction, target);
  const LossValue loss = regression_loss(r.x, spec);
  return {loss.value, loss.grad * static_cast<double>(r.sign)};
}

double clamp_to_range(double prediction, const LabelMapping& mapping) {
  return std::clamp(prediction, mapping.lowest(), mapping.highest());
}

ClampedValue clamp_to_range(double prediction, double low, double high) {
  if (!(low <= high)) {
    throw InvalidInput("clamp_to_range: empty range");
  }
  if (prediction < low) {
    return {low, 0.0};
  }
  if (prediction > high) {
    return {high, 0.0};
  }
  return {prediction, 1.0};
}

CrossEntropyValue cross_entropy(std::span<const double> logits, std::size_t class_index) {
  if (class_index >= logits.size()) {
    throw InvalidInput("cross_entropy: class index " + std::to_string(class_index) + " out of range for " +
                       std::to_string(logits.size()) + " logits");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) {
    sum += std::exp(z - shift);
  }
  const double log_sum = shift + std::log(sum);

  CrossEntropyValue out;
  out.value = log_sum - logits[class_index];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = std::exp(logits[i] - log_sum);
  }
  out.grad[class_index] -= 1.0;
  return out;
}

InfoNceValue info_nce(std::span<const Vector> anchors, std::span<const Vector> positives, double tau) {
  if (anchors.empty() || anchors.size() != positives.size()) {
    throw InvalidInput("info_nce: anchors and positives must be non-empty and of equal count");
  }
  if (!(tau > 0.0)) {
    throw InvalidInput("info_nce: temperature must be positive");
  }
  const std::size_t n = anchors.size();
  const std::size_t dim = anchors.front().size();

  std::vector<double> anchor_norm(n);
  std::vector<double> positive_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (anchors[i].size() != dim || positives[i].size() != dim) {
      throw ShapeError("info_nce: embeddings must share one dimension");
    }
    anchor_norm[i] = norm(anchors[i]);
    positive_norm[i] = norm(positives[i]);
    if (anchor_norm[i] == 0.0 || positive_norm[i] == 0.0) {
      throw InvalidInput("info_nce: zero-norm embedding");
    }
  }

  // cos_ij = cos(a_i, p_j); row i is anchor i's logits over all positives.
  Matrix cosines(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cosines(i, j) = dot(anchors[i], positives[j]) / (anchor_norm[i] * positive_norm[j]);
    }
  }

  InfoNceValue out;
  out.grad_anchors.assign(n, Vector(dim, 0.0));
  out.grad_positives.assign(n, Vector(dim, 0.0));
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    Vector logits(n);
    for (std::size_t j = 0; j < n; ++j) {
      logits[j] = cosines(i, j) / tau;
    }
    const CrossEntropyValue row = cross_entropy(logits, i);
    out.value += row.value * inv_n;

    for (std::size_t j = 0; j < n; ++j) {
      // d(loss)/d(cos_ij)
      const double g = row.grad[j] * inv_n / tau;
      if (g == 0.0) {
        continue;
      }
      const double c = cosines(i, j);
      const double inv_ab = 1.0 / (anchor_norm[i] * positive_norm[j]);
      const double inv_aa = 1.0 / (anchor_norm[i] * anchor_norm[i]);
      const double inv_pp = 1.0 / (positive_norm[j] * positive_norm[j]);
      for (std::size_t d = 0; d < dim; ++d) {
        out.grad_anchors[i][d] += g * (positives[j][d] * inv_ab - c * anchors[i][d] * inv_aa);
        out.grad_positives[j][d] += g * (anchors[i][d] * inv_ab - c * positives[j][d] * inv_pp);
      }
    }
  }
  return out;
}

}  // namespace stsreg
