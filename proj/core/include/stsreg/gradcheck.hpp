#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stsreg/encoder.hpp"
#include "stsreg/losses.hpp"

namespace stsreg {

/// Computes loss and analytic gradients; forward_backward by default. Swappable
/// so a deliberately broken backward pass can be shown to fail the check.
using GradientFn = std::function<ForwardBackwardResult(std::span<const Example>, const ModelParams&, const LossSpec&,
                                                       const ForwardBackwardOptions&)>;

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-4) noexcept;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  /// Where the worst error occurred ("embeddings[3,1]", "head_bias[0]", ...).
  std::string worst_parameter;
};

/// Compares every analytic gradient entry against central differences of batch_loss.
GradCheckResult check_gradients(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                                const ForwardBackwardOptions& options = {}, double step = 1e-5,
                                const GradientFn& gradient = forward_backward);

/// Smallest distance of any sample in the batch to a point where the loss is
/// not differentiable: the residual at x0 (and at 0 for L1 / a zero-width
/// buffer), the clamp boundaries, and coordinates where u == v under an |u - v|
/// feature mode. Infinity when none apply.
double distance_to_kink(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                        const ForwardBackwardOptions& options = {});

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t dim = 6;
  std::size_t vocab = 24;
  std::size_t batch = 4;
  std::size_t classes = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  double kink_margin = 1e-4;
  GradientFn gradient = forward_backward;
};

struct GradCheckCase {
  std::string label;  ///< "<loss>/<mode>"
  LossSpec loss;
  FeatureMode mode;
  GradCheckResult result;
  std::size_t resamples = 0;  ///< batches redrawn for sitting too close to a kink
  bool passed = false;
};

/// Random small model per (loss kind, feature mode) combination, all six loss
/// kinds under all three feature modes. Regression cases clamp to [0, 3].
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace stsreg
