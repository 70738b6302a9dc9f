#include "stsreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

struct Slot {
  std::span<double> values;
  std::span<const double> analytic;
  const char* name;
  std::size_t cols;
};

std::string slot_label(const char* name, std::size_t index, std::size_t cols) {
  if (cols == 0) {
    return std::string(name) + "[" + std::to_string(index) + "]";
  }
  return std::string(name) + "[" + std::to_string(index / cols) + "," + std::to_string(index % cols) + "]";
}

std::vector<Example> random_batch(std::mt19937_64& rng, const GradCheckOptions& options, bool regression) {
  std::uniform_int_distribution<std::size_t> length(1, 5);
  std::uniform_int_distribution<TokenId> token(0, static_cast<TokenId>(options.vocab - 1));
  std::uniform_real_distribution<double> target(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> klass(0, options.classes - 1);
  std::vector<Example> batch(options.batch);
  for (auto& ex : batch) {
    for (auto* seq : {&ex.pair.first, &ex.pair.second}) {
      seq->resize(length(rng));
      for (auto& t : *seq) {
        t = token(rng);
      }
    }
    ex.target_value = regression ? target(rng) : 0.0;
    ex.class_index = klass(rng);
  }
  return batch;
}

LossSpec random_loss(LossKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> k(0.5, 3.0);
  std::uniform_real_distribution<double> x0(0.0, 0.5);
  std::uniform_real_distribution<double> tau(0.1, 1.0);
  switch (kind) {
    case LossKind::TranslatedReLU:
      return LossSpec::translated_relu(k(rng), x0(rng), 1.0);
    case LossKind::SmoothK2:
      return LossSpec::smooth_k2(k(rng), x0(rng), 1.0);
    case LossKind::L1:
      return LossSpec::l1();
    case LossKind::MSE:
      return LossSpec::mse();
    case LossKind::CrossEntropy:
      return LossSpec::cross_entropy();
    case LossKind::InfoNCE:
      return LossSpec::info_nce(tau(rng));
  }
  throw InvalidInput("unknown loss kind");
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult check_gradients(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                                const ForwardBackwardOptions& options, double step, const GradientFn& gradient) {
  const ForwardBackwardResult analytic = gradient(batch, params, loss, options);
  ModelParams probe = params;

  std::vector<Slot> slots{
      {probe.embeddings.values(), analytic.gradients.embeddings.values(), "embeddings", probe.embeddings.cols()},
      {probe.head_weights.values(), analytic.gradients.head_weights.values(), "head_weights", probe.head_weights.cols()},
      {std::span<double>(probe.head_bias), std::span<const double>(analytic.gradients.head_bias), "head_bias", 0},
  };

  GradCheckResult result;
  for (const auto& slot : slots) {
    if (slot.values.size() != slot.analytic.size()) {
      throw ShapeError("gradient check: analytic gradient has the wrong shape for " + std::string(slot.name));
    }
    for (std::size_t i = 0; i < slot.values.size(); ++i) {
      const double original = slot.values[i];
      slot.values[i] = original + step;
      const double up = batch_loss(batch, probe, loss, options);
      slot.values[i] = original - step;
      const double down = batch_loss(batch, probe, loss, options);
      slot.values[i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(slot.analytic[i], numeric);
      ++result.parameters_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(result.max_relative_error, err);
        result.worst_parameter = slot_label(slot.name, i, slot.cols);
      }
    }
  }
  return result;
}

double distance_to_kink(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                        const ForwardBackwardOptions& options) {
  double nearest = std::numeric_limits<double>::infinity();
  const bool has_absdiff = params.mode != FeatureMode::UV;
  for (const auto& ex : batch) {
    const Vector u = embed_sentence(ex.pair.first, params);
    const Vector v = embed_sentence(ex.pair.second, params);
    if (has_absdiff && loss.kind() != LossKind::InfoNCE) {
      for (std::size_t d = 0; d < u.size(); ++d) {
        nearest = std::min(nearest, std::abs(u[d] - v[d]));
      }
    }
    if (!is_regression(loss.kind())) {
      continue;
    }
    double pred = head_outputs(ex.pair, params).front();
    if (options.clamp_range) {
      const auto [low, high] = *options.clamp_range;
      nearest = std::min({nearest, std::abs(pred - low), std::abs(pred - high)});
      pred = std::clamp(pred, low, high);
    }
    const double x = std::abs(pred - ex.target_value);
    switch (loss.kind()) {
      case LossKind::TranslatedReLU:
      case LossKind::SmoothK2:
        nearest = std::min(nearest, std::abs(x - loss.x0()));
        if (loss.x0() == 0.0) {
          nearest = std::min(nearest, x);
        }
        break;
      case LossKind::L1:
        nearest = std::min(nearest, x);
        break;
      default:
        break;
    }
  }
  return nearest;
}

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& options) {
  if (options.dim == 0 || options.vocab == 0 || options.batch == 0 || options.classes < 2) {
    throw InvalidInput("gradcheck: dim, vocab and batch must be positive and classes >= 2");
  }
  constexpr LossKind kinds[] = {LossKind::TranslatedReLU, LossKind::SmoothK2,     LossKind::L1,
                                LossKind::MSE,            LossKind::CrossEntropy, LossKind::InfoNCE};
  constexpr FeatureMode modes[] = {FeatureMode::UV, FeatureMode::AbsDiff, FeatureMode::UVAbsDiff};
  constexpr std::size_t kMaxResamples = 1000;

  std::vector<GradCheckCase> cases;
  std::uint64_t case_index = 0;
  for (LossKind kind : kinds) {
    for (FeatureMode mode : modes) {
      std::mt19937_64 rng(options.seed * 1000003ULL + case_index++);
      const bool classification = kind == LossKind::CrossEntropy;
      InitOptions init;
      init.dim = options.dim;
      init.mode = mode;
      init.head = classification ? HeadKind::Classification : HeadKind::Regression;
      init.classes = options.classes;
      init.bias = classification ? 0.0 : 1.5;
      init.embedding_scale = 1.0;
      init.seed = rng();
      const ModelParams params = init_params(options.vocab, init);
      const LossSpec loss = random_loss(kind, rng);

      ForwardBackwardOptions fb;
      if (is_regression(kind)) {
        fb.clamp_range = std::pair{0.0, 3.0};
      }

      GradCheckCase c{std::string(to_string(kind)) + "/" + std::string(to_string(mode)), loss, mode, {}, 0, false};
      std::vector<Example> batch = random_batch(rng, options, is_regression(kind));
      while (distance_to_kink(batch, params, loss, fb) < options.kink_margin) {
        if (++c.resamples > kMaxResamples) {
          throw Error("gradcheck: could not draw a batch away from non-smooth points for " + c.label);
        }
        batch = random_batch(rng, options, is_regression(kind));
      }
      c.result = check_gradients(batch, params, loss, fb, options.step, options.gradient);
      c.passed = c.result.max_relative_error <= options.tolerance;
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

}  // namespace stsreg
