#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ddl/image.hpp"
#include "ddl/mlp.hpp"

namespace ddl {

enum class FgsmVariant { Sign, RawGradient };

struct AttackResult {
  Image adversarial;
  int prediction = -1;
  bool success = false;           // prediction differs from the true label
  bool targeted_success = false;  // prediction equals the JSMA target
  int target = -1;                // -1 for untargeted attacks
  std::size_t features_changed = 0;
  std::size_t distinct_features = 0;  // l0 distance between adversarial and input
  std::size_t iterations = 0;
};

// adv = clamp01(x + epsilon * sign(grad)) or clamp01(x + epsilon * grad);
// sign(0) = 0.
AttackResult fgsm_perturb(const MlpModel& model, const Image& img, int label, double epsilon,
                          FgsmVariant variant = FgsmVariant::Sign);

// Sentinel saliency for features that may not be selected.
inline constexpr double kIneligible = -std::numeric_limits<double>::infinity();

// Per-feature saliency towards class `target`. A feature scores zero when the
// target derivative is negative or the other classes' summed derivative is
// positive; otherwise the target derivative times |sum of the others|.
// `eligible` may be empty (all features eligible).
Eigen::VectorXd jsma_saliency(const Eigen::MatrixXd& jacobian, int target,
                              const std::vector<bool>& eligible = {});

struct JsmaConfig {
  double theta = 1.0;             // increment per selected feature
  std::size_t max_features = 80;  // modification budget
  std::optional<int> fixed_target;  // default: (label + 1) mod K
  JacobianOutput jacobian = JacobianOutput::Softmax;
};

int resolve_target(const JsmaConfig& config, int label, int num_classes);

// Raise one feature per iteration by theta (capped at 1) until the model
// predicts the target, the budget runs out, or no feature has positive saliency.
AttackResult jsma_attack(const MlpModel& model, const Image& img, int label,
                         const JsmaConfig& config);

}  // namespace ddl
