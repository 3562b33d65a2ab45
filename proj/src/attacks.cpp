#include "ddl/attacks.hpp"

#include <algorithm>
#include <string>

#include "ddl/error.hpp"

namespace ddl {
namespace {

void check_image(const MlpModel& model, const Image& img) {
  if (img.size() != model.input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "image of " + std::to_string(img.size()) +
                                              " pixels for a model expecting " +
                                              std::to_string(model.input_size()));
  }
}

std::size_t count_changed(const Image& a, const Image& b) {
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) changed += a.pixels[i] != b.pixels[i];
  return changed;
}

}  // namespace

AttackResult fgsm_perturb(const MlpModel& model, const Image& img, int label, double epsilon,
                          FgsmVariant variant) {
  check_image(model, img);
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0,1]");
  }
  const Eigen::VectorXd grad = input_gradient(model, to_vector(img), label);

  AttackResult result;
  result.adversarial = img;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double g = grad(static_cast<Eigen::Index>(i));
    const double step = variant == FgsmVariant::Sign ? (g > 0.0) - (g < 0.0) : g;
    result.adversarial.pixels[i] = std::clamp(img.pixels[i] + epsilon * step, 0.0, 1.0);
  }
  result.prediction = predict(model, result.adversarial);
  result.success = result.prediction != label;
  result.iterations = 1;
  result.distinct_features = count_changed(img, result.adversarial);
  result.features_changed = result.distinct_features;
  return result;
}

Eigen::VectorXd jsma_saliency(const Eigen::MatrixXd& jacobian, int target,
                              const std::vector<bool>& eligible) {
  if (target < 0 || target >= jacobian.rows()) {
    throw Error(ErrorCode::InvalidArgument, "target class outside the Jacobian's rows");
  }
  const Eigen::Index m = jacobian.cols();
  if (!eligible.empty() && eligible.size() != static_cast<std::size_t>(m)) {
    throw Error(ErrorCode::ShapeMismatch, "eligibility mask length differs from feature count");
  }
  const Eigen::RowVectorXd target_row = jacobian.row(target);
  const Eigen::RowVectorXd others = jacobian.colwise().sum() - target_row;
  Eigen::VectorXd saliency(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!eligible.empty() && !eligible[static_cast<std::size_t>(j)]) {
      saliency(j) = kIneligible;
    } else if (target_row(j) < 0.0 || others(j) > 0.0) {
      saliency(j) = 0.0;
    } else {
      saliency(j) = target_row(j) * std::abs(others(j));
    }
  }
  return saliency;
}

int resolve_target(const JsmaConfig& config, int label, int num_classes) {
  const int target = config.fixed_target.value_or((label + 1) % num_classes);
  if (target < 0 || target >= num_classes) {
    throw Error(ErrorCode::InvalidArgument, "JSMA target outside the class range");
  }
  return target;
}

AttackResult jsma_attack(const MlpModel& model, const Image& img, int label,
                         const JsmaConfig& config) {
  check_image(model, img);
  if (!(config.theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "theta must be positive");
  const int target = resolve_target(config, label, static_cast<int>(model.num_classes()));

  AttackResult result;
  result.target = target;
  result.adversarial = img;
  Eigen::VectorXd x = to_vector(img);
  std::vector<bool> eligible(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) eligible[i] = img.pixels[i] < 1.0;

  result.prediction = argmax(forward(model, x));
  while (result.prediction != target && result.iterations < config.max_features) {
    const Eigen::VectorXd saliency =
        jsma_saliency(forward_jacobian(model, x, config.jacobian), target, eligible);
    Eigen::Index pick = -1;
    for (Eigen::Index j = 0; j < saliency.size(); ++j) {
      if (saliency(j) > 0.0 && (pick < 0 || saliency(j) > saliency(pick))) pick = j;
    }
    if (pick < 0) break;
    x(pick) = std::min(1.0, x(pick) + config.theta);
    if (x(pick) >= 1.0) eligible[static_cast<std::size_t>(pick)] = false;
    ++result.iterations;
    result.prediction = argmax(forward(model, x));
  }

  for (std::size_t i = 0; i < img.size(); ++i) result.adversarial.pixels[i] = x(static_cast<Eigen::Index>(i));
  result.features_changed = result.iterations;
  result.distinct_features = count_changed(img, result.adversarial);
  result.success = result.prediction != label;
  result.targeted_success = result.prediction == target;
  return result;
}

}  // namespace ddl
