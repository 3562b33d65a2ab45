#include <doctest.h>

#include <cmath>

#include "ddl/attacks.hpp"
#include "ddl/data_io.hpp"
#include "test_util.hpp"

using namespace ddl;

namespace {

struct Fixture {
  LabeledDataset data;
  MlpModel model;
};

const Fixture& trained() {
  static const Fixture f = [] {
    Fixture out;
    out.data = synthesize_dataset(3, 60, {10, 10, 1}, 4);
    out.model = make_mlp({100, 24, 4}, {}, 5);
    TrainConfig cfg;
    cfg.epochs = 15;
    train(out.model, out.data, cfg);
    return out;
  }();
  return f;
}

MlpModel zero_model(std::size_t in, std::size_t k) {
  MlpModel m = make_mlp({in, k}, {}, 1);
  m.layers[0].weights.setZero();
  return m;
}

}  // namespace

TEST_CASE("fgsm: epsilon 0 returns the input bit for bit") {
  const auto& f = trained();
  for (std::size_t i = 0; i < 5; ++i) {
    const auto r = fgsm_perturb(f.model, f.data.images[i], f.data.labels[i], 0.0);
    CHECK(r.adversarial == f.data.images[i]);
    CHECK(r.success == (predict(f.model, f.data.images[i]) != f.data.labels[i]));
    CHECK(r.features_changed == 0);
  }
}

TEST_CASE("fgsm sign: every pixel moves by +-epsilon or 0 before clamping") {
  const auto& f = trained();
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    const Image& x = f.data.images[i];
    const auto r = fgsm_perturb(f.model, x, f.data.labels[i], 0.3);
    const Eigen::VectorXd g = input_gradient(f.model, to_vector(x), f.data.labels[i]);
    for (std::size_t p = 0; p < x.size(); ++p) {
      const double gp = g(static_cast<Eigen::Index>(p));
      const double expected = std::clamp(x.pixels[p] + 0.3 * ((gp > 0) - (gp < 0)), 0.0, 1.0);
      CHECK(r.adversarial.pixels[p] == expected);
      CHECK(std::abs(r.adversarial.pixels[p] - x.pixels[p]) <= 0.3 + 1e-15);
    }
    CHECK(r.prediction == predict(f.model, r.adversarial));
    CHECK(r.success == (r.prediction != f.data.labels[i]));
  }
}

TEST_CASE("fgsm raw gradient: scaled gradient, zero gradient is a no-op") {
  const auto& f = trained();
  const Image& x = f.data.images[2];
  const auto r = fgsm_perturb(f.model, x, f.data.labels[2], 0.5, FgsmVariant::RawGradient);
  const Eigen::VectorXd g = input_gradient(f.model, to_vector(x), f.data.labels[2]);
  for (std::size_t p = 0; p < x.size(); ++p)
    CHECK(r.adversarial.pixels[p] == std::clamp(x.pixels[p] + 0.5 * g(static_cast<Eigen::Index>(p)), 0.0, 1.0));

  const Image flat(2, 2, 1, 0.4);
  const auto z = fgsm_perturb(zero_model(4, 3), flat, 1, 0.9, FgsmVariant::RawGradient);
  CHECK(z.adversarial == flat);
  CHECK_ERROR_CODE(fgsm_perturb(zero_model(4, 3), flat, 1, 1.5), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(fgsm_perturb(zero_model(5, 3), flat, 1, 0.1), ErrorCode::ShapeMismatch);
}

TEST_CASE("saliency: rejection rules, hand value, sentinel") {
  Eigen::MatrixXd J(3, 4);
  J << 0.5, -0.2, 0.3, 0.1,
       -0.2, 0.1, 0.2, 0.0,
       -0.3, 0.1, -0.1, -0.1;
  const Eigen::VectorXd s = jsma_saliency(J, 0);
  CHECK(s(0) == doctest::Approx(0.25));  // 0.5 * |-0.5|
  CHECK(s(1) == 0.0);                    // negative target derivative
  CHECK(s(2) == 0.0);                    // others sum to +0.1
  CHECK(s(3) == doctest::Approx(0.01));
  const Eigen::VectorXd masked = jsma_saliency(J, 0, {true, false, true, true});
  CHECK(masked(1) == kIneligible);
  CHECK(jsma_saliency(Eigen::MatrixXd::Zero(3, 5), 2).isZero(0.0));
  CHECK_ERROR_CODE(jsma_saliency(J, 3), ErrorCode::InvalidArgument);
}

TEST_CASE("jsma: target policy") {
  JsmaConfig cfg;
  CHECK(resolve_target(cfg, 9, 10) == 0);
  CHECK(resolve_target(cfg, 3, 10) == 4);
  cfg.fixed_target = 7;
  CHECK(resolve_target(cfg, 3, 10) == 7);
  cfg.fixed_target = 12;
  CHECK_ERROR_CODE(resolve_target(cfg, 3, 10), ErrorCode::InvalidArgument);
}

TEST_CASE("jsma: zero budget and zero Jacobian leave the image alone") {
  const auto& f = trained();
  JsmaConfig none;
  none.max_features = 0;
  const auto r = jsma_attack(f.model, f.data.images[0], f.data.labels[0], none);
  CHECK(r.adversarial == f.data.images[0]);
  CHECK(r.features_changed == 0);
  CHECK(r.targeted_success == (r.prediction == r.target));

  const Image flat(3, 3, 1, 0.2);
  const auto z = jsma_attack(zero_model(9, 3), flat, 0, JsmaConfig{});
  CHECK(z.adversarial == flat);
  CHECK(z.iterations == 0);
}

TEST_CASE("jsma invariants on a trained fixture") {
  const auto& f = trained();
  for (double theta : {1.0, 0.4}) {
    JsmaConfig cfg;
    cfg.theta = theta;
    cfg.max_features = 12;
    for (std::size_t i = 0; i < 20; ++i) {
      const Image before = f.data.images[i];
      const auto r = jsma_attack(f.model, before, f.data.labels[i], cfg);
      CHECK(f.data.images[i] == before);
      CHECK(r.features_changed == r.iterations);
      CHECK(r.features_changed <= cfg.max_features);
      CHECK(r.distinct_features <= r.features_changed);
      if (theta == 1.0) CHECK(r.distinct_features == r.features_changed);
      for (std::size_t p = 0; p < before.size(); ++p) {
        CHECK(r.adversarial.pixels[p] >= before.pixels[p]);
        CHECK(r.adversarial.pixels[p] <= 1.0);
      }
      CHECK(r.target == (f.data.labels[i] + 1) % 4);
      CHECK(r.prediction == predict(f.model, r.adversarial));
      CHECK(r.targeted_success == (r.prediction == r.target));
      if (r.targeted_success) CHECK(r.success);

      const auto again = jsma_attack(f.model, before, f.data.labels[i], cfg);
      CHECK(again.adversarial == r.adversarial);
    }
  }
  JsmaConfig logits_cfg;
  logits_cfg.jacobian = JacobianOutput::Logits;
  logits_cfg.max_features = 10;
  CHECK(jsma_attack(f.model, f.data.images[1], f.data.labels[1], logits_cfg).features_changed <= 10);
}
