#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "malprotect/autoencoder.hpp"
#include "malprotect/errors.hpp"
#include "malprotect/model_io.hpp"
#include "malprotect/perturb.hpp"
#include "malprotect/robustness.hpp"
#include "malprotect/synthetic.hpp"
#include "malprotect/training.hpp"
#include "malprotect/transfer.hpp"
#include "test_support.hpp"

using namespace malprotect;

namespace {

Dataset small_dataset(std::uint64_t seed = 3, std::size_t dim = 100, std::size_t per_class = 200) {
  SyntheticConfig cfg;
  cfg.dim = dim;
  cfg.n_per_class = per_class;
  cfg.benign_prototype_density = 0.3;
  cfg.malware_prototype_density = 0.1;
  cfg.flip_noise = 0.05;
  return generate_synthetic_dataset(cfg, seed).first;
}

// Two clusters in four dimensions: benign uses features {0,1}, malware {2,3}.
Dataset toy_separable() {
  Dataset d;
  d.dim = 4;
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.8);
  for (int i = 0; i < 200; ++i) {
    const bool mal = i % 2;
    std::vector<FeatureIndex> on;
    const FeatureIndex base = mal ? 2 : 0;
    on.push_back(base);
    if (coin(rng)) on.push_back(base + 1);
    d.samples.push_back({FeatureVector(4, on), mal ? Label::malware : Label::benign,
                         i < 140 ? Split::train : (i < 170 ? Split::validation : Split::test)});
  }
  return d;
}

bool same_weights(const Mlp<double>& a, const Mlp<double>& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l)
    if (a.layers()[l].weights != b.layers()[l].weights || a.layers()[l].bias != b.layers()[l].bias) return false;
  return true;
}

double agreement(const PredictionModel& a, const PredictionModel& b, std::span<const LabeledSample> samples) {
  std::size_t same = 0;
  for (const auto& s : samples) same += a.predict_label(s.vector) == b.predict_label(s.vector);
  return double(same) / double(samples.size());
}

/// Fixed-output classifier: zero weights, constant logits.
MlpClassifier constant_classifier(std::size_t dim, Label label) {
  Mlp<double> net({dim, 2}, OutputKind::softmax);
  net.layers()[0].bias(to_int(label)) = 10;
  return MlpClassifier(std::move(net), {});
}

}  // namespace

TEST_CASE("softmax outputs are normalised") {
  std::mt19937_64 rng(1);
  auto net = Mlp<double>::initialized({30, 16, 8, 2}, OutputKind::softmax, rng);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(30);
    for (auto& v : x) v = u(rng) * 10;
    const auto y = net.forward(x);
    CHECK(std::abs(y.sum() - 1.0) < 1e-6);
    CHECK((y.array() >= 0).all());
  }
}

TEST_CASE("sparse and dense forward passes agree") {
  std::mt19937_64 rng(2);
  auto net = Mlp<double>::initialized({40, 12, 2}, OutputKind::softmax, rng);
  for (int t = 0; t < 20; ++t) {
    const auto v = testsupport::random_vector(rng, 40, 0.3);
    const auto dense = net.forward(Eigen::VectorXd(v.to_dense()));
    const auto sparse = net.forward_sparse(v.enabled());
    CHECK((dense - sparse).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("network construction rejects bad shapes") {
  CHECK_THROWS_AS(Mlp<double>({4}, OutputKind::softmax), std::invalid_argument);
  CHECK_THROWS_AS(Mlp<double>({4, 0, 2}, OutputKind::softmax), std::invalid_argument);
  Mlp<double> net({3, 2}, OutputKind::softmax);
  CHECK_THROWS_AS(net.set_temperature(0), std::invalid_argument);
  CHECK_THROWS_AS(MlpClassifier(Mlp<double>({3, 3}, OutputKind::softmax), {}), ConfigError);
}

TEST_CASE("backprop matches central differences on a trained network") {
  const auto d = small_dataset();
  const auto model = train_mlp(d, {32, 16}, {5, 0.05, 32}, 4);
  const auto x = d.samples[0].vector.to_dense();
  Eigen::VectorXd t = Eigen::VectorXd::Zero(2);
  t(to_int(d.samples[0].label)) = 1;
  CHECK(finite_difference_check(model.network(), x, t, 1e-4, 400, 7) < 1e-3);
  CHECK_THROWS_AS(finite_difference_check(model.network(), x, t, 0.5, 10, 7), ConfigError);
  CHECK_THROWS_AS(finite_difference_check(model.network(), x, t, 0.0, 10, 7), ConfigError);
}

TEST_CASE("linear softmax gradient equals the closed form") {
  std::mt19937_64 rng(5);
  auto net = Mlp<double>::initialized({6, 2}, OutputKind::softmax, rng);
  Eigen::MatrixXd X(6, 3);
  X.setRandom();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(2, 3);
  T(0, 0) = T(1, 1) = T(1, 2) = 1;

  Mlp<double>::Gradient g;
  net.backward(X, T, g);
  // cross-entropy of softmax(Wx + b): dW = (p - t) x^T / batch, db = mean(p - t)
  Eigen::MatrixXd Z = net.layers()[0].weights * X;
  Z.colwise() += net.layers()[0].bias;
  Eigen::MatrixXd P(2, 3);
  for (int c = 0; c < 3; ++c) {
    const double e0 = std::exp(Z(0, c)), e1 = std::exp(Z(1, c));
    P(0, c) = e0 / (e0 + e1);
    P(1, c) = e1 / (e0 + e1);
  }
  const Eigen::MatrixXd dW = (P - T) * X.transpose() / 3.0;
  const Eigen::VectorXd db = (P - T).rowwise().sum() / 3.0;
  CHECK((g.weights[0] - dW).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((g.bias[0] - db).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero network on zero input has the softmax(0) residual as bias gradient") {
  Mlp<double> net({5, 2}, OutputKind::softmax);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 1);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(2, 1);
  T(1, 0) = 1;
  Mlp<double>::Gradient g;
  net.backward(X, T, g);
  CHECK(g.bias[0](0) == doctest::Approx(0.5));
  CHECK(g.bias[0](1) == doctest::Approx(-0.5));
  CHECK(g.weights[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sigmoid output gradient matches central differences") {
  std::mt19937_64 rng(8);
  auto net = Mlp<double>::initialized({10, 4, 10}, OutputKind::sigmoid, rng);
  const auto x = testsupport::random_vector(rng, 10, 0.4).to_dense();
  CHECK(finite_difference_check(net, x, x, 1e-5, 200, 1) < 1e-3);
}

TEST_CASE("training on separable toy data reaches full validation accuracy") {
  const auto d = toy_separable();
  const auto model = train_mlp(d, {8}, {60, 0.1, 8}, 1);
  CHECK(model.meta().validation_accuracy == 1.0);
  CHECK(accuracy(model, d.subset(Split::test)) == 1.0);
}

TEST_CASE("synthetic data at dim 100 is learnable") {
  const auto d = small_dataset(21, 100, 200);
  const auto model = train_mlp(d, kDefaultHidden, {20, 0.05, 32}, 2);
  CHECK(model.meta().validation_accuracy >= 0.9);
}

TEST_CASE("training is deterministic and zero epochs leave the initialisation") {
  const auto d = small_dataset();
  const auto a = train_mlp(d, {16}, {3, 0.05, 32}, 11);
  const auto b = train_mlp(d, {16}, {3, 0.05, 32}, 11);
  CHECK(same_weights(a.network(), b.network()));

  // Zero epochs never look at the data, so two different datasets give the same weights.
  const auto other = small_dataset(99);
  const auto z1 = train_mlp(d, {16}, {0, 0.05, 32}, 11);
  const auto z2 = train_mlp(other, {16}, {0, 0.05, 32}, 11);
  CHECK(same_weights(z1.network(), z2.network()));
  CHECK_FALSE(same_weights(z1.network(), a.network()));
  // untrained accuracy is far from the trained model's
  CHECK(z1.meta().validation_accuracy < 0.9);
}

TEST_CASE("single-class training data is rejected") {
  auto d = small_dataset();
  std::erase_if(d.samples, [](const LabeledSample& s) { return s.label == Label::malware; });
  CHECK_THROWS_AS(train_mlp(d, {8}, {1, 0.05, 32}, 1), TrainingError);
  CHECK_THROWS_AS(train_logistic(d, {1, 0.05, 32}, 1), TrainingError);
  const auto ok = small_dataset();
  CHECK_THROWS_AS(train_mlp(ok, {8}, {1, 0.05, 0}, 1), ConfigError);
}

TEST_CASE("logistic regression on mirrored data has near-zero intercept") {
  // benign: feature 0 with prob .8, feature 1 with prob .2; malware mirrored.
  Dataset d;
  d.dim = 2;
  for (int i = 0; i < 400; ++i) {
    const bool mal = i % 2;
    const int slot = (i / 2) % 5;
    FeatureIndex f = slot < 4 ? 0 : 1;
    if (mal) f = 1 - f;
    d.samples.push_back({FeatureVector(2, {f}), mal ? Label::malware : Label::benign, Split::train});
  }
  const auto model = train_logistic(d, {200, 0.1, 16}, 3);
  const auto coef = model.logistic_coefficients();
  CHECK(std::abs(model.logistic_intercept()) < 0.1);
  // optimum: both one-hot inputs have log-odds +-log 4
  CHECK(coef(1) - coef(0) == doctest::Approx(2 * std::log(4.0)).epsilon(0.05));
}

TEST_CASE("logistic coefficient sign follows the class direction") {
  Dataset d;
  d.dim = 3;
  for (int i = 0; i < 100; ++i) {
    const bool mal = i % 2;
    d.samples.push_back({mal ? FeatureVector(3, {2}) : FeatureVector(3), mal ? Label::malware : Label::benign,
                         Split::train});
  }
  const auto model = train_logistic(d, {50, 0.1, 8}, 1);
  CHECK(model.logistic_coefficients()(2) > 0);
  CHECK_THROWS_AS(train_mlp(d, {4}, {1, 0.1, 8}, 1).logistic_coefficients(), ConfigError);
}

TEST_CASE("duplicating every sample keeps the logistic decision boundary") {
  const auto d = small_dataset(5, 60, 150);
  auto doubled = d;
  for (const auto& s : d.samples) doubled.samples.push_back(s);
  const auto a = train_logistic(d, {40, 0.05, 16}, 4);
  const auto b = train_logistic(doubled, {40, 0.05, 16}, 4);
  CHECK(agreement(a, b, d.subset(Split::test)) >= 0.98);
}

TEST_CASE("autoencoder closed form at zero weights") {
  Mlp<double> net({8, 3, 8}, OutputKind::sigmoid);
  Autoencoder ae(std::move(net));
  CHECK(ae.reconstruction_loss(FeatureVector(8)) == doctest::Approx(0.25));
  CHECK(ae.reconstruction_loss(FeatureVector(8, {1, 2, 7})) == doctest::Approx(0.25));
  CHECK_THROWS_AS(ae.reconstruction_loss(FeatureVector(9)), DimensionMismatch);
}

TEST_CASE("autoencoder validation") {
  CHECK_THROWS_AS(Autoencoder(Mlp<double>({8, 8, 8}, OutputKind::sigmoid)), ConfigError);
  CHECK_THROWS_AS(Autoencoder(Mlp<double>({8, 8}, OutputKind::sigmoid)), ConfigError);
  CHECK_THROWS_AS(Autoencoder(Mlp<double>({8, 3, 2}, OutputKind::softmax)), ConfigError);
  std::vector<FeatureVector> train{FeatureVector(8, {1}), FeatureVector(8, {2})};
  CHECK_THROWS_AS(train_autoencoder(train, {8}, {1, 0.1, 2}, 1), ConfigError);
  CHECK_THROWS_AS(train_autoencoder({}, {4}, {1, 0.1, 2}, 1), TrainingError);
  CHECK(default_autoencoder_hidden(512) == std::vector<std::size_t>{64, 16, 64});
  CHECK(default_autoencoder_hidden(64) == std::vector<std::size_t>{16, 8, 16});
}

TEST_CASE("autoencoder separates in-distribution from random vectors") {
  const auto d = small_dataset(6, 100, 200);
  const auto train = d.vectors(Split::train);
  const auto ae = train_autoencoder(train, default_autoencoder_hidden(100), {30, 0.5, 32}, 2);
  const auto ae2 = train_autoencoder(train, default_autoencoder_hidden(100), {30, 0.5, 32}, 2);

  const auto held = d.vectors(Split::test);
  double in = 0, density = 0;
  for (const auto& v : held) {
    in += ae.reconstruction_loss(v);
    density += double(v.enabled_count()) / 100.0;
    CHECK(ae.reconstruction_loss(v) == ae2.reconstruction_loss(v));
  }
  in /= double(held.size());
  density /= double(held.size());

  std::mt19937_64 rng(3);
  double out = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto v = testsupport::random_vector(rng, 100, density);
    const double loss = ae.reconstruction_loss(v);
    CHECK(loss >= 0);
    out += loss;
  }
  out /= double(held.size());
  CHECK(in < out);
}

TEST_CASE("adversarial quota") {
  CHECK(adversarial_quota(1000, 400, 0.25) == 250);
  CHECK(adversarial_quota(1000, 100, 0.25) == 100);
  CHECK(adversarial_quota(10, 0, 0.5) == 0);
  CHECK_THROWS_AS(adversarial_quota(10, 10, 0.0), ConfigError);
  CHECK_THROWS_AS(adversarial_quota(10, 10, 1.5), ConfigError);
}

TEST_CASE("adversarial training with an empty pool falls back and warns") {
  const auto d = small_dataset();
  AdversarialTrainingReport report;
  const auto model = adversarially_train(d, {}, 0.25, {16}, {3, 0.05, 32}, 1, &report);
  CHECK(report.injected == 0);
  REQUIRE(report.warnings.size() == 1);
  const auto vanilla = train_mlp(d, {16}, {3, 0.05, 32}, 1);
  CHECK(same_weights(model.network(), vanilla.network()));
}

TEST_CASE("adversarial training lowers evasion on the transfer pool") {
  const auto [d, table] = [] {
    SyntheticConfig cfg;
    cfg.dim = 100;
    cfg.n_per_class = 300;
    cfg.flip_noise = 0.1;
    return generate_synthetic_dataset(cfg, 13);
  }();
  const TrainingParams params{10, 0.05, 32};
  const auto vanilla = train_mlp(d, {32, 16}, params, 1);
  const auto substitute = train_mlp(d, {24}, params, 2);
  const auto train_mal = d.vectors(Split::train, Label::malware);
  const auto test_mal = d.vectors(Split::test, Label::malware);
  const auto train_pool = transfer_vectors(transferability_generate(substitute, train_mal, table, 0.1, 30));
  const auto test_pool = transfer_vectors(transferability_generate(substitute, test_mal, table, 0.1, 30));
  REQUIRE(!test_pool.empty());

  AdversarialTrainingReport report;
  const auto hardened = adversarially_train(d, train_pool, 0.25, {32, 16}, params, 1, &report);
  CHECK(report.injected == adversarial_quota(d.count(Split::train), train_pool.size(), 0.25));

  auto evasion = [&](const PredictionModel& m) {
    std::size_t n = 0;
    for (const auto& v : test_pool) n += m.predict_label(v) == Label::benign;
    return double(n) / double(test_pool.size());
  };
  CHECK(evasion(hardened) < evasion(vanilla));
}

TEST_CASE("distillation at temperature one agrees with its teacher") {
  const auto d = small_dataset();
  const auto teacher = train_mlp(d, {32, 16}, {10, 0.05, 32}, 1);
  const auto student = distill(teacher, d, 1.0, {30, 0.05, 32}, 2);
  CHECK(agreement(teacher, student, d.subset(Split::validation)) >= 0.95);
  CHECK(student.network().sizes() == teacher.network().sizes());
  CHECK_THROWS_AS(distill(teacher, d, 0.0, {1, 0.05, 32}, 2), ConfigError);
  CHECK_THROWS_AS(distill(teacher, d, -1.0, {1, 0.05, 32}, 2), ConfigError);
}

TEST_CASE("distillation at high temperature lowers student confidence") {
  const auto d = small_dataset();
  const auto teacher = train_mlp(d, {32, 16}, {10, 0.05, 32}, 1);
  const auto cool = distill(teacher, d, 1.0, {10, 0.05, 32}, 2);
  const auto hot = distill(teacher, d, 20.0, {10, 0.05, 32}, 2);
  double conf_cool = 0, conf_hot = 0;
  for (const auto& s : d.subset(Split::validation)) {
    conf_cool += cool.distribution(s.vector).maxCoeff();
    conf_hot += hot.distribution(s.vector).maxCoeff();
  }
  CHECK(conf_hot < conf_cool);
}

TEST_CASE("ensemble votes") {
  using L = Label;
  const std::vector<L> two_one{L::malware, L::malware, L::benign};
  const std::vector<L> one_mal{L::benign, L::benign, L::malware};
  const std::vector<L> none{L::benign, L::benign, L::benign};
  CHECK(ensemble_vote(two_one, VoteMode::majority) == L::malware);
  CHECK(ensemble_vote(one_mal, VoteMode::majority) == L::benign);
  CHECK(ensemble_vote(one_mal, VoteMode::veto) == L::malware);
  CHECK(ensemble_vote(none, VoteMode::majority) == L::benign);
  CHECK(ensemble_vote(none, VoteMode::veto) == L::benign);
}

TEST_CASE("ensemble size rules and model-level votes") {
  auto mal = std::make_shared<MlpClassifier>(constant_classifier(4, Label::malware));
  auto ben = std::make_shared<MlpClassifier>(constant_classifier(4, Label::benign));
  using Members = std::vector<std::shared_ptr<const PredictionModel>>;
  CHECK_THROWS_AS(EnsembleModel(Members{mal, ben}, VoteMode::majority), ConfigError);
  CHECK_THROWS_AS(EnsembleModel(Members{mal, ben, ben, mal}, VoteMode::majority), ConfigError);
  CHECK_THROWS_AS(EnsembleModel(Members{mal}, VoteMode::veto), ConfigError);
  CHECK_THROWS_AS(EnsembleModel(Members{mal, nullptr}, VoteMode::veto), ConfigError);

  const FeatureVector v(4, {1});
  EnsembleModel majority(Members{ben, mal, ben}, VoteMode::majority);
  EnsembleModel veto(Members{ben, ben, mal}, VoteMode::veto);
  CHECK(majority.predict_label(v) == Label::benign);
  CHECK(veto.predict_label(v) == Label::malware);
  CHECK((majority.predict_proba(v) >= 0.5) == (majority.predict_label(v) == Label::malware));
  CHECK((veto.predict_proba(v) >= 0.5) == (veto.predict_label(v) == Label::malware));
}

TEST_CASE("transferability output is valid and evades the substitute") {
  SyntheticConfig cfg;
  cfg.dim = 100;
  cfg.n_per_class = 200;
  const auto [d, table] = generate_synthetic_dataset(cfg, 8);
  const auto substitute = train_mlp(d, {24}, {10, 0.05, 32}, 3);
  const auto malware = d.vectors(Split::train, Label::malware);
  const auto out = transferability_generate(substitute, malware, table, 0.1, 30);
  REQUIRE(!out.empty());
  for (const auto& e : out) {
    CHECK(substitute.predict_label(e.vector) == Label::benign);
    CHECK(validate_perturbations(malware[e.source], e.vector, table) == e.vector);
  }

  const auto stubborn = constant_classifier(100, Label::malware);
  CHECK(transferability_generate(stubborn, malware, table, 0.1, 10).empty());
}

TEST_CASE("add-only transfer examples keep every original feature") {
  SyntheticConfig cfg;
  cfg.dim = 100;
  cfg.n_per_class = 200;
  cfg.add_only = true;
  const auto [d, table] = generate_synthetic_dataset(cfg, 8);
  const auto substitute = train_mlp(d, {24}, {10, 0.05, 32}, 3);
  const auto malware = d.vectors(Split::train, Label::malware);
  for (const auto& e : transferability_generate(substitute, malware, table, 0.1, 40))
    CHECK(shared_enabled(malware[e.source], e.vector) == malware[e.source].enabled_count());
}

TEST_CASE("model artifacts reload bit-identically") {
  const auto d = small_dataset();
  auto model = train_mlp(d, {16, 8}, {2, 0.05, 32}, 5);
  model.set_kind("nn-at");
  const auto j = classifier_to_json(model);
  const auto back = classifier_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.kind() == "nn-at");
  CHECK(back.meta().seed == 5);
  for (const auto& s : d.samples) CHECK(back.predict_proba(s.vector) == model.predict_proba(s.vector));

  auto m1 = std::make_shared<MlpClassifier>(train_mlp(d, {8}, {1, 0.05, 32}, 1));
  auto m2 = std::make_shared<MlpClassifier>(train_mlp(d, {8}, {1, 0.05, 32}, 2));
  EnsembleModel veto({m1, m2}, VoteMode::veto);
  const auto loaded = prediction_model_from_json(nlohmann::json::parse(prediction_model_to_json(veto).dump()));
  CHECK(loaded->kind() == "veto");
  for (const auto& s : d.samples) CHECK(loaded->predict_label(s.vector) == veto.predict_label(s.vector));

  const auto ae = train_autoencoder(d.vectors(Split::train), {16}, {1, 0.5, 32}, 1);
  const auto ae_back = autoencoder_from_json(nlohmann::json::parse(autoencoder_to_json(ae).dump()));
  for (const auto& s : d.samples) CHECK(ae_back.reconstruction_loss(s.vector) == ae.reconstruction_loss(s.vector));
}

TEST_CASE("malformed model artifacts raise artifact errors") {
  const auto d = small_dataset();
  const auto model = train_mlp(d, {4}, {1, 0.05, 32}, 5);
  auto j = classifier_to_json(model);
  auto broken = j;
  broken["weights"][0].erase(0);
  CHECK_THROWS_AS(classifier_from_json(broken), ArtifactError);
  broken = j;
  broken["output"] = "tanh";
  CHECK_THROWS_AS(classifier_from_json(broken), ArtifactError);
  CHECK_THROWS_AS(classifier_from_json(nlohmann::json::object()), ArtifactError);
  CHECK_THROWS_AS(prediction_model_from_json(nlohmann::json{{"kind", "majority"}, {"members", 3}}), ArtifactError);
}
