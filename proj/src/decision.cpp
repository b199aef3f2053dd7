#include "malprotect/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "malprotect/errors.hpp"
#include "malprotect/model_io.hpp"

namespace malprotect {

std::string to_string(DecisionKind kind) { return kind == DecisionKind::logistic ? "logistic" : "mlp"; }

DecisionKind decision_kind_from_string(const std::string& s) {
  if (s == "logistic" || s == "lr") return DecisionKind::logistic;
  if (s == "mlp" || s == "nn") return DecisionKind::mlp;
  throw ConfigError("unknown decision model kind '" + s + "'");
}

void assign_decision_splits(std::vector<ScoreRow>& rows, std::uint64_t seed, double train_share) {
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_share * double(rows.size())));
  for (std::size_t k = 0; k < idx.size(); ++k) rows[idx[k]].split = k < n_train ? Split::train : Split::validation;
}

void write_decision_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << "s1,s2,s3a,s3b,s4a,s4b,label\n";
  out.precision(17);
  for (const auto& r : rows) {
    for (double v : r.scores.as_array()) out << v << ',';
    out << r.label << '\n';
  }
}

std::vector<ScoreRow> read_decision_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing artifact: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "s1,s2,s3a,s3b,s4a,s4b,label")
    throw ArtifactError("unexpected decision dataset header in " + path.string());
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::array<double, kIndicatorCount> a{};
    std::string cell;
    for (auto& v : a) {
      if (!std::getline(ss, cell, ',')) throw ArtifactError("short row in " + path.string());
      v = std::stod(cell);
    }
    if (!std::getline(ss, cell, ',')) throw ArtifactError("missing label in " + path.string());
    rows.push_back({IndicatorScores::from_array(a), std::stoi(cell), Split::train});
  }
  return rows;
}

DecisionModel::DecisionModel(DecisionKind kind, Mlp<double> net, TrainingMeta meta)
    : kind_(kind), net_(std::move(net)), meta_(meta) {
  if (net_.input_size() != kIndicatorCount) throw ConfigError("decision model input arity must be 6");
  if (net_.output_size() != 2 || net_.output() != OutputKind::softmax)
    throw ConfigError("decision model needs a two-way softmax output");
  if (kind_ == DecisionKind::logistic && net_.layers().size() != 1)
    throw ConfigError("logistic decision model cannot have hidden layers");
}

DecisionModel DecisionModel::logistic(const std::array<double, kIndicatorCount>& coefficients, double intercept) {
  Mlp<double> net({kIndicatorCount, 2}, OutputKind::softmax);
  auto& layer = net.layers().front();
  for (std::size_t j = 0; j < kIndicatorCount; ++j) layer.weights(1, Eigen::Index(j)) = coefficients[j];
  layer.bias(1) = intercept;
  return DecisionModel(DecisionKind::logistic, std::move(net));
}

DecisionModel DecisionModel::constant(bool attack) {
  return logistic({0, 0, 0, 0, 0, 0}, attack ? 50.0 : -50.0);
}

double DecisionModel::attack_probability(const IndicatorScores& s) const {
  const auto a = s.as_array();
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(a.data(), Eigen::Index(a.size()));
  return net_.forward(x)(1);
}

std::array<double, kIndicatorCount> DecisionModel::coefficients() const {
  if (kind_ != DecisionKind::logistic) throw ConfigError("coefficients exist only for logistic decision models");
  const auto& W = net_.layers().front().weights;
  std::array<double, kIndicatorCount> c{};
  for (std::size_t j = 0; j < kIndicatorCount; ++j)
    c[j] = (W(1, Eigen::Index(j)) - W(0, Eigen::Index(j))) / net_.temperature();
  return c;
}

double DecisionModel::intercept() const {
  if (kind_ != DecisionKind::logistic) throw ConfigError("intercept exists only for logistic decision models");
  const auto& b = net_.layers().front().bias;
  return (b(1) - b(0)) / net_.temperature();
}

double DecisionModel::logit(const std::array<double, kIndicatorCount>& x) const {
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  const Eigen::VectorXd z = net_.logits(Eigen::MatrixXd(v)).col(0);
  return (z(1) - z(0)) / net_.temperature();
}

DecisionModel train_decision_model(const std::vector<ScoreRow>& rows, DecisionKind kind,
                                   const TrainingParams& params, std::uint64_t seed) {
  std::vector<const ScoreRow*> train;
  for (const auto& r : rows)
    if (r.split == Split::train) train.push_back(&r);
  const auto attacks = std::count_if(train.begin(), train.end(), [](const ScoreRow* r) { return r->label == 1; });
  if (attacks == 0 || static_cast<std::size_t>(attacks) == train.size())
    throw TrainingError("decision dataset must contain both labels in its train split");

  Eigen::MatrixXd X(Eigen::Index(kIndicatorCount), Eigen::Index(train.size()));
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(2, Eigen::Index(train.size()));
  for (std::size_t c = 0; c < train.size(); ++c) {
    const auto a = train[c]->scores.as_array();
    for (std::size_t j = 0; j < kIndicatorCount; ++j) X(Eigen::Index(j), Eigen::Index(c)) = a[j];
    T(train[c]->label == 1 ? 1 : 0, Eigen::Index(c)) = 1.0;
  }

  Rng rng(seed);
  std::vector<std::size_t> sizes{kIndicatorCount};
  if (kind == DecisionKind::mlp) sizes.insert(sizes.end(), kDecisionHidden.begin(), kDecisionHidden.end());
  sizes.push_back(2);
  auto net = Mlp<double>::initialized(sizes, OutputKind::softmax, rng);
  fit(net, X, T, params, rng);

  DecisionModel model(kind, std::move(net), TrainingMeta{params.epochs, params.learning_rate, params.batch_size, seed, 1.0});
  model.meta().validation_accuracy = decision_accuracy(model, rows, Split::validation);
  return model;
}

double decision_accuracy(const DecisionModel& model, const std::vector<ScoreRow>& rows, Split split) {
  std::size_t n = 0, correct = 0;
  for (const auto& r : rows) {
    if (r.split != split) continue;
    ++n;
    correct += int(model.detects(r.scores)) == r.label;
  }
  return n ? double(correct) / double(n) : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json decision_model_to_json(const DecisionModel& model) {
  auto j = network_to_json(model.network());
  j["kind"] = "decision-" + to_string(model.kind());
  j["training_meta"] = meta_to_json(model.meta());
  return j;
}

DecisionModel decision_model_from_json(const nlohmann::json& j) {
  const auto kind = j.value("kind", std::string{});
  if (kind.rfind("decision-", 0) != 0) throw ArtifactError("not a decision model artifact: kind '" + kind + "'");
  try {
    return DecisionModel(decision_kind_from_string(kind.substr(9)), network_from_json(j),
                         meta_from_json(j.value("training_meta", nlohmann::json::object())));
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("invalid decision model artifact: ") + e.what());
  }
}

}  // namespace malprotect
