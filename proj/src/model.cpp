#include "hpoerm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/random.hpp"

namespace hpoerm {

namespace {

constexpr Eigen::Index kScoreChunk = 4096;

struct LayerShape {
  int in;
  int out;
  std::size_t weight_offset;
  std::size_t bias_offset;
};

std::vector<LayerShape> layer_shapes(const HyperParams& hp, int n_features) {
  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  int in = n_features;
  for (int l = 0; l <= hp.depth; ++l) {
    const int out = l == hp.depth ? 1 : hp.width;
    LayerShape s{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
    offset = s.bias_offset + static_cast<std::size_t>(out);
    shapes.push_back(s);
    in = out;
  }
  return shapes;
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

HyperParams HyperParams::canonical() const {
  HyperParams c = *this;
  if (c.depth == 0) c.width = 0;
  return c;
}

void HyperParams::validate() const {
  if (depth < 0) throw ConfigError("HyperParams: depth must be >= 0");
  if (depth > 0 && width < 1) throw ConfigError("HyperParams: width must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("HyperParams: learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("HyperParams: batch_size must be positive");
}

std::string HyperParams::label() const {
  const HyperParams c = canonical();
  return "d" + std::to_string(c.depth) + "-w" + std::to_string(c.width) + "-lr" + format_double(c.learning_rate) +
         "-b" + std::to_string(c.batch_size);
}

std::uint64_t HyperParams::fingerprint() const {
  const HyperParams c = canonical();
  return derive_seed(0x4850u, {static_cast<std::uint64_t>(c.depth), static_cast<std::uint64_t>(c.width),
                               std::bit_cast<std::uint64_t>(c.learning_rate),
                               static_cast<std::uint64_t>(c.batch_size)});
}

bool operator==(const HyperParams& a, const HyperParams& b) {
  const HyperParams x = a.canonical();
  const HyperParams y = b.canonical();
  return x.depth == y.depth && x.width == y.width && x.learning_rate == y.learning_rate &&
         x.batch_size == y.batch_size;
}

void HpGrid::validate() const {
  if (configs.empty()) throw ConfigError("HpGrid: empty grid");
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (configs[i] == configs[j]) throw ConfigError("HpGrid: duplicate configuration " + configs[i].label());
    }
  }
}

HpGrid HpGrid::grid36() {
  HpGrid g;
  for (int depth : {1, 2, 3})
    for (int width : {10, 100})
      for (double lr : {0.01, 0.1})
        for (int batch : {8, 32, 128}) g.configs.push_back({depth, width, lr, batch});
  return g;
}

HpGrid HpGrid::grid18() {
  HpGrid g;
  for (int depth : {1, 2, 3})
    for (double lr : {0.01, 0.1})
      for (int batch : {8, 32, 128}) g.configs.push_back({depth, 10, lr, batch});
  return g;
}

HpGrid HpGrid::by_name(const std::string& name) {
  if (name == "grid36") return grid36();
  if (name == "grid18") return grid18();
  throw ConfigError("unknown grid '" + name + "'");
}

void LossSpec::validate() const {
  if (!(bound > 0.0) || !std::isfinite(bound)) throw ConfigError("LossSpec: bound must be positive");
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw ConfigError("LossSpec: lipschitz must be positive");
}

double LossSpec::value(double y, double score) const {
  // std::min would turn a NaN score into the bound and hide divergence.
  if (std::isnan(score)) return score;
  switch (kind) {
    case LossKind::clipped_logistic:
      return std::min(bound, softplus(-y * score));
    case LossKind::zero_one:
      return y * score > 0.0 ? 0.0 : bound;
  }
  return 0.0;
}

double LossSpec::slope(double y, double score) const {
  if (kind == LossKind::zero_one) return 0.0;
  const double t = -y * score;
  if (softplus(t) >= bound) return 0.0;
  return -y * sigmoid(t);
}

Model::Model(HyperParams architecture, int n_features, std::vector<double> parameters)
    : architecture_(architecture.canonical()), n_features_(n_features), params_(std::move(parameters)) {
  architecture_.validate();
  if (n_features_ < 1) throw ConfigError("Model: n_features must be positive");
  if (params_.size() != parameter_count(architecture_, n_features_)) {
    throw ConfigError("Model: expected " + std::to_string(parameter_count(architecture_, n_features_)) +
                      " parameters, got " + std::to_string(params_.size()));
  }
}

std::size_t Model::parameter_count(const HyperParams& architecture, int n_features) {
  const auto shapes = layer_shapes(architecture.canonical(), n_features);
  return shapes.back().bias_offset + 1;
}

void Model::forward(const Eigen::Ref<const Matrix>& features, Workspace& ws) const {
  const auto shapes = layer_shapes(architecture_, n_features_);
  const std::size_t layers = shapes.size();
  ws.pre.resize(layers);
  ws.post.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& s = shapes[l];
    Eigen::Map<const Matrix> w(params_.data() + s.weight_offset, s.out, s.in);
    Eigen::Map<const Vector> b(params_.data() + s.bias_offset, s.out);
    if (l == 0) {
      ws.pre[l].noalias() = features * w.transpose();
    } else {
      ws.pre[l].noalias() = ws.post[l - 1] * w.transpose();
    }
    ws.pre[l].rowwise() += b.transpose();
    if (l + 1 < layers) ws.post[l] = ws.pre[l].cwiseMax(0.0);
  }
}

Vector Model::scores(const Eigen::Ref<const Matrix>& features) const {
  if (features.cols() != n_features_) throw ConfigError("Model: feature dimension mismatch");
  Vector out(features.rows());
  Workspace ws;
  for (Eigen::Index start = 0; start < features.rows(); start += kScoreChunk) {
    const Eigen::Index rows = std::min(kScoreChunk, features.rows() - start);
    forward(features.middleRows(start, rows), ws);
    out.segment(start, rows) = ws.pre.back().col(0);
  }
  return out;
}

double Model::score(const Eigen::Ref<const Vector>& x) const {
  Matrix row = x.transpose();
  return scores(row)[0];
}

double Model::loss_and_gradient(const Eigen::Ref<const Matrix>& features, const Eigen::Ref<const Vector>& labels,
                                const LossSpec& loss, std::span<double> grad, Workspace& ws) const {
  if (grad.size() != params_.size()) throw ConfigError("Model: gradient buffer size mismatch");
  const Eigen::Index batch = features.rows();
  if (batch == 0) throw DomainError("Model: empty batch");
  forward(features, ws);

  const auto shapes = layer_shapes(architecture_, n_features_);
  const Matrix& out = ws.pre.back();
  const double inv = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  ws.delta.resize(batch, 1);
  for (Eigen::Index i = 0; i < batch; ++i) {
    total += loss.value(labels[i], out(i, 0));
    ws.delta(i, 0) = loss.slope(labels[i], out(i, 0)) * inv;
  }

  for (std::size_t l = shapes.size(); l-- > 0;) {
    const auto& s = shapes[l];
    Eigen::Map<Matrix> gw(grad.data() + s.weight_offset, s.out, s.in);
    Eigen::Map<Vector> gb(grad.data() + s.bias_offset, s.out);
    if (l == 0) {
      gw.noalias() = ws.delta.transpose() * features;
    } else {
      gw.noalias() = ws.delta.transpose() * ws.post[l - 1];
    }
    gb = ws.delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::Map<const Matrix> w(params_.data() + s.weight_offset, s.out, s.in);
      ws.delta_prev.noalias() = ws.delta * w;
      ws.delta = ws.delta_prev.cwiseProduct((ws.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return total * inv;
}

double Model::loss_and_gradient(const Eigen::Ref<const Matrix>& features, const Eigen::Ref<const Vector>& labels,
                                const LossSpec& loss, std::span<double> grad) const {
  Workspace ws;
  return loss_and_gradient(features, labels, loss, grad, ws);
}

Model init_model(const HyperParams& hp, int n_features, std::uint64_t init_seed) {
  const HyperParams c = hp.canonical();
  c.validate();
  const auto shapes = layer_shapes(c, n_features);
  std::vector<double> params(shapes.back().bias_offset + 1, 0.0);
  Rng rng(init_seed);
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    const auto& s = shapes[l];
    const double scale = std::sqrt(2.0 / static_cast<double>(s.in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out); ++i) {
      params[s.weight_offset + i] = scale * rng.normal();
    }
  }
  return Model(c, n_features, std::move(params));
}

Model linear_model(const Vector& weights, double bias) {
  std::vector<double> params(weights.data(), weights.data() + weights.size());
  params.push_back(bias);
  return Model(HyperParams{0, 0, 1.0, 1}, static_cast<int>(weights.size()), std::move(params));
}

Model bayes_model(const DataSpec& spec, double scale) {
  const Geometry g = make_geometry(spec);
  return linear_model(scale * g.direction, 0.0);
}

double empirical_risk(const Model& model, const Dataset& data, const LossSpec& loss) {
  if (data.count() == 0) throw DomainError("empirical_risk: empty dataset");
  const Vector s = model.scores(data.features);
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += loss.value(data.labels[i], s[i]);
  return total / static_cast<double>(data.count());
}

RiskEstimate risk_from_scores(const Vector& scores, const Vector& labels, const LossSpec& loss) {
  if (labels.size() == 0) throw DomainError("risk_from_scores: empty dataset");
  if (scores.size() != labels.size()) throw SizeError("risk_from_scores: scores and labels differ in length");
  const auto n = static_cast<double>(labels.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) total += loss.value(labels[i], scores[i]);
  const double mean = total / n;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double d = loss.value(labels[i], scores[i]) - mean;
    sq += d * d;
  }
  const double var = labels.size() > 1 ? sq / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

RiskEstimate risk_with_error(const Model& model, const Dataset& data, const LossSpec& loss) {
  if (data.count() == 0) throw DomainError("risk_with_error: empty dataset");
  return risk_from_scores(model.scores(data.features), data.labels, loss);
}

RiskEstimate true_risk_estimate(const Model& model, const DataSpec& spec, const LossSpec& loss,
                                std::size_t test_count, std::uint64_t eval_seed, std::size_t min_test_count) {
  if (test_count < min_test_count) {
    throw ConfigError("true_risk_estimate: test_count " + std::to_string(test_count) + " below floor " +
                      std::to_string(min_test_count));
  }
  const Dataset test = generate(spec, test_count, eval_seed);
  return risk_with_error(model, test, loss);
}

void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = nlohmann::json{{"depth", hp.depth},
                     {"width", hp.width},
                     {"learning_rate", hp.learning_rate},
                     {"batch_size", hp.batch_size}};
}

void from_json(const nlohmann::json& j, HyperParams& hp) {
  hp.depth = j.at("depth").get<int>();
  hp.width = j.value("width", 0);
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp = hp.canonical();
  hp.validate();
}

void to_json(nlohmann::json& j, const LossSpec& loss) {
  j = nlohmann::json{{"kind", loss.kind == LossKind::clipped_logistic ? "clipped_logistic" : "zero_one"},
                     {"bound", loss.bound},
                     {"lipschitz", loss.lipschitz}};
}

void from_json(const nlohmann::json& j, LossSpec& loss) {
  const std::string kind = j.value("kind", std::string("clipped_logistic"));
  if (kind == "clipped_logistic") {
    loss.kind = LossKind::clipped_logistic;
  } else if (kind == "zero_one") {
    loss.kind = LossKind::zero_one;
  } else {
    throw ConfigError("LossSpec: unknown kind '" + kind + "'");
  }
  loss.bound = j.value("bound", 1.0);
  loss.lipschitz = j.value("lipschitz", 1.0);
  loss.validate();
}

void to_json(nlohmann::json& j, const Model& model) {
  j = nlohmann::json{{"architecture", model.architecture()},
                     {"n_features", model.n_features()},
                     {"parameters", std::vector<double>(model.parameters().begin(), model.parameters().end())}};
}

void from_json(const nlohmann::json& j, Model& model) {
  model = Model(j.at("architecture").get<HyperParams>(), j.at("n_features").get<int>(),
                j.at("parameters").get<std::vector<double>>());
}

}  // namespace hpoerm
