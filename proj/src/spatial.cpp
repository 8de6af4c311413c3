#include "heattap/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "heattap/logistic.hpp"

namespace heattap {

std::string to_string(RegularizationScale scale) {
  return scale == RegularizationScale::Mean ? "mean" : "per_sample";
}

RegularizationScale parse_regularization_scale(std::string_view name) {
  if (name == "mean") return RegularizationScale::Mean;
  if (name == "per_sample") return RegularizationScale::PerSample;
  throw DataError("unknown regularization scale '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (c_grid.empty()) throw std::invalid_argument("C grid must not be empty");
  for (double c : c_grid)
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("C values must be positive");
  if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"c_grid", c_grid},
          {"max_iterations", max_iterations},
          {"gradient_tolerance", gradient_tolerance},
          {"regularization", to_string(regularization)},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.c_grid = j.value("c_grid", c.c_grid);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
    if (j.contains("regularization"))
      c.regularization = parse_regularization_scale(j["regularization"].get<std::string>());
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

SpatialModel SpatialModel::zeros(FeatureSetKind kind, Normalizer normalizer,
                                 std::string layout_fingerprint) {
  SpatialModel m;
  m.kind = kind;
  m.weights = Eigen::MatrixXd::Zero(kNumKeys, feature_dim(kind));
  m.bias = Eigen::VectorXd::Zero(kNumKeys);
  m.normalizer = std::move(normalizer);
  m.layout_fingerprint = std::move(layout_fingerprint);
  return m;
}

namespace {

constexpr int kModelSchemaVersion = 1;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> class_indices(std::span<const KeyId> labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i].index();
  return out;
}

std::vector<KeyId> require_labels(std::span<const TapSample> taps) {
  std::vector<KeyId> labels;
  labels.reserve(taps.size());
  for (const auto& t : taps) {
    if (!t.label) throw DataError("training taps must carry labels");
    labels.push_back(*t.label);
  }
  return labels;
}

double accuracy(const SpatialModel& model, const Eigen::MatrixXd& features,
                std::span<const KeyId> labels) {
  if (labels.empty()) return 0.0;
  Eigen::MatrixXd logits = features * model.weights.transpose();
  logits.rowwise() += model.bias.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (argmax_key(logits.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace

nlohmann::json SpatialModel::to_json() const {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index k = 0; k < weights.rows(); ++k) {
    Eigen::VectorXd row = weights.row(k).transpose();
    w.push_back(to_std(row));
  }
  return {{"schema", kModelSchemaVersion},
          {"kind", to_string(kind)},
          {"C", inv_reg},
          {"layout_fingerprint", layout_fingerprint},
          {"normalizer", {{"min", to_std(normalizer.min())}, {"max", to_std(normalizer.max())}}},
          {"weights", w},
          {"bias", to_std(bias)},
          {"meta",
           {{"iterations", meta.iterations},
            {"converged", meta.converged},
            {"train_loss", meta.train_loss},
            {"train_cross_entropy", meta.train_cross_entropy},
            {"val_cross_entropy", meta.val_cross_entropy},
            {"val_accuracy", meta.val_accuracy},
            {"seed", meta.seed},
            {"train_size", meta.train_size},
            {"val_size", meta.val_size}}}};
}

SpatialModel SpatialModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<int>() != kModelSchemaVersion)
      throw DataError("unsupported model schema");
    SpatialModel m;
    m.kind = parse_feature_kind(j.at("kind").get<std::string>());
    m.inv_reg = j.at("C").get<double>();
    m.layout_fingerprint = j.at("layout_fingerprint").get<std::string>();
    const auto& nj = j.at("normalizer");
    m.normalizer = Normalizer(from_std(nj.at("min").get<std::vector<double>>()),
                              from_std(nj.at("max").get<std::vector<double>>()));
    const int d = feature_dim(m.kind);
    const auto& wj = j.at("weights");
    if (!wj.is_array() || wj.size() != kNumKeys) throw DataError("weights must have 28 rows");
    m.weights.resize(kNumKeys, d);
    for (int k = 0; k < kNumKeys; ++k) {
      auto row = wj[static_cast<std::size_t>(k)].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != d) throw DataError("weight row has wrong length");
      m.weights.row(k) = from_std(row).transpose();
    }
    m.bias = from_std(j.at("bias").get<std::vector<double>>());
    if (m.bias.size() != kNumKeys) throw DataError("bias must have 28 entries");
    if (m.normalizer.dim() != d) throw DataError("normalizer length does not match feature set");
    if (!m.weights.allFinite() || !m.bias.allFinite()) throw DataError("non-finite parameters");
    if (j.contains("meta")) {
      const auto& mj = j["meta"];
      m.meta.iterations = mj.value("iterations", 0);
      m.meta.converged = mj.value("converged", false);
      m.meta.train_loss = mj.value("train_loss", 0.0);
      m.meta.train_cross_entropy = mj.value("train_cross_entropy", 0.0);
      m.meta.val_cross_entropy = mj.value("val_cross_entropy", 0.0);
      m.meta.val_accuracy = mj.value("val_accuracy", 0.0);
      m.meta.seed = mj.value("seed", std::uint64_t{0});
      m.meta.train_size = mj.value("train_size", std::size_t{0});
      m.meta.val_size = mj.value("val_size", std::size_t{0});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid model JSON: ") + e.what());
  }
}

void SpatialModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

SpatialModel SpatialModel::load(const std::filesystem::path& path, const KeyboardLayout& layout) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  SpatialModel m = from_json(j);
  if (m.layout_fingerprint != layout.fingerprint())
    throw DataError("model was trained on layout " + m.layout_fingerprint +
                    " but the active layout is " + layout.fingerprint());
  return m;
}

KeyDistribution predict_proba(const SpatialModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& features) {
  if (features.size() != model.dim())
    throw std::invalid_argument("feature length " + std::to_string(features.size()) +
                                " does not match model dimension " +
                                std::to_string(model.dim()));
  if (!features.allFinite()) throw std::invalid_argument("non-finite feature value");
  return softmax_predict(model.weights, model.bias, features);
}

KeyDistribution predict_tap(const KeyboardLayout& layout, const SpatialModel& model,
                            const TapSample& tap) {
  return predict_proba(model, build_features(layout, model.kind, tap, &model.normalizer));
}

LossGradient loss_and_gradient(const SpatialModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& features,
                               std::span<const KeyId> labels, double reg) {
  const auto classes = class_indices(labels);
  auto r = softmax_loss_gradient<double>(model.weights, model.bias, features, classes, reg);
  return {r.loss, r.cross_entropy, r.l2, std::move(r.grad_weights), std::move(r.grad_bias)};
}

double regularization_coefficient(RegularizationScale scale, double inv_reg, std::size_t n) {
  if (scale == RegularizationScale::Mean) return 1.0 / inv_reg;
  return 1.0 / (inv_reg * static_cast<double>(n));
}

SpatialModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& features,
                          std::span<const KeyId> labels, FeatureSetKind kind, double inv_reg,
                          const TrainConfig& config, Normalizer normalizer, LbfgsResult* trace,
                          const SpatialModel* warm_start) {
  const Eigen::Index d = feature_dim(kind);
  if (features.cols() != d) throw std::invalid_argument("feature matrix has wrong width");
  if (features.rows() == 0) throw std::invalid_argument("empty training set");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw std::invalid_argument("label count does not match the feature matrix");
  const auto classes = class_indices(labels);
  const double reg = regularization_coefficient(config.regularization, inv_reg, labels.size());

  // The optimizer works on whitened features G = (F - mu) V S, where V holds
  // the covariance eigenvectors with non-negligible eigenvalues and S their
  // inverse square roots, with W = A S V^T and b = b' - W mu. Logits and the
  // penalty on W are unchanged; directions the data never varies along have a
  // zero optimum and are dropped.
  const Eigen::RowVectorXd mu = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - mu;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(centered.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = std::max(lambda.maxCoeff(), 0.0) * 1e-10;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = lambda.size(); j-- > 0;)
    if (lambda(j) > cutoff) kept.push_back(j);
  const auto r = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd basis(d, r);
  Eigen::VectorXd root(r);  // sqrt(lambda), i.e. S^-1
  for (Eigen::Index j = 0; j < r; ++j) {
    basis.col(j) = eig.eigenvectors().col(kept[static_cast<std::size_t>(j)]);
    root(j) = std::sqrt(lambda(kept[static_cast<std::size_t>(j)]));
  }
  const Eigen::MatrixXd g = centered * basis * root.cwiseInverse().asDiagonal();
  const Eigen::RowVectorXd inv_root_sq = root.cwiseAbs2().cwiseInverse().transpose();

  // Parameters packed as [vec(A) column-major (28*r), b' (28)].
  const Eigen::Index nw = kNumKeys * r;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(nw + kNumKeys);
  if (warm_start) {
    if (warm_start->weights.rows() != kNumKeys || warm_start->weights.cols() != d)
      throw std::invalid_argument("warm start has the wrong shape");
    Eigen::Map<Eigen::MatrixXd>(theta.data(), kNumKeys, r) =
        warm_start->weights * basis * root.asDiagonal();
    theta.tail(kNumKeys) = warm_start->bias + warm_start->weights * mu.transpose();
  }
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    Eigen::Map<const Eigen::MatrixXd> a(x.data(), kNumKeys, r);
    Eigen::Map<const Eigen::VectorXd> b(x.data() + nw, kNumKeys);
    auto res = softmax_loss_gradient<double>(a, b, g, classes, 0.0);
    grad.resize(x.size());
    Eigen::Map<Eigen::MatrixXd>(grad.data(), kNumKeys, r) =
        res.grad_weights + reg * (a.array().rowwise() * inv_root_sq.array()).matrix();
    grad.tail(kNumKeys) = res.grad_bias;
    return res.cross_entropy +
           reg * 0.5 * (a.array().square().rowwise() * inv_root_sq.array()).sum();
  };
  // Gradient with respect to the original (W, b).
  auto original_gradient_norm = [&](const Eigen::VectorXd&, const Eigen::VectorXd& grad) {
    Eigen::Map<const Eigen::MatrixXd> ga(grad.data(), kNumKeys, r);
    const auto gb = grad.tail(kNumKeys);
    const Eigen::MatrixXd dw = ga * root.asDiagonal() * basis.transpose() + gb * mu;
    return std::sqrt(dw.squaredNorm() + gb.squaredNorm());
  };
  LbfgsOptions opt;
  opt.max_iterations = config.max_iterations;
  opt.gradient_tolerance = config.gradient_tolerance;
  LbfgsResult result = minimize_lbfgs<double>(objective, theta, opt, original_gradient_norm);
  if (!std::isfinite(result.loss))
    throw DataError("training diverged to a non-finite loss; check feature scaling");

  SpatialModel model;
  model.kind = kind;
  model.weights = Eigen::Map<const Eigen::MatrixXd>(theta.data(), kNumKeys, r) *
                  root.cwiseInverse().asDiagonal() * basis.transpose();
  model.bias = theta.tail(kNumKeys) - model.weights * mu.transpose();
  model.normalizer = std::move(normalizer);
  model.inv_reg = inv_reg;
  model.meta.iterations = result.iterations;
  model.meta.converged = result.converged;
  model.meta.train_loss = result.loss;
  model.meta.seed = config.seed;
  model.meta.train_size = labels.size();
  model.meta.train_cross_entropy =
      softmax_loss_gradient<double>(model.weights, model.bias, features, classes, 0.0, false)
          .cross_entropy;
  if (trace) *trace = std::move(result);
  return model;
}

SpatialModel train(const KeyboardLayout& layout, std::span<const TapSample> train_set,
                   std::span<const TapSample> val_set, FeatureSetKind kind,
                   const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  if (val_set.empty()) throw DataError("validation split is empty");
  const auto train_labels = require_labels(train_set);
  const auto val_labels = require_labels(val_set);

  Eigen::MatrixXd train_f = build_feature_matrix(layout, kind, train_set);
  Eigen::MatrixXd val_f = build_feature_matrix(layout, kind, val_set);
  const Normalizer normalizer = Normalizer::fit(train_f);
  normalizer.apply_rows(train_f);
  normalizer.apply_rows(val_f);
  const auto val_classes = class_indices(val_labels);

  // Each C starts from the previous fit; a repeated C is not refit.
  std::optional<SpatialModel> best;
  std::optional<SpatialModel> previous;
  std::vector<double> seen;
  for (double c : config.c_grid) {
    if (std::find(seen.begin(), seen.end(), c) != seen.end()) continue;
    seen.push_back(c);
    SpatialModel m = fit_logistic(train_f, train_labels, kind, c, config, normalizer, nullptr,
                                  previous ? &*previous : nullptr);
    m.layout_fingerprint = layout.fingerprint();
    m.meta.val_size = val_labels.size();
    m.meta.val_accuracy = accuracy(m, val_f, val_labels);
    m.meta.val_cross_entropy =
        softmax_loss_gradient<double>(m.weights, m.bias, val_f, val_classes, 0.0, false)
            .cross_entropy;
    const bool better =
        !best || m.meta.val_accuracy > best->meta.val_accuracy ||
        (m.meta.val_accuracy == best->meta.val_accuracy && m.inv_reg < best->inv_reg);
    previous = m;
    if (better) best = std::move(m);
  }
  return std::move(*best);
}

KeyId onkey_predict(const KeyboardLayout& layout, const TapSample& tap) {
  return containing_or_closest_key(layout, tap.centroid);
}

KeyDistribution distance_proba(const KeyboardLayout& layout, const TapSample& tap, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  // Gaussian pdf ratios in log space; the 1/sqrt(2 pi sigma^2) factor cancels.
  KeyDistribution logit;
  for (const auto& g : layout.keys()) {
    const double d = normalized_distance(layout, tap.centroid, g.id);
    logit(g.id.index()) = -d * d / (2.0 * sigma * sigma);
  }
  KeyDistribution p = (logit.array() - logit.maxCoeff()).exp().matrix();
  return p / p.sum();
}

KeyDistribution spatial_proba(const KeyboardLayout& layout, const SpatialScorer& scorer,
                              const TapSample& tap) {
  struct Visitor {
    const KeyboardLayout& layout;
    const TapSample& tap;
    KeyDistribution operator()(const OnKeyBaseline&) const {
      KeyDistribution p = KeyDistribution::Zero();
      p(onkey_predict(layout, tap).index()) = 1.0;
      return p;
    }
    KeyDistribution operator()(const DistanceBaseline& d) const {
      return distance_proba(layout, tap, d.sigma);
    }
    KeyDistribution operator()(const SpatialModel& m) const { return predict_tap(layout, m, tap); }
  };
  return std::visit(Visitor{layout, tap}, scorer);
}

std::string scorer_name(const SpatialScorer& scorer) {
  if (std::holds_alternative<OnKeyBaseline>(scorer)) return "onkey";
  if (std::holds_alternative<DistanceBaseline>(scorer)) return "distance";
  return to_string(std::get<SpatialModel>(scorer).kind);
}

}  // namespace heattap
