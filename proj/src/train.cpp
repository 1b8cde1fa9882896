#include "pullback/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "pullback/metrics.hpp"
#include "pullback/models.hpp"
#include "pullback/simplex.hpp"

namespace pullback {

using nlohmann::json;

namespace {

template <class Scores>
void require_finite_scores(const Scores& s) {
  if (!s.allFinite()) throw TrainingDiverged("non-finite encoder scores");
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Latent:
      return "latent";
    case ModelKind::Linear:
      return "linear";
    case ModelKind::Gold:
      return "gold";
  }
  return "latent";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "latent") return ModelKind::Latent;
  if (name == "linear") return ModelKind::Linear;
  if (name == "gold") return ModelKind::Gold;
  throw InvalidInput("unknown model kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  estimator.validate();
  if (!(lr > 0.0)) throw InvalidInput("train: learning rate must be > 0");
  if (epochs < 1) throw InvalidInput("train: epochs must be >= 1");
  if (batch_size < 0) throw InvalidInput("train: batch_size must be >= 0");
  if (eval_every < 1) throw InvalidInput("train: eval_every must be >= 1");
  if (!(init_scale >= 0.0)) throw InvalidInput("train: init_scale must be >= 0");
  if (hidden < 1) throw InvalidInput("train: hidden must be >= 1");
}

json to_json(const TrainConfig& c) {
  return {{"model", model_kind_name(c.model)},
          {"method", method_name(c.estimator.method)},
          {"eta", c.estimator.eta},
          {"k", c.estimator.k},
          {"temperature", c.estimator.temperature},
          {"baseline_decay", c.estimator.baseline_decay},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps},
          {"weight_decay", c.optimizer.weight_decay},
          {"eval_every", c.eval_every},
          {"init_scale", c.init_scale},
          {"hidden", c.hidden}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.model = parse_model_kind(j.value("model", std::string(model_kind_name(c.model))));
  c.estimator.method = parse_method(j.value("method", std::string(method_name(c.estimator.method))));
  c.estimator.eta = j.value("eta", c.estimator.eta);
  c.estimator.k = j.value("k", c.estimator.k);
  c.estimator.temperature = j.value("temperature", c.estimator.temperature);
  c.estimator.baseline_decay = j.value("baseline_decay", c.estimator.baseline_decay);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
  c.optimizer.eps = j.value("eps", c.optimizer.eps);
  c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.hidden = j.value("hidden", c.hidden);
  c.validate();
  return c;
}

namespace {

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json to_json(const RunRecord& r) {
  json curve = json::array();
  for (const auto& p : r.curve) {
    curve.push_back({{"epoch", p.epoch},
                     {"train_loss", p.train_loss},
                     {"train_accuracy", p.train_accuracy},
                     {"valid_accuracy", p.valid_accuracy},
                     {"valid_recovery", p.valid_recovery},
                     {"test_accuracy", p.test_accuracy},
                     {"test_recovery", p.test_recovery},
                     {"decoder_calls", p.decoder_calls}});
  }
  return {{"config", to_json(r.config)},
          {"recovery_metric", r.recovery_metric},
          {"curve", curve},
          {"failed", r.failed},
          {"failure", r.failure},
          {"best_epoch", r.best_epoch},
          {"valid_accuracy", r.valid_accuracy},
          {"test_accuracy", r.test_accuracy},
          {"test_recovery", r.test_recovery},
          {"decoder_calls_per_example", r.decoder_calls_per_example},
          {"projection_failures", r.projection_failures},
          {"wall_seconds", r.wall_seconds},
          {"initial_params", vector_to_json(r.initial_params)},
          {"final_params", vector_to_json(r.final_params)}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.config = train_config_from_json(j.at("config"));
  r.recovery_metric = j.value("recovery_metric", r.recovery_metric);
  for (const auto& p : j.at("curve")) {
    EvalPoint e;
    e.epoch = p.at("epoch").get<int>();
    e.train_loss = p.at("train_loss").get<double>();
    e.train_accuracy = p.at("train_accuracy").get<double>();
    e.valid_accuracy = p.at("valid_accuracy").get<double>();
    e.valid_recovery = p.at("valid_recovery").get<double>();
    e.test_accuracy = p.at("test_accuracy").get<double>();
    e.test_recovery = p.at("test_recovery").get<double>();
    e.decoder_calls = p.at("decoder_calls").get<double>();
    r.curve.push_back(e);
  }
  r.failed = j.value("failed", false);
  r.failure = j.value("failure", "");
  r.best_epoch = j.value("best_epoch", 0);
  r.valid_accuracy = j.value("valid_accuracy", 0.0);
  r.test_accuracy = j.value("test_accuracy", 0.0);
  r.test_recovery = j.value("test_recovery", 0.0);
  r.decoder_calls_per_example = j.value("decoder_calls_per_example", 0.0);
  r.projection_failures = j.value("projection_failures", 0L);
  r.wall_seconds = j.value("wall_seconds", 0.0);
  if (j.contains("initial_params")) r.initial_params = vector_from_json(j.at("initial_params"));
  if (j.contains("final_params")) r.final_params = vector_from_json(j.at("final_params"));
  return r;
}

bool RunRecord::same_numbers(const RunRecord& o) const {
  auto strip = [](const RunRecord& r) {
    json j = to_json(r);
    j.erase("wall_seconds");
    return j;
  };
  return strip(*this) == strip(o);
}

namespace {

struct Metrics {
  double accuracy = 0.0;
  double recovery = 0.0;
  double loss = 0.0;
};

// Evaluation-time latent point: relaxed methods keep their deterministic
// relaxation; everything else (including stochastic methods) uses the MAP.
Vector eval_point(Method method, const Vector& s, const PolytopeOracle& oracle) {
  switch (method) {
    case Method::RelaxedMarg:
      return oracle.marg(s);
    case Method::RelaxedSparse:
      return oracle.project(s).mean;
    default:
      return oracle.map(s);
  }
}

int sign_label(double logit) { return logit >= 0.0 ? 1 : -1; }

// Shared loop: Task supplies parameters, a per-batch gradient and evaluation.
template <class Task>
RunRecord run_training(const TrainConfig& config, Task& task) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = config;
  record.recovery_metric = task.recovery_metric();

  Rng rng(config.seed);
  task.init(rng);
  record.initial_params = task.params();
  Vector params = record.initial_params;
  AdamWState opt;

  const int n = task.train_size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const int batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);

  double decoder_calls = 0.0;
  double examples_seen = 0.0;
  double last_loss = 0.0;
  double best_valid = -1.0;

  auto evaluate = [&](int epoch) {
    EvalPoint p;
    p.epoch = epoch;
    const Metrics train = task.evaluate(task.train_split());
    const Metrics valid = task.evaluate(task.valid_split());
    const Metrics test = task.evaluate(task.test_split());
    p.train_loss = epoch == 0 ? train.loss : last_loss;
    p.train_accuracy = train.accuracy;
    p.valid_accuracy = valid.accuracy;
    p.valid_recovery = valid.recovery;
    p.test_accuracy = test.accuracy;
    p.test_recovery = test.recovery;
    p.decoder_calls = decoder_calls;
    record.curve.push_back(p);
    if (p.valid_accuracy > best_valid) {
      best_valid = p.valid_accuracy;
      record.best_epoch = epoch;
      record.valid_accuracy = p.valid_accuracy;
      record.test_accuracy = p.test_accuracy;
      record.test_recovery = p.test_recovery;
    }
  };

  try {
    evaluate(0);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      if (batch < n) {
        for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::size_t>(i + 1))]);
      }
      double epoch_loss = 0.0;
      for (int start = 0; start < n; start += batch) {
        const int stop = std::min(n, start + batch);
        const std::vector<int> idx(order.begin() + start, order.begin() + stop);
        auto step = task.batch_gradient(idx, config.estimator, rng);
        decoder_calls += step.decoder_calls;
        examples_seen += static_cast<double>(idx.size());
        record.projection_failures += step.projection_failures;
        epoch_loss += step.loss * static_cast<double>(idx.size());
        if (!std::isfinite(step.loss)) throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch));
        adamw_step(params, step.grad, opt, config.lr, config.optimizer);
        task.set_params(params);
      }
      last_loss = epoch_loss / static_cast<double>(n);
      if (epoch % config.eval_every == 0 || epoch == config.epochs) evaluate(epoch);
    }
  } catch (const TrainingDiverged& e) {
    record.failed = true;
    record.failure = e.what();
  } catch (const NonFiniteGradient& e) {
    record.failed = true;
    record.failure = e.what();
  }

  record.final_params = task.params();
  record.decoder_calls_per_example = examples_seen > 0.0 ? decoder_calls / examples_seen : 0.0;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

struct BatchGradient {
  Vector grad;
  double loss = 0.0;
  double decoder_calls = 0.0;
  long projection_failures = 0;
};

// Mixture task. The per-example work only touches K-vectors; the matrix
// products over the batch are hoisted out of the example loop.
class MixtureTask {
 public:
  MixtureTask(const TrainConfig& config, const data::MixtureDataset& ds) : config_(config), ds_(ds) {
    train_ = pack(ds.train);
    valid_ = pack(ds.valid);
    test_ = pack(ds.test);
  }

  std::string recovery_metric() const { return "v_measure"; }
  int train_size() const { return static_cast<int>(ds_.train.size()); }

  struct Packed {
    Matrix x;  // D x N
    std::vector<int> y, z;
  };
  const Packed& train_split() const { return train_; }
  const Packed& valid_split() const { return valid_; }
  const Packed& test_split() const { return test_; }

  void init(Rng& rng) {
    const int latent = config_.model == ModelKind::Linear ? 1 : ds_.spec.clusters;
    model_ = models::UnstructuredModel::random(latent, ds_.spec.dims, rng, config_.init_scale);
  }
  Vector params() const { return model_.flatten(); }
  void set_params(const Vector& p) { model_.assign(p); }

  BatchGradient batch_gradient(const std::vector<int>& idx, const EstimatorSpec& spec, Rng& rng) {
    const auto nb = static_cast<Eigen::Index>(idx.size());
    const Matrix x = train_.x(Eigen::all, idx);
    const Matrix scores = (model_.enc_weight * x).colwise() + model_.enc_bias;
    require_finite_scores(scores);
    const Matrix heads = model_.dec_weight * x;  // column n: each cluster's linear logit without bias
    const Eigen::Index k = model_.clusters();

    Matrix enc_coef = Matrix::Zero(k, nb);  // surrogate dL/ds per example
    Matrix dec_coef(k, nb);                 // dL/dlogit * mu_forward per example
    double dec_bias = 0.0;
    BatchGradient out;

    Vector mu(k);
    for (Eigen::Index c = 0; c < nb; ++c) {
      const int y = train_.y[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
      const int z = train_.z[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
      const Vector h = heads.col(c);
      auto logit_at = [&](const Vector& m) { return m.dot(h) + model_.dec_bias; };

      if (config_.model == ModelKind::Linear) {
        mu = Vector::Ones(1);
      } else if (config_.model == ModelKind::Gold) {
        mu = Vector::Zero(k);
        mu[z] = 1.0;
      } else {
        const Vector s = scores.col(c);
        if (spec.method == Method::Sfe || spec.method == Method::SfeBaseline) {
          mu = Vector::Zero(k);
          mu[static_cast<Eigen::Index>(rng.categorical(simplex::softmax(s)))] = 1.0;
          const double l = models::logistic_loss(logit_at(mu), y);
          const double b = spec.method == Method::SfeBaseline ? sfe_.baseline : 0.0;
          enc_coef.col(c) = sfe_score_gradient(s, mu, l, b);
        } else {
          auto fwd = forward_pass(spec, s, oracle_, rng);
          mu = fwd.point;
          const Vector gamma_fwd = models::logistic_dloss(logit_at(mu), y) * h;
          GradLossHandle grad_loss([&](const Vector& m) { return models::logistic_dloss(logit_at(m), y) * h; });
          const Surrogate sur = backward_pass(spec, s, fwd, gamma_fwd, grad_loss, oracle_);
          enc_coef.col(c) = sur.grad;
          out.decoder_calls += grad_loss.calls();
          out.projection_failures += sur.projection_converged ? 0 : 1;
        }
      }
      const double logit = logit_at(mu);
      const double dl = models::logistic_dloss(logit, y);
      out.loss += models::logistic_loss(logit, y);
      dec_coef.col(c) = dl * mu;
      dec_bias += dl;
      out.decoder_calls += 1.0;
    }
    if (spec.method == Method::SfeBaseline && config_.model == ModelKind::Latent)
      update_baseline(sfe_, spec.baseline_decay, out.loss / static_cast<double>(nb));

    const double inv = 1.0 / static_cast<double>(nb);
    models::UnstructuredModel g;
    g.enc_weight = enc_coef * x.transpose() * inv;
    g.enc_bias = enc_coef.rowwise().sum() * inv;
    g.dec_weight = dec_coef * x.transpose() * inv;
    g.dec_bias = dec_bias * inv;
    out.grad = g.flatten();
    out.loss *= inv;
    return out;
  }

  Metrics evaluate(const Packed& split) const {
    const auto n = static_cast<Eigen::Index>(split.y.size());
    if (n == 0) return {};
    const Matrix heads = model_.dec_weight * split.x;
    const Matrix scores = (model_.enc_weight * split.x).colwise() + model_.enc_bias;
    require_finite_scores(scores);
    std::vector<int> pred_y(static_cast<std::size_t>(n)), pred_z(static_cast<std::size_t>(n));
    double loss = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto i = static_cast<std::size_t>(c);
      Vector mu;
      if (config_.model == ModelKind::Linear) {
        mu = Vector::Ones(1);
        pred_z[i] = 0;
      } else if (config_.model == ModelKind::Gold) {
        mu = Vector::Zero(model_.clusters());
        mu[split.z[i]] = 1.0;
        pred_z[i] = split.z[i];
      } else {
        const Vector s = scores.col(c);
        mu = eval_point(config_.estimator.method, s, oracle_);
        pred_z[i] = static_cast<int>(simplex::argmax_index(s));
      }
      const double logit = mu.dot(heads.col(c)) + model_.dec_bias;
      pred_y[i] = sign_label(logit);
      loss += models::logistic_loss(logit, split.y[i]);
    }
    return {metrics::accuracy(pred_y, split.y), metrics::v_measure(pred_z, split.z).v_measure,
            loss / static_cast<double>(n)};
  }

 private:
  static Packed pack(const data::Split& split) {
    Packed p;
    if (split.empty()) return p;
    p.x.resize(split.front().x.size(), static_cast<Eigen::Index>(split.size()));
    for (std::size_t i = 0; i < split.size(); ++i) {
      p.x.col(static_cast<Eigen::Index>(i)) = split[i].x;
      p.y.push_back(split[i].y);
      p.z.push_back(split[i].z_true);
    }
    return p;
  }

  const TrainConfig& config_;
  const data::MixtureDataset& ds_;
  Packed train_, valid_, test_;
  models::UnstructuredModel model_;
  SimplexOracle oracle_;
  SfeState sfe_;
};

class TreeTask {
 public:
  TreeTask(const TrainConfig& config, const data::StructuredDataset& ds) : config_(config), ds_(ds) {
    if (config.model == ModelKind::Linear) throw InvalidInput("the tree task has no linear baseline");
    for (const auto* split : {&ds.train, &ds.valid, &ds.test})
      for (const auto& ex : *split)
        if (ex.tokens.cols() > treedp::kMaxExactLength)
          throw InvalidInput("tree task: sentences longer than " + std::to_string(treedp::kMaxExactLength));
  }

  std::string recovery_metric() const { return "uas"; }
  int train_size() const { return static_cast<int>(ds_.train.size()); }
  const data::TreeSplit& train_split() const { return ds_.train; }
  const data::TreeSplit& valid_split() const { return ds_.valid; }
  const data::TreeSplit& test_split() const { return ds_.test; }

  void init(Rng& rng) {
    model_ = models::StructuredToyModel::random(ds_.spec.token_dims, config_.hidden, rng, config_.init_scale);
  }
  Vector params() const { return model_.flatten(); }
  void set_params(const Vector& p) { model_.assign(p); }

  BatchGradient batch_gradient(const std::vector<int>& idx, const EstimatorSpec& spec, Rng& rng) {
    if (spec.method == Method::Sfe || spec.method == Method::SfeBaseline || spec.method == Method::GumbelSoftmax ||
        spec.method == Method::StGumbel)
      throw Unsupported(std::string(method_name(spec.method)) + " is only available for the categorical task");
    BatchGradient out;
    Vector total = Vector::Zero(model_.parameter_count());
    for (int i : idx) {
      const auto& ex = ds_.train[static_cast<std::size_t>(i)];
      const Vector s = models::encode(model_, ex.tokens);
      require_finite_scores(s);
      Vector mu;
      Vector sur = Vector::Zero(s.size());
      if (config_.model == ModelKind::Gold) {
        mu = treedp::tree_from_heads(ex.heads);
      } else {
        auto fwd = forward_pass(spec, s, oracle_, rng);
        mu = fwd.point;
        const Vector gamma_fwd = models::gamma(model_, ex.tokens, ex.y, mu);
        GradLossHandle grad_loss([&](const Vector& m) { return models::gamma(model_, ex.tokens, ex.y, m); });
        const Surrogate result = backward_pass(spec, s, fwd, gamma_fwd, grad_loss, oracle_);
        sur = result.grad;
        out.decoder_calls += grad_loss.calls();
        out.projection_failures += result.projection_converged ? 0 : 1;
      }
      out.loss += models::loss(model_, ex.tokens, ex.y, mu);
      out.decoder_calls += 1.0;
      total += models::param_grads(model_, ex.tokens, ex.y, sur, mu).flatten();
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    out.grad = total * inv;
    out.loss *= inv;
    return out;
  }

  Metrics evaluate(const data::TreeSplit& split) const {
    if (split.empty()) return {};
    std::vector<int> pred_y, gold_y;
    std::vector<treedp::Heads> pred_heads, gold_heads;
    double loss = 0.0;
    for (const auto& ex : split) {
      const Vector s = models::encode(model_, ex.tokens);
      require_finite_scores(s);
      Vector mu;
      if (config_.model == ModelKind::Gold) {
        mu = treedp::tree_from_heads(ex.heads);
        pred_heads.push_back(ex.heads);
      } else {
        mu = eval_point(config_.estimator.method, s, oracle_);
        pred_heads.push_back(treedp::map_heads(s));
      }
      const double logit = models::decode(model_, ex.tokens, mu);
      pred_y.push_back(sign_label(logit));
      gold_y.push_back(ex.y);
      gold_heads.push_back(ex.heads);
      loss += models::logistic_loss(logit, ex.y);
    }
    return {metrics::accuracy(pred_y, gold_y), metrics::uas(pred_heads, gold_heads),
            loss / static_cast<double>(split.size())};
  }

 private:
  const TrainConfig& config_;
  const data::StructuredDataset& ds_;
  models::StructuredToyModel model_;
  TreeOracle oracle_;
};

}  // namespace

RunRecord train(const TrainConfig& config, const data::MixtureDataset& dataset) {
  MixtureTask task(config, dataset);
  return run_training(config, task);
}

RunRecord train(const TrainConfig& config, const data::StructuredDataset& dataset) {
  TreeTask task(config, dataset);
  return run_training(config, task);
}

}  // namespace pullback
