#include "pullback/models.hpp"

#include <cmath>

#include "pullback/treedp.hpp"

namespace pullback::models {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_label(int y) {
  if (y != 1 && y != -1) throw InvalidInput("label must be -1 or +1");
}

// Sequential writer/reader over a flat parameter vector.
class FlatWriter {
 public:
  explicit FlatWriter(Eigen::Index size) : flat_(size) {}
  template <class Derived>
  void put(const Eigen::MatrixBase<Derived>& block) {
    for (Eigen::Index j = 0; j < block.cols(); ++j)
      for (Eigen::Index i = 0; i < block.rows(); ++i) flat_[pos_++] = block(i, j);
  }
  void put(double v) { flat_[pos_++] = v; }
  Vector take() { return std::move(flat_); }

 private:
  Vector flat_;
  Eigen::Index pos_ = 0;
};

class FlatReader {
 public:
  FlatReader(const Vector& flat, Eigen::Index expected) : flat_(flat) {
    if (flat.size() != expected) throw InvalidInput("parameter vector has the wrong size");
  }
  template <class Derived>
  void get(Eigen::MatrixBase<Derived>& block) {
    for (Eigen::Index j = 0; j < block.cols(); ++j)
      for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = flat_[pos_++];
  }
  void get(double& v) { v = flat_[pos_++]; }

 private:
  const Vector& flat_;
  Eigen::Index pos_ = 0;
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

// x_0 is the root embedding, x_1..x_L the tokens.
Vector token(const StructuredToyModel& model, const Matrix& tokens, int position) {
  return position == 0 ? model.root : Vector(tokens.col(position - 1));
}

void check_tokens(const StructuredToyModel& model, const Matrix& tokens) {
  if (tokens.rows() != model.token_dims()) throw InvalidInput("token dimension does not match the model");
  if (tokens.cols() < 1) throw InvalidInput("sentence must have at least one token");
}

void check_arcs(const Matrix& tokens, const Vector& v, const char* what) {
  if (v.size() != tokens.cols() * tokens.cols()) throw InvalidInput(std::string(what) + ": expected L*L arc entries");
}

}  // namespace

double logistic_loss(double logit, int y) {
  check_label(y);
  const double margin = y * logit;
  // log(1 + exp(-margin))
  return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

double logistic_dloss(double logit, int y) {
  check_label(y);
  return -y * sigmoid(-y * logit);
}

// -- UnstructuredModel --------------------------------------------------------

UnstructuredModel UnstructuredModel::random(Eigen::Index clusters, Eigen::Index dims, Rng& rng, double scale) {
  UnstructuredModel m = zeros(clusters, dims);
  m.enc_weight = random_matrix(clusters, dims, rng, scale);
  m.dec_weight = random_matrix(clusters, dims, rng, scale);
  return m;
}

UnstructuredModel UnstructuredModel::zeros(Eigen::Index clusters, Eigen::Index dims) {
  return {Matrix::Zero(clusters, dims), Vector::Zero(clusters), Matrix::Zero(clusters, dims), 0.0};
}

Eigen::Index UnstructuredModel::parameter_count() const { return 2 * enc_weight.size() + enc_bias.size() + 1; }

Vector UnstructuredModel::flatten() const {
  FlatWriter w(parameter_count());
  w.put(enc_weight);
  w.put(enc_bias);
  w.put(dec_weight);
  w.put(dec_bias);
  return w.take();
}

void UnstructuredModel::assign(const Vector& flat) {
  FlatReader r(flat, parameter_count());
  r.get(enc_weight);
  r.get(enc_bias);
  r.get(dec_weight);
  r.get(dec_bias);
}

Vector encode(const UnstructuredModel& model, const Vector& x) {
  if (x.size() != model.dims()) throw InvalidInput("encode: input has the wrong dimension");
  return model.enc_weight * x + model.enc_bias;
}

double decode(const UnstructuredModel& model, const Vector& x, const Vector& mu) {
  if (x.size() != model.dims()) throw InvalidInput("decode: input has the wrong dimension");
  if (mu.size() != model.clusters()) throw InvalidInput("decode: latent has the wrong dimension");
  return mu.dot(model.dec_weight * x) + model.dec_bias;
}

double loss(const UnstructuredModel& model, const Vector& x, int y, const Vector& mu) {
  return logistic_loss(decode(model, x, mu), y);
}

Vector gamma(const UnstructuredModel& model, const Vector& x, int y, const Vector& mu) {
  return logistic_dloss(decode(model, x, mu), y) * (model.dec_weight * x);
}

UnstructuredModel param_grads(const UnstructuredModel& model, const Vector& x, int y, const Vector& surrogate_grad_s,
                              const Vector& mu_forward) {
  if (surrogate_grad_s.size() != model.clusters()) throw InvalidInput("param_grads: surrogate has the wrong length");
  const double dl = logistic_dloss(decode(model, x, mu_forward), y);
  UnstructuredModel g;
  g.enc_weight = surrogate_grad_s * x.transpose();
  g.enc_bias = surrogate_grad_s;
  g.dec_weight = dl * mu_forward * x.transpose();
  g.dec_bias = dl;
  return g;
}

// -- StructuredToyModel -------------------------------------------------------

StructuredToyModel StructuredToyModel::random(Eigen::Index token_dims, Eigen::Index hidden, Rng& rng, double scale) {
  StructuredToyModel m = zeros(token_dims, hidden);
  m.scorer_weight = random_matrix(hidden, 2 * token_dims, rng, scale);
  m.scorer_out = random_matrix(hidden, 1, rng, scale);
  m.dec_weight = random_matrix(token_dims, 1, rng, scale);
  m.root = random_matrix(token_dims, 1, rng, scale);
  return m;
}

StructuredToyModel StructuredToyModel::zeros(Eigen::Index token_dims, Eigen::Index hidden) {
  return {Matrix::Zero(hidden, 2 * token_dims), Vector::Zero(hidden), Vector::Zero(hidden),
          Vector::Zero(token_dims), 0.0, Vector::Zero(token_dims)};
}

Eigen::Index StructuredToyModel::parameter_count() const {
  return scorer_weight.size() + scorer_bias.size() + scorer_out.size() + dec_weight.size() + 1 + root.size();
}

Vector StructuredToyModel::flatten() const {
  FlatWriter w(parameter_count());
  w.put(scorer_weight);
  w.put(scorer_bias);
  w.put(scorer_out);
  w.put(dec_weight);
  w.put(dec_bias);
  w.put(root);
  return w.take();
}

void StructuredToyModel::assign(const Vector& flat) {
  FlatReader r(flat, parameter_count());
  r.get(scorer_weight);
  r.get(scorer_bias);
  r.get(scorer_out);
  r.get(dec_weight);
  r.get(dec_bias);
  r.get(root);
}

Vector encode(const StructuredToyModel& model, const Matrix& tokens) {
  check_tokens(model, tokens);
  const int n = static_cast<int>(tokens.cols());
  const Eigen::Index d = model.token_dims();
  const treedp::ArcIndex index(n);
  // W [x_h; x_m] = W_head x_h + W_mod x_m
  Matrix head_part(model.hidden(), n + 1), mod_part(model.hidden(), n + 1);
  for (int p = 0; p <= n; ++p) {
    const Vector x = token(model, tokens, p);
    head_part.col(p) = model.scorer_weight.leftCols(d) * x;
    mod_part.col(p) = model.scorer_weight.rightCols(d) * x;
  }
  Vector s(index.size());
  for (Eigen::Index a = 0; a < index.size(); ++a) {
    const int h = index.head(a), m = index.modifier(a);
    s[a] = model.scorer_out.dot((head_part.col(h) + mod_part.col(m) + model.scorer_bias).array().tanh().matrix());
  }
  return s;
}

namespace {

Vector pooled_features(const StructuredToyModel& model, const Matrix& tokens, const Vector& mu) {
  const int n = static_cast<int>(tokens.cols());
  const treedp::ArcIndex index(n);
  Vector pooled = Vector::Zero(model.token_dims());
  for (Eigen::Index a = 0; a < index.size(); ++a) {
    if (mu[a] == 0.0) continue;
    pooled += mu[a] * token(model, tokens, index.head(a)).cwiseProduct(tokens.col(index.modifier(a) - 1));
  }
  return pooled / static_cast<double>(n);
}

}  // namespace

double decode(const StructuredToyModel& model, const Matrix& tokens, const Vector& mu) {
  check_tokens(model, tokens);
  check_arcs(tokens, mu, "decode");
  return model.dec_weight.dot(pooled_features(model, tokens, mu)) + model.dec_bias;
}

double loss(const StructuredToyModel& model, const Matrix& tokens, int y, const Vector& mu) {
  return logistic_loss(decode(model, tokens, mu), y);
}

Vector gamma(const StructuredToyModel& model, const Matrix& tokens, int y, const Vector& mu) {
  const double dl = logistic_dloss(decode(model, tokens, mu), y);
  const int n = static_cast<int>(tokens.cols());
  const treedp::ArcIndex index(n);
  Vector g(index.size());
  for (Eigen::Index a = 0; a < index.size(); ++a) {
    g[a] = dl * model.dec_weight.dot(token(model, tokens, index.head(a)).cwiseProduct(tokens.col(index.modifier(a) - 1))) /
           static_cast<double>(n);
  }
  return g;
}

StructuredToyModel param_grads(const StructuredToyModel& model, const Matrix& tokens, int y,
                               const Vector& surrogate_grad_s, const Vector& mu_forward) {
  check_tokens(model, tokens);
  check_arcs(tokens, surrogate_grad_s, "param_grads");
  check_arcs(tokens, mu_forward, "param_grads");
  const int n = static_cast<int>(tokens.cols());
  const Eigen::Index d = model.token_dims();
  const treedp::ArcIndex index(n);
  StructuredToyModel g = StructuredToyModel::zeros(d, model.hidden());

  // encoder, through the surrogate dL/ds
  for (Eigen::Index a = 0; a < index.size(); ++a) {
    const double ds = surrogate_grad_s[a];
    if (ds == 0.0) continue;
    const int h = index.head(a), m = index.modifier(a);
    const Vector xh = token(model, tokens, h);
    const Vector xm = tokens.col(m - 1);
    const Vector act = (model.scorer_weight.leftCols(d) * xh + model.scorer_weight.rightCols(d) * xm +
                        model.scorer_bias).array().tanh().matrix();
    g.scorer_out += ds * act;
    const Vector dpre = ds * model.scorer_out.cwiseProduct((1.0 - act.array().square()).matrix());
    g.scorer_weight.leftCols(d) += dpre * xh.transpose();
    g.scorer_weight.rightCols(d) += dpre * xm.transpose();
    g.scorer_bias += dpre;
    if (h == 0) g.root += model.scorer_weight.leftCols(d).transpose() * dpre;
  }

  // decoder, exactly at the forward point
  const Vector pooled = pooled_features(model, tokens, mu_forward);
  const double dl = logistic_dloss(model.dec_weight.dot(pooled) + model.dec_bias, y);
  g.dec_weight = dl * pooled;
  g.dec_bias = dl;
  for (int m = 1; m <= n; ++m) {
    const double w = mu_forward[index.index(0, m)];
    if (w != 0.0) g.root += dl * w * model.dec_weight.cwiseProduct(tokens.col(m - 1)) / static_cast<double>(n);
  }
  return g;
}

// -- finite differences ---------------------------------------------------------

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& point, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite differences need step > 0");
  Vector grad(point.size());
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = f(probe);
    probe[i] = point[i] - step;
    const double down = f(probe);
    probe[i] = point[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double finite_diff_check(const std::function<double(const Vector&)>& f, const Vector& point, const Vector& analytic,
                         double step, double floor) {
  require_same_length(point, analytic, "finite_diff_check");
  const Vector numeric = finite_diff_gradient(f, point, step);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double denom = std::max({std::abs(numeric[i]), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(numeric[i] - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace pullback::models
