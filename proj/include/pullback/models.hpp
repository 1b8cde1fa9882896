#pragma once

#include <functional>

#include "pullback/rng.hpp"
#include "pullback/types.hpp"

// Host networks around the latent node: an encoder producing scores s, and a
// decoder that accepts either a vertex or an averaged structure mu. The
// downstream loss is binary logistic on a scalar logit with y in {-1, +1}.

namespace pullback::models {

// -- loss --------------------------------------------------------------------

/// log(1 + exp(-y * logit)), evaluated stably.
double logistic_loss(double logit, int y);
/// d logistic_loss / d logit = -y * sigmoid(-y * logit).
double logistic_dloss(double logit, int y);

// -- categorical model: s = W_f x + b_f, logit = mu^T W_g x + b_g ---------------

struct UnstructuredModel {
  Matrix enc_weight;  // K x D
  Vector enc_bias;    // K
  Matrix dec_weight;  // K x D
  double dec_bias = 0.0;

  Eigen::Index clusters() const { return enc_weight.rows(); }
  Eigen::Index dims() const { return enc_weight.cols(); }

  /// Small random weights (N(0, scale^2)), zero biases.
  static UnstructuredModel random(Eigen::Index clusters, Eigen::Index dims, Rng& rng, double scale = 0.1);
  static UnstructuredModel zeros(Eigen::Index clusters, Eigen::Index dims);

  /// Flat view in the order enc_weight (column major), enc_bias, dec_weight, dec_bias.
  Vector flatten() const;
  void assign(const Vector& flat);
  Eigen::Index parameter_count() const;
};

Vector encode(const UnstructuredModel& model, const Vector& x);
double decode(const UnstructuredModel& model, const Vector& x, const Vector& mu);
double loss(const UnstructuredModel& model, const Vector& x, int y, const Vector& mu);
/// dL/dmu = logistic_dloss(logit) * W_g x.
Vector gamma(const UnstructuredModel& model, const Vector& x, int y, const Vector& mu);

/// Parameter gradients: the encoder through the surrogate dL/ds, the decoder
/// exactly at the forward point. Same layout as UnstructuredModel.
UnstructuredModel param_grads(const UnstructuredModel& model, const Vector& x, int y, const Vector& surrogate_grad_s,
                              const Vector& mu_forward);

// -- toy structured model over dependency trees -----------------------------------
//
// Arc score   s(h->m) = v^T tanh(W [x_h; x_m] + b)
// Decoder     logit   = w^T (sum_a mu_a (x_h * x_m)) / L + c
// Token 0 (the root) uses the learned embedding `root`.

struct StructuredToyModel {
  Matrix scorer_weight;  // H x 2d
  Vector scorer_bias;    // H
  Vector scorer_out;     // H
  Vector dec_weight;     // d
  double dec_bias = 0.0;
  Vector root;           // d

  Eigen::Index token_dims() const { return dec_weight.size(); }
  Eigen::Index hidden() const { return scorer_bias.size(); }

  static StructuredToyModel random(Eigen::Index token_dims, Eigen::Index hidden, Rng& rng, double scale = 0.5);
  static StructuredToyModel zeros(Eigen::Index token_dims, Eigen::Index hidden);

  /// Order: scorer_weight (column major), scorer_bias, scorer_out, dec_weight, dec_bias, root.
  Vector flatten() const;
  void assign(const Vector& flat);
  Eigen::Index parameter_count() const;
};

/// tokens is d x L; returns arc scores in ArcIndex order.
Vector encode(const StructuredToyModel& model, const Matrix& tokens);
double decode(const StructuredToyModel& model, const Matrix& tokens, const Vector& mu);
double loss(const StructuredToyModel& model, const Matrix& tokens, int y, const Vector& mu);
Vector gamma(const StructuredToyModel& model, const Matrix& tokens, int y, const Vector& mu);
StructuredToyModel param_grads(const StructuredToyModel& model, const Matrix& tokens, int y,
                               const Vector& surrogate_grad_s, const Vector& mu_forward);

// -- gradient checking -----------------------------------------------------------

/// Worst coordinate-wise relative error between `analytic` and central finite
/// differences of f at `point`: |fd - a| / max(|fd|, |a|, floor).
double finite_diff_check(const std::function<double(const Vector&)>& f, const Vector& point, const Vector& analytic,
                         double step = 1e-5, double floor = 1e-6);

/// Central-difference gradient of f at point.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& point, double step = 1e-5);

}  // namespace pullback::models
