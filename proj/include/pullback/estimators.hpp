#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pullback/polytope.hpp"
#include "pullback/rng.hpp"
#include "pullback/sparsemap.hpp"
#include "pullback/types.hpp"

// Gradient estimators for a discrete latent node z = MAP(s).
//
// All surrogate methods share the same forward pass (the MAP vertex) and
// differ in the backward pass, which produces a stand-in for dL/ds. The
// pulled-back family (STE-I, SPIGOT, SPIGOT-CE, SPIGOT-EG) runs k steps of an
// inner optimiser on min_mu L(y(mu), y) starting from mu0 and returns mu0 - mu_k.

namespace pullback {

enum class Method {
  SteI,
  SteS,
  Spigot,
  SpigotCe,
  SpigotEg,
  Sfe,
  SfeBaseline,
  GumbelSoftmax,
  StGumbel,
  PerturbAndMap,
  RelaxedMarg,
  RelaxedSparse,
  ExactArgmax,
};

std::string_view method_name(Method method);
/// Accepts the names produced by method_name (case-insensitive).
Method parse_method(std::string_view name);
const std::vector<Method>& all_methods();

/// Whether the forward pass is the MAP vertex of the unperturbed scores.
bool uses_argmax_forward(Method method);
bool is_stochastic(Method method);

struct EstimatorSpec {
  Method method = Method::SteI;
  double eta = 1.0;
  int k = 1;
  double temperature = 1.0;
  double baseline_decay = 0.9;

  void validate() const;
};

/// gamma(mu) = dL(y(mu), y)/dmu, evaluated by the downstream decoder.
///
/// Each evaluation is one decoder forward and backward pass and is counted.
/// The trainer already evaluates gamma at the forward point; it can `prime`
/// the handle with that value so the first request at exactly that point is
/// served without a new evaluation.
class GradLossHandle {
 public:
  using Function = std::function<Vector(const Vector&)>;

  explicit GradLossHandle(Function fn) : fn_(std::move(fn)) {}

  void prime(const Vector& point, const Vector& gamma);
  Vector operator()(const Vector& mu);

  /// Evaluations made through the handle (primed hits excluded).
  int calls() const { return calls_; }

 private:
  Function fn_;
  std::optional<std::pair<Vector, Vector>> primed_;
  int calls_ = 0;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Surrogate {
  Vector grad;
  bool projection_converged = true;
};

/// Optional sink for the inner iterates mu0..mu_k.
using IterateTrace = std::vector<Vector>;

/// The shared forward pass: MAP(s).
Vector forward(const Vector& s, const PolytopeOracle& oracle);

Surrogate backward_ste_i(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                         const PolytopeOracle& oracle, IterateTrace* trace = nullptr);
Surrogate backward_spigot(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                          const PolytopeOracle& oracle, IterateTrace* trace = nullptr);
Surrogate backward_spigot_ce(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                             const PolytopeOracle& oracle, IterateTrace* trace = nullptr);
Surrogate backward_spigot_eg(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                             const PolytopeOracle& oracle, IterateTrace* trace = nullptr);
/// Marg (softmax) Jacobian applied to gamma at the MAP vertex.
Surrogate backward_ste_s(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                         const PolytopeOracle& oracle);

// -- score function estimator ------------------------------------------------

struct SfeState {
  double baseline = 0.0;
};

/// (L(z) - b) * dlog p(z; s)/ds with p = softmax(s); dlog p/ds = z - softmax(s).
Vector sfe_score_gradient(const Vector& s, const Vector& z, double loss, double baseline);

/// b <- decay * b + (1 - decay) * loss
void update_baseline(SfeState& state, double decay, double loss);

struct SfeSample {
  Vector z;
  double loss = 0.0;
  Vector grad;
};

/// Draws z ~ softmax(s), evaluates the loss there and returns the estimate.
/// The baseline variant subtracts state.baseline and then updates it.
SfeSample sfe_gradient(const EstimatorSpec& spec, const Vector& s,
                       const std::function<double(const Vector&)>& loss_value, Rng& rng, SfeState& state,
                       const PolytopeOracle& oracle);

// -- Gumbel and perturbation estimators ----------------------------------------

struct PerturbedForward {
  Vector point;
  /// Perturbed (and, for Gumbel, temperature-scaled) scores.
  Vector perturbed;
};

PerturbedForward gumbel_forward(const EstimatorSpec& spec, const Vector& s, Rng& rng);
/// softmax Jacobian at the perturbed scores, chained through the 1/temperature scaling.
Vector gumbel_backward(const EstimatorSpec& spec, const PerturbedForward& fwd, const Vector& gamma);

struct ForwardBackward {
  Vector point;
  Vector grad;
};

ForwardBackward gumbel_forward_backward(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                                        Rng& rng);

ForwardBackward perturb_and_map_estimator(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                                          const PolytopeOracle& oracle, Rng& rng);

// -- uniform dispatch used by the trainer --------------------------------------

struct ForwardPass {
  Vector point;
  Vector perturbed;
  std::optional<sparsemap::SparseSolution> projection;
};

/// The point the decoder sees for `spec.method`.
ForwardPass forward_pass(const EstimatorSpec& spec, const Vector& s, const PolytopeOracle& oracle, Rng& rng);

/// Surrogate dL/ds given gamma at the forward point. Not valid for the SFE
/// methods, which need loss values rather than gamma (see sfe_score_gradient).
Surrogate backward_pass(const EstimatorSpec& spec, const Vector& s, const ForwardPass& fwd,
                        const Vector& gamma_at_forward, GradLossHandle& grad_loss, const PolytopeOracle& oracle);

}  // namespace pullback
