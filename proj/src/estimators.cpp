#include "pullback/estimators.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "pullback/simplex.hpp"

namespace pullback {

namespace {

struct MethodEntry {
  Method method;
  std::string_view name;
};

constexpr std::array<MethodEntry, 13> kMethods{{
    {Method::SteI, "ste-i"},
    {Method::SteS, "ste-s"},
    {Method::Spigot, "spigot"},
    {Method::SpigotCe, "spigot-ce"},
    {Method::SpigotEg, "spigot-eg"},
    {Method::Sfe, "sfe"},
    {Method::SfeBaseline, "sfe-baseline"},
    {Method::GumbelSoftmax, "gumbel-softmax"},
    {Method::StGumbel, "st-gumbel"},
    {Method::PerturbAndMap, "perturb-and-map"},
    {Method::RelaxedMarg, "softmax"},
    {Method::RelaxedSparse, "sparsemax"},
    {Method::ExactArgmax, "argmax"},
}};

void require_unstructured(const PolytopeOracle& oracle, const char* what) {
  if (oracle.structured()) throw Unsupported(std::string(what) + " is only defined for the categorical case");
}

void record(IterateTrace* trace, const Vector& mu) {
  if (trace) trace->push_back(mu);
}

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& entry : kMethods)
    if (entry.method == method) return entry.name;
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& entry : kMethods)
    if (entry.name == lower) return entry.method;
  // accepted aliases
  if (lower == "marginals" || lower == "relaxed-softmax") return Method::RelaxedMarg;
  if (lower == "sparsemap" || lower == "relaxed-sparsemax") return Method::RelaxedSparse;
  if (lower == "exact-argmax") return Method::ExactArgmax;
  throw InvalidInput("unknown method '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& entry : kMethods) out.push_back(entry.method);
    return out;
  }();
  return methods;
}

bool uses_argmax_forward(Method method) {
  switch (method) {
    case Method::SteI:
    case Method::SteS:
    case Method::Spigot:
    case Method::SpigotCe:
    case Method::SpigotEg:
    case Method::ExactArgmax:
      return true;
    default:
      return false;
  }
}

bool is_stochastic(Method method) {
  switch (method) {
    case Method::Sfe:
    case Method::SfeBaseline:
    case Method::GumbelSoftmax:
    case Method::StGumbel:
    case Method::PerturbAndMap:
      return true;
    default:
      return false;
  }
}

void EstimatorSpec::validate() const {
  if (!(eta > 0.0)) throw InvalidInput("estimator: eta must be > 0");
  if (k < 1) throw InvalidInput("estimator: k must be >= 1");
  if (!(temperature > 0.0)) throw InvalidInput("estimator: temperature must be > 0");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw InvalidInput("estimator: baseline_decay must be in [0, 1)");
}

void GradLossHandle::prime(const Vector& point, const Vector& gamma) { primed_.emplace(point, gamma); }

Vector GradLossHandle::operator()(const Vector& mu) {
  if (primed_ && primed_->first.size() == mu.size() && primed_->first == mu) {
    Vector gamma = std::move(primed_->second);
    primed_.reset();
    return gamma;
  }
  primed_.reset();
  ++calls_;
  Vector gamma = fn_(mu);
  if (gamma.size() != mu.size()) throw InvalidInput("grad_loss returned a vector of the wrong length");
  if (!gamma.allFinite()) {
    std::ostringstream msg;
    msg << "grad_loss produced a non-finite gradient at mu = [" << mu.transpose() << "]";
    throw NonFiniteGradient(msg.str());
  }
  return gamma;
}

Vector forward(const Vector& s, const PolytopeOracle& oracle) {
  require_finite(s, "forward");
  return oracle.map(s);
}

Surrogate backward_ste_i(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                         const PolytopeOracle& oracle, IterateTrace* trace) {
  spec.validate();
  Vector mu = oracle.map(s);
  record(trace, mu);
  // mu0 - mu_k accumulated as the sum of the steps, so k = 1 returns eta * gamma exactly
  Vector total = Vector::Zero(s.size());
  for (int t = 1; t <= spec.k; ++t) {
    const Vector step = spec.eta * grad_loss(mu);
    total += step;
    if (t < spec.k || trace) mu -= step;
    record(trace, mu);
  }
  return {std::move(total), true};
}

namespace {

Surrogate projected_gradient(const EstimatorSpec& spec, const Vector& mu0, GradLossHandle& grad_loss,
                             const PolytopeOracle& oracle, IterateTrace* trace) {
  Surrogate out;
  Vector mu = mu0;
  record(trace, mu);
  for (int t = 1; t <= spec.k; ++t) {
    const Vector gamma = grad_loss(mu);
    auto proj = oracle.project(mu - spec.eta * gamma);
    out.projection_converged = out.projection_converged && proj.converged;
    mu = std::move(proj.mean);
    record(trace, mu);
  }
  out.grad = mu0 - mu;
  return out;
}

}  // namespace

Surrogate backward_spigot(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                          const PolytopeOracle& oracle, IterateTrace* trace) {
  spec.validate();
  return projected_gradient(spec, oracle.map(s), grad_loss, oracle, trace);
}

Surrogate backward_spigot_ce(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                             const PolytopeOracle& oracle, IterateTrace* trace) {
  spec.validate();
  return projected_gradient(spec, oracle.marg(s), grad_loss, oracle, trace);
}

Surrogate backward_spigot_eg(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                             const PolytopeOracle& oracle, IterateTrace* trace) {
  spec.validate();
  Vector scores = s;
  const Vector mu0 = oracle.marg(scores);
  Vector mu = mu0;
  record(trace, mu);
  for (int t = 1; t <= spec.k; ++t) {
    scores -= spec.eta * grad_loss(mu);
    mu = oracle.marg(scores);
    record(trace, mu);
  }
  return {mu0 - mu, true};
}

Surrogate backward_ste_s(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                         const PolytopeOracle& oracle) {
  spec.validate();
  const Vector gamma = grad_loss(oracle.map(s));
  return {oracle.marg_vjp(s, gamma), true};
}

Vector sfe_score_gradient(const Vector& s, const Vector& z, double loss, double baseline) {
  require_same_length(s, z, "sfe_score_gradient");
  return (loss - baseline) * (z - simplex::softmax(s));
}

void update_baseline(SfeState& state, double decay, double loss) {
  state.baseline = decay * state.baseline + (1.0 - decay) * loss;
}

SfeSample sfe_gradient(const EstimatorSpec& spec, const Vector& s,
                       const std::function<double(const Vector&)>& loss_value, Rng& rng, SfeState& state,
                       const PolytopeOracle& oracle) {
  spec.validate();
  require_unstructured(oracle, "the score function estimator");
  if (spec.method != Method::Sfe && spec.method != Method::SfeBaseline)
    throw InvalidInput("sfe_gradient called with a non-SFE method");
  require_finite(s, "sfe_gradient");
  SfeSample out;
  out.z = Vector::Zero(s.size());
  out.z[static_cast<Eigen::Index>(rng.categorical(simplex::softmax(s)))] = 1.0;
  out.loss = loss_value(out.z);
  const bool with_baseline = spec.method == Method::SfeBaseline;
  out.grad = sfe_score_gradient(s, out.z, out.loss, with_baseline ? state.baseline : 0.0);
  if (with_baseline) update_baseline(state, spec.baseline_decay, out.loss);
  return out;
}

PerturbedForward gumbel_forward(const EstimatorSpec& spec, const Vector& s, Rng& rng) {
  spec.validate();
  require_finite(s, "gumbel_forward");
  PerturbedForward out;
  out.perturbed = (s + rng.gumbel_vector(s.size())) / spec.temperature;
  out.point = spec.method == Method::StGumbel ? simplex::argmax_onehot(out.perturbed)
                                              : simplex::softmax(out.perturbed);
  return out;
}

Vector gumbel_backward(const EstimatorSpec& spec, const PerturbedForward& fwd, const Vector& gamma) {
  return simplex::softmax_vjp(fwd.perturbed, gamma) / spec.temperature;
}

ForwardBackward gumbel_forward_backward(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                                        Rng& rng) {
  if (spec.method != Method::GumbelSoftmax && spec.method != Method::StGumbel)
    throw InvalidInput("gumbel_forward_backward called with a non-Gumbel method");
  auto fwd = gumbel_forward(spec, s, rng);
  const Vector gamma = grad_loss(fwd.point);
  return {std::move(fwd.point), gumbel_backward(spec, fwd, gamma)};
}

ForwardBackward perturb_and_map_estimator(const EstimatorSpec& spec, const Vector& s, GradLossHandle& grad_loss,
                                          const PolytopeOracle& oracle, Rng& rng) {
  spec.validate();
  if (!oracle.structured()) throw Unsupported("perturb-and-map is defined for structured latent spaces");
  require_finite(s, "perturb_and_map_estimator");
  const Vector perturbed = oracle.perturb(s, rng);
  Vector point = oracle.map(perturbed);
  const Vector gamma = grad_loss(point);
  return {std::move(point), oracle.marg_vjp(perturbed, gamma)};
}

ForwardPass forward_pass(const EstimatorSpec& spec, const Vector& s, const PolytopeOracle& oracle, Rng& rng) {
  require_finite(s, "forward_pass");
  ForwardPass fwd;
  switch (spec.method) {
    case Method::Sfe:
    case Method::SfeBaseline: {
      require_unstructured(oracle, "the score function estimator");
      fwd.point = Vector::Zero(s.size());
      fwd.point[static_cast<Eigen::Index>(rng.categorical(simplex::softmax(s)))] = 1.0;
      break;
    }
    case Method::GumbelSoftmax:
    case Method::StGumbel: {
      require_unstructured(oracle, "the Gumbel estimators");
      auto g = gumbel_forward(spec, s, rng);
      fwd.point = std::move(g.point);
      fwd.perturbed = std::move(g.perturbed);
      break;
    }
    case Method::PerturbAndMap:
      if (!oracle.structured()) throw Unsupported("perturb-and-map is defined for structured latent spaces");
      fwd.perturbed = oracle.perturb(s, rng);
      fwd.point = oracle.map(fwd.perturbed);
      break;
    case Method::RelaxedMarg:
      fwd.point = oracle.marg(s);
      break;
    case Method::RelaxedSparse:
      fwd.projection = oracle.project(s);
      fwd.point = fwd.projection->mean;
      break;
    default:
      fwd.point = forward(s, oracle);
      break;
  }
  return fwd;
}

Surrogate backward_pass(const EstimatorSpec& spec, const Vector& s, const ForwardPass& fwd,
                        const Vector& gamma_at_forward, GradLossHandle& grad_loss, const PolytopeOracle& oracle) {
  switch (spec.method) {
    case Method::SteI:
      grad_loss.prime(fwd.point, gamma_at_forward);
      return backward_ste_i(spec, s, grad_loss, oracle);
    case Method::Spigot:
      grad_loss.prime(fwd.point, gamma_at_forward);
      return backward_spigot(spec, s, grad_loss, oracle);
    case Method::SpigotCe:
      return backward_spigot_ce(spec, s, grad_loss, oracle);
    case Method::SpigotEg:
      return backward_spigot_eg(spec, s, grad_loss, oracle);
    case Method::SteS:
      grad_loss.prime(fwd.point, gamma_at_forward);
      return backward_ste_s(spec, s, grad_loss, oracle);
    case Method::GumbelSoftmax:
    case Method::StGumbel:
      return {gumbel_backward(spec, {fwd.point, fwd.perturbed}, gamma_at_forward), true};
    case Method::PerturbAndMap:
      return {oracle.marg_vjp(fwd.perturbed, gamma_at_forward), true};
    case Method::RelaxedMarg:
      return {oracle.marg_vjp(s, gamma_at_forward), true};
    case Method::RelaxedSparse: {
      auto sol = *fwd.projection;
      const bool converged = sol.converged;
      sol.converged = true;  // best iterate; the flag is reported instead
      return {oracle.project_vjp(sol, gamma_at_forward), converged};
    }
    case Method::ExactArgmax:
      return {Vector::Zero(s.size()), true};
    case Method::Sfe:
    case Method::SfeBaseline:
      break;
  }
  throw InvalidInput("backward_pass: SFE estimates need loss values; use sfe_score_gradient");
}

}  // namespace pullback
