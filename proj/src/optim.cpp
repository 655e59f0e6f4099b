#include "mano/optim.hpp"

#include <cmath>
#include <numbers>

#include "mano/kernels.hpp"

namespace mano {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ValueError(std::string(what) + " must be positive");
}

void require_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v < 1.0)) throw ValueError(std::string(what) + " must lie in [0, 1)");
}

Tensor& momentum_buffer(OptimizerState& state, const Tensor& theta, const char* op) {
  if (state.holds_adam_moments()) {
    throw ValueError(std::string(op) + ": state holds AdamW moments, not a momentum buffer");
  }
  if (!state.momentum) state.momentum = Tensor::zeros(theta.shape());
  require_same_shape(*state.momentum, theta, op);
  return *state.momentum;
}

// buffer <- mu * buffer + g
void accumulate(Tensor& buffer, const Tensor& g, double mu) {
  auto b = buffer.values_mut();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = mu * b[i] + g[i];
}

// mu * buffer + g, the Nesterov look-ahead.
Tensor lookahead(const Tensor& buffer, const Tensor& g, double mu) {
  Tensor out = buffer;
  accumulate(out, g, mu);
  return out;
}

// theta - lr * (direction + wd * theta)
Tensor decoupled_update(const Tensor& theta, const Tensor& direction, double lr, double wd) {
  Tensor out(theta.shape());
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = theta[i] - lr * (direction[i] + wd * theta[i]);
  }
  return out;
}

}  // namespace

void ManoConfig::validate() const {
  require_positive(lr, "mano lr");
  require_unit_interval(momentum, "mano momentum");
  if (!(weight_decay >= 0.0)) throw ValueError("mano weight_decay must be nonnegative");
  require_positive(rescale_coeff, "mano rescale_coeff");
  schedule.validate();
}

void MuonConfig::validate() const {
  require_positive(lr, "muon lr");
  require_unit_interval(momentum, "muon momentum");
  if (!(weight_decay >= 0.0)) throw ValueError("muon weight_decay must be nonnegative");
  if (ns_iterations < 1) throw ValueError("muon ns_iterations must be at least 1");
  require_positive(rescale_coeff, "muon rescale_coeff");
}

void AdamWConfig::validate() const {
  require_positive(lr, "adamw lr");
  require_unit_interval(beta1, "adamw beta1");
  require_unit_interval(beta2, "adamw beta2");
  require_positive(eps, "adamw eps");
  if (!(weight_decay >= 0.0)) throw ValueError("adamw weight_decay must be nonnegative");
}

ManoStepResult mano_step_traced(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                                const ManoConfig& cfg, double lr_t) {
  cfg.validate();
  require_same_shape(theta, grad, "mano_step");
  if (cfg.schedule.order != theta.order()) {
    throw ShapeError("mano_step: schedule order " + std::to_string(cfg.schedule.order) +
                     " does not match tensor order " + std::to_string(theta.order()));
  }
  Tensor& buffer = momentum_buffer(state, theta, "mano_step");
  accumulate(buffer, grad, cfg.momentum);

  const std::size_t k = rotation_axis(cfg.schedule, state.step);
  const Tensor used = cfg.nesterov ? lookahead(buffer, grad, cfg.momentum) : buffer;
  const auto layout = kernels::axis_layout(theta.shape(), k);

  const AxisVector theta_norms = dim_norm(theta, k);
  ManoTrace trace;
  trace.axis = k;
  trace.theta_hat = Tensor(theta.shape());
  kernels::axis_divide(theta.values(), theta_norms.values, layout,
                       trace.theta_hat.values_mut(), kEpsDiv);

  trace.tangent = tangent_project_unchecked(used, trace.theta_hat, k);
  std::vector<double> keep(layout.slices(), 1.0);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (theta_norms[j] < kEpsDiv) {
      keep[j] = 0.0;
      ++trace.degenerate_theta_slices;
    }
  }
  if (trace.degenerate_theta_slices > 0) {
    kernels::axis_multiply(trace.tangent.values(), keep, layout, trace.tangent.values_mut());
  }

  trace.tangent_normalized =
      oblique_normalize_or_zero(trace.tangent, k, &trace.degenerate_tangent_slices);
  const double scale = cfg.rescale_coeff * std::sqrt(static_cast<double>(theta.dim(k)));
  trace.update_term = scaled(trace.tangent_normalized, scale);

  Tensor next = decoupled_update(theta, trace.update_term, lr_t, cfg.weight_decay);
  if (cfg.retract_momentum) buffer = trace.tangent;
  ++state.step;
  return {std::move(next), std::move(trace)};
}

Tensor mano_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                 const ManoConfig& cfg, double lr_t) {
  return mano_step_traced(theta, grad, state, cfg, lr_t).theta;
}

Tensor mano_tensor_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                        const ManoConfig& cfg, double lr_t) {
  ManoConfig general = cfg;
  general.schedule.order = theta.order();
  return mano_step(theta, grad, state, general, lr_t);
}

Tensor newton_schulz(const Tensor& g, std::size_t iterations, NewtonSchulzCoefficients coeffs) {
  require_matrix(g, "newton_schulz");
  if (iterations < 1) throw ValueError("newton_schulz: iterations must be at least 1");
  const double norm = frobenius_norm(g);
  if (norm < kEpsDiv) throw ValueError("newton_schulz: zero matrix");

  const bool tall = g.rows() > g.cols();
  Tensor x = scaled(tall ? transpose(g) : g, 1.0 / norm);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor gram({m, m});
  Tensor gram_sq({m, m});
  Tensor mixed({m, n});
  for (std::size_t it = 0; it < iterations; ++it) {
    const Tensor xt = transpose(x);
    kernels::gemm(x.data(), xt.data(), gram.data(), m, n, m);
    kernels::gemm(gram.data(), gram.data(), gram_sq.data(), m, m, m);
    // gram_sq <- b * A + c * A^2
    auto bq = gram_sq.values_mut();
    for (std::size_t i = 0; i < bq.size(); ++i) bq[i] = coeffs.b * gram[i] + coeffs.c * bq[i];
    kernels::gemm(gram_sq.data(), x.data(), mixed.data(), m, m, n);
    auto xv = x.values_mut();
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] = coeffs.a * xv[i] + mixed[i];
  }
  return tall ? transpose(x) : x;
}

Tensor muon_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                 const MuonConfig& cfg, double lr_t) {
  cfg.validate();
  require_matrix(theta, "muon_step");
  require_same_shape(theta, grad, "muon_step");
  Tensor& buffer = momentum_buffer(state, theta, "muon_step");
  accumulate(buffer, grad, cfg.momentum);
  const Tensor used = cfg.nesterov ? lookahead(buffer, grad, cfg.momentum) : buffer;

  Tensor direction(theta.shape());
  if (frobenius_norm(used) >= kEpsDiv) {
    const double scale =
        cfg.rescale_coeff * std::sqrt(static_cast<double>(std::max(theta.rows(), theta.cols())));
    direction = scaled(newton_schulz(used, cfg.ns_iterations), scale);
  }
  ++state.step;
  return decoupled_update(theta, direction, lr_t, cfg.weight_decay);
}

Tensor adamw_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                  const AdamWConfig& cfg, double lr_t) {
  cfg.validate();
  require_same_shape(theta, grad, "adamw_step");
  if (state.holds_momentum()) {
    throw ValueError("adamw_step: state holds a momentum buffer, not AdamW moments");
  }
  if (!state.first_moment) {
    state.first_moment = Tensor::zeros(theta.shape());
    state.second_moment = Tensor::zeros(theta.shape());
  }
  require_same_shape(*state.first_moment, theta, "adamw_step");

  const double t = static_cast<double>(state.step + 1);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  auto m = state.first_moment->values_mut();
  auto s = state.second_moment->values_mut();
  Tensor next(theta.shape());
  auto out = next.values_mut();
  for (std::size_t i = 0; i < out.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double s_hat = s[i] / correction2;
    out[i] = theta[i] - lr_t * (m_hat / (std::sqrt(s_hat) + cfg.eps) + cfg.weight_decay * theta[i]);
  }
  ++state.step;
  return next;
}

Tensor sgdm_step(const Tensor& theta, const Tensor& grad, OptimizerState& state, double lr_t,
                 double momentum, double weight_decay) {
  require_same_shape(theta, grad, "sgdm_step");
  Tensor& buffer = momentum_buffer(state, theta, "sgdm_step");
  accumulate(buffer, grad, momentum);
  ++state.step;
  return decoupled_update(theta, buffer, lr_t, weight_decay);
}

Tensor rsgdm_step(const Tensor& theta, const Tensor& grad, OptimizerState& state, double lr_t,
                  double momentum, std::size_t k) {
  require_same_shape(theta, grad, "rsgdm_step");
  require_axis(theta, k, "rsgdm_step");
  Tensor& buffer = momentum_buffer(state, theta, "rsgdm_step");
  // theta is its own normalized point; tangent_project checks the unit slices.
  Tensor transported = tangent_project(buffer, theta, k);
  const Tensor projected_grad = tangent_project(grad, theta, k);
  accumulate(transported, projected_grad, momentum);
  buffer = transported;
  ++state.step;
  return oblique_normalize(theta - scaled(buffer, lr_t), k);
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::mano: return "mano";
    case OptimizerKind::muon: return "muon";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::sgdm: return "sgdm";
    case OptimizerKind::rsgdm: return "rsgdm";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (auto kind : {OptimizerKind::mano, OptimizerKind::muon, OptimizerKind::adamw,
                    OptimizerKind::sgdm, OptimizerKind::rsgdm}) {
    if (to_string(kind) == name) return kind;
  }
  throw ValueError("unknown optimizer '" + std::string(name) + "'");
}

Tensor optimizer_step(const OptimizerSpec& spec, const Tensor& theta, const Tensor& grad,
                      OptimizerState& state, double lr_t) {
  switch (spec.kind) {
    case OptimizerKind::mano: return mano_tensor_step(theta, grad, state, spec.mano, lr_t);
    case OptimizerKind::muon: return muon_step(theta, grad, state, spec.muon, lr_t);
    case OptimizerKind::adamw: return adamw_step(theta, grad, state, spec.adamw, lr_t);
    case OptimizerKind::sgdm:
      return sgdm_step(theta, grad, state, lr_t, spec.sgdm.momentum, spec.sgdm.weight_decay);
    case OptimizerKind::rsgdm:
      return rsgdm_step(theta, grad, state, lr_t, spec.rsgdm.momentum, spec.rsgdm.axis);
  }
  throw ValueError("optimizer_step: unknown optimizer kind");
}

std::vector<ParamGroup> make_param_groups(const std::vector<Shape>& shapes) {
  ParamGroup matrices{"matrix", {}, ParamRule::matrix_optimizer};
  ParamGroup vectors{"vector", {}, ParamRule::adamw_fallback};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    (shapes[i].size() == 1 ? vectors : matrices).params.push_back(i);
  }
  std::vector<ParamGroup> groups;
  if (!matrices.params.empty()) groups.push_back(std::move(matrices));
  if (!vectors.params.empty()) groups.push_back(std::move(vectors));
  return groups;
}

void validate_param_groups(const std::vector<ParamGroup>& groups,
                           const std::vector<Shape>& shapes) {
  for (const auto& group : groups) {
    for (std::size_t i : group.params) {
      if (i >= shapes.size()) throw ValueError("param group '" + group.name + "' index out of range");
      if (shapes[i].size() == 1 && group.rule != ParamRule::adamw_fallback) {
        throw ValueError("param group '" + group.name +
                         "' assigns an order-1 parameter to the matrix optimizer");
      }
    }
  }
}

double cosine_warmup_lr(std::uint64_t t, std::uint64_t total, std::uint64_t warmup,
                        double lr_max, double min_ratio) {
  if (warmup == 0 || warmup >= total) {
    throw ValueError("cosine_warmup_lr: need 0 < warmup < total");
  }
  if (t > total) throw ValueError("cosine_warmup_lr: step beyond total");
  if (!(lr_max > 0.0)) throw ValueError("cosine_warmup_lr: lr_max must be positive");
  if (!(min_ratio >= 0.0 && min_ratio <= 1.0)) {
    throw ValueError("cosine_warmup_lr: min_ratio must lie in [0, 1]");
  }
  if (t < warmup) {
    return lr_max * static_cast<double>(t + 1) / static_cast<double>(warmup);
  }
  const double lr_min = min_ratio * lr_max;
  const double progress =
      static_cast<double>(t - warmup) / static_cast<double>(total - warmup);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

ClipResult clip_global_grad_norm(std::vector<Tensor> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ValueError("clip_global_grad_norm: max_norm must be positive");
  double total = 0.0;
  for (const auto& g : grads) total += kernels::sum_squares(g.values());
  const double norm = std::sqrt(total);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.values_mut()) v *= factor;
    }
  }
  return {std::move(grads), norm};
}

}  // namespace mano
