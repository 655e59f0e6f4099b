#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mano/manifold.hpp"
#include "mano/tensor.hpp"

namespace mano {

struct ManoConfig {
  double lr = 1e-3;
  double momentum = 0.95;
  double weight_decay = 0.1;
  double rescale_coeff = 0.2;
  bool nesterov = false;
  ManifoldSchedule schedule = ManifoldSchedule::rotating();
  // Ablation: keep the tangent vector v_t as the momentum buffer.
  bool retract_momentum = false;

  void validate() const;
};

struct MuonConfig {
  double lr = 1e-3;
  double momentum = 0.95;
  double weight_decay = 0.1;
  bool nesterov = true;
  std::size_t ns_iterations = 5;
  double rescale_coeff = 0.2;

  void validate() const;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;

  void validate() const;
};

struct SgdmConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct RsgdmConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t axis = 0;
};

/// Per-parameter optimizer state. Momentum-style optimizers (Mano, Muon,
/// SGD-M, RSGD-M) use `momentum`; AdamW uses the two moment buffers. Buffers
/// are created zero-filled on first use and never switch kind.
struct OptimizerState {
  std::uint64_t step = 0;
  std::optional<Tensor> momentum;
  std::optional<Tensor> first_moment;
  std::optional<Tensor> second_moment;

  bool holds_momentum() const { return momentum.has_value(); }
  bool holds_adam_moments() const { return first_moment.has_value(); }
};

/// Everything one Mano step computed, for invariant checks and diagnostics.
struct ManoTrace {
  std::size_t axis = 0;
  Tensor theta_hat{Shape{1}};
  Tensor tangent{Shape{1}};             // v_t
  Tensor tangent_normalized{Shape{1}};  // v_hat_t
  Tensor update_term{Shape{1}};         // rescale * sqrt(n_k) * v_hat_t
  std::size_t degenerate_theta_slices = 0;
  std::size_t degenerate_tangent_slices = 0;
};

struct ManoStepResult {
  Tensor theta;
  ManoTrace trace;
};

/// One Mano step. The schedule's order must match theta's order. Degenerate
/// slices (zero norm in theta or in the tangent) contribute a zero update.
Tensor mano_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                 const ManoConfig& cfg, double lr_t);
ManoStepResult mano_step_traced(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                                const ManoConfig& cfg, double lr_t);

/// Mano for an order-d tensor: the schedule rotates over all d axes.
Tensor mano_tensor_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                        const ManoConfig& cfg, double lr_t);

struct NewtonSchulzCoefficients {
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;
};

/// Quintic Newton-Schulz orthogonalization of G / ||G||_F, `iterations` steps.
/// Tall inputs are transposed internally so X X^T is the smaller Gram matrix.
Tensor newton_schulz(const Tensor& g, std::size_t iterations,
                     NewtonSchulzCoefficients coeffs = {});

Tensor muon_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                 const MuonConfig& cfg, double lr_t);

Tensor adamw_step(const Tensor& theta, const Tensor& grad, OptimizerState& state,
                  const AdamWConfig& cfg, double lr_t);

Tensor sgdm_step(const Tensor& theta, const Tensor& grad, OptimizerState& state, double lr_t,
                 double momentum, double weight_decay);

/// Riemannian SGD with momentum on the Oblique manifold: projection transport
/// of the buffer, then a normalization retraction. theta must already have
/// unit axis-k slices.
Tensor rsgdm_step(const Tensor& theta, const Tensor& grad, OptimizerState& state, double lr_t,
                  double momentum, std::size_t k);

enum class OptimizerKind { mano, muon, adamw, sgdm, rsgdm };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::mano;
  ManoConfig mano;
  MuonConfig muon;
  AdamWConfig adamw;
  SgdmConfig sgdm;
  RsgdmConfig rsgdm;
};

// Dispatch to the configured optimizer. Order-d tensors go through
// mano_tensor_step for Mano.
Tensor optimizer_step(const OptimizerSpec& spec, const Tensor& theta, const Tensor& grad,
                      OptimizerState& state, double lr_t);

enum class ParamRule { matrix_optimizer, adamw_fallback };

struct ParamGroup {
  std::string name;
  std::vector<std::size_t> params;  // indices into the model's parameter list
  ParamRule rule = ParamRule::matrix_optimizer;
};

/// Matrix (order >= 2) parameters go to the matrix optimizer, order-1
/// parameters to AdamW.
std::vector<ParamGroup> make_param_groups(const std::vector<Shape>& shapes);

// Throws if an order-1 parameter is assigned to the matrix optimizer.
void validate_param_groups(const std::vector<ParamGroup>& groups,
                           const std::vector<Shape>& shapes);

/// Linear warmup to lr_max, then cosine decay to min_ratio * lr_max at t = total.
double cosine_warmup_lr(std::uint64_t t, std::uint64_t total, std::uint64_t warmup,
                        double lr_max, double min_ratio);

struct ClipResult {
  std::vector<Tensor> grads;
  double pre_clip_norm = 0.0;
};

ClipResult clip_global_grad_norm(std::vector<Tensor> grads, double max_norm);

}  // namespace mano
