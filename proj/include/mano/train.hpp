#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mano/optim.hpp"
#include "mano/tensor.hpp"

namespace mano {

enum class LossKind { mse, cross_entropy };
enum class TaskKind { linreg, blobs };

std::string_view to_string(LossKind kind);
std::string_view to_string(TaskKind kind);
LossKind parse_loss_kind(std::string_view name);
TaskKind parse_task_kind(std::string_view name);

// y = x W + b, W is fan_in x fan_out.
struct Layer {
  Tensor weight;
  Tensor bias;
};

/// Fully connected network, tanh between layers and identity at the output.
/// Parameters are indexed weight0, bias0, weight1, bias1, ...
struct MlpModel {
  std::vector<Layer> layers;
  LossKind loss = LossKind::mse;

  /// Weights ~ N(0, 1/fan_in), biases zero.
  static MlpModel create(const std::vector<std::size_t>& widths, LossKind loss,
                         std::uint64_t seed);

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::size_t parameter_count() const { return 2 * layers.size(); }
  const Tensor& parameter(std::size_t i) const;
  Tensor& parameter(std::size_t i);
  std::string parameter_name(std::size_t i) const;
  std::vector<Shape> parameter_shapes() const;
};

/// Features are samples x input_dim. MSE batches carry `targets`
/// (samples x output_dim); cross-entropy batches carry `labels`.
struct Batch {
  Tensor features{Shape{1}};
  std::optional<Tensor> targets;
  std::vector<std::size_t> labels;
};

struct ForwardBackward {
  double loss = 0.0;
  std::vector<Tensor> grads;  // parameter order
};

/// Mean loss over the batch and exact gradients for every parameter. MSE is
/// the mean of squared errors over samples and outputs.
ForwardBackward mlp_forward_backward(const MlpModel& model, const Batch& batch);
double mlp_loss(const MlpModel& model, const Batch& batch);
Tensor mlp_predict(const MlpModel& model, const Tensor& features);

struct DatasetSpec {
  TaskKind task = TaskKind::linreg;
  std::size_t n_samples = 512;
  std::size_t input_dim = 32;
  std::size_t output_dim = 16;
  double noise = 0.1;        // linreg target noise stddev
  double separation = 4.0;   // blobs: center spacing in units of the cluster stddev
  std::uint64_t seed = 0;
};

/// linreg: x ~ N(0, I), y = x W* + noise with W* ~ N(0, 1/input_dim).
/// blobs: output_dim Gaussian clusters (unit stddev) with integer labels.
struct Dataset {
  DatasetSpec spec;
  Tensor features{Shape{1}};
  std::optional<Tensor> targets;
  std::vector<std::size_t> labels;
  std::optional<Tensor> true_weights;

  std::size_t size() const { return features.rows(); }
  Batch rows(std::span<const std::size_t> indices) const;
  Batch all() const;
};

Dataset make_dataset(const DatasetSpec& spec);

struct TrainConfig {
  std::vector<std::size_t> layers{32, 16};  // widths including input and output
  LossKind loss = LossKind::mse;
  DatasetSpec data;
  double eval_fraction = 0.25;

  OptimizerKind optimizer = OptimizerKind::mano;
  double lr_max = 3e-3;
  double min_ratio = 0.1;
  double clip = 1.0;
  std::optional<double> momentum;   // default: 0.95 for mano/muon, 0.9 for sgdm/rsgdm
  double weight_decay = 0.1;
  std::optional<double> fallback_weight_decay;  // AdamW group; defaults to weight_decay
  std::optional<bool> nesterov;                 // default: false for mano, true for muon
  double rescale_coeff = 0.2;
  ManifoldMode manifold = ManifoldMode::rotating;
  std::size_t fixed_axis = 0;
  bool retract_momentum = false;
  std::size_t ns_iterations = 5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;

  std::uint64_t total_steps = 1000;
  std::uint64_t warmup_steps = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::uint64_t log_every = 10;
  std::uint64_t snapshot_every = 0;  // 0 disables snapshots
  std::size_t snapshot_layer = 0;

  void validate() const;
  OptimizerSpec optimizer_spec() const;
  AdamWConfig fallback_adamw() const;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::uint64_t step, const std::string& what) : Error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct TrajectoryRecord {
  std::uint64_t step = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double lr = 0.0;
  std::string layer;
  double grad_norm = 0.0;  // post-clip
  double grad_var = 0.0;
  double grad_snr = 0.0;
  double update_rms = 0.0;
  double global_grad_norm = 0.0;  // post-clip, all parameters
};

/// State of one weight matrix at a step, for the spectra/geodesic tools.
struct Snapshot {
  std::uint64_t step = 0;
  std::string layer;
  Tensor theta{Shape{1}};     // before the update
  Tensor grad{Shape{1}};      // post-clip
  Tensor momentum{Shape{1}};  // optimizer buffer after the update
  Tensor update{Shape{1}};    // theta_next - theta
};

struct TrainResult {
  std::vector<TrajectoryRecord> records;
  std::vector<Snapshot> snapshots;
  MlpModel model;
  std::vector<OptimizerState> states;  // parameter order
  std::vector<ParamGroup> groups;
  double initial_eval_loss = 0.0;
  double final_eval_loss = 0.0;
  double noise_floor = 0.0;  // linreg: noise^2, else 0
};

TrainResult train_run(const TrainConfig& cfg);

struct GradStats {
  double norm = 0.0;
  double variance = 0.0;
  double snr = 0.0;
};

inline constexpr double kEpsSnr = 1e-12;

// Frobenius norm, population variance of entries, norm / (variance + eps).
GradStats grad_stats(const Tensor& grad);
std::vector<GradStats> grad_stats(std::span<const Tensor> grads);

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records);

}  // namespace mano
