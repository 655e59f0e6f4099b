#include "mano/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mano/kernels.hpp"
#include "mano/manifold.hpp"

namespace mano {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::mse ? "mse" : "cross_entropy";
}

std::string_view to_string(TaskKind kind) { return kind == TaskKind::linreg ? "linreg" : "blobs"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::mse;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  throw ValueError("unknown loss '" + std::string(name) + "'");
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "linreg") return TaskKind::linreg;
  if (name == "blobs") return TaskKind::blobs;
  throw ValueError("unknown task '" + std::string(name) + "'");
}

MlpModel MlpModel::create(const std::vector<std::size_t>& widths, LossKind loss,
                          std::uint64_t seed) {
  if (widths.size() < 2) throw ValueError("MlpModel: need at least input and output widths");
  std::mt19937_64 rng(seed);
  MlpModel model;
  model.loss = loss;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    model.layers.push_back(
        {random_normal({widths[l], widths[l + 1]}, rng, scale), Tensor::zeros({widths[l + 1]})});
  }
  return model;
}

const Tensor& MlpModel::parameter(std::size_t i) const {
  const Layer& layer = layers.at(i / 2);
  return i % 2 == 0 ? layer.weight : layer.bias;
}

Tensor& MlpModel::parameter(std::size_t i) {
  Layer& layer = layers.at(i / 2);
  return i % 2 == 0 ? layer.weight : layer.bias;
}

std::string MlpModel::parameter_name(std::size_t i) const {
  return "layer" + std::to_string(i / 2) + (i % 2 == 0 ? ".weight" : ".bias");
}

std::vector<Shape> MlpModel::parameter_shapes() const {
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < parameter_count(); ++i) shapes.push_back(parameter(i).shape());
  return shapes;
}

namespace {

// x W + b
Tensor affine(const Tensor& x, const Layer& layer) {
  Tensor z = matmul(x, layer.weight);
  const std::size_t n = z.cols();
  auto v = z.values_mut();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += layer.bias[i % n];
  return z;
}

void check_batch(const MlpModel& model, const Batch& batch) {
  require_matrix(batch.features, "mlp_forward_backward");
  if (batch.features.cols() != model.input_dim()) {
    throw ShapeError("batch features have " + std::to_string(batch.features.cols()) +
                     " columns, model expects " + std::to_string(model.input_dim()));
  }
  const std::size_t samples = batch.features.rows();
  if (model.loss == LossKind::mse) {
    if (!batch.targets || batch.targets->rows() != samples ||
        batch.targets->cols() != model.output_dim()) {
      throw ShapeError("MSE batch targets must be samples x output_dim");
    }
  } else {
    if (batch.labels.size() != samples) throw ShapeError("one label per sample required");
    for (std::size_t label : batch.labels) {
      if (label >= model.output_dim()) throw ShapeError("label out of range");
    }
  }
}

// Loss and dL/d(output).
double output_loss(const MlpModel& model, const Batch& batch, const Tensor& out,
                   Tensor* d_out) {
  const std::size_t samples = out.rows(), width = out.cols();
  double loss = 0.0;
  if (model.loss == LossKind::mse) {
    const double denom = static_cast<double>(samples * width);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = out[i] - (*batch.targets)[i];
      loss += r * r;
      if (d_out) (*d_out)[i] = 2.0 * r / denom;
    }
    return loss / denom;
  }
  for (std::size_t s = 0; s < samples; ++s) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < width; ++c) peak = std::max(peak, out.at(s, c));
    double z = 0.0;
    for (std::size_t c = 0; c < width; ++c) z += std::exp(out.at(s, c) - peak);
    loss += std::log(z) + peak - out.at(s, batch.labels[s]);
    if (d_out) {
      for (std::size_t c = 0; c < width; ++c) {
        const double p = std::exp(out.at(s, c) - peak) / z;
        d_out->at(s, c) =
            (p - (c == batch.labels[s] ? 1.0 : 0.0)) / static_cast<double>(samples);
      }
    }
  }
  return loss / static_cast<double>(samples);
}

}  // namespace

Tensor mlp_predict(const MlpModel& model, const Tensor& features) {
  Tensor h = features;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    h = affine(h, model.layers[l]);
    if (l + 1 < model.layers.size()) {
      for (double& v : h.values_mut()) v = std::tanh(v);
    }
  }
  return h;
}

double mlp_loss(const MlpModel& model, const Batch& batch) {
  check_batch(model, batch);
  return output_loss(model, batch, mlp_predict(model, batch.features), nullptr);
}

ForwardBackward mlp_forward_backward(const MlpModel& model, const Batch& batch) {
  check_batch(model, batch);
  const std::size_t depth = model.layers.size();
  // activations[l] is the input to layer l; activations[depth] is the output.
  std::vector<Tensor> activations{batch.features};
  for (std::size_t l = 0; l < depth; ++l) {
    Tensor z = affine(activations.back(), model.layers[l]);
    if (l + 1 < depth) {
      for (double& v : z.values_mut()) v = std::tanh(v);
    }
    activations.push_back(std::move(z));
  }

  ForwardBackward fb;
  Tensor delta(activations.back().shape());
  fb.loss = output_loss(model, batch, activations.back(), &delta);
  fb.grads.assign(model.parameter_count(), Tensor(Shape{1}));

  for (std::size_t l = depth; l-- > 0;) {
    const Tensor& input = activations[l];
    fb.grads[2 * l] = matmul(transpose(input), delta);
    Tensor db({delta.cols()});
    for (std::size_t s = 0; s < delta.rows(); ++s) {
      for (std::size_t c = 0; c < delta.cols(); ++c) db[c] += delta.at(s, c);
    }
    fb.grads[2 * l + 1] = std::move(db);
    if (l > 0) {
      Tensor upstream = matmul(delta, transpose(model.layers[l].weight));
      // input = tanh(z), so dz = upstream * (1 - input^2)
      auto u = upstream.values_mut();
      for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 1.0 - input[i] * input[i];
      delta = std::move(upstream);
    }
  }
  return fb;
}

Batch Dataset::rows(std::span<const std::size_t> indices) const {
  const std::size_t d = features.cols();
  Batch b;
  b.features = Tensor({indices.size(), d});
  if (targets) b.targets = Tensor({indices.size(), targets->cols()});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    for (std::size_t c = 0; c < d; ++c) b.features.at(r, c) = features.at(src, c);
    if (targets) {
      for (std::size_t c = 0; c < targets->cols(); ++c) b.targets->at(r, c) = targets->at(src, c);
    }
    if (!labels.empty()) b.labels.push_back(labels[src]);
  }
  return b;
}

Batch Dataset::all() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return rows(idx);
}

Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.n_samples == 0 || spec.input_dim == 0 || spec.output_dim == 0) {
    throw ValueError("make_dataset: sizes must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  Dataset ds;
  ds.spec = spec;
  const std::size_t n = spec.n_samples, d = spec.input_dim, k = spec.output_dim;
  if (spec.task == TaskKind::linreg) {
    ds.true_weights = random_normal({d, k}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    ds.features = random_normal({n, d}, rng);
    Tensor y = matmul(ds.features, *ds.true_weights);
    if (spec.noise > 0.0) y = y + random_normal({n, k}, rng, spec.noise);
    ds.targets = std::move(y);
    return ds;
  }
  if (k < 2) throw ValueError("make_dataset: blobs need at least 2 classes");
  // Centers sqrt(2)/2 * separation along distinct axes are `separation` apart.
  Tensor centers({k, d});
  if (k <= d) {
    for (std::size_t c = 0; c < k; ++c) centers.at(c, c) = spec.separation / std::sqrt(2.0);
  } else {
    centers = scaled(oblique_normalize(random_normal({k, d}, rng), 1),
                     spec.separation / std::sqrt(2.0));
  }
  ds.features = random_normal({n, d}, rng);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t label = pick(rng);
    ds.labels.push_back(label);
    for (std::size_t c = 0; c < d; ++c) ds.features.at(s, c) += centers.at(label, c);
  }
  return ds;
}

void TrainConfig::validate() const {
  if (layers.size() < 2) throw ValueError("layers needs at least two widths");
  for (std::size_t w : layers) {
    if (w == 0) throw ValueError("layer widths must be positive");
  }
  if (layers.front() != data.input_dim || layers.back() != data.output_dim) {
    throw ValueError("layers must start at the data input_dim and end at output_dim");
  }
  if ((data.task == TaskKind::linreg) != (loss == LossKind::mse)) {
    throw ValueError("linreg pairs with mse, blobs with cross_entropy");
  }
  if (batch_size < 1) throw ValueError("batch_size must be at least 1");
  if (warmup_steps == 0 || warmup_steps >= total_steps) {
    throw ValueError("need 0 < warmup_steps < total_steps");
  }
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ValueError("eval_fraction must lie in (0, 1)");
  }
  const auto eval_count = static_cast<std::size_t>(eval_fraction * static_cast<double>(data.n_samples));
  if (eval_count == 0 || data.n_samples - eval_count < batch_size) {
    throw ValueError("n_samples too small for the eval split and batch size");
  }
  if (log_every == 0) throw ValueError("log_every must be positive");
  if (!(clip > 0.0)) throw ValueError("clip must be positive");
  if (snapshot_every > 0 && snapshot_layer >= layers.size() - 1) {
    throw ValueError("snapshot_layer out of range");
  }
  optimizer_spec();
  fallback_adamw().validate();
}

OptimizerSpec TrainConfig::optimizer_spec() const {
  OptimizerSpec spec;
  spec.kind = optimizer;
  spec.mano.lr = lr_max;
  spec.mano.momentum = momentum.value_or(0.95);
  spec.mano.weight_decay = weight_decay;
  spec.mano.rescale_coeff = rescale_coeff;
  spec.mano.nesterov = nesterov.value_or(false);
  spec.mano.schedule = manifold == ManifoldMode::rotating ? ManifoldSchedule::rotating()
                                                          : ManifoldSchedule::fixed(fixed_axis);
  spec.mano.retract_momentum = retract_momentum;

  spec.muon.lr = lr_max;
  spec.muon.momentum = momentum.value_or(0.95);
  spec.muon.weight_decay = weight_decay;
  spec.muon.nesterov = nesterov.value_or(true);
  spec.muon.ns_iterations = ns_iterations;
  spec.muon.rescale_coeff = rescale_coeff;

  spec.adamw = fallback_adamw();
  spec.adamw.weight_decay = weight_decay;

  spec.sgdm = {lr_max, momentum.value_or(0.9), weight_decay};
  spec.rsgdm = {lr_max, momentum.value_or(0.9), fixed_axis};

  switch (optimizer) {
    case OptimizerKind::mano: spec.mano.validate(); break;
    case OptimizerKind::muon: spec.muon.validate(); break;
    case OptimizerKind::adamw: spec.adamw.validate(); break;
    case OptimizerKind::sgdm:
    case OptimizerKind::rsgdm:
      if (!(spec.sgdm.momentum >= 0.0 && spec.sgdm.momentum < 1.0)) {
        throw ValueError("momentum must lie in [0, 1)");
      }
      if (!(lr_max > 0.0)) throw ValueError("lr_max must be positive");
      if (optimizer == OptimizerKind::rsgdm && fixed_axis > 1) {
        throw ValueError("rsgdm axis must be 0 or 1");
      }
      break;
  }
  return spec;
}

AdamWConfig TrainConfig::fallback_adamw() const {
  AdamWConfig cfg;
  cfg.lr = lr_max;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.eps = eps;
  cfg.weight_decay = fallback_weight_decay.value_or(weight_decay);
  return cfg;
}

GradStats grad_stats(const Tensor& grad) {
  const double n = static_cast<double>(grad.size());
  double mean = 0.0;
  for (double v : grad.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : grad.values()) var += (v - mean) * (v - mean);
  var /= n;
  GradStats s;
  s.norm = frobenius_norm(grad);
  s.variance = var;
  s.snr = s.norm / (var + kEpsSnr);
  return s;
}

std::vector<GradStats> grad_stats(std::span<const Tensor> grads) {
  if (grads.empty()) throw ValueError("grad_stats: no gradients");
  std::vector<GradStats> out;
  out.reserve(grads.size());
  for (const auto& g : grads) out.push_back(grad_stats(g));
  return out;
}

namespace {

std::string describe_state(const MlpModel& model, std::uint64_t step, double lr) {
  std::ostringstream os;
  os << "step " << step << " lr " << lr;
  for (std::size_t i = 0; i < model.parameter_count(); ++i) {
    os << "; " << model.parameter_name(i) << " norm " << frobenius_norm(model.parameter(i));
  }
  return os.str();
}

}  // namespace

TrainResult train_run(const TrainConfig& cfg) {
  cfg.validate();
  const OptimizerSpec spec = cfg.optimizer_spec();
  const AdamWConfig fallback = cfg.fallback_adamw();

  const Dataset ds = make_dataset(cfg.data);
  const auto eval_count =
      static_cast<std::size_t>(cfg.eval_fraction * static_cast<double>(ds.size()));
  const std::size_t train_count = ds.size() - eval_count;
  std::vector<std::size_t> eval_idx(eval_count);
  std::iota(eval_idx.begin(), eval_idx.end(), train_count);
  const Batch eval_batch = ds.rows(eval_idx);

  TrainResult result;
  // Offset so that equal model and data seeds do not reproduce W* as the init.
  result.model = MlpModel::create(cfg.layers, cfg.loss, cfg.seed ^ 0x243f6a8885a308d3ULL);
  MlpModel& model = result.model;
  const auto shapes = model.parameter_shapes();
  result.groups = make_param_groups(shapes);
  validate_param_groups(result.groups, shapes);
  result.states.resize(model.parameter_count());
  if (ds.spec.task == TaskKind::linreg) result.noise_floor = cfg.data.noise * cfg.data.noise;

  if (cfg.optimizer == OptimizerKind::rsgdm) {
    // The Riemannian baseline starts on the manifold.
    for (auto& layer : model.layers) layer.weight = oblique_normalize(layer.weight, cfg.fixed_axis);
  }

  result.initial_eval_loss = mlp_loss(model, eval_batch);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = train_count;  // forces a shuffle before the first batch

  for (std::uint64_t t = 0; t < cfg.total_steps; ++t) {
    if (cursor + cfg.batch_size > train_count) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      cursor = 0;
    }
    const Batch batch =
        ds.rows(std::span<const std::size_t>(order).subspan(cursor, cfg.batch_size));
    cursor += cfg.batch_size;

    ForwardBackward fb = mlp_forward_backward(model, batch);
    const double lr_t =
        cosine_warmup_lr(t, cfg.total_steps, cfg.warmup_steps, cfg.lr_max, cfg.min_ratio);
    if (!std::isfinite(fb.loss)) {
      throw TrainingDiverged(t, "non-finite loss: " + describe_state(model, t, lr_t));
    }
    ClipResult clipped = clip_global_grad_norm(std::move(fb.grads), cfg.clip);
    const std::vector<Tensor>& grads = clipped.grads;

    const bool log_now = t % cfg.log_every == 0 || t + 1 == cfg.total_steps;
    const bool snap_now = cfg.snapshot_every > 0 && t % cfg.snapshot_every == 0;
    std::vector<double> update_rms(model.parameter_count(), 0.0);

    for (const auto& group : result.groups) {
      for (std::size_t i : group.params) {
        Tensor& theta = model.parameter(i);
        Tensor next = group.rule == ParamRule::adamw_fallback
                          ? adamw_step(theta, grads[i], result.states[i], fallback, lr_t)
                          : optimizer_step(spec, theta, grads[i], result.states[i], lr_t);
        if (!all_finite(next.values())) {
          throw TrainingDiverged(t, "non-finite parameter " + model.parameter_name(i) + ": " +
                                        describe_state(model, t, lr_t));
        }
        const Tensor delta = next - theta;
        update_rms[i] = rms(delta);
        if (snap_now && i == 2 * cfg.snapshot_layer) {
          const OptimizerState& st = result.states[i];
          result.snapshots.push_back({t, model.parameter_name(i), theta, grads[i],
                                      st.momentum ? *st.momentum : *st.first_moment, delta});
        }
        theta = std::move(next);
      }
    }

    if (log_now) {
      double global = 0.0;
      for (const auto& g : grads) global += kernels::sum_squares(g.values());
      global = std::sqrt(global);
      const double eval_loss = mlp_loss(model, eval_batch);
      for (std::size_t i = 0; i < model.parameter_count(); ++i) {
        const GradStats gs = grad_stats(grads[i]);
        result.records.push_back({t, fb.loss, eval_loss, lr_t, model.parameter_name(i), gs.norm,
                                  gs.variance, gs.snr, update_rms[i], global});
      }
    }
  }
  result.final_eval_loss = mlp_loss(model, eval_batch);
  return result;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRecord>& records) {
  const auto old_precision = os.precision(17);
  os << "step,train_loss,eval_loss,lr,layer,grad_norm,grad_var,grad_snr,update_rms\n";
  for (const auto& r : records) {
    os << r.step << ',' << r.train_loss << ',' << r.eval_loss << ',' << r.lr << ',' << r.layer
       << ',' << r.grad_norm << ',' << r.grad_var << ',' << r.grad_snr << ',' << r.update_rms
       << '\n';
  }
  os.precision(old_precision);
}

}  // namespace mano
