#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "mano/train.hpp"

using namespace mano;

namespace {

Batch random_batch(std::size_t n, std::size_t in, std::size_t out, LossKind loss, std::mt19937_64& rng) {
  Batch b;
  b.features = random_normal({n, in}, rng);
  if (loss == LossKind::mse) {
    b.targets = random_normal({n, out}, rng);
  } else {
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(i % out);
  }
  return b;
}

TrainConfig quick(OptimizerKind kind, std::uint64_t steps) {
  TrainConfig c;
  c.optimizer = kind;
  c.total_steps = steps;
  c.warmup_steps = std::min<std::uint64_t>(50, steps / 2);
  return c;
}

}  // namespace

TEST_CASE("finite differences agree with the analytic gradients") {
  std::mt19937_64 rng(51);
  for (const LossKind loss : {LossKind::mse, LossKind::cross_entropy}) {
    MlpModel model = MlpModel::create({4, 8, 3}, loss, 52);
    // Nonzero biases so their gradients are exercised away from zero.
    for (std::size_t p = 1; p < model.parameter_count(); p += 2) {
      model.parameter(p) = random_normal(model.parameter(p).shape(), rng, 0.3);
    }
    const Batch batch = random_batch(5, 4, 3, loss, rng);
    const auto fb = mlp_forward_backward(model, batch);
    for (std::size_t p = 0; p < model.parameter_count(); ++p) {
      for (std::size_t i = 0; i < model.parameter(p).size(); ++i) {
        const double h = 1e-5, orig = model.parameter(p)[i];
        model.parameter(p)[i] = orig + h;
        const double up = mlp_loss(model, batch);
        model.parameter(p)[i] = orig - h;
        const double down = mlp_loss(model, batch);
        model.parameter(p)[i] = orig;
        const double fd = (up - down) / (2 * h), an = fb.grads[p][i];
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("zero weights on a zero-target batch") {
  MlpModel model = MlpModel::create({3, 2}, LossKind::mse, 1);
  model.layers[0].weight = Tensor::zeros({3, 2});
  model.layers[0].bias = Tensor::vector({0.5, -1.0});
  Batch b;
  b.features = Tensor::zeros({4, 3});
  b.targets = Tensor::zeros({4, 2});
  const auto fb = mlp_forward_backward(model, b);
  CHECK(fb.loss == doctest::Approx((0.25 + 1.0) / 2));
  CHECK(fb.grads[0] == Tensor::zeros({3, 2}));
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
  std::mt19937_64 rng(53);
  for (const LossKind loss : {LossKind::mse, LossKind::cross_entropy}) {
    const MlpModel model = MlpModel::create({4, 6, 3}, loss, 2);
    const Batch b = random_batch(5, 4, 3, loss, rng);
    Batch twice;
    std::vector<double> f(b.features.values().begin(), b.features.values().end());
    f.insert(f.end(), b.features.values().begin(), b.features.values().end());
    twice.features = Tensor({10, 4}, f);
    if (b.targets) {
      std::vector<double> t(b.targets->values().begin(), b.targets->values().end());
      t.insert(t.end(), b.targets->values().begin(), b.targets->values().end());
      twice.targets = Tensor({10, 3}, t);
    }
    twice.labels = b.labels;
    twice.labels.insert(twice.labels.end(), b.labels.begin(), b.labels.end());
    const auto one = mlp_forward_backward(model, b), two = mlp_forward_backward(model, twice);
    CHECK(two.loss == doctest::Approx(one.loss).epsilon(1e-14));
    for (std::size_t p = 0; p < one.grads.size(); ++p) CHECK(max_abs_diff(one.grads[p], two.grads[p]) <= 1e-15);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const MlpModel model = MlpModel::create({4, 3}, LossKind::mse, 0);
  Batch b;
  b.features = Tensor({2, 5});
  b.targets = Tensor({2, 3});
  CHECK_THROWS_AS(mlp_forward_backward(model, b), ShapeError);
  b.features = Tensor({2, 4});
  b.targets = Tensor({2, 2});
  CHECK_THROWS_AS(mlp_forward_backward(model, b), ShapeError);
  CHECK_THROWS(MlpModel::create({4}, LossKind::mse, 0));
}

TEST_CASE("init scale is 1/sqrt(fan_in)") {
  const MlpModel model = MlpModel::create({64, 64, 64}, LossKind::mse, 3);
  for (const auto& l : model.layers) {
    CHECK(rms(l.weight) == doctest::Approx(1.0 / 8.0).epsilon(0.05));
    CHECK(l.bias == Tensor::zeros(l.bias.shape()));
  }
  CHECK(model.parameter_name(2) == "layer1.weight");
  CHECK(model.parameter_name(3) == "layer1.bias");
}

TEST_CASE("datasets") {
  DatasetSpec spec;
  spec.seed = 4;
  const Dataset a = make_dataset(spec), b = make_dataset(spec);
  CHECK(a.features == b.features);
  CHECK(*a.targets == *b.targets);

  spec.noise = 0.0;
  const Dataset clean = make_dataset(spec);
  MlpModel model = MlpModel::create({spec.input_dim, spec.output_dim}, LossKind::mse, 0);
  model.layers[0].weight = *clean.true_weights;
  model.layers[0].bias = Tensor::zeros({spec.output_dim});
  CHECK(mlp_loss(model, clean.all()) <= 1e-28);

  DatasetSpec blobs;
  blobs.task = TaskKind::blobs;
  blobs.separation = 10.0;
  blobs.output_dim = 4;
  const Dataset d = make_dataset(blobs);
  CHECK(d.labels.size() == d.size());
  CHECK_THROWS(make_dataset(DatasetSpec{TaskKind::linreg, 0, 8, 4, 0.1, 4.0, 0}));
}

TEST_CASE("well separated blobs are linearly classified") {
  TrainConfig c = quick(OptimizerKind::adamw, 1500);
  c.loss = LossKind::cross_entropy;
  c.data.task = TaskKind::blobs;
  c.data.separation = 10.0;
  c.layers = {c.data.input_dim, c.data.output_dim};
  c.lr_max = 3e-2;
  const auto r = train_run(c);
  const Dataset ds = make_dataset(c.data);
  const Tensor logits = mlp_predict(r.model, ds.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols(); ++k) if (logits.at(i, k) > logits.at(i, best)) best = k;
    correct += best == ds.labels[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.99);
}

TEST_CASE("training contracts") {
  const TrainConfig c = quick(OptimizerKind::mano, 200);
  const auto r = train_run(c);
  const std::size_t layers = c.layers.size() - 1;
  CHECK(r.records.size() == (200 / c.log_every + (199 % c.log_every ? 1 : 0)) * 2 * layers);
  for (const auto& rec : r.records) {
    CHECK(rec.global_grad_norm <= c.clip + 1e-9);
    CHECK(rec.lr == cosine_warmup_lr(rec.step, c.total_steps, c.warmup_steps, c.lr_max, c.min_ratio));
  }
  for (const auto& g : r.groups) {
    for (auto idx : g.params) {
      if (r.model.parameter(idx).order() == 1) {
        CHECK(r.states[idx].holds_adam_moments());
        CHECK_FALSE(r.states[idx].holds_momentum());
      }
    }
  }
  const auto again = train_run(c);
  REQUIRE(again.records.size() == r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(again.records[i].train_loss == r.records[i].train_loss);
    CHECK(again.records[i].eval_loss == r.records[i].eval_loss);
    CHECK(again.records[i].update_rms == r.records[i].update_rms);
  }
}

TEST_CASE("sgdm reaches 10% of the initial train loss in 500 steps") {
  TrainConfig c = quick(OptimizerKind::sgdm, 500);
  c.lr_max = 3e-2;
  const auto r = train_run(c);
  CHECK(r.records.back().train_loss <= 0.1 * r.records.front().train_loss);
}

TEST_CASE("mano without decay reaches the linreg noise floor") {
  TrainConfig c = quick(OptimizerKind::mano, 2000);
  c.weight_decay = 0.0;
  const auto r = train_run(c);
  CHECK(r.noise_floor == doctest::Approx(c.data.noise * c.data.noise));
  CHECK(r.final_eval_loss - r.noise_floor <= 1e-2);
}

TEST_CASE("rsgdm keeps weight columns on the oblique manifold") {
  TrainConfig c = quick(OptimizerKind::rsgdm, 100);
  const auto r = train_run(c);
  for (const auto& l : r.model.layers) {
    for (double v : dim_norm(l.weight, 0).values) CHECK(std::abs(v - 1) <= 1e-10);
  }
}

TEST_CASE("snapshots") {
  TrainConfig c = quick(OptimizerKind::mano, 100);
  c.snapshot_every = 25;
  const auto r = train_run(c);
  REQUIRE(r.snapshots.size() == 4);
  for (const auto& s : r.snapshots) {
    CHECK(s.layer == "layer0.weight");
    CHECK(s.theta.shape() == Shape{c.layers[0], c.layers[1]});
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c = TrainConfig{};
  c.warmup_steps = c.total_steps;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c = TrainConfig{};
  c.layers = {5, 4};
  CHECK_THROWS(c.validate());
}

TEST_CASE("grad stats") {
  const auto constant = grad_stats(Tensor::filled({2, 8}, 3.0));
  CHECK(constant.variance == 0.0);
  CHECK(constant.norm == doctest::Approx(3.0 * 4.0));
  CHECK(constant.snr == doctest::Approx(12.0 / kEpsSnr));
  CHECK(grad_stats(Tensor::vector({-1, 1, -1, 1})).variance == 1.0);

  std::mt19937_64 rng(54);
  const Tensor g = random_normal({16, 16}, rng);
  double mean = 0;
  for (double v : g.values()) mean += v;
  mean /= 256;
  double var = 0;
  for (double v : g.values()) var += (v - mean) * (v - mean);
  var /= 256;
  CHECK(std::abs(grad_stats(g).variance - var) <= 1e-12);
}

TEST_CASE("trajectory csv header") {
  std::ostringstream os;
  write_trajectory_csv(os, {});
  CHECK(os.str() == "step,train_loss,eval_loss,lr,layer,grad_norm,grad_var,grad_snr,update_rms\n");
}
