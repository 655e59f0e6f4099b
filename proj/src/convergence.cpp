#include "mano/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mano/kernels.hpp"
#include "mano/linalg.hpp"
#include "mano/manifold.hpp"

namespace mano {

namespace {

constexpr double kLemmaTolerance = 1e-10;

Tensor unit_columns(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  Tensor t = random_normal({m, n}, rng);
  return oblique_normalize(t, 0);
}

// Projects twice. A nearly radial gradient column leaves a radial residual of
// order eps * ||g_j|| after one pass, which <g, v_hat> amplifies by
// ||g_j|| / ||v_j||; the second pass removes it.
Tensor tangent_of(const Tensor& grad, const Tensor& theta_hat) {
  return tangent_project_unchecked(tangent_project_unchecked(grad, theta_hat, 0), theta_hat, 0);
}

}  // namespace

void SmoothObjective::set_noise_scale(double s) {
  if (!(s >= 0.0)) throw ValueError("noise_scale must be nonnegative");
  noise_scale_ = s;
}

QuadraticObjective::QuadraticObjective(Tensor target, Tensor start, double smoothness)
    : target_(std::move(target)), start_(std::move(start)), smoothness_(smoothness) {
  require_matrix(target_, "QuadraticObjective");
  require_same_shape(target_, start_, "QuadraticObjective");
  if (!(smoothness_ > 0.0)) throw ValueError("QuadraticObjective: L must be positive");
}

QuadraticObjective QuadraticObjective::on_reachable_shell(std::size_t m, std::size_t n,
                                                          double smoothness, double c,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor start = unit_columns(m, n, rng);
  Tensor target = scaled(unit_columns(m, n, rng),
                         std::sqrt(1.0 + static_cast<double>(m) * c * c));
  return QuadraticObjective(std::move(target), std::move(start), smoothness);
}

SmoothObjective::Value QuadraticObjective::evaluate(const Tensor& theta) const {
  require_same_shape(theta, target_, "QuadraticObjective::evaluate");
  Tensor diff = theta - target_;
  const double f = 0.5 * smoothness_ * kernels::sum_squares(diff.values());
  return {f, scaled(diff, smoothness_)};
}

SoftmaxRegressionObjective::SoftmaxRegressionObjective(std::size_t features, std::size_t classes,
                                                       std::size_t samples, std::uint64_t seed)
    : features_({samples, features}), classes_(classes), start_({features, classes}) {
  if (classes < 2) throw ValueError("SoftmaxRegressionObjective: need at least 2 classes");
  std::mt19937_64 rng(seed);
  const Tensor centers = random_normal({classes, features}, rng, 1.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  labels_.resize(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    labels_[s] = s % classes;
    for (std::size_t d = 0; d < features; ++d) {
      features_.at(s, d) = centers.at(labels_[s], d) + noise(rng);
    }
  }
  start_ = random_normal({features, classes}, rng, 1.0 / std::sqrt(static_cast<double>(features)));
  smoothness_ = estimate_smoothness(*this, 16, seed ^ 0x5eedULL);
}

SmoothObjective::Value SoftmaxRegressionObjective::evaluate(const Tensor& theta) const {
  require_same_shape(theta, start_, "SoftmaxRegressionObjective::evaluate");
  const std::size_t n_samples = features_.rows();
  Tensor logits = matmul(features_, theta);
  double loss = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes_; ++c) peak = std::max(peak, logits.at(s, c));
    double z = 0.0;
    for (std::size_t c = 0; c < classes_; ++c) z += std::exp(logits.at(s, c) - peak);
    loss += std::log(z) + peak - logits.at(s, labels_[s]);
    for (std::size_t c = 0; c < classes_; ++c) {
      const double p = std::exp(logits.at(s, c) - peak) / z;
      logits.at(s, c) = (p - (c == labels_[s] ? 1.0 : 0.0)) / static_cast<double>(n_samples);
    }
  }
  return {loss / static_cast<double>(n_samples), matmul(transpose(features_), logits)};
}

double SoftmaxRegressionObjective::analytic_smoothness_bound() const {
  const double top = svd_values(features_).front();
  return top * top / (2.0 * static_cast<double>(features_.rows()));
}

double sample_smoothness(const SmoothObjective& obj, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor base = obj.initial_point();
  const double scales[] = {1e-3, 1e-1, 1.0};
  double worst = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const Tensor x = base + random_normal(base.shape(), rng);
    const Tensor y = x + random_normal(base.shape(), rng, scales[p % 3]);
    const double num = frobenius_norm(obj.evaluate(x).grad - obj.evaluate(y).grad);
    worst = std::max(worst, num / frobenius_norm(x - y));
  }
  return worst;
}

double estimate_smoothness(const SmoothObjective& obj, std::size_t points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor base = obj.initial_point();
  const double h = 1e-4;
  double best = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    // The origin, the start, then random points around the start.
    Tensor x = p == 0 ? Tensor::zeros(base.shape())
                      : (p == 1 ? base : base + random_normal(base.shape(), rng));
    const Tensor gx = obj.evaluate(x).grad;
    Tensor v = random_normal(base.shape(), rng);
    v = scaled(v, 1.0 / frobenius_norm(v));
    double lambda = 0.0;
    for (int it = 0; it < 60; ++it) {
      const Tensor hv = scaled(obj.evaluate(x + scaled(v, h)).grad - gx, 1.0 / h);
      lambda = frobenius_norm(hv);
      if (lambda < 1e-300) break;
      v = scaled(hv, 1.0 / lambda);
    }
    best = std::max(best, lambda);
  }
  return best;
}

bool verify_smoothness(const SmoothObjective& obj, std::size_t pairs, std::uint64_t seed,
                       double slack) {
  return sample_smoothness(obj, pairs, seed) <= (1.0 + slack) * obj.smoothness();
}

Tensor noisy_gradient(const Tensor& grad, double noise_scale, std::mt19937_64& rng) {
  if (noise_scale == 0.0) return grad;
  return grad + random_normal(grad.shape(), rng, noise_scale);
}

SimpleStepParts mano_simple_step_parts(const Tensor& theta, const Tensor& grad, double eta,
                                       std::size_t m) {
  require_matrix(theta, "mano_simple_step");
  require_same_shape(theta, grad, "mano_simple_step");
  if (m != theta.rows()) {
    throw ShapeError("mano_simple_step: m must equal the row count " +
                     std::to_string(theta.rows()));
  }
  Tensor theta_hat = oblique_normalize(theta, 0);
  Tensor tangent = tangent_of(grad, theta_hat);
  Tensor tangent_normalized = oblique_normalize(tangent, 0);
  Tensor next = theta - scaled(tangent_normalized, eta * std::sqrt(static_cast<double>(m)));
  return {std::move(theta_hat), std::move(tangent), std::move(tangent_normalized),
          std::move(next)};
}

Tensor mano_simple_step(const Tensor& theta, const Tensor& grad, double eta, std::size_t m) {
  return mano_simple_step_parts(theta, grad, eta, m).next;
}

Lemma1Result lemma1_check(const Tensor& theta, const Tensor& grad) {
  require_matrix(theta, "lemma1_check");
  require_same_shape(theta, grad, "lemma1_check");
  const Tensor theta_hat = oblique_normalize(theta, 0);
  const Tensor tangent = tangent_of(grad, theta_hat);
  const AxisVector tangent_norms = dim_norm(tangent, 0);
  const AxisVector grad_norms = dim_norm(grad, 0);
  const Tensor tangent_normalized = oblique_normalize_or_zero(tangent, 0);

  Lemma1Result r;
  r.s_t = frobenius_dot(grad, tangent_normalized);
  for (std::size_t j = 0; j < tangent_norms.size(); ++j) {
    r.tangent_norm_sum += tangent_norms[j];
    if (grad_norms[j] >= kEpsDiv) {
      r.gamma = std::min(r.gamma, std::min(1.0, tangent_norms[j] / grad_norms[j]));
    }
  }
  r.bound = r.gamma * frobenius_norm(grad);

  const double scale = std::max(1.0, r.tangent_norm_sum);
  if (std::abs(r.s_t - r.tangent_norm_sum) > kLemmaTolerance * scale) {
    throw LemmaViolation("lemma1_check: S_t = " + std::to_string(r.s_t) +
                         " differs from sum of tangent norms " +
                         std::to_string(r.tangent_norm_sum));
  }
  if (r.s_t < r.bound - kLemmaTolerance * scale) {
    throw LemmaViolation("lemma1_check: S_t below gamma * ||g||");
  }
  return r;
}

Theorem1Constants theorem1_constants(double f0, double f_inf, double smoothness, double m,
                                     double gamma, double c) {
  if (!(gamma > 0.0)) throw ValueError("theorem1_bound: gamma must be positive");
  if (!(c > 0.0)) throw ValueError("theorem1_bound: C must be positive");
  Theorem1Constants k;
  k.c1 = (f0 - f_inf) / (std::sqrt(m) * gamma * c);
  k.c2 = smoothness * std::pow(m, 1.5) * c / (2.0 * gamma);
  return k;
}

double theorem1_bound(double f0, double f_inf, double smoothness, double m, double gamma,
                      double c, std::uint64_t t) {
  const auto k = theorem1_constants(f0, f_inf, smoothness, m, gamma, c);
  return (k.c1 + k.c2) / std::sqrt(static_cast<double>(t) + 1.0);
}

ConvergenceRun run_convergence_experiment(const SmoothObjective& obj, std::uint64_t horizon,
                                          double c, bool stochastic, std::uint64_t seed) {
  if (!(c > 0.0)) throw ValueError("run_convergence_experiment: C must be positive");
  const std::size_t m = obj.rows();
  // The step bound ||eta sqrt(m) v_hat||^2 <= eta^2 m^2 needs n <= m.
  if (obj.cols() > m) {
    throw ValueError("run_convergence_experiment: needs cols <= rows, got " +
                     std::to_string(m) + "x" + std::to_string(obj.cols()));
  }
  std::mt19937_64 rng(seed);

  ConvergenceRun run;
  run.horizon = horizon;
  run.c = c;
  run.eta = c / std::sqrt(static_cast<double>(horizon) + 1.0);
  run.min_grad_norm = std::numeric_limits<double>::infinity();
  run.steps.reserve(horizon + 1);

  Tensor theta = obj.initial_point();
  for (std::uint64_t t = 0; t <= horizon; ++t) {
    const auto value = obj.evaluate(theta);
    if (t == 0) run.f0 = value.f;
    const Tensor grad = stochastic ? noisy_gradient(value.grad, obj.noise_scale(), rng) : value.grad;

    ConvergenceStep rec;
    rec.step = t;
    rec.f = value.f;
    rec.grad_norm = frobenius_norm(value.grad);
    try {
      const auto parts = mano_simple_step_parts(theta, grad, run.eta, m);
      const auto lemma = lemma1_check(theta, grad);
      rec.s_t = lemma.s_t;
      rec.min_sin_phi = lemma.gamma;
      run.max_lemma_residual = std::max(
          run.max_lemma_residual,
          std::abs(lemma.s_t - lemma.tangent_norm_sum) / std::max(1.0, lemma.tangent_norm_sum));
      theta = parts.next;
    } catch (const DegenerateSliceError& e) {
      throw ConvergenceAborted(t, "convergence run aborted at step " + std::to_string(t) +
                                      ": " + e.what());
    }
    run.realized_gamma = std::min(run.realized_gamma, rec.min_sin_phi);
    run.min_grad_norm = std::min(run.min_grad_norm, rec.grad_norm);
    run.steps.push_back(rec);
  }
  run.min_grad_norm_sq = run.min_grad_norm * run.min_grad_norm;
  run.bound = theorem1_bound(run.f0, obj.lower_bound(), obj.smoothness(),
                             static_cast<double>(m), run.realized_gamma, c, horizon);
  run.bound_holds = run.min_grad_norm <= run.bound;
  return run;
}

void write_convergence_csv(std::ostream& os, const ConvergenceRun& run) {
  const auto old_precision = os.precision(17);
  os << "step,f,grad_norm,S_t,min_sin_phi\n";
  for (const auto& s : run.steps) {
    os << s.step << ',' << s.f << ',' << s.grad_norm << ',' << s.s_t << ',' << s.min_sin_phi
       << '\n';
  }
  os.precision(old_precision);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValueError("loglog_slope: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mano
