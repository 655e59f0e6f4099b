#pragma once

// Momentum-free, static-axis Mano and the machinery to check its convergence
// guarantee on objectives with known smoothness.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "mano/tensor.hpp"

namespace mano {

class LemmaViolation : public Error {
 public:
  using Error::Error;
};

class ConvergenceAborted : public Error {
 public:
  ConvergenceAborted(std::uint64_t step, const std::string& what) : Error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

/// An L-smooth objective over m x n matrices with a known lower bound.
class SmoothObjective {
 public:
  struct Value {
    double f;
    Tensor grad;
  };

  virtual ~SmoothObjective() = default;

  virtual Value evaluate(const Tensor& theta) const = 0;
  virtual Tensor initial_point() const = 0;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual double smoothness() const = 0;
  virtual double lower_bound() const = 0;

  double noise_scale() const { return noise_scale_; }
  void set_noise_scale(double s);

 private:
  double noise_scale_ = 0.0;
};

/// f(theta) = (L/2) ||theta - target||_F^2, f_inf = 0.
class QuadraticObjective final : public SmoothObjective {
 public:
  QuadraticObjective(Tensor target, Tensor start, double smoothness);

  /// Unit-column start and a target whose column norms equal sqrt(1 + m C^2).
  /// The simplified step moves each column tangentially by eta * sqrt(m), so
  /// with eta = C / sqrt(T + 1) the squared column norm grows by exactly
  /// m C^2 over a run: the target sits on the shell the iterates reach.
  static QuadraticObjective on_reachable_shell(std::size_t m, std::size_t n, double smoothness,
                                               double c, std::uint64_t seed);

  Value evaluate(const Tensor& theta) const override;
  Tensor initial_point() const override { return start_; }
  std::size_t rows() const override { return target_.rows(); }
  std::size_t cols() const override { return target_.cols(); }
  double smoothness() const override { return smoothness_; }
  double lower_bound() const override { return 0.0; }
  const Tensor& target() const { return target_; }

 private:
  Tensor target_;
  Tensor start_;
  double smoothness_;
};

/// Mean softmax cross-entropy of a linear classifier theta (features x classes)
/// on fixed synthetic data. f_inf = 0; L is estimated by sampled power
/// iteration (estimate_smoothness).
class SoftmaxRegressionObjective final : public SmoothObjective {
 public:
  SoftmaxRegressionObjective(std::size_t features, std::size_t classes, std::size_t samples,
                             std::uint64_t seed);

  Value evaluate(const Tensor& theta) const override;
  Tensor initial_point() const override { return start_; }
  std::size_t rows() const override { return features_.cols(); }
  std::size_t cols() const override { return classes_; }
  double smoothness() const override { return smoothness_; }
  double lower_bound() const override { return 0.0; }

  // sigma_max(X)^2 / (2 N): an analytic upper bound on L.
  double analytic_smoothness_bound() const;

 private:
  Tensor features_;
  std::vector<std::size_t> labels_;
  std::size_t classes_;
  Tensor start_;
  double smoothness_ = 0.0;
};

/// Largest observed ||grad(x) - grad(y)|| / ||x - y|| over random pairs.
double sample_smoothness(const SmoothObjective& obj, std::size_t pairs, std::uint64_t seed);

/// Largest Hessian eigenvalue found by power iteration on finite differences
/// of the gradient at the origin, the start and random nearby points.
double estimate_smoothness(const SmoothObjective& obj, std::size_t points, std::uint64_t seed);

/// True when every sampled pair satisfies the Lipschitz bound with
/// (1 + slack) * L.
bool verify_smoothness(const SmoothObjective& obj, std::size_t pairs, std::uint64_t seed,
                       double slack = 0.05);

/// Gradient plus i.i.d. N(0, noise_scale^2) per entry.
Tensor noisy_gradient(const Tensor& grad, double noise_scale, std::mt19937_64& rng);

struct SimpleStepParts {
  Tensor theta_hat;
  Tensor tangent;
  Tensor tangent_normalized;
  Tensor next;
};

/// theta - eta sqrt(m) v_hat with columns normalized (axis 0) and no momentum.
/// Any zero column in theta or the tangent throws DegenerateSliceError.
Tensor mano_simple_step(const Tensor& theta, const Tensor& grad, double eta, std::size_t m);
SimpleStepParts mano_simple_step_parts(const Tensor& theta, const Tensor& grad, double eta,
                                       std::size_t m);

struct Lemma1Result {
  double s_t = 0.0;               // <g, v_hat>
  double tangent_norm_sum = 0.0;  // sum_j ||v_j||
  double gamma = 1.0;             // min_j sin(phi_j) over nonzero gradient columns
  double bound = 0.0;             // gamma * ||g||_F
};

/// Evaluates the inner-product identity and lower bound; throws LemmaViolation
/// if S_t differs from sum_j ||v_j|| by more than 1e-10 (relative) or falls
/// below the bound by more than 1e-10.
Lemma1Result lemma1_check(const Tensor& theta, const Tensor& grad);

struct Theorem1Constants {
  double c1 = 0.0;
  double c2 = 0.0;
};

Theorem1Constants theorem1_constants(double f0, double f_inf, double smoothness, double m,
                                     double gamma, double c);

/// (C1 + C2) / sqrt(T + 1).
double theorem1_bound(double f0, double f_inf, double smoothness, double m, double gamma,
                      double c, std::uint64_t t);

struct ConvergenceStep {
  std::uint64_t step = 0;
  double f = 0.0;
  double grad_norm = 0.0;  // true gradient, Frobenius
  double s_t = 0.0;
  double min_sin_phi = 0.0;
};

struct ConvergenceRun {
  std::vector<ConvergenceStep> steps;
  std::uint64_t horizon = 0;  // T; the run takes T + 1 steps
  double eta = 0.0;
  double c = 0.0;
  double f0 = 0.0;
  double realized_gamma = 1.0;
  double min_grad_norm = 0.0;
  double min_grad_norm_sq = 0.0;
  double bound = 0.0;
  double max_lemma_residual = 0.0;
  bool bound_holds = false;
};

/// Runs mano_simple_step for T + 1 iterations at eta = C / sqrt(T + 1) and
/// evaluates the bound with the realized gamma. Stochastic runs add
/// zero-mean Gaussian noise of the objective's noise_scale to each gradient.
ConvergenceRun run_convergence_experiment(const SmoothObjective& obj, std::uint64_t horizon,
                                          double c, bool stochastic, std::uint64_t seed);

void write_convergence_csv(std::ostream& os, const ConvergenceRun& run);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mano
