#include "mano/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mano/bench.hpp"
#include "mano/config.hpp"
#include "mano/convergence.hpp"
#include "mano/diagnostics.hpp"

namespace fs = std::filesystem;

namespace mano {

nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape()}, {"data", t.values()}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("malformed tensor JSON: ") + e.what());
  }
}

nlohmann::json snapshot_to_json(const Snapshot& s) {
  return nlohmann::json{{"step", s.step},
                        {"layer", s.layer},
                        {"theta", tensor_to_json(s.theta)},
                        {"grad", tensor_to_json(s.grad)},
                        {"momentum", tensor_to_json(s.momentum)},
                        {"update", tensor_to_json(s.update)}};
}

Snapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    return Snapshot{j.at("step").get<std::uint64_t>(), j.at("layer").get<std::string>(),
                    tensor_from_json(j.at("theta")), tensor_from_json(j.at("grad")),
                    tensor_from_json(j.at("momentum")), tensor_from_json(j.at("update"))};
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("malformed snapshot JSON: ") + e.what());
  }
}

void write_snapshots(const fs::path& dir, const std::vector<Snapshot>& snapshots) {
  fs::create_directories(dir);
  for (const auto& s : snapshots) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(8) << std::setfill('0') << s.step << ".json";
    std::ofstream f(dir / name.str());
    if (!f) throw Error("cannot write " + (dir / name.str()).string());
    f << snapshot_to_json(s).dump() << '\n';
  }
}

std::vector<Snapshot> read_snapshots(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValueError("snapshot directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Snapshot> out;
  for (const auto& p : files) {
    std::ifstream f(p);
    try {
      out.push_back(snapshot_from_json(nlohmann::json::parse(f)));
    } catch (const nlohmann::json::exception& e) {
      throw ValueError(p.string() + ": " + e.what());
    } catch (const ValueError& e) {
      throw ValueError(p.string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

// A checked property (bound, divergence) failed.
class AssertionFailure : public Error {
 public:
  using Error::Error;
};

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw Error("cannot write " + (dir / name).string());
  return f;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_shapes(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw ValueError("shape must look like 512x512, got '" + item + "'");
    try {
      out.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
    } catch (const std::exception&) {
      throw ValueError("shape must look like 512x512, got '" + item + "'");
    }
  }
  if (out.empty()) throw ValueError("no shapes given");
  return out;
}

struct Options {
  std::string out_dir = ".";

  std::string config;

  std::string objective = "quadratic";
  std::size_t m = 16;
  std::size_t n = 0;  // 0: same as m
  std::uint64_t horizon = 1000;
  double c = 1.0;
  double smoothness = 1.0;
  bool stochastic = false;
  double noise = 0.0;
  std::size_t samples = 256;

  std::string shapes = "256x256,512x512,1024x1024";
  std::size_t reps = kMinBenchRepetitions;

  std::string snapshots;
  std::string manifold = "oblique";
  std::size_t axis = 0;

  std::uint64_t ns_iterations = 5;
  std::uint64_t batch = 512;

  std::uint64_t seed = 0;
};

void cmd_train(const Options& o, std::ostream& out) {
  const TrainConfig cfg = load_train_config(o.config);
  TrainResult result;
  try {
    result = train_run(cfg);
  } catch (const TrainingDiverged& e) {
    throw AssertionFailure(e.what());
  }
  auto csv = open_output(o.out_dir, "trajectory.csv");
  write_trajectory_csv(csv, result.records);
  if (!result.snapshots.empty()) write_snapshots(fs::path(o.out_dir) / "snapshots", result.snapshots);
  out << std::setprecision(6) << "optimizer " << to_string(cfg.optimizer) << ": eval loss "
      << result.initial_eval_loss << " -> " << result.final_eval_loss << " over "
      << cfg.total_steps << " steps\n";
}

void cmd_converge(const Options& o, std::ostream& out) {
  const std::size_t n = o.n == 0 ? o.m : o.n;
  std::unique_ptr<SmoothObjective> obj;
  if (o.objective == "quadratic") {
    obj = std::make_unique<QuadraticObjective>(
        QuadraticObjective::on_reachable_shell(o.m, n, o.smoothness, o.c, o.seed));
  } else if (o.objective == "softmax") {
    obj = std::make_unique<SoftmaxRegressionObjective>(o.m, n, o.samples, o.seed);
  } else {
    throw ValueError("unknown objective '" + o.objective + "' (quadratic or softmax)");
  }
  if (o.stochastic) obj->set_noise_scale(o.noise);

  ConvergenceRun run;
  try {
    run = run_convergence_experiment(*obj, o.horizon, o.c, o.stochastic, o.seed);
  } catch (const ConvergenceAborted& e) {
    throw AssertionFailure(e.what());
  } catch (const LemmaViolation& e) {
    throw AssertionFailure(e.what());
  }
  auto csv = open_output(o.out_dir, "convergence.csv");
  write_convergence_csv(csv, run);

  out << std::setprecision(9) << "objective " << o.objective << " m=" << o.m << " n=" << n
      << " T=" << o.horizon << " C=" << o.c << " L=" << obj->smoothness()
      << " gamma=" << run.realized_gamma << '\n';
  if (o.stochastic) {
    // The deterministic bound is not a guarantee under gradient noise.
    out << "min grad norm " << run.min_grad_norm << ", deterministic bound " << run.bound
        << " (stochastic run, not asserted)\n";
    return;
  }
  if (run.bound_holds) {
    out << "BOUND HOLDS: min grad norm " << run.min_grad_norm << " <= " << run.bound
        << " (squared " << run.min_grad_norm_sq << ")\n";
  } else {
    out << "BOUND VIOLATED: min grad norm " << run.min_grad_norm << " > " << run.bound
        << " (squared " << run.min_grad_norm_sq << ")\n";
    throw AssertionFailure("convergence bound violated");
  }
}

void cmd_bench(const Options& o, std::ostream& out) {
  const auto results = bench_kernels(parse_shapes(o.shapes), o.reps, o.seed);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    arr.push_back(to_json(r));
    out << std::left << std::setw(20) << r.op << r.rows << 'x' << r.cols << "  median "
        << std::fixed << std::setprecision(1) << r.median_ns / 1e3 << " us\n"
        << std::defaultfloat;
  }
  open_output(o.out_dir, "bench.json") << arr.dump(2) << '\n';
}

void cmd_spectra(const Options& o, std::ostream& out) {
  const auto snaps = read_snapshots(o.snapshots);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : snaps) {
    arr.push_back(to_json(spectrum_report(s.grad, s.momentum, s.update, s.step, s.layer)));
  }
  open_output(o.out_dir, "spectra.json") << arr.dump(2) << '\n';
  out << "wrote " << snaps.size() << " spectrum reports\n";
}

void cmd_geodesic(const Options& o, std::ostream& out) {
  const auto manifold = parse_geodesic_manifold(o.manifold);
  const auto snaps = read_snapshots(o.snapshots);
  std::vector<Tensor> thetas;
  for (const auto& s : snaps) thetas.push_back(s.theta);
  const auto traj = trajectory_geodesics(thetas, manifold, o.axis);

  auto csv = open_output(o.out_dir, "geodesic.csv");
  csv << std::setprecision(17) << "from_step,to_step,distance,flagged\n";
  for (std::size_t i = 0; i < traj.distances.size(); ++i) {
    csv << snaps[i].step << ',' << snaps[i + 1].step << ',' << traj.distances[i] << ','
        << (std::isnan(traj.distances[i]) ? 1 : 0) << '\n';
  }
  out << std::setprecision(9) << to_string(manifold) << " mean distance " << traj.mean << " over "
      << traj.distances.size() << " pairs\n";
}

void cmd_flops(const Options& o, std::ostream& out) {
  const std::size_t n = o.n == 0 ? o.m : o.n;
  if (o.m == 0 || n == 0 || o.ns_iterations == 0) throw ValueError("m, n and T must be positive");
  const auto mano = flops_mano(o.m, n);
  const auto ns = flops_newton_schulz(o.m, n, o.ns_iterations);
  out << "m=" << o.m << " n=" << n << " T=" << o.ns_iterations << " B=" << o.batch << '\n'
      << std::left << std::setw(16) << "optimizer" << std::setw(20) << "flops"
      << "overhead_ratio\n"
      << std::setprecision(9) << std::setw(16) << "mano" << std::setw(20) << mano
      << overhead_ratio(OverheadOptimizer::mano, o.m, n, o.ns_iterations, o.batch) << '\n'
      << std::setw(16) << "newton_schulz" << std::setw(20) << ns
      << overhead_ratio(OverheadOptimizer::muon, o.m, n, o.ns_iterations, o.batch) << '\n'
      << std::setw(16) << "baseline_6mnB" << 6 * o.m * n * o.batch << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Oblique-manifold optimizer experiments", "mano"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a small MLP from a config file");
  train->add_option("config,--config", o.config, "key = value config file")->required();
  train->add_option("--out", o.out_dir, "Output directory");

  auto* converge = app.add_subcommand("converge", "Run the simplified-Mano convergence experiment");
  converge->add_option("--objective", o.objective, "quadratic or softmax");
  converge->add_option("--m", o.m, "Rows (softmax: feature count)");
  converge->add_option("--n", o.n, "Columns (softmax: class count); defaults to m");
  converge->add_option("--T", o.horizon, "Horizon T; the run takes T + 1 steps");
  converge->add_option("--C", o.c, "Step-size constant, eta = C / sqrt(T + 1)");
  converge->add_option("--L", o.smoothness, "Quadratic smoothness constant");
  converge->add_option("--samples", o.samples, "Softmax sample count");
  converge->add_flag("--stochastic", o.stochastic, "Add Gaussian gradient noise");
  converge->add_option("--noise", o.noise, "Gradient noise stddev per entry");
  converge->add_option("--seed", o.seed);
  converge->add_option("--out", o.out_dir, "Output directory");

  auto* bench = app.add_subcommand("bench", "Time the Mano transform against Newton-Schulz");
  bench->add_option("--shapes", o.shapes, "Comma-separated MxN list");
  bench->add_option("--reps", o.reps, "Timed repetitions per kernel (>= 100)");
  bench->add_option("--seed", o.seed);
  bench->add_option("--out", o.out_dir, "Output directory");

  auto* spectra = app.add_subcommand("spectra", "Singular-value reports for snapshot files");
  spectra->add_option("snapshots,--snapshots", o.snapshots, "Snapshot directory")->required();
  spectra->add_option("--out", o.out_dir, "Output directory");

  auto* geodesic = app.add_subcommand("geodesic", "Consecutive-snapshot geodesic distances");
  geodesic->add_option("snapshots,--snapshots", o.snapshots, "Snapshot directory")->required();
  geodesic->add_option("--manifold", o.manifold, "oblique, sphere or stiefel");
  geodesic->add_option("--axis", o.axis, "Oblique normalization axis");
  geodesic->add_option("--out", o.out_dir, "Output directory");

  auto* flops = app.add_subcommand("flops", "FLOP model table");
  flops->add_option("--m", o.m);
  flops->add_option("--n", o.n, "Defaults to m");
  flops->add_option("--T", o.ns_iterations, "Newton-Schulz iterations");
  flops->add_option("--B", o.batch, "Tokens per step");

  std::vector<std::string> argv_store{"mano"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (*train) cmd_train(o, out);
    else if (*converge) cmd_converge(o, out);
    else if (*bench) cmd_bench(o, out);
    else if (*spectra) cmd_spectra(o, out);
    else if (*geodesic) cmd_geodesic(o, out);
    else cmd_flops(o, out);
  } catch (const AssertionFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitAssertion;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mano
