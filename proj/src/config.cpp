#include "mano/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace mano {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_real(std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValueError("expected a number, got '" + s + "'");
  return out;
}

std::uint64_t to_count(std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ValueError("expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValueError("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> to_widths(std::string_view v) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(static_cast<std::size_t>(to_count(trim(v.substr(0, comma)))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

ManifoldMode to_manifold(std::string_view v) {
  if (v == "rotating") return ManifoldMode::rotating;
  if (v == "static") return ManifoldMode::static_axis;
  throw ValueError("manifold must be rotating or static, got '" + std::string(v) + "'");
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"layers", [](TrainConfig& c, std::string_view v) { c.layers = to_widths(v); }},
      {"loss", [](TrainConfig& c, std::string_view v) { c.loss = parse_loss_kind(v); }},
      {"data.task", [](TrainConfig& c, std::string_view v) { c.data.task = parse_task_kind(v); }},
      {"data.n_samples", [](TrainConfig& c, std::string_view v) { c.data.n_samples = to_count(v); }},
      {"data.input_dim", [](TrainConfig& c, std::string_view v) { c.data.input_dim = to_count(v); }},
      {"data.output_dim",
       [](TrainConfig& c, std::string_view v) { c.data.output_dim = to_count(v); }},
      {"data.noise", [](TrainConfig& c, std::string_view v) { c.data.noise = to_real(v); }},
      {"data.separation",
       [](TrainConfig& c, std::string_view v) { c.data.separation = to_real(v); }},
      {"data.seed", [](TrainConfig& c, std::string_view v) { c.data.seed = to_count(v); }},
      {"eval_fraction", [](TrainConfig& c, std::string_view v) { c.eval_fraction = to_real(v); }},
      {"optimizer",
       [](TrainConfig& c, std::string_view v) { c.optimizer = parse_optimizer_kind(v); }},
      {"lr_max", [](TrainConfig& c, std::string_view v) { c.lr_max = to_real(v); }},
      {"min_ratio", [](TrainConfig& c, std::string_view v) { c.min_ratio = to_real(v); }},
      {"clip", [](TrainConfig& c, std::string_view v) { c.clip = to_real(v); }},
      {"momentum", [](TrainConfig& c, std::string_view v) { c.momentum = to_real(v); }},
      {"weight_decay", [](TrainConfig& c, std::string_view v) { c.weight_decay = to_real(v); }},
      {"fallback_weight_decay",
       [](TrainConfig& c, std::string_view v) { c.fallback_weight_decay = to_real(v); }},
      {"nesterov", [](TrainConfig& c, std::string_view v) { c.nesterov = to_bool(v); }},
      {"rescale_coeff", [](TrainConfig& c, std::string_view v) { c.rescale_coeff = to_real(v); }},
      {"manifold", [](TrainConfig& c, std::string_view v) { c.manifold = to_manifold(v); }},
      {"fixed_axis", [](TrainConfig& c, std::string_view v) { c.fixed_axis = to_count(v); }},
      {"retract_momentum",
       [](TrainConfig& c, std::string_view v) { c.retract_momentum = to_bool(v); }},
      {"ns_iterations", [](TrainConfig& c, std::string_view v) { c.ns_iterations = to_count(v); }},
      {"beta1", [](TrainConfig& c, std::string_view v) { c.beta1 = to_real(v); }},
      {"beta2", [](TrainConfig& c, std::string_view v) { c.beta2 = to_real(v); }},
      {"eps", [](TrainConfig& c, std::string_view v) { c.eps = to_real(v); }},
      {"total_steps", [](TrainConfig& c, std::string_view v) { c.total_steps = to_count(v); }},
      {"warmup_steps", [](TrainConfig& c, std::string_view v) { c.warmup_steps = to_count(v); }},
      {"batch_size", [](TrainConfig& c, std::string_view v) { c.batch_size = to_count(v); }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = to_count(v); }},
      {"log_every", [](TrainConfig& c, std::string_view v) { c.log_every = to_count(v); }},
      {"snapshot_every",
       [](TrainConfig& c, std::string_view v) { c.snapshot_every = to_count(v); }},
      {"snapshot_layer",
       [](TrainConfig& c, std::string_view v) { c.snapshot_layer = to_count(v); }},
  };
  return table;
}

}  // namespace

TrainConfig parse_train_config(std::string_view text, const std::string& origin) {
  TrainConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValueError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValueError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ValueError(where + "duplicate key '" + std::string(key) + "'");
    }
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      throw ValueError(where + std::string(key) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str(), path.string());
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "layers = ";
  for (std::size_t i = 0; i < c.layers.size(); ++i) os << (i ? "," : "") << c.layers[i];
  os << "\nloss = " << to_string(c.loss) << "\ndata.task = " << to_string(c.data.task)
     << "\ndata.n_samples = " << c.data.n_samples << "\ndata.input_dim = " << c.data.input_dim
     << "\ndata.output_dim = " << c.data.output_dim << "\ndata.noise = " << c.data.noise
     << "\ndata.separation = " << c.data.separation << "\ndata.seed = " << c.data.seed
     << "\neval_fraction = " << c.eval_fraction << "\noptimizer = " << to_string(c.optimizer)
     << "\nlr_max = " << c.lr_max << "\nmin_ratio = " << c.min_ratio << "\nclip = " << c.clip;
  if (c.momentum) os << "\nmomentum = " << *c.momentum;
  os << "\nweight_decay = " << c.weight_decay;
  if (c.fallback_weight_decay) os << "\nfallback_weight_decay = " << *c.fallback_weight_decay;
  if (c.nesterov) os << "\nnesterov = " << (*c.nesterov ? "true" : "false");
  os << "\nrescale_coeff = " << c.rescale_coeff
     << "\nmanifold = " << (c.manifold == ManifoldMode::rotating ? "rotating" : "static")
     << "\nfixed_axis = " << c.fixed_axis
     << "\nretract_momentum = " << (c.retract_momentum ? "true" : "false")
     << "\nns_iterations = " << c.ns_iterations << "\nbeta1 = " << c.beta1
     << "\nbeta2 = " << c.beta2 << "\neps = " << c.eps << "\ntotal_steps = " << c.total_steps
     << "\nwarmup_steps = " << c.warmup_steps << "\nbatch_size = " << c.batch_size
     << "\nseed = " << c.seed << "\nlog_every = " << c.log_every
     << "\nsnapshot_every = " << c.snapshot_every << "\nsnapshot_layer = " << c.snapshot_layer
     << '\n';
  return os.str();
}

}  // namespace mano
