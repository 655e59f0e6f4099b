#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mano/train.hpp"

namespace mano {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitAssertion = 2;

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on usage or validation errors, 2 when a checked property fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

// {"shape": [...], "data": [...]} with row-major data.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

// {step, layer, theta, grad, momentum, update}.
nlohmann::json snapshot_to_json(const Snapshot& s);
Snapshot snapshot_from_json(const nlohmann::json& j);

/// Writes snapshot_<step>.json files (zero-padded, so name order is step order).
void write_snapshots(const std::filesystem::path& dir, const std::vector<Snapshot>& snapshots);
/// Reads every *.json file in `dir` in name order.
std::vector<Snapshot> read_snapshots(const std::filesystem::path& dir);

}  // namespace mano
