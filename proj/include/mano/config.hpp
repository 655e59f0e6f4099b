#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mano/train.hpp"

namespace mano {

/// Flat `key = value` text, one pair per line, `#` starts a comment. Keys are
/// the TrainConfig field names; dataset fields are prefixed with `data.`.
/// `layers` is a comma-separated width list. Unknown or repeated keys and
/// unparsable values throw ValueError naming the line.
TrainConfig parse_train_config(std::string_view text, const std::string& origin = "<config>");

/// Reads and parses a config file; a missing file throws with its path.
TrainConfig load_train_config(const std::filesystem::path& path);

/// Inverse of parse_train_config for every field.
std::string format_train_config(const TrainConfig& cfg);

}  // namespace mano
