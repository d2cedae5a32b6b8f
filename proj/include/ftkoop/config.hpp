#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ftkoop/meta.hpp"
#include "ftkoop/observables.hpp"
#include "ftkoop/run.hpp"

namespace ftkoop {

/// Everything one experiment needs. Parsed from a flat key-value file:
///
///   # comment
///   [flow]
///   alpha = 3
///
/// Keys are addressed as section.key; unknown or repeated keys are errors.
struct ExperimentConfig {
  ObservableCatalog catalog = default_catalog();
  std::optional<LibraryMask> library;  // from library.theta or library.mask
  RunConfig run;
  MetaSearchConfig meta;
  std::uint64_t seed = 0;
  std::string output_dir;
  /// Raw key/value pairs as they appeared in the file, in order.
  std::vector<std::pair<std::string, std::string>> raw;

  /// The library to identify; throws ConfigError if none was configured.
  ObservableLibrary require_library() const;
  /// Resolved values of every setting, for provenance.
  nlohmann::json to_json() const;
};

/// Parses config text. Errors carry the offending line number.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Non-fatal remarks about a parsed config (e.g. p < n_xi + m).
std::vector<std::string> config_warnings(const ExperimentConfig& cfg);

}  // namespace ftkoop
