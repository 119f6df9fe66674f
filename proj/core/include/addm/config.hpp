#pragma once

#include <filesystem>
#include <string>

#include "addm/phantoms.hpp"
#include "addm/training.hpp"

namespace addm {

/// Everything a run needs: training hyperparameters, phantom generation
/// parameters and detection settings, parsed from one flat JSON object.
/// Unknown keys are rejected by name; absent keys take the defaults below.
struct RunConfig {
  TrainConfig train;
  PhantomSpec phantoms;
  int n_normal = 125;
  int n_anomalous = 22;
  int t_ad = 0;  // 0 = automatic (T / 4, at least 1)
  double quantile = 0.95;
  int n_recon = 1;

  int effective_t_ad() const;
  void validate() const;
};

/// Parses and fully validates a JSON config file. Error messages name the
/// offending key.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& json_text);

/// The effective (post-default) configuration as pretty JSON; parsing it
/// back yields the same RunConfig.
std::string effective_config_json(const RunConfig& config);

}  // namespace addm
