#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cite/datagen.hpp"
#include "cite/ensemble.hpp"
#include "cite/protocol.hpp"
#include "cite/trainer.hpp"

namespace cite::cli {

struct EvalSelection {
  Protocol protocol = Protocol::kBNG;
  std::size_t train_domain = 0;
  std::size_t test_domain = 0;
  EvalOptions options;
};

/// Everything a command needs, defaulting to the reference setup.
struct RunConfig {
  SynthSpec data;
  PretrainConfig pretrain;
  TrainConfig train;
  EnsembleConfig ensemble;
  EvalSelection eval;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

/// Every accepted key with a one-line description and its default value.
std::vector<ConfigKey> documented_keys();
std::string describe_keys();

/// Applies one "key=value" assignment. Unknown keys and bad values throw
/// Error(kConfig).
void apply_setting(RunConfig& cfg, const std::string& assignment);

/// Reads "key = value" lines; '#' starts a comment. Throws kIo if the file
/// cannot be read and kConfig on bad content.
void apply_file(RunConfig& cfg, const std::filesystem::path& path);

/// Defaults, then the file (if any), then each --set override in order.
RunConfig load_run_config(const std::string& file, const std::vector<std::string>& overrides);

/// Canonical "key=value" listing of the effective configuration.
std::string dump(const RunConfig& cfg);

}  // namespace cite::cli
