#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cite/datagen.hpp"
#include "cite/error.hpp"
#include "cite/losses.hpp"

namespace cite::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

int exit_code_for(ErrorCode code);

/// Runs one command line (args[0] is the program name) and returns the
/// process exit code. Nothing escapes as an exception.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Generated data directory: domain_<d>.csv per domain plus split.txt.
struct DataDir {
  std::vector<SynthDataset> domains;
  ClassSplit split;
  std::uint64_t seed = 0;
};

void write_data_dir(const std::filesystem::path& dir, const std::vector<SynthDataset>& domains,
                    const ClassSplit& split, std::uint64_t seed);
DataDir read_data_dir(const std::filesystem::path& dir);

/// "DVA", "DVA+SCL", "DVA+SCL+VLD", ... from the enabled terms.
std::string objective_label(const LossConfig& loss);

}  // namespace cite::cli
