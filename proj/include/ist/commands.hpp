#pragma once

#include "ist/config.hpp"
#include "ist/errors.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ist {

inline const std::vector<std::string> kCommands = {"train", "bridge-train", "sample", "transfer",
                                                   "eval", "traverse", "ablate"};

struct CommandOptions {
  ModelConfig config;
  // Keys set explicitly (config file or overrides); applied on top of a
  // checkpoint's stored configuration where that makes sense.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::filesystem::path out_dir = ".";
  std::filesystem::path checkpoint;  // input for everything but a fresh train
  std::filesystem::path dataset;     // exported dataset; generated from the config when empty
  std::filesystem::path generated;   // eval on files: mels to score
  std::filesystem::path target;      // eval on files: reference mels
  std::string mels_key = "mels.refined";
  int count = 8;         // sample: outputs; transfer: PGM files written
  int pairs = 200;       // transfer pairs
  int points = 9;        // traversal values per dim
  int content = -1;      // fixed content id; -1 cycles through ids
  int bridge_steps = 0;  // bridge-train iterations; 0 means the configured steps
  std::uint64_t eval_seed = 7;
};

struct UsageError : Error {
  using Error::Error;
};

// Runs one subcommand, writing artifacts under out_dir. Returns 0 on
// success; errors propagate as exceptions (UsageError for unknown commands).
int run(const std::string& command, const CommandOptions& options, std::ostream& log);

}  // namespace ist
