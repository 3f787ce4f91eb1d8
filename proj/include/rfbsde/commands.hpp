#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rfbsde/config.hpp"

namespace rfbsde {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Artifact bookkeeping written to manifest.json next to the outputs.
struct RunManifest {
  std::string command;
  std::string fingerprint;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, double>> timings_ms;
  std::vector<std::pair<std::string, std::string>> notes;

  std::string to_json() const;
};

// Each command writes into config.out_dir and returns the process exit code.
int cmd_solve(const RunConfig& config, std::ostream& out);
int cmd_cost(const RunConfig& config, std::ostream& out);
int cmd_verify(const RunConfig& config, std::ostream& out);
int cmd_paper(const RunConfig& config, const std::string& id, std::ostream& out);
int cmd_assumptions(const RunConfig& config, std::ostream& out);

std::vector<std::string> paper_ids();

/// Full command line entry point. Errors print one line "error: CODE: message".
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rfbsde
