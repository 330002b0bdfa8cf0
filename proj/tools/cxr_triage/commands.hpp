#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cxr::cli {

/// Exit codes of the cxr-triage tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kImage = 3,
  kGraph = 4,
  kClassAbsent = 5,
};

/// Entry point shared by main() and the tests. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload: args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Sidecar written next to ingest and embed outputs (`<file>.meta.json`).
std::string sidecar_path(const std::string& file);

}  // namespace cxr::cli
