#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace amod {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInfeasible = 1,  // infeasible instance, violated cut condition, no route
  kExitInput = 2,       // bad input file or flag
  kExitInternal = 3,    // numerical failure or bug
};

// Runs the command-line tool. args excludes the program name. Reports go to
// the output directory (--out, else $AMOD_OUT_DIR, else the working
// directory) together with manifest.json.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amod
