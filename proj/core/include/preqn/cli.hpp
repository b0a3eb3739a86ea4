#pragma once

#include <string>
#include <vector>

namespace preqn {

/// Entry point for the command-line tool. Returns the process exit code:
/// 0 on success, 2 when the run completed but recorded a partial failure
/// (e.g. the divergence watchdog stopped a training run), nonzero otherwise.
int cli_main(int argc, const char* const* argv);

/// Same, for in-process invocation; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace preqn
