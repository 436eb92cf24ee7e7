#pragma once

// Command-line pipeline driver. `run_cli` takes the arguments after the
// program name and returns the process exit status: 0 on success, 1 on a
// configuration or runtime failure (diagnostic on stderr), 2 for an unknown
// command or malformed invocation (usage on stderr).

#include <string>
#include <vector>

namespace posestitch {

int run_cli(const std::vector<std::string>& args);

const char* cli_usage();

}  // namespace posestitch
