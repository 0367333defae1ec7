#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tlsbf {

enum ExitCode : int
{
  exit_ok = 0,
  exit_usage = 1,
  exit_data = 2,
  exit_numerical = 3,
};

//! Runs the `tlsbf` command line; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tlsbf
