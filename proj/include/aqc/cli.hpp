#pragma once

namespace aqc {

/// Entry point of the command-line tool. Returns the process exit code: 0 on
/// success, 1 when compilation is infeasible, 2 on invalid input, 3 on an
/// internal numerical failure.
int run_cli(int argc, char** argv);

}  // namespace aqc
