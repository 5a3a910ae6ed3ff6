#pragma once

namespace rvt {

// Entry point behind the `rvt` binary. Non-interactive; exit codes:
// 0 success, 1 runtime failure, 2 configuration/usage error, 3 data error.
int run_cli(int argc, char** argv);

}  // namespace rvt
