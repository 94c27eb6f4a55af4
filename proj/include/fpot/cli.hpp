#pragma once

namespace fpot {

/// Command-line entry point. Returns 0 on success, 1 on numerical failure and
/// 2 on usage or configuration errors.
int run_cli(int argc, char** argv);

}  // namespace fpot
