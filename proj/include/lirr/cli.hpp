#pragma once

namespace lirr {

/// Entry point of the `lirr` command line tool. Returns 0 on success, 2 on a
/// usage or configuration error, 1 on a runtime failure.
int run_cli(int argc, char** argv);

}  // namespace lirr
