#pragma once

/*
 * Command-line surface: fit / generate / bench / density-grid.
 *
 * Every command is deterministic given identical inputs and --seed; all
 * numeric output is printed with 17 significant digits so files diff
 * byte-for-byte across runs and thread counts.
 */

namespace cfx {

// Returns the process exit code. Failures print "error: <reason>" to
// stderr and return nonzero; nothing throws past this function.
int run_cli(int argc, char** argv);

}  // namespace cfx
