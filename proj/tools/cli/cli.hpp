#pragma once

#include <ostream>

namespace tailmes::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kLookupError = 4 };

// Entry point shared by the executable and the tests. Subcommands:
//   simulate --config FILE [--out CSV] [--seed N] [--threads N] [--iota X] [--p X] [--window N] [--clip N]
//   forecast PANEL.csv [--config FILE] [--out CSV] [--window N] [--clip N] [--p X] [--iota X] [--threads N]
//   test FORECAST.csv DATE
// --config also accepts a run manifest written by an earlier invocation.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tailmes::cli
