#pragma once

namespace unip {

// Full command-line entry point: train / attack / eval / sweep / export.
// Returns the process exit code: 0 ok, 1 usage, 2 data error, 3 numeric
// failure.
int run(int argc, const char* const* argv);

}  // namespace unip
