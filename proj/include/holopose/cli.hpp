#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace holopose {

inline constexpr const char *kVersion = "0.1.0";

/// Runs one `holopose` invocation; args excludes the program name.
/// Exit status: 0 success, 1 runtime failure, 2 usage or validation error.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Worker count from the flag value, then HOLOPOSE_THREADS, then the
/// hardware; always at least 1.
int resolve_threads(int flag_value);

/// Calls fn(i) for i in [0, count) on `threads` workers. The first exception
/// by index is rethrown after all workers finish.
void parallel_for(long count, int threads, const std::function<void(long)> &fn);

}  // namespace holopose
