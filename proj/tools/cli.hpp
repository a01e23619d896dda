#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ggan::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one `ggan` invocation. `args` excludes the program name.
/// Returns the process exit code (0 success, 1 usage, 2 parse, 3 data
/// mismatch, 4 config, 5 numeric failure, 6 artifact mismatch).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Keeps freed training buffers in the heap instead of returning them to the
/// OS after every step. No-op outside glibc.
void tune_allocator();

}  // namespace ggan::cli
