#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace odyssey::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;        // bad arguments, I/O, parse errors
inline constexpr int kIncompatible = 3; // statistics built with different hash functions
inline constexpr int kUnsupported = 4;  // query outside the optimizable fragment
inline constexpr int kExecution = 5;

// Runs one `odyssey` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace odyssey::cli
