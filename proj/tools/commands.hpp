#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eprb::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kOutDirEnv = "EPRB_OUT_DIR";

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kDataFormat = 3,
  kNumerical = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Accepts decimals and multiples of pi: "0.3", "pi/8", "3pi/8", "3*pi/8", "-pi/4".
double parse_angle(const std::string& text);

}  // namespace eprb::cli
