#pragma once

#include <sstream>
#include <string>

namespace rm3d {

/// Streams every argument into one string.
template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

}  // namespace rm3d
