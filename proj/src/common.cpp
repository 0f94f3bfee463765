#include "saddlelab/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace saddlelab {

int default_jobs() {
  if (const char* env = std::getenv("SADDLELAB_JOBS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::string format_double17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace saddlelab
