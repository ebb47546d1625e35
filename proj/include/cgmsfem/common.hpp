#pragma once

#include <stdexcept>
#include <string>

namespace cgmsfem {

inline constexpr const char* library_version = "0.1.0";

[[noreturn]] inline void fail(const std::string& what) {
  throw std::runtime_error(what);
}

[[noreturn]] inline void fail_arg(const std::string& what) {
  throw std::invalid_argument(what);
}

}  // namespace cgmsfem

// Precondition/contract guards. ARG flavor marks caller errors (bad config,
// bad geometry), the plain flavor marks runtime contract violations (solver
// residuals, conditioning).
#define CGM_REQUIRE(cond, msg) \
  do {                         \
    if (!(cond)) ::cgmsfem::fail(msg); \
  } while (0)

#define CGM_REQUIRE_ARG(cond, msg) \
  do {                             \
    if (!(cond)) ::cgmsfem::fail_arg(msg); \
  } while (0)
