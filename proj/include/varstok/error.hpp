#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace varstok {

// Error categories; the CLI maps each category to a distinct exit code.
enum class errc {
  io = 2,                 // unreadable/unwritable files
  bad_format = 3,         // magic/version/layout violations, truncation
  invalid_argument = 4,   // parameter or invariant violations
  dimension_mismatch = 5, // H/shape disagreements between components
  insufficient_data = 6,  // e.g. fewer distinct training vectors than K
  hash_mismatch = 7,      // stream decoded against the wrong codebook
};

class error : public std::runtime_error {
public:
  error(errc code, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what),
        code_(code),
        module_(std::move(module)) {}

  errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

private:
  errc code_;
  std::string module_;
};

[[noreturn]] inline void fail(errc code, const std::string& module, const std::string& msg) {
  throw error(code, module, msg);
}

} // namespace varstok
