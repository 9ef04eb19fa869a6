#pragma once

#include <stdexcept>
#include <string>

namespace pnsaf {

enum class Status {
  ok = 0,
  invalid_argument,
  io_error,
  parse_error,
  unsupported_format,
  diverged,
  internal_error,
};

const char* status_name(Status s);

/// Exception carrying a Status code; mapped to error codes at the C boundary.
class Error : public std::runtime_error {
 public:
  Error(Status status, std::string message)
      : std::runtime_error(std::move(message)), status_(status) {}

  Status status() const { return status_; }

 private:
  Status status_;
};

[[noreturn]] inline void fail(Status status, std::string message) {
  throw Error(status, std::move(message));
}

inline void require(bool condition, Status status, std::string message) {
  if (!condition) fail(status, std::move(message));
}

}  // namespace pnsaf
