#include "errors.hpp"

namespace pnsaf {

const char* status_name(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::invalid_argument: return "invalid_argument";
    case Status::io_error: return "io_error";
    case Status::parse_error: return "parse_error";
    case Status::unsupported_format: return "unsupported_format";
    case Status::diverged: return "diverged";
    case Status::internal_error: return "internal_error";
  }
  return "unknown";
}

}  // namespace pnsaf
