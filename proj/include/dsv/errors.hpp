#pragma once

#include <stdexcept>
#include <string>

namespace dsv {

/// Filesystem-level failure: missing file, short read, rename failure.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file content: bad magic, wrong field count, truncated payload.
struct format_error : std::runtime_error {
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dsv
