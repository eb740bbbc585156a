#ifndef MACBIG_UTIL_HPP
#define MACBIG_UTIL_HPP

#include <stdexcept>
#include <string>

namespace macbig {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   UsageError   -> exit 1 (bad flags, bad config values)
//   DataError    -> exit 2 (unreadable/malformed inputs, bad checkpoints, shape mismatches)
//   NumericError -> exit 3 (non-finite values, failed gradient checks)
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : DataError {
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : DataError {
  enum class Code { bad_magic, truncated, inconsistent_manifest };
  Code code;
  CheckpointError(Code c, const std::string& msg) : DataError(msg), code(c) {}
};

}  // namespace macbig

#endif
