#ifndef EXPLATTACK_ERRORS_H_
#define EXPLATTACK_ERRORS_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace explattack {

// Root of every error thrown by the library. The C API maps each subclass
// onto an ea_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flag, bad config key, out-of-range threshold, missing input file.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Structurally malformed input (CSV column count, embedding vector length).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input carrying an invalid value (unknown label, empty text).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Raised by a victim model (remote failure, malformed response). The attack
// loop turns it into an Errored record.
class VictimError : public Error {
 public:
  using Error::Error;
};

class FeaturizationError : public Error {
 public:
  using Error::Error;
};

class SimilarityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Generated explanations and dataset disagree on example ids.
class IdMismatchError : public Error {
 public:
  IdMismatchError(const std::string& what, std::vector<std::string> ids)
      : Error(what), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

}  // namespace explattack

#endif  // EXPLATTACK_ERRORS_H_
