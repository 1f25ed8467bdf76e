#ifndef ORTS_ERRORS_HPP
#define ORTS_ERRORS_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace orts {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class InvalidPermutation : public Error {
 public:
  using Error::Error;
};

class InvalidTransform : public Error {
 public:
  using Error::Error;
};

class CannotMarginalize : public Error {
 public:
  using Error::Error;
};

/// Raised when sampling from a belief whose precision is not positive definite.
class CannotSample : public Error {
 public:
  using Error::Error;
};

class InvalidRoundData : public Error {
 public:
  using Error::Error;
};

/// Newton iteration ran out of budget; carries the last iterate.
class OptimizationFailure : public Error {
 public:
  OptimizationFailure(const std::string &what, Eigen::VectorXd last_iterate,
                      double gradient_norm)
      : Error(what),
        last_iterate_(std::move(last_iterate)),
        gradient_norm_(gradient_norm) {}

  const Eigen::VectorXd &last_iterate() const { return last_iterate_; }
  double gradient_norm() const { return gradient_norm_; }

 private:
  Eigen::VectorXd last_iterate_;
  double gradient_norm_;
};

class InvalidRound : public Error {
 public:
  using Error::Error;
};

class MustReinitialize : public Error {
 public:
  using Error::Error;
};

class UnknownArm : public Error {
 public:
  using Error::Error;
};

class InvalidEnvironment : public Error {
 public:
  using Error::Error;
};

/// Configuration problems detected while reading CLI input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace orts

#endif  // ORTS_ERRORS_HPP
