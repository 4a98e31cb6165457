#pragma once

#include <stdexcept>
#include <string>

namespace fedfm {

// Base for every error the simulator raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A node with an empty shard cannot produce a local update.
class NoDataError : public Error {
 public:
  using Error::Error;
};

// Selection Score requires V >= 1.
class ScoreUndefinedError : public Error {
 public:
  using Error::Error;
};

class EmptyEcosystemError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class NoRespondersError : public AggregationError {
 public:
  using AggregationError::AggregationError;
};

// Raised when a round ends without a single usable update.
class RoundFailedError : public Error {
 public:
  RoundFailedError(int round, const std::string& what)
      : Error("round " + std::to_string(round) + " failed: " + what), round_(round) {}

  int round() const noexcept { return round_; }

 private:
  int round_;
};

}  // namespace fedfm
