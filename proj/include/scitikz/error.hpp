#pragma once

#include <stdexcept>
#include <string>

namespace scitikz {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration could not be loaded or violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The host environment cannot run the requested operation (missing
/// toolchain, unwritable directories). Never converted into a score.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class NoDrawableContent : public Error {
 public:
  using Error::Error;
};

class RenderFailed : public Error {
 public:
  using Error::Error;
};

class EmptyContent : public Error {
 public:
  using Error::Error;
};

class ZeroVector : public Error {
 public:
  using Error::Error;
};

class InvalidThreshold : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class MissingScores : public Error {
 public:
  using Error::Error;
};

class GroupTooSmall : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidBand : public Error {
 public:
  using Error::Error;
};

class PreScreenFailed : public Error {
 public:
  using Error::Error;
};

// Backend failures. These always surface as errors, never as scores.

class BackendError : public Error {
 public:
  using Error::Error;
};

class BackendTimeout : public BackendError {
 public:
  using BackendError::BackendError;
};

class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class DimensionMismatch : public BackendError {
 public:
  using BackendError::BackendError;
};

class RepairUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class SchemaViolation : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace scitikz
