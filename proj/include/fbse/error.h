// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_ERROR_H_
#define FBSE_ERROR_H_

#include <stdexcept>
#include <string>

namespace fbse {

// Base of every error thrown by the library. The CLI maps the subclasses to
// process exit codes (ConfigError 2, FormatError 3, CheckpointError and
// PrerequisiteError 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor / spectrogram dimension disagreements and invalid arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

// Unreadable or unsupported audio, manifests with missing files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbse

#endif  // FBSE_ERROR_H_
