#pragma once

#include <stdexcept>
#include <string>

namespace deceptkit {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raw dataset file could not be read or parsed.
class IngestError : public Error {
 public:
  using Error::Error;
};

// Original label has no rule in the dataset's label map.
class LabelMapError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

// Persisted artifact is malformed, truncated, or of the wrong version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inputs that should line up by sample id do not (missing, duplicated or
// overlapping ids).
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Training could not start or complete (for example an empty training set).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class UnsupportedBackendError : public Error {
 public:
  using Error::Error;
};

// In-domain data leaked into a training pool that must be out-of-domain only.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace deceptkit
