#pragma once

#include <stdexcept>
#include <string>

namespace fewshot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or insufficient input data (corpus, episode file, dump).
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad configuration, missing paths, invalid option values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fewshot
