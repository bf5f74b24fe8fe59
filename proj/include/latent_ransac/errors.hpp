#pragma once

#include <stdexcept>
#include <string>

namespace latent_ransac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// A homogeneous point was mapped onto (or very near) the line at infinity.
class HomographyAtInfinity : public Error {
 public:
  HomographyAtInfinity() : Error("point maps to the line at infinity") {}
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

/// A hypothesis could not be embedded (a corner maps near infinity).
class UnstableHypothesis : public Error {
 public:
  UnstableHypothesis() : Error("hypothesis maps a canvas corner near infinity") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidProbability : public Error {
 public:
  using Error::Error;
};

class NotEnoughMatches : public Error {
 public:
  using Error::Error;
};

class AllSamplesDegenerate : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace latent_ransac
