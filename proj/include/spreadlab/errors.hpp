#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace spreadlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but mathematically degenerate (zero variance, too few points).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class MisalignedSeries : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage could not find the artifact produced by an upstream stage.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::filesystem::path& path)
      : Error("missing artifact: " + path.string()), path_(path) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace spreadlab
