#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// Input too small for a layer window, or a window that does not fit.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. `offset` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Dataset manifest problems; names the clip when one is involved.
class LoadError : public Error {
 public:
  LoadError(const std::string& what, std::string clip_id = {})
      : Error(clip_id.empty() ? what : "clip '" + clip_id + "': " + what),
        clip_id_(std::move(clip_id)) {}
  const std::string& clip_id() const noexcept { return clip_id_; }

 private:
  std::string clip_id_;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vnn
