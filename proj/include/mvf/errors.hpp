#pragma once

#include <stdexcept>
#include <string>

namespace mvf {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidDepthError : Error {
  using Error::Error;
};

struct BehindCameraError : Error {
  using Error::Error;
};

struct NearSingularLogError : Error {
  using Error::Error;
};

struct TrackingUnreliableError : Error {
  using Error::Error;
};

struct DegenerateGeometryError : Error {
  using Error::Error;
};

struct TooFewPairsError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace mvf
