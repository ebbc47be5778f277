#pragma once

#include <stdexcept>
#include <string>

namespace aido {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (map, randomization table, scenario, plan).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

/// Map topology the lane extractor cannot handle (intersections, no loop).
class TopologyError : public Error {
public:
  using Error::Error;
};

/// Operation called in a state that does not permit it.
class StateError : public Error {
public:
  using Error::Error;
};

} // namespace aido
