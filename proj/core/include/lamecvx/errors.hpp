#pragma once

#include <stdexcept>
#include <string>

namespace lamecvx {

/// Base class for all engine errors.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter schedule out of range, inconsistent tables, exponent overflow.
class schedule_error : public error {
public:
  using error::error;
};

/// Field shape/grid/interval violations.
class field_error : public error {
public:
  using error::error;
};

/// Iterative solver failed to converge (carries the iteration trace in what()).
class convergence_error : public error {
public:
  using error::error;
};

/// Geometric lemma input outside the admissible ball.
class out_of_ball_error : public error {
public:
  using error::error;
};

/// Configuration file problems (unknown keys, bad values).
class config_error : public error {
public:
  using error::error;
};

}  // namespace lamecvx
