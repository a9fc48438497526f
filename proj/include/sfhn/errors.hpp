#pragma once

#include <stdexcept>
#include <string>

namespace sfhn {

/// Bad argument or violated precondition.
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A time requested outside the stored window of a noise path.
class OutOfWindow : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// A time or shift that is not a multiple of the path (or step) grid.
class AlignmentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Two fields defined on different grids were combined.
class GridMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values appeared during time stepping.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(double t, const std::string& what)
        : std::runtime_error(what), time_(t) {}

    double time() const noexcept { return time_; }

  private:
    double time_;
};

}  // namespace sfhn
