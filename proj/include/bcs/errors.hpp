#ifndef BCS_ERRORS_HPP
#define BCS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bcs {

// Exit-code mapping: validation -> 2, numerical -> 3, io -> 4.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bcs

#endif
