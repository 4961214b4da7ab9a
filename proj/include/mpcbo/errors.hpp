#ifndef MPCBO_ERRORS_HPP
#define MPCBO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mpcbo {

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteState : std::runtime_error {
  explicit NonFiniteState(const std::string& what) : std::runtime_error(what) {}
};

struct MaxIterations : std::runtime_error {
  explicit MaxIterations(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mpcbo

#endif
