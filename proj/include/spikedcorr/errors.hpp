#pragma once

#include <stdexcept>
#include <string>

namespace spikedcorr {

// Error taxonomy shared by every module.
//
//   std::invalid_argument  malformed or out-of-contract input
//   std::domain_error      input outside the mathematical domain of the map
//   numerical_error        an algorithm failed to converge or lost precision
//   unsupported_operation  the requested pathway does not exist for this model
//   degenerate_data        sample data violates a nondegeneracy requirement

class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

class unsupported_operation : public std::logic_error {
public:
  explicit unsupported_operation(const std::string& what) : std::logic_error(what) {}
};

class degenerate_data : public std::runtime_error {
public:
  explicit degenerate_data(const std::string& what) : std::runtime_error(what) {}
};

} // namespace spikedcorr
