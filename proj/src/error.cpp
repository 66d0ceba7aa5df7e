#include "epinuts/error.hpp"

#include <fmt/format.h>

namespace epinuts {

DomainError::DomainError(std::string operation, double value)
    : std::domain_error(fmt::format("{}: argument {} outside domain", operation, value)),
      operation_(std::move(operation)),
      value_(value) {}

DomainError::DomainError(const std::string& message) : std::domain_error(message) {}

}  // namespace epinuts
