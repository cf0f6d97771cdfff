#include "sivar/error.hpp"

namespace sivar {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}

NumericError::NumericError(std::size_t index, const std::string& what)
    : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

}  // namespace sivar
