#pragma once

#include "sivar/sparams.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sivar {

enum class DataFormat { RI, MA, DB };

struct TouchstoneReadOptions {
  /// A file whose R differs from this is accepted, with a warning.
  std::optional<double> expected_z_ref_ohm;
  PortMap port_map;
};

/// Parses Touchstone v1 4-port text (`# <unit> S <RI|MA|DB> R <z>`).
///
/// Data rows may wrap; a line with an odd number of values starts a new
/// frequency block (frequency plus complex pairs). Version 2 keywords,
/// non-S parameter types and port counts other than 4 are rejected.
/// Throws ParseError with the offending line number.
NetworkData parse_touchstone(std::string_view text, const TouchstoneReadOptions& options = {},
                             std::vector<std::string>* warnings = nullptr);

NetworkData read_touchstone(const std::filesystem::path& path, const TouchstoneReadOptions& options = {},
                            std::vector<std::string>* warnings = nullptr);

/// Serializes in file-port order with frequencies in Hz. Output is a pure
/// function of the inputs (C-locale %g formatting).
std::string write_touchstone(const NetworkData& net, DataFormat format = DataFormat::RI,
                             int significant_digits = 9);

void save_touchstone(const std::filesystem::path& path, const NetworkData& net,
                     DataFormat format = DataFormat::RI, int significant_digits = 9);

}  // namespace sivar
