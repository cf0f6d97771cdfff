#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sivar {

using cplx = std::complex<double>;
using SMatrix4 = Eigen::Matrix4cd;
using SMatrix2 = Eigen::Matrix2cd;

/// Logical port roles of a differential net.
///
/// Analysis code always addresses ports logically: 1 = P near, 2 = P far,
/// 3 = N near, 4 = N far, so S21 and S43 are the P and N through paths.
/// A PortMap records which file port carries each logical role.
struct PortMap {
  std::array<int, 4> file_port{1, 2, 3, 4};

  /// Exchanges the P and N conductor roles.
  static PortMap swapped_pn() { return PortMap{{3, 4, 1, 2}}; }
  bool is_valid() const;
  bool operator==(const PortMap&) const = default;
};

/// 4-port S-parameters sampled on an ascending frequency grid.
struct NetworkData {
  std::vector<double> freqs_hz;
  std::vector<SMatrix4> s;  // indexed by file port (0-based)
  double z_ref_ohm = 50.0;
  PortMap port_map;

  std::size_t size() const { return freqs_hz.size(); }

  /// Throws sivar::Error when an invariant is violated.
  void validate() const;

  /// S(out, in) addressed by logical port numbers (1..4).
  cplx logical(std::size_t k, int out, int in) const;
  std::vector<cplx> logical_series(int out, int in) const;
};

/// Two-port block on a frequency grid; used for differential-mode link components.
struct DiffBlock {
  std::vector<double> freqs_hz;
  std::vector<SMatrix2> s;
  double z_ref_ohm = 100.0;

  std::size_t size() const { return freqs_hz.size(); }
  void validate() const;
  std::vector<cplx> s21() const;

  /// Ideal through (S21 = S12 = 1, S11 = S22 = 0).
  static DiffBlock through(std::vector<double> freqs_hz, double z_ref_ohm = 100.0);
  /// Matched ideal delay of `delay_s`.
  static DiffBlock delay(std::vector<double> freqs_hz, double delay_s, double z_ref_ohm = 100.0);
};

/// Mixed-mode view of a 4-port: differential port 1 = (P near, N near), port 2 = (P far, N far).
struct MixedModeNetwork {
  std::vector<double> freqs_hz;
  std::vector<SMatrix2> sdd, sdc, scd, scc;
  double z_ref_diff_ohm = 100.0;
  double z_ref_comm_ohm = 25.0;

  std::size_t size() const { return freqs_hz.size(); }

  std::vector<cplx> sdd21() const;
  std::vector<cplx> sdd11() const;
  std::vector<cplx> scd21() const;

  /// The SDD block as a stand-alone differential two-port.
  DiffBlock differential() const;
};

MixedModeNetwork to_mixed_mode(const NetworkData& net);

/// Series connection: port 2 of `a` feeds port 1 of `b`.
///
/// Uses transfer (T) parameters. Throws NumericError naming the frequency index
/// where either block has S21 == 0, and Error on grid or reference mismatch.
DiffBlock cascade_diff(const DiffBlock& a, const DiffBlock& b);

/// Cascades a chain left to right; the chain must not be empty.
DiffBlock cascade_chain(std::span<const DiffBlock> chain);

/// Largest singular value of S over all frequencies.
double max_singular_value(const NetworkData& net);

}  // namespace sivar
