#include "sivar/sparams.hpp"

#include "sivar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sivar {

namespace {

void check_grid(const std::vector<double>& f, std::size_t n_matrices, const char* what) {
  if (f.size() < 2) throw Error(std::string(what) + ": need at least 2 frequency points");
  if (n_matrices != f.size()) throw Error(std::string(what) + ": matrix count does not match frequency count");
  for (std::size_t k = 1; k < f.size(); ++k) {
    if (!(f[k] > f[k - 1])) throw NumericError(k, std::string(what) + ": frequencies not strictly increasing");
  }
}

// Rows: d1, d2, c1, c2. Columns: logical ports P near, P far, N near, N far.
const Eigen::Matrix4d& mode_matrix() {
  static const Eigen::Matrix4d m = [] {
    Eigen::Matrix4d x;
    x << 1, 0, -1, 0,
         0, 1, 0, -1,
         1, 0, 1, 0,
         0, 1, 0, 1;
    return Eigen::Matrix4d(x / std::numbers::sqrt2);
  }();
  return m;
}

Eigen::Matrix2cd s_to_t(const SMatrix2& s, std::size_t k) {
  const cplx s21 = s(1, 0);
  if (s21 == cplx(0.0)) throw NumericError(k, "cascade: S21 is zero, transfer parameters undefined");
  const cplx det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  Eigen::Matrix2cd t;
  t << -det / s21, s(0, 0) / s21,
       -s(1, 1) / s21, 1.0 / s21;
  return t;
}

SMatrix2 t_to_s(const Eigen::Matrix2cd& t, std::size_t k) {
  const cplx t22 = t(1, 1);
  if (t22 == cplx(0.0)) throw NumericError(k, "cascade: singular transfer matrix");
  const cplx det = t(0, 0) * t(1, 1) - t(0, 1) * t(1, 0);
  SMatrix2 s;
  s << t(0, 1) / t22, det / t22,
       1.0 / t22, -t(1, 0) / t22;
  return s;
}

}  // namespace

bool PortMap::is_valid() const {
  std::array<int, 4> sorted = file_port;
  std::sort(sorted.begin(), sorted.end());
  return sorted == std::array<int, 4>{1, 2, 3, 4};
}

void NetworkData::validate() const {
  check_grid(freqs_hz, s.size(), "network");
  if (!(z_ref_ohm > 0.0)) throw Error("network: reference impedance must be positive");
  if (!port_map.is_valid()) throw Error("network: port map must be a permutation of 1..4");
}

cplx NetworkData::logical(std::size_t k, int out, int in) const {
  return s[k](port_map.file_port[out - 1] - 1, port_map.file_port[in - 1] - 1);
}

std::vector<cplx> NetworkData::logical_series(int out, int in) const {
  std::vector<cplx> v(size());
  for (std::size_t k = 0; k < size(); ++k) v[k] = logical(k, out, in);
  return v;
}

void DiffBlock::validate() const {
  check_grid(freqs_hz, s.size(), "two-port block");
  if (!(z_ref_ohm > 0.0)) throw Error("two-port block: reference impedance must be positive");
}

std::vector<cplx> DiffBlock::s21() const {
  std::vector<cplx> v(size());
  for (std::size_t k = 0; k < size(); ++k) v[k] = s[k](1, 0);
  return v;
}

DiffBlock DiffBlock::through(std::vector<double> freqs_hz, double z_ref_ohm) {
  return delay(std::move(freqs_hz), 0.0, z_ref_ohm);
}

DiffBlock DiffBlock::delay(std::vector<double> freqs_hz, double delay_s, double z_ref_ohm) {
  DiffBlock b;
  b.z_ref_ohm = z_ref_ohm;
  b.s.reserve(freqs_hz.size());
  for (double f : freqs_hz) {
    const cplx d = std::polar(1.0, -2.0 * std::numbers::pi * f * delay_s);
    SMatrix2 m;
    m << 0.0, d, d, 0.0;
    b.s.push_back(m);
  }
  b.freqs_hz = std::move(freqs_hz);
  return b;
}

std::vector<cplx> MixedModeNetwork::sdd21() const {
  std::vector<cplx> v(size());
  for (std::size_t k = 0; k < size(); ++k) v[k] = sdd[k](1, 0);
  return v;
}

std::vector<cplx> MixedModeNetwork::sdd11() const {
  std::vector<cplx> v(size());
  for (std::size_t k = 0; k < size(); ++k) v[k] = sdd[k](0, 0);
  return v;
}

std::vector<cplx> MixedModeNetwork::scd21() const {
  std::vector<cplx> v(size());
  for (std::size_t k = 0; k < size(); ++k) v[k] = scd[k](1, 0);
  return v;
}

DiffBlock MixedModeNetwork::differential() const {
  DiffBlock b;
  b.freqs_hz = freqs_hz;
  b.s = sdd;
  b.z_ref_ohm = z_ref_diff_ohm;
  return b;
}

MixedModeNetwork to_mixed_mode(const NetworkData& net) {
  const Eigen::Matrix4d& m = mode_matrix();
  MixedModeNetwork mm;
  mm.freqs_hz = net.freqs_hz;
  mm.z_ref_diff_ohm = 2.0 * net.z_ref_ohm;
  mm.z_ref_comm_ohm = net.z_ref_ohm / 2.0;
  const std::size_t n = net.size();
  mm.sdd.resize(n);
  mm.sdc.resize(n);
  mm.scd.resize(n);
  mm.scc.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    SMatrix4 logical;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) logical(i, j) = net.logical(k, i + 1, j + 1);
    // M is real orthogonal, so its inverse is its transpose.
    const SMatrix4 smm = m.cast<cplx>() * logical * m.transpose().cast<cplx>();
    mm.sdd[k] = smm.block<2, 2>(0, 0);
    mm.sdc[k] = smm.block<2, 2>(0, 2);
    mm.scd[k] = smm.block<2, 2>(2, 0);
    mm.scc[k] = smm.block<2, 2>(2, 2);
  }
  return mm;
}

DiffBlock cascade_diff(const DiffBlock& a, const DiffBlock& b) {
  if (a.freqs_hz.size() != b.freqs_hz.size()) throw Error("cascade: frequency grids differ in length");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double tol = 1e-9 * std::max(1.0, std::abs(a.freqs_hz[k]));
    if (std::abs(a.freqs_hz[k] - b.freqs_hz[k]) > tol) throw NumericError(k, "cascade: frequency grids differ");
  }
  if (std::abs(a.z_ref_ohm - b.z_ref_ohm) > 1e-12 * a.z_ref_ohm) throw Error("cascade: reference impedances differ");

  DiffBlock out;
  out.freqs_hz = a.freqs_hz;
  out.z_ref_ohm = a.z_ref_ohm;
  out.s.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.s[k] = t_to_s(s_to_t(a.s[k], k) * s_to_t(b.s[k], k), k);
  }
  return out;
}

DiffBlock cascade_chain(std::span<const DiffBlock> chain) {
  if (chain.empty()) throw Error("cascade: empty chain");
  DiffBlock acc = chain.front();
  for (std::size_t i = 1; i < chain.size(); ++i) acc = cascade_diff(acc, chain[i]);
  return acc;
}

double max_singular_value(const NetworkData& net) {
  double worst = 0.0;
  for (const auto& m : net.s) {
    Eigen::JacobiSVD<SMatrix4> svd(m);
    worst = std::max(worst, svd.singularValues()(0));
  }
  return worst;
}

}  // namespace sivar
