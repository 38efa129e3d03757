#pragma once

// Complex baseband signal container and the power convention shared by
// every module.
//
// Power convention: samples are volts across a unit reference impedance, so
// mean|x|^2 is in watts and dBm = 10*log10(mean|x|^2) + 30. A 0 dBm signal
// therefore has mean|x|^2 = 1e-3.

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "fdlab/errors.hpp"

namespace fdlab {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Cap used wherever a ratio would be infinite (perfect cancellation).
inline constexpr double kSicCapDb = 150.0;

struct ComplexBasebandSignal {
  std::vector<cdouble> samples;
  double sample_rate_hz = 1.0;
  double ref_impedance_ohm = 1.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

inline double mean_power(std::span<const cdouble> x) {
  if (x.empty()) throw DomainError("mean power of an empty signal");
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

inline double watts_to_dbm(double watts) {
  if (watts <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(watts) + 30.0;
}

inline double dbm_to_watts(double dbm) {
  if (std::isinf(dbm) && dbm < 0) return 0.0;
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

// RMS amplitude of a signal at the given power.
inline double dbm_to_amplitude(double dbm) { return std::sqrt(dbm_to_watts(dbm)); }

inline double db_to_amplitude_ratio(double db) { return std::pow(10.0, db / 20.0); }

inline double power_dbm(std::span<const cdouble> x) { return watts_to_dbm(mean_power(x)); }

inline double power_dbm(const ComplexBasebandSignal& sig) { return power_dbm(std::span<const cdouble>(sig.samples)); }

// 10*log10(num/den) capped at +/-kSicCapDb.
inline double ratio_db_capped(double num, double den) {
  if (den <= 0.0) return num <= 0.0 ? 0.0 : kSicCapDb;
  if (num <= 0.0) return -kSicCapDb;
  double db = 10.0 * std::log10(num / den);
  if (db > kSicCapDb) return kSicCapDb;
  if (db < -kSicCapDb) return -kSicCapDb;
  return db;
}

inline bool all_finite(std::span<const cdouble> x) {
  for (const auto& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

}  // namespace fdlab
