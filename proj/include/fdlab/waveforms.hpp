#pragma once

// Test-signal generators, the TX power-amplifier model and receiver noise.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdlab/errors.hpp"
#include "fdlab/random.hpp"
#include "fdlab/signal.hpp"

namespace fdlab {

namespace detail {

inline void scale_to_power(std::vector<cdouble>& x, double power_dbm) {
  const double p = mean_power(x);
  if (p <= 0.0) return;
  const double k = std::sqrt(dbm_to_watts(power_dbm) / p);
  for (auto& v : x) v *= k;
}

}  // namespace detail

inline ComplexBasebandSignal gen_tone(double rate_hz, double offset_hz, double power_dbm, std::size_t n) {
  if (!(rate_hz > 0.0)) throw DomainError("sample rate must be > 0");
  if (!(std::abs(offset_hz) < 0.5 * rate_hz)) throw DomainError("tone offset aliases: |offset| >= rate/2");
  if (n == 0) throw DomainError("tone length must be > 0");
  ComplexBasebandSignal s;
  s.sample_rate_hz = rate_hz;
  s.samples.resize(n);
  const double a = dbm_to_amplitude(power_dbm);
  const double step = offset_hz / rate_hz;
  for (std::size_t k = 0; k < n; ++k) {
    // Reduce the phase argument modulo one cycle before scaling to keep long tones exact.
    const double cycles = std::fmod(step * static_cast<double>(k), 1.0);
    s.samples[k] = std::polar(a, kTwoPi * cycles);
  }
  return s;
}

// Root-raised-cosine impulse response, span_symbols * sps + 1 taps, unit energy.
inline std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps) {
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw DomainError("RRC rolloff must lie in (0, 1]");
  if (span_symbols <= 0 || sps <= 0) throw DomainError("RRC span and sps must be positive");
  const int half = span_symbols * sps / 2;
  std::vector<double> h(2 * half + 1);
  const double b = rolloff;
  for (int i = -half; i <= half; ++i) {
    const double t = static_cast<double>(i) / sps;
    double v;
    if (i == 0) {
      v = 1.0 - b + 4.0 * b / kPi;
    } else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-12) {
      v = b / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      v = (std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b))) /
          (kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t)));
    }
    h[i + half] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  for (double& v : h) v /= std::sqrt(e);
  return h;
}

struct PskParams {
  int order = 4;  // 2 = BPSK, 4 = QPSK
  double symbol_rate_hz = 2.5e6;
  double sample_rate_hz = 10e6;
  double rolloff = 0.25;
  int span_symbols = 8;  // 0 disables pulse shaping
  double power_dbm = 0.0;
  std::size_t n_symbols = 1000;
  std::uint64_t seed = 1;
};

inline int oversampling_factor(double sample_rate_hz, double symbol_rate_hz) {
  if (!(sample_rate_hz > 0.0 && symbol_rate_hz > 0.0)) throw DomainError("rates must be > 0");
  const double r = sample_rate_hz / symbol_rate_hz;
  const double ri = std::round(r);
  if (ri < 1.0 || std::abs(r - ri) > 1e-9 * r) throw DomainError("sample rate is not an integer multiple of symbol rate");
  return static_cast<int>(ri);
}

// Uniform random symbols on the unit circle (BPSK at 0/180 deg, QPSK at 45 + k*90 deg),
// zero-stuffed to the sample rate, RRC filtered (delay-compensated) and scaled to power_dbm.
inline ComplexBasebandSignal gen_psk(const PskParams& p) {
  if (p.order != 2 && p.order != 4) throw DomainError("PSK order must be 2 or 4");
  if (p.n_symbols == 0) throw DomainError("PSK needs at least one symbol");
  const int sps = oversampling_factor(p.sample_rate_hz, p.symbol_rate_hz);

  Rng rng(p.seed);
  std::vector<cdouble> up(p.n_symbols * static_cast<std::size_t>(sps), cdouble{0.0, 0.0});
  for (std::size_t k = 0; k < p.n_symbols; ++k) {
    const auto sym = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(p.order));
    const double phase = p.order == 2 ? kPi * sym : kPi / 4.0 + kPi / 2.0 * sym;
    up[k * sps] = std::polar(1.0, phase);
  }

  ComplexBasebandSignal s;
  s.sample_rate_hz = p.sample_rate_hz;
  if (p.span_symbols == 0) {
    s.samples = std::move(up);
  } else {
    const auto h = rrc_taps(p.rolloff, p.span_symbols, sps);
    const long half = static_cast<long>(h.size() / 2);
    const long n = static_cast<long>(up.size());
    s.samples.assign(up.size(), cdouble{0.0, 0.0});
    for (long i = 0; i < n; ++i) {
      if (up[i] == cdouble{0.0, 0.0}) continue;
      for (long t = 0; t < static_cast<long>(h.size()); ++t) {
        const long dst = i + t - half;
        if (dst >= 0 && dst < n) s.samples[dst] += up[i] * h[t];
      }
    }
  }
  detail::scale_to_power(s.samples, p.power_dbm);
  return s;
}

struct TxChainParams {
  cdouble pa_a3 = std::polar(0.005, 10.0 * kPi / 180.0);
  cdouble pa_a5 = std::polar(0.0001, -20.0 * kPi / 180.0);
  double tx_gain_db = 0.0;
  // Input power that corresponds to unit drive amplitude. 30 dBm (1 W, |x| = 1)
  // makes apply_pa the literal polynomial in x.
  double drive_ref_dbm = 30.0;

  void validate() const {
    if (!std::isfinite(pa_a3.real()) || !std::isfinite(pa_a3.imag()) || !std::isfinite(pa_a5.real()) ||
        !std::isfinite(pa_a5.imag()) || !std::isfinite(tx_gain_db) || !std::isfinite(drive_ref_dbm))
      throw ConfigError("TX chain parameters must be finite");
  }
};

// Memoryless odd-order PA: y = g * A * (u + a3 u|u|^2 + a5 u|u|^4), u = x / A.
inline ComplexBasebandSignal apply_pa(const ComplexBasebandSignal& tx, const TxChainParams& params) {
  params.validate();
  if (!all_finite(tx.samples)) throw DomainError("PA input has non-finite samples");
  const double a_ref = dbm_to_amplitude(params.drive_ref_dbm);
  const double g = db_to_amplitude_ratio(params.tx_gain_db);
  ComplexBasebandSignal out;
  out.sample_rate_hz = tx.sample_rate_hz;
  out.ref_impedance_ohm = tx.ref_impedance_ohm;
  out.samples.resize(tx.size());
  for (std::size_t i = 0; i < tx.size(); ++i) {
    const cdouble u = tx.samples[i] / a_ref;
    const double m2 = std::norm(u);
    out.samples[i] = g * a_ref * (u + params.pa_a3 * u * m2 + params.pa_a5 * u * m2 * m2);
  }
  return out;
}

// Adds circular complex Gaussian noise whose total power over the full sample
// rate is noise_floor_dbm. -inf disables.
inline ComplexBasebandSignal add_awgn(const ComplexBasebandSignal& sig, double noise_floor_dbm, std::uint64_t seed) {
  if (!all_finite(sig.samples)) throw DomainError("AWGN input has non-finite samples");
  ComplexBasebandSignal out = sig;
  if (std::isinf(noise_floor_dbm) && noise_floor_dbm < 0) return out;
  Rng rng(seed);
  const double var = dbm_to_watts(noise_floor_dbm);
  for (auto& v : out.samples) v += rng.complex_gaussian(var);
  return out;
}

// --- raw I/Q files: little-endian interleaved float32 plus a JSON sidecar ---

struct IqSidecar {
  double sample_rate_hz = 1.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string format = "cf32_le";
  std::string power_convention = "dBm = 10*log10(mean|x|^2) + 30, unit reference impedance";
};

inline nlohmann::json to_json(const IqSidecar& s) {
  return nlohmann::json{{"format", s.format},
                        {"sample_rate_hz", s.sample_rate_hz},
                        {"n_samples", s.n_samples},
                        {"seed", s.seed},
                        {"power_convention", s.power_convention}};
}

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace detail

inline void write_iq(const std::string& path, const ComplexBasebandSignal& sig, std::uint64_t seed = 0) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& v : sig.samples) {
    for (float c : {static_cast<float>(v.real()), static_cast<float>(v.imag())}) {
      const std::uint32_t le = detail::to_le(std::bit_cast<std::uint32_t>(c));
      f.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
  IqSidecar side;
  side.sample_rate_hz = sig.sample_rate_hz;
  side.n_samples = sig.size();
  side.seed = seed;
  std::ofstream j(path + ".json");
  if (!j) throw std::runtime_error("cannot open " + path + ".json for writing");
  j << to_json(side).dump(2) << '\n';
}

inline ComplexBasebandSignal read_iq(const std::string& path) {
  std::ifstream j(path + ".json");
  if (!j) throw std::runtime_error("missing sidecar " + path + ".json");
  const auto side = nlohmann::json::parse(j);
  if (side.value("format", std::string{}) != "cf32_le") throw ConfigError("unsupported I/Q format in " + path);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  ComplexBasebandSignal sig;
  sig.sample_rate_hz = side.at("sample_rate_hz").get<double>();
  const auto n = side.at("n_samples").get<std::size_t>();
  sig.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t w[2];
    f.read(reinterpret_cast<char*>(w), sizeof w);
    if (!f) throw std::runtime_error("truncated I/Q file " + path);
    sig.samples.emplace_back(std::bit_cast<float>(detail::to_le(w[0])), std::bit_cast<float>(detail::to_le(w[1])));
  }
  return sig;
}

}  // namespace fdlab
