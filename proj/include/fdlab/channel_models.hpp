#pragma once

// Everything between the TX port and the RX port that is not the canceller:
// circulator leakage, the programmable pi-network antenna tuner, the antenna
// load, and optional environmental backscatter. All responses are
// baseband-equivalent around the carrier.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "fdlab/errors.hpp"
#include "fdlab/signal.hpp"

namespace fdlab {

struct FrequencyResponse {
  std::vector<double> freqs;   // baseband offsets, Hz, strictly increasing
  std::vector<cdouble> gains;  // linear complex gain per frequency

  std::size_t size() const noexcept { return freqs.size(); }

  void validate() const {
    if (freqs.empty() || freqs.size() != gains.size())
      throw ShapeError("frequency response needs equal, nonzero freqs/gains lengths");
    for (std::size_t i = 1; i < freqs.size(); ++i)
      if (!(freqs[i] > freqs[i - 1])) throw ShapeError("frequency grid must be strictly increasing");
    if (!all_finite(gains)) throw DomainError("frequency response has non-finite gains");
  }
};

inline std::vector<double> linear_grid(double lo_hz, double hi_hz, std::size_t points) {
  if (points == 0) throw DomainError("empty frequency grid");
  if (points == 1) return {0.5 * (lo_hz + hi_hz)};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo_hz + (hi_hz - lo_hz) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

inline bool same_grid(const FrequencyResponse& a, const FrequencyResponse& b) {
  return a.freqs == b.freqs;
}

struct CirculatorParams {
  double isolation_db = 20.0;      // TX->RX leakage loss
  double leakage_delay_ns = 5.0;   // group delay of the leakage path
  double insertion_loss_db = 1.5;  // per pass: TX->ANT, and again ANT->RX

  void validate() const {
    if (!(isolation_db > 0.0)) throw ConfigError("circulator isolation_db must be > 0");
    if (!(insertion_loss_db >= 0.0)) throw ConfigError("circulator insertion_loss_db must be >= 0");
    if (!(leakage_delay_ns >= 0.0)) throw ConfigError("circulator leakage_delay_ns must be >= 0");
  }
};

struct AntennaImpedance {
  cdouble z{40.0, -3.0};             // ohms at the carrier
  cdouble slope_ohm_per_hz{0.0, 0.0};  // linear drift vs baseband offset

  cdouble at_offset(double offset_hz) const { return z + slope_ohm_per_hz * offset_hz; }

  void validate() const {
    if (z.real() < 0.0) throw ConfigError("antenna impedance must have a non-negative real part");
  }
};

// Which pi-network wiring the three capacitors and the inductor use.
//   parallel_lc: shunt C1 | series branch (L parallel C2) | shunt C3   (default)
//   series_lc:   shunt C1 | series branch (L in series with C2) | shunt C3
//   shunt_c1:    shunt C1 only (L, C2, C3 removed)
//   bypass:      no tuner; the antenna is seen directly
enum class TunerTopology { parallel_lc, series_lc, shunt_c1, bypass };

struct TunerConfig {
  std::array<int, 3> cap_codes{16, 6, 6};
  double inductance_h = 5.1e-9;
  double cap_min_f = 0.6e-12;
  double cap_step_f = 0.131e-12;
  TunerTopology topology = TunerTopology::parallel_lc;

  void validate() const {
    for (int i = 0; i < 3; ++i) check_range("CAP" + std::to_string(i + 1), cap_codes[i], 0, 31);
    if (!(inductance_h > 0.0)) throw ConfigError("tuner inductance_h must be > 0");
    if (!(cap_min_f > 0.0)) throw ConfigError("tuner cap_min_f must be > 0");
    if (!(cap_step_f > 0.0)) throw ConfigError("tuner cap_step_f must be > 0");
  }
};

// One environmental backscatter path (radiated TX reflected back into the antenna).
struct BackscatterPath {
  double gain_db = -44.0;
  double delay_ns = 400.0;
  double phase_deg = 0.0;
};

inline double cap_code_to_capacitance(int code, const TunerConfig& cfg) {
  check_range("CAP code", code, 0, 31);
  return cfg.cap_min_f + static_cast<double>(code) * cfg.cap_step_f;
}

namespace detail {

inline cdouble parallel(cdouble a, cdouble b) { return a * b / (a + b); }

inline cdouble capacitor_z(double c, double w) { return cdouble(0.0, -1.0 / (w * c)); }

}  // namespace detail

// Input impedance of the pi-network seen from the circulator side, with
// explicit element values. Composition runs from the antenna toward the
// circulator: shunt C3, series branch, shunt C1.
inline cdouble pi_network_input_impedance(TunerTopology topology, double c1_f, double c2_f, double c3_f,
                                          double inductance_h, cdouble load, double freq_hz) {
  if (!(freq_hz > 0.0)) throw DomainError("tuner impedance needs a positive frequency");
  const double w = kTwoPi * freq_hz;
  using detail::capacitor_z;
  using detail::parallel;
  switch (topology) {
    case TunerTopology::bypass:
      return load;
    case TunerTopology::shunt_c1:
      return parallel(load, capacitor_z(c1_f, w));
    case TunerTopology::parallel_lc: {
      cdouble z = parallel(load, capacitor_z(c3_f, w));
      z += parallel(cdouble(0.0, w * inductance_h), capacitor_z(c2_f, w));
      return parallel(z, capacitor_z(c1_f, w));
    }
    case TunerTopology::series_lc: {
      cdouble z = parallel(load, capacitor_z(c3_f, w));
      z += cdouble(0.0, w * inductance_h) + capacitor_z(c2_f, w);
      return parallel(z, capacitor_z(c1_f, w));
    }
  }
  throw ConfigError("unknown tuner topology");
}

inline cdouble tuner_input_impedance(const TunerConfig& cfg, const AntennaImpedance& load, double freq_hz,
                                     double offset_hz = 0.0) {
  cfg.validate();
  return pi_network_input_impedance(cfg.topology, cap_code_to_capacitance(cfg.cap_codes[0], cfg),
                                    cap_code_to_capacitance(cfg.cap_codes[1], cfg),
                                    cap_code_to_capacitance(cfg.cap_codes[2], cfg), cfg.inductance_h,
                                    load.at_offset(offset_hz), freq_hz);
}

inline cdouble reflection_coefficient(cdouble z, cdouble z0) {
  const cdouble den = z + z0;
  if (std::abs(den) <= 1e-300) throw SingularityError("reflection coefficient undefined for z = -z0");
  return (z - z0) / den;
}

// Composite TX->RX self-interference gain at one baseband offset:
//   direct leakage + IL * Gamma(tuner input) * IL + sum(backscatter).
inline cdouble si_channel_gain(const CirculatorParams& circ, const TunerConfig& tuner, const AntennaImpedance& ant,
                               double offset_hz, double carrier_hz, std::span<const BackscatterPath> backscatter = {},
                               double z0_ohm = 50.0) {
  const double leak_mag = db_to_amplitude_ratio(-circ.isolation_db);
  const double il = db_to_amplitude_ratio(-circ.insertion_loss_db);
  cdouble h = std::polar(leak_mag, -kTwoPi * offset_hz * circ.leakage_delay_ns * 1e-9);
  const cdouble zin = tuner_input_impedance(tuner, ant, carrier_hz + offset_hz, offset_hz);
  h += il * il * reflection_coefficient(zin, cdouble(z0_ohm, 0.0));
  for (const auto& p : backscatter)
    h += std::polar(db_to_amplitude_ratio(p.gain_db),
                    -kTwoPi * offset_hz * p.delay_ns * 1e-9 + p.phase_deg * kPi / 180.0);
  return h;
}

inline FrequencyResponse si_channel_response(const CirculatorParams& circ, const TunerConfig& tuner,
                                             const AntennaImpedance& ant, std::span<const double> freq_grid,
                                             double carrier_hz, std::span<const BackscatterPath> backscatter = {},
                                             double z0_ohm = 50.0) {
  if (freq_grid.empty()) throw DomainError("empty frequency grid");
  circ.validate();
  tuner.validate();
  ant.validate();
  FrequencyResponse out;
  out.freqs.assign(freq_grid.begin(), freq_grid.end());
  out.gains.resize(freq_grid.size());
  for (std::size_t i = 0; i < freq_grid.size(); ++i)
    out.gains[i] = si_channel_gain(circ, tuner, ant, freq_grid[i], carrier_hz, backscatter, z0_ohm);
  out.validate();
  return out;
}

// Taps h[first_index .. first_index + taps.size() - 1] of an FIR filter.
struct FirTaps {
  int first_index = 0;
  std::vector<cdouble> taps;
};

// Least-squares FIR fit (over a uniform dense grid spanning the full Nyquist
// band) to a continuous baseband response. Equivalent to sampling the
// response on an n_dense-point DFT grid and keeping taps [-pre, post].
inline FirTaps design_fir(const std::function<cdouble(double)>& response, double sample_rate_hz, int pre, int post,
                          int n_dense = 1024) {
  if (pre < 0 || post < 0 || n_dense <= pre + post) throw DomainError("invalid FIR design window");
  std::vector<cdouble> dense(n_dense);
  for (int k = 0; k < n_dense; ++k) {
    const int kk = k < n_dense / 2 ? k : k - n_dense;
    dense[k] = response(static_cast<double>(kk) * sample_rate_hz / n_dense);
  }
  FirTaps fir;
  fir.first_index = -pre;
  fir.taps.resize(pre + post + 1);
  for (int n = -pre; n <= post; ++n) {
    cdouble acc{0.0, 0.0};
    for (int k = 0; k < n_dense; ++k) acc += dense[k] * std::polar(1.0, kTwoPi * k * n / n_dense);
    fir.taps[n + pre] = acc / static_cast<double>(n_dense);
  }
  return fir;
}

// y[n] = sum_m h[m] x[n - m], zero history before x[0].
inline std::vector<cdouble> apply_fir(const FirTaps& fir, std::span<const cdouble> x) {
  std::vector<cdouble> y(x.size(), cdouble{0.0, 0.0});
  const auto n_total = static_cast<long>(x.size());
  for (long n = 0; n < n_total; ++n) {
    cdouble acc{0.0, 0.0};
    for (std::size_t t = 0; t < fir.taps.size(); ++t) {
      const long src = n - (fir.first_index + static_cast<long>(t));
      if (src >= 0 && src < n_total) acc += fir.taps[t] * x[src];
    }
    y[n] = acc;
  }
  return y;
}

}  // namespace fdlab
