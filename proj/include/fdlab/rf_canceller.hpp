#pragma once

// Frequency-flat amplitude/phase RF canceller: code quantization, the
// residual SI response after subtraction at the LNA input, RF SIC metrics and
// code-space search.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "fdlab/channel_models.hpp"
#include "fdlab/errors.hpp"
#include "fdlab/signal.hpp"

namespace fdlab {

inline constexpr int kAttCodes = 128;
inline constexpr int kPsCodes = 256;
inline constexpr int kCapCodes = 32;

struct CancellerCode {
  int att = 30;
  int ps = 110;
  std::array<int, 3> caps{16, 6, 6};

  void validate() const {
    check_range("ATT", att, 0, kAttCodes - 1);
    check_range("PS", ps, 0, kPsCodes - 1);
    for (int i = 0; i < 3; ++i) check_range("CAP" + std::to_string(i + 1), caps[i], 0, kCapCodes - 1);
  }

  friend bool operator==(const CancellerCode&, const CancellerCode&) = default;
};

// Code the canceller box ships with.
inline CancellerCode factory_canceller_code() { return CancellerCode{30, 110, {16, 6, 6}}; }

enum class AttenuatorLaw {
  ideal,     // code * att_step_db
  measured,  // saturating map reaching measured_span_db at code 127
};

struct CancellerParams {
  double coupler_tap_db = 6.0;
  double base_loss_db = 11.5;  // coupler + base = 17.5 dB path loss at ATT = 0
  double att_step_db = 0.25;
  double phase_span_deg = 360.0;
  AttenuatorLaw law = AttenuatorLaw::ideal;
  double measured_span_db = 29.0;

  void validate() const {
    if (!(att_step_db > 0.0)) throw ConfigError("att_step_db must be > 0");
    if (!(base_loss_db > 0.0)) throw ConfigError("base_loss_db must be > 0");
    if (!(phase_span_deg > 0.0)) throw ConfigError("phase_span_deg must be > 0");
    if (law == AttenuatorLaw::measured && !(measured_span_db > 0.0 && measured_span_db < (kAttCodes - 1) * att_step_db))
      throw ConfigError("measured_span_db must lie in (0, ideal span)");
  }
};

namespace detail {

// Scale S with S * tanh(ideal_span / S) = measured_span (bisection; the map is monotone in S).
inline double saturation_scale(double ideal_span, double measured_span) {
  double lo = 1e-6, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (mid * std::tanh(ideal_span / mid) < measured_span)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace detail

inline double att_code_to_attenuation_db(int code, const CancellerParams& params) {
  check_range("ATT", code, 0, kAttCodes - 1);
  const double ideal = static_cast<double>(code) * params.att_step_db;
  if (params.law == AttenuatorLaw::ideal) return ideal;
  const double s = detail::saturation_scale((kAttCodes - 1) * params.att_step_db, params.measured_span_db);
  return s * std::tanh(ideal / s);
}

inline double ps_code_to_phase_deg(int code, const CancellerParams& params) {
  check_range("PS", code, 0, kPsCodes - 1);
  return static_cast<double>(code) * (params.phase_span_deg / kPsCodes);
}

// Complex path gain of the canceller for an (att, ps) pair.
inline cdouble canceller_gain_value(int att, int ps, const CancellerParams& params) {
  const double loss_db = params.coupler_tap_db + params.base_loss_db + att_code_to_attenuation_db(att, params);
  return std::polar(db_to_amplitude_ratio(-loss_db), ps_code_to_phase_deg(ps, params) * kPi / 180.0);
}

inline FrequencyResponse canceller_gain(const CancellerCode& code, const CancellerParams& params,
                                        std::span<const double> freq_grid) {
  code.validate();
  params.validate();
  if (freq_grid.empty()) throw DomainError("empty frequency grid");
  FrequencyResponse r;
  r.freqs.assign(freq_grid.begin(), freq_grid.end());
  r.gains.assign(freq_grid.size(), canceller_gain_value(code.att, code.ps, params));
  return r;
}

// The canceller output is subtracted at the RX combiner.
inline FrequencyResponse residual_response(const FrequencyResponse& h_si, const FrequencyResponse& h_c) {
  if (!same_grid(h_si, h_c) || h_si.gains.size() != h_c.gains.size())
    throw ShapeError("residual_response needs identical frequency grids");
  FrequencyResponse r;
  r.freqs = h_si.freqs;
  r.gains.resize(h_si.gains.size());
  for (std::size_t i = 0; i < r.gains.size(); ++i) r.gains[i] = h_si.gains[i] - h_c.gains[i];
  return r;
}

struct Band {
  double lo_hz = -2.5e6;
  double hi_hz = 2.5e6;

  static Band centered(double width_hz) { return Band{-0.5 * width_hz, 0.5 * width_hz}; }
  double width() const noexcept { return hi_hz - lo_hz; }
  bool contains(double f) const noexcept { return f >= lo_hz && f <= hi_hz; }
};

namespace detail {

inline std::vector<std::size_t> band_indices(const FrequencyResponse& h, const Band& band) {
  if (!(band.hi_hz >= band.lo_hz)) throw DomainError("band upper edge below lower edge");
  const double tol = 1e-9 * std::max(1.0, std::abs(band.hi_hz) + std::abs(band.lo_hz));
  if (band.lo_hz < h.freqs.front() - tol || band.hi_hz > h.freqs.back() + tol)
    throw DomainError("band extends beyond the response grid");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < h.freqs.size(); ++i)
    if (h.freqs[i] >= band.lo_hz - tol && h.freqs[i] <= band.hi_hz + tol) idx.push_back(i);
  if (idx.empty()) throw DomainError("no grid points inside the band");
  return idx;
}

}  // namespace detail

inline double mean_band_power(const FrequencyResponse& h, const Band& band) {
  const auto idx = detail::band_indices(h, band);
  double acc = 0.0;
  for (auto i : idx) acc += std::norm(h.gains[i]);
  return acc / static_cast<double>(idx.size());
}

inline double rf_sic_db(const FrequencyResponse& h_before, const FrequencyResponse& h_after, const Band& band) {
  if (!same_grid(h_before, h_after)) throw ShapeError("rf_sic_db needs identical frequency grids");
  return ratio_db_capped(mean_band_power(h_before, band), mean_band_power(h_after, band));
}

// Unity (0 dB) response: the TX reference against which total RF isolation is measured.
inline FrequencyResponse unity_response(std::span<const double> freq_grid) {
  FrequencyResponse r;
  r.freqs.assign(freq_grid.begin(), freq_grid.end());
  r.gains.assign(freq_grid.size(), cdouble{1.0, 0.0});
  return r;
}

enum class TuneStrategy { exhaustive, coordinate_descent };

struct TuneResult {
  CancellerCode code;
  double sic_db = 0.0;  // canceller contribution: rf_sic_db(h_si, h_si - h_c)
  int sweeps = 0;       // coordinate descent only
};

namespace detail {

// In-band residual power for a flat gain g is E|h|^2 - 2 Re(conj(g) E[h]) + |g|^2,
// so each code costs O(1) once the band moments are known.
struct BandMoments {
  cdouble mean{0.0, 0.0};
  double mean_sq = 0.0;

  double residual_power(cdouble g) const { return mean_sq - 2.0 * std::real(std::conj(g) * mean) + std::norm(g); }
};

inline BandMoments band_moments(const FrequencyResponse& h, const Band& band) {
  const auto idx = band_indices(h, band);
  BandMoments m;
  for (auto i : idx) {
    m.mean += h.gains[i];
    m.mean_sq += std::norm(h.gains[i]);
  }
  m.mean /= static_cast<double>(idx.size());
  m.mean_sq /= static_cast<double>(idx.size());
  return m;
}

struct Candidate {
  int att = 0;
  int ps = 0;
  double cost = std::numeric_limits<double>::infinity();
};

// Costs within this relative distance count as equal.
inline constexpr double kTieTolerance = 1e-12;

// Lexicographic (att, ps) tie-break: the earlier code wins on equal cost.
inline bool better(const Candidate& a, const Candidate& b) {
  if (std::abs(a.cost - b.cost) > kTieTolerance * std::max(std::abs(a.cost), std::abs(b.cost)) ||
      !std::isfinite(b.cost))
    return a.cost < b.cost;
  if (a.att != b.att) return a.att < b.att;
  return a.ps < b.ps;
}

inline Candidate scan_att_range(const BandMoments& m, const CancellerParams& params, int att_lo, int att_hi) {
  Candidate best;
  for (int att = att_lo; att < att_hi; ++att) {
    for (int ps = 0; ps < kPsCodes; ++ps) {
      const Candidate c{att, ps, m.residual_power(canceller_gain_value(att, ps, params))};
      if (better(c, best)) best = c;
    }
  }
  return best;
}

}  // namespace detail

// Exhaustive search over all 128 x 256 ATT/PS pairs with caps held fixed.
// The ATT axis is partitioned across `workers` threads.
inline TuneResult tune_exhaustive(const FrequencyResponse& h_si, const CancellerParams& params, const Band& band,
                                  std::array<int, 3> caps = {16, 6, 6}, unsigned workers = 1) {
  params.validate();
  const auto moments = detail::band_moments(h_si, band);
  workers = std::clamp(workers, 1u, static_cast<unsigned>(kAttCodes));
  std::vector<detail::Candidate> partial(workers);
  if (workers == 1) {
    partial[0] = detail::scan_att_range(moments, params, 0, kAttCodes);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      const int lo = static_cast<int>(w * kAttCodes / workers);
      const int hi = static_cast<int>((w + 1) * kAttCodes / workers);
      pool.emplace_back([&, w, lo, hi] { partial[w] = detail::scan_att_range(moments, params, lo, hi); });
    }
    for (auto& t : pool) t.join();
  }
  detail::Candidate best;
  for (const auto& c : partial)
    if (detail::better(c, best)) best = c;

  TuneResult r;
  r.code = CancellerCode{best.att, best.ps, caps};
  r.sic_db = ratio_db_capped(moments.mean_sq, best.cost);
  return r;
}

// Alternating full sweeps over ATT (PS fixed) then PS (ATT fixed) until a
// sweep changes nothing, at most max_sweeps sweeps.
inline TuneResult tune_coordinate_descent(const FrequencyResponse& h_si, const CancellerParams& params,
                                          const Band& band, CancellerCode start = CancellerCode{},
                                          int max_sweeps = 20) {
  params.validate();
  start.validate();
  const auto m = detail::band_moments(h_si, band);
  detail::Candidate cur{start.att, start.ps, m.residual_power(canceller_gain_value(start.att, start.ps, params))};
  int sweeps = 0;
  while (sweeps < max_sweeps) {
    ++sweeps;
    const detail::Candidate before = cur;
    for (int att = 0; att < kAttCodes; ++att) {
      const detail::Candidate c{att, cur.ps, m.residual_power(canceller_gain_value(att, cur.ps, params))};
      if (c.cost < cur.cost) cur = c;
    }
    for (int ps = 0; ps < kPsCodes; ++ps) {
      const detail::Candidate c{cur.att, ps, m.residual_power(canceller_gain_value(cur.att, ps, params))};
      if (c.cost < cur.cost) cur = c;
    }
    if (cur.att == before.att && cur.ps == before.ps) break;
  }
  TuneResult r;
  r.code = CancellerCode{cur.att, cur.ps, start.caps};
  r.sic_db = ratio_db_capped(m.mean_sq, cur.cost);
  r.sweeps = sweeps;
  return r;
}

inline TuneResult tune_canceller(const FrequencyResponse& h_si, const CancellerParams& params, const Band& band,
                                 TuneStrategy strategy, std::array<int, 3> caps = {16, 6, 6},
                                 unsigned workers = 1) {
  h_si.validate();
  if (strategy == TuneStrategy::exhaustive) return tune_exhaustive(h_si, params, band, caps, workers);
  CancellerCode start{0, 0, caps};
  return tune_coordinate_descent(h_si, params, band, start);
}

}  // namespace fdlab
