#pragma once

// Welch power spectral density with per-bin power normalization: the bins sum
// to the mean signal power (window-power corrected), so the PSD integrates to
// the time-domain power.

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fdlab/errors.hpp"
#include "fdlab/signal.hpp"

namespace fdlab {

enum class Window { hann, rect };

inline const char* window_name(Window w) { return w == Window::hann ? "hann" : "rect"; }

inline Window window_from_name(const std::string& s) {
  if (s == "hann") return Window::hann;
  if (s == "rect") return Window::rect;
  throw ConfigError("unknown window '" + s + "'");
}

// Floor used when a bin carries zero power, so CSV output stays finite.
inline constexpr double kPsdFloorDbm = -300.0;

struct PsdEstimate {
  std::vector<double> freqs_hz;         // DC-centered bin centers
  std::vector<double> psd_dbm_per_bin;  // power per bin
  int nfft = 0;
  Window window = Window::hann;
  double overlap_fraction = 0.5;
  int n_segments = 0;

  // Sum of linear bin powers, in dBm.
  double total_power_dbm() const {
    double w = 0.0;
    for (double p : psd_dbm_per_bin) w += dbm_to_watts(p);
    return watts_to_dbm(w);
  }
};

inline std::vector<double> make_window(Window w, int n) {
  std::vector<double> v(n, 1.0);
  if (w == Window::hann)
    for (int i = 0; i < n; ++i) v[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / n);  // periodic Hann
  return v;
}

inline PsdEstimate welch_psd(const ComplexBasebandSignal& sig, int nfft = 1024, Window window = Window::hann,
                             double overlap_fraction = 0.5) {
  if (nfft <= 0) throw DomainError("nfft must be > 0");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw DomainError("overlap must lie in [0, 1)");
  if (sig.size() < static_cast<std::size_t>(nfft)) throw DomainError("signal shorter than nfft");

  const auto win = make_window(window, nfft);
  double win_energy = 0.0;
  for (double v : win) win_energy += v * v;

  const int step = std::max(1, static_cast<int>(std::lround(nfft * (1.0 - overlap_fraction))));
  Eigen::FFT<double> fft;
  std::vector<cdouble> seg(nfft), spec(nfft);
  std::vector<double> acc(nfft, 0.0);
  int segments = 0;
  for (std::size_t start = 0; start + nfft <= sig.size(); start += step) {
    for (int i = 0; i < nfft; ++i) seg[i] = sig.samples[start + i] * win[i];
    fft.fwd(spec, seg);
    for (int k = 0; k < nfft; ++k) acc[k] += std::norm(spec[k]);
    ++segments;
  }

  PsdEstimate out;
  out.nfft = nfft;
  out.window = window;
  out.overlap_fraction = overlap_fraction;
  out.n_segments = segments;
  out.freqs_hz.resize(nfft);
  out.psd_dbm_per_bin.resize(nfft);
  const double norm = 1.0 / (static_cast<double>(segments) * nfft * win_energy);
  for (int i = 0; i < nfft; ++i) {
    const int k = (i + nfft / 2) % nfft;  // fftshift
    const int kk = k < (nfft + 1) / 2 ? k : k - nfft;
    out.freqs_hz[i] = static_cast<double>(kk) * sig.sample_rate_hz / nfft;
    const double p = acc[k] * norm;
    out.psd_dbm_per_bin[i] = p > 0.0 ? std::max(kPsdFloorDbm, watts_to_dbm(p)) : kPsdFloorDbm;
  }
  return out;
}

// Index of the bin whose center is nearest to freq_hz.
inline std::size_t nearest_bin(const PsdEstimate& psd, double freq_hz) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < psd.freqs_hz.size(); ++i)
    if (std::abs(psd.freqs_hz[i] - freq_hz) < std::abs(psd.freqs_hz[best] - freq_hz)) best = i;
  return best;
}

inline std::string format_psd_csv(const PsdEstimate& psd) {
  std::string out = "freq_hz,psd_dbm\n";
  char line[96];
  for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i) {
    std::snprintf(line, sizeof line, "%.10g,%.9g\n", psd.freqs_hz[i], psd.psd_dbm_per_bin[i]);
    out += line;
  }
  return out;
}

inline void export_psd(const PsdEstimate& psd, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << format_psd_csv(psd);
  if (!f) throw std::runtime_error("write failed: " + path);
}

// Parses the CSV produced by export_psd (frequency and PSD columns only).
inline PsdEstimate parse_psd_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("freq_hz,psd_dbm", 0) != 0) throw ConfigError("missing PSD CSV header");
  PsdEstimate psd;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("malformed PSD CSV row: " + line);
    psd.freqs_hz.push_back(std::stod(line.substr(0, comma)));
    psd.psd_dbm_per_bin.push_back(std::stod(line.substr(comma + 1)));
  }
  psd.nfft = static_cast<int>(psd.freqs_hz.size());
  return psd;
}

inline PsdEstimate read_psd_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return parse_psd_csv(f);
}

}  // namespace fdlab
