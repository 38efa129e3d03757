#pragma once

// End-to-end node and link experiments:
//   waveform -> PA -> SI channel minus RF canceller -> (+ remote) -> AWGN
//   -> rx gain -> lag alignment -> Volterra fit (train window)
//   -> cancellation (held-out eval window) -> metrics.
//
// The run is a three-stage pipeline (TX generation, channel/RX simulation,
// digital SIC) connected by bounded queues. Every stochastic stream is
// seeded from ExperimentConfig::seed, so reports are reproducible.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <cstdint>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <type_traits>
#include <vector>

#include "fdlab/bounded_queue.hpp"
#include "fdlab/channel_models.hpp"
#include "fdlab/digital_sic.hpp"
#include "fdlab/errors.hpp"
#include "fdlab/random.hpp"
#include "fdlab/rf_canceller.hpp"
#include "fdlab/signal.hpp"
#include "fdlab/spectral.hpp"
#include "fdlab/waveforms.hpp"

namespace fdlab {

// Hardware and environment of the simulated node.
struct NodeProfile {
  CirculatorParams circulator;
  TunerConfig tuner;
  AntennaImpedance antenna;
  std::vector<BackscatterPath> backscatter{BackscatterPath{}};
  CancellerParams canceller;
  cdouble pa_a3 = std::polar(0.005, 10.0 * kPi / 180.0);
  cdouble pa_a5 = std::polar(0.0001, -20.0 * kPi / 180.0);
  double noise_floor_dbm = -85.0;
  int rx_lag_samples = 7;  // bulk TX->RX sample latency
  double z0_ohm = 50.0;
  double rf_band_hz = 5e6;
  int rf_band_points = 201;
  int fir_pre = 4;  // taps of the simulated SI channel FIR
  int fir_post = 11;

  Band band() const { return Band::centered(rf_band_hz); }
  std::vector<double> band_grid() const { return linear_grid(-0.5 * rf_band_hz, 0.5 * rf_band_hz, rf_band_points); }

  void validate() const {
    circulator.validate();
    tuner.validate();
    antenna.validate();
    canceller.validate();
    if (!(rf_band_hz > 0.0) || rf_band_points < 1) throw ConfigError("RF band must be positive with >= 1 point");
    if (fir_pre < 0 || fir_post < 0) throw ConfigError("FIR extents must be >= 0");
    if (rx_lag_samples < fir_pre) throw ConfigError("rx_lag_samples must be >= fir_pre (causal channel)");
  }
};

struct ToneWave {
  double offset_hz = 200e3;
};

struct PskWave {
  int order = 4;
  double symbol_rate_hz = 2.5e6;
  double rolloff = 0.25;
  int span_symbols = 8;
};

using WaveSpec = std::variant<ToneWave, PskWave>;

struct RemoteSpec {
  double offset_hz = 400e3;
  double power_dbm = -65.0;  // 20 dB above the default noise floor
};

struct AutoCanceller {};
using CancellerSetting = std::variant<AutoCanceller, CancellerCode>;

inline VolterraBasis experiment_basis() {
  VolterraBasis b;
  b.pre_cursor = 8;  // the correlation peak trails the first significant channel taps
  return b;
}

struct DigitalSettings {
  VolterraBasis basis = experiment_basis();
  double ridge_scale = 1e-6;  // ridge = ridge_scale * mean column energy
  int max_lag = 32;
};

struct Durations {
  std::size_t warmup_samples = 256;
  std::size_t train_samples = 10000;
  std::size_t eval_samples = 10000;

  std::size_t total() const { return warmup_samples + train_samples + eval_samples; }
};

struct PsdSettings {
  int nfft = 1024;
  Window window = Window::hann;
  double overlap = 0.5;
};

struct ExperimentConfig {
  double rate_hz = 5e6;
  double carrier_hz = 900e6;
  double tx_gain_db = 10.0;  // PA drive above unit drive
  double rx_gain_db = 10.0;
  double tx_power_dbm = 0.0;
  WaveSpec wave = ToneWave{};
  CancellerSetting canceller = AutoCanceller{};
  NodeProfile channel;
  std::optional<RemoteSpec> remote;
  std::uint64_t seed = 1;
  Durations durations;
  DigitalSettings digital;
  PsdSettings psd;
  std::size_t block_samples = 4096;
  std::size_t queue_capacity = 4;
  unsigned tune_workers = 1;

  void validate() const {
    if (!(rate_hz > 0.0)) throw ConfigError("rate_hz must be > 0");
    if (!(carrier_hz > 0.0)) throw ConfigError("carrier_hz must be > 0");
    if (!std::isfinite(tx_power_dbm)) throw ConfigError("tx_power_dbm must be finite");
    channel.validate();
    digital.basis.validate();
    if (!(digital.ridge_scale >= 0.0)) throw ConfigError("ridge_scale must be >= 0");
    if (durations.train_samples < digital.basis.coeff_count())
      throw ConfigError("training window shorter than the Volterra coefficient count");
    if (durations.eval_samples == 0) throw ConfigError("eval window must be nonempty");
    const std::size_t need = static_cast<std::size_t>(digital.basis.memory + digital.max_lag);
    if (durations.warmup_samples < need) throw ConfigError("warmup must cover Volterra memory + max lag");
    if (static_cast<std::size_t>(psd.nfft) > durations.eval_samples) throw ConfigError("psd nfft exceeds eval window");
    if (block_samples == 0) throw ConfigError("block_samples must be > 0");
    if (const auto* t = std::get_if<ToneWave>(&wave)) {
      if (!(std::abs(t->offset_hz) < 0.5 * rate_hz)) throw ConfigError("tone offset outside Nyquist");
    } else {
      const auto& p = std::get<PskWave>(wave);
      if (p.order != 2 && p.order != 4) throw ConfigError("PSK order must be 2 or 4");
      oversampling_factor(rate_hz, p.symbol_rate_hz);
    }
    if (remote && !(std::abs(remote->offset_hz) < 0.5 * rate_hz)) throw ConfigError("remote offset outside Nyquist");
    if (const auto* c = std::get_if<CancellerCode>(&canceller)) c->validate();
  }
};

// Tone experiment: 5 MS/s, 900 MHz, 200 kHz tone at 0 dBm, auto-tuned canceller.
inline ExperimentConfig tone_experiment_config() { return ExperimentConfig{}; }

// QPSK experiment: 2.5 Msym/s QPSK at 10 MS/s and 0 dBm.
inline ExperimentConfig qpsk_experiment_config() {
  ExperimentConfig c;
  c.rate_hz = 10e6;
  c.wave = PskWave{};
  return c;
}

// Link variants add the remote node's tone (400 kHz for the tone run, 1 MHz for QPSK).
inline ExperimentConfig tone_link_config() {
  auto c = tone_experiment_config();
  c.remote = RemoteSpec{400e3, -65.0};
  return c;
}

inline ExperimentConfig qpsk_link_config() {
  auto c = qpsk_experiment_config();
  c.remote = RemoteSpec{1e6, -65.0};
  return c;
}

// --- canceller resolution and the simulated channel ---

struct CancellerOutcome {
  CancellerCode code;
  bool auto_tuned = false;
  FrequencyResponse h_si;
  FrequencyResponse h_residual;
  double rf_isolation_band_db = 0.0;  // TX -> RX total over the RF band
  double canceller_sic_band_db = 0.0;  // canceller contribution over the RF band
};

inline TunerConfig tuner_with_caps(const NodeProfile& p, const std::array<int, 3>& caps) {
  TunerConfig t = p.tuner;
  t.cap_codes = caps;
  return t;
}

inline FrequencyResponse node_si_response(const NodeProfile& p, const std::array<int, 3>& caps,
                                          std::span<const double> grid, double carrier_hz) {
  return si_channel_response(p.circulator, tuner_with_caps(p, caps), p.antenna, grid, carrier_hz, p.backscatter,
                             p.z0_ohm);
}

inline CancellerOutcome evaluate_canceller(const NodeProfile& p, double carrier_hz, const CancellerCode& code,
                                           bool auto_tuned = false) {
  const auto grid = p.band_grid();
  CancellerOutcome out;
  out.code = code;
  out.auto_tuned = auto_tuned;
  out.h_si = node_si_response(p, code.caps, grid, carrier_hz);
  out.h_residual = residual_response(out.h_si, canceller_gain(code, p.canceller, grid));
  out.rf_isolation_band_db = rf_sic_db(unity_response(grid), out.h_residual, p.band());
  out.canceller_sic_band_db = rf_sic_db(out.h_si, out.h_residual, p.band());
  return out;
}

inline CancellerOutcome resolve_canceller(const ExperimentConfig& cfg) {
  if (const auto* code = std::get_if<CancellerCode>(&cfg.canceller))
    return evaluate_canceller(cfg.channel, cfg.carrier_hz, *code);
  const auto& p = cfg.channel;
  const auto h_si = node_si_response(p, p.tuner.cap_codes, p.band_grid(), cfg.carrier_hz);
  const auto tuned = tune_canceller(h_si, p.canceller, p.band(), TuneStrategy::exhaustive, p.tuner.cap_codes,
                                    cfg.tune_workers);
  return evaluate_canceller(p, cfg.carrier_hz, tuned.code, true);
}

// Time-domain FIR of the post-canceller SI channel (before the bulk lag).
inline FirTaps residual_channel_fir(const NodeProfile& p, double carrier_hz, double rate_hz,
                                    const CancellerCode& code) {
  const auto tuner = tuner_with_caps(p, code.caps);
  tuner.validate();
  const cdouble g = canceller_gain_value(code.att, code.ps, p.canceller);
  return design_fir(
      [&](double f) {
        return si_channel_gain(p.circulator, tuner, p.antenna, f, carrier_hz, p.backscatter, p.z0_ohm) - g;
      },
      rate_hz, p.fir_pre, p.fir_post);
}

// --- TX generation ---

struct TxRecord {
  std::vector<cdouble> baseband;  // known digital samples, at tx_power_dbm
  std::vector<cdouble> pa_out;    // PA output leveled to tx_power_dbm
};

inline std::vector<cdouble> generate_baseband(const ExperimentConfig& cfg, std::size_t n) {
  if (const auto* t = std::get_if<ToneWave>(&cfg.wave))
    return gen_tone(cfg.rate_hz, t->offset_hz, cfg.tx_power_dbm, n).samples;
  const auto& w = std::get<PskWave>(cfg.wave);
  PskParams p;
  p.order = w.order;
  p.symbol_rate_hz = w.symbol_rate_hz;
  p.sample_rate_hz = cfg.rate_hz;
  p.rolloff = w.rolloff;
  p.span_symbols = w.span_symbols;
  p.power_dbm = cfg.tx_power_dbm;
  const int sps = oversampling_factor(cfg.rate_hz, w.symbol_rate_hz);
  p.n_symbols = (n + static_cast<std::size_t>(sps) - 1) / static_cast<std::size_t>(sps);
  p.seed = derive_seed(cfg.seed, 1);
  auto s = gen_psk(p).samples;
  s.resize(n);
  detail::scale_to_power(s, cfg.tx_power_dbm);
  return s;
}

inline TxChainParams tx_chain_for(const ExperimentConfig& cfg) {
  TxChainParams t;
  t.pa_a3 = cfg.channel.pa_a3;
  t.pa_a5 = cfg.channel.pa_a5;
  t.tx_gain_db = 0.0;
  t.drive_ref_dbm = cfg.tx_power_dbm - cfg.tx_gain_db;
  return t;
}

inline TxRecord generate_tx(const ExperimentConfig& cfg, std::size_t n) {
  TxRecord r;
  r.baseband = generate_baseband(cfg, n);
  ComplexBasebandSignal bb{r.baseband, cfg.rate_hz};
  r.pa_out = apply_pa(bb, tx_chain_for(cfg)).samples;
  detail::scale_to_power(r.pa_out, cfg.tx_power_dbm);
  return r;
}

// --- report ---

struct DesiredSignalReport {
  double offset_hz = 0.0;
  double power_dbm = 0.0;
  double snr_reference_db = 0.0;  // remote power over the noise floor, no SI
  double snr_before_dig_db = 0.0;
  double snr_after_dig_db = 0.0;
  double snr_loss_db = 0.0;  // reference - after
};

struct ExperimentReport {
  std::string kind = "node";
  double tx_power_dbm = 0.0;
  double post_rf_power_dbm = 0.0;
  double rf_sic_db = 0.0;
  double post_dig_power_dbm = 0.0;
  double dig_sic_db = 0.0;
  double total_sic_db = 0.0;
  CancellerCode canceller_code_used;
  bool canceller_auto_tuned = false;
  double rf_isolation_band_db = 0.0;
  double canceller_sic_band_db = 0.0;
  double rf_band_hz = 0.0;
  double noise_floor_dbm = 0.0;
  int estimated_lag = 0;
  std::size_t train_samples = 0;
  std::size_t eval_samples = 0;
  VolterraModel model;
  std::optional<DesiredSignalReport> desired;
  PsdEstimate psd_post_rf;
  PsdEstimate psd_post_dig;
  // Input-referred eval-window samples (not serialized).
  std::vector<cdouble> post_rf;
  std::vector<cdouble> post_dig;
};

// Text report in the style of the reference UHD program's output.
inline std::string format_listing(const ExperimentReport& r) {
  std::ostringstream os;
  char buf[160];
  // Values that round to zero print as 0.00, not -0.00.
  auto clean = [](auto v) {
    if constexpr (std::is_floating_point_v<decltype(v)>) return std::abs(v) < 0.005 ? 0.0 : v;
    else return v;
  };
  auto line = [&](const char* fmt, auto... v) {
    std::snprintf(buf, sizeof buf, fmt, clean(v)...);
    os << buf << '\n';
  };
  const auto& c = r.canceller_code_used;
  line("Canceller: ATT=%d PS=%d CAP1=%d CAP2=%d CAP3=%d%s", c.att, c.ps, c.caps[0], c.caps[1], c.caps[2],
       r.canceller_auto_tuned ? " (auto-tuned)" : "");
  line("RF isolation across %.1f MHz: %.2f dB", r.rf_band_hz / 1e6, r.rf_isolation_band_db);
  line("TX Signal: %.2f dBm", r.tx_power_dbm);
  line("RX Signal after RF SIC: %.2f dBm", r.post_rf_power_dbm);
  line("Amount of RF SIC: %.2f dB", r.rf_sic_db);
  line("RX Signal after Digital SIC: %.2f dBm", r.post_dig_power_dbm);
  line("Amount of Digital SIC: %.2f dB", r.dig_sic_db);
  line("Total SIC: %.2f dB", r.total_sic_db);
  if (r.desired) {
    const auto& d = *r.desired;
    line("Desired signal at %.1f kHz: %.2f dBm", d.offset_hz / 1e3, d.power_dbm);
    line("Desired SNR (no SI reference): %.2f dB", d.snr_reference_db);
    line("Desired SNR before Digital SIC: %.2f dB", d.snr_before_dig_db);
    line("Desired SNR after Digital SIC: %.2f dB", d.snr_after_dig_db);
    line("Desired SNR loss: %.2f dB", d.snr_loss_db);
  }
  return os.str();
}

namespace detail {

struct TxBlock {
  std::size_t offset = 0;
  std::vector<cdouble> baseband;
  std::vector<cdouble> pa_out;
};

struct RxBlock {
  std::size_t offset = 0;
  std::vector<cdouble> baseband;
  std::vector<cdouble> pa_out;
  std::vector<cdouble> rx;      // after rx gain
  std::vector<cdouble> remote;  // input-referred remote component
};

// SNR of the known desired component r inside y: project y on r, everything else is impairment.
inline double desired_snr_db(std::span<const cdouble> y, std::span<const cdouble> r) {
  cdouble num{0.0, 0.0};
  double rr = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += y[i] * std::conj(r[i]);
    rr += std::norm(r[i]);
  }
  if (rr <= 0.0) return -kSicCapDb;
  const cdouble alpha = num / rr;
  double desired = std::norm(alpha) * rr;
  double rest = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) rest += std::norm(y[i] - alpha * r[i]);
  return ratio_db_capped(desired, rest);
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto canc = resolve_canceller(cfg);
  const auto fir = residual_channel_fir(cfg.channel, cfg.carrier_hz, cfg.rate_hz, canc.code);
  // Trailing pre-cursor samples let the last eval row see its look-ahead taps.
  const std::size_t n = cfg.durations.total() + static_cast<std::size_t>(cfg.digital.basis.pre_cursor);
  const int lag = cfg.channel.rx_lag_samples;
  const double rx_gain = db_to_amplitude_ratio(cfg.rx_gain_db);

  BoundedQueue<detail::TxBlock> tx_q(cfg.queue_capacity);
  BoundedQueue<detail::RxBlock> rx_q(cfg.queue_capacity);
  std::exception_ptr tx_err, ch_err;

  // Stage 1: TX generation.
  std::thread tx_stage([&] {
    try {
      const auto rec = generate_tx(cfg, n);
      for (std::size_t off = 0; off < n; off += cfg.block_samples) {
        const std::size_t end = std::min(n, off + cfg.block_samples);
        detail::TxBlock b{off, {rec.baseband.begin() + off, rec.baseband.begin() + end},
                          {rec.pa_out.begin() + off, rec.pa_out.begin() + end}};
        if (!tx_q.push(std::move(b))) break;
      }
    } catch (...) {
      tx_err = std::current_exception();
      rx_q.close();
    }
    tx_q.close();
  });

  // Stage 2: SI channel, remote signal, receiver noise and gain.
  std::thread channel_stage([&] {
    try {
      std::vector<cdouble> history;
      history.reserve(n);
      std::vector<cdouble> remote;
      if (cfg.remote) remote = gen_tone(cfg.rate_hz, cfg.remote->offset_hz, cfg.remote->power_dbm, n).samples;
      Rng noise(derive_seed(cfg.seed, 2));
      const double noise_var = dbm_to_watts(cfg.channel.noise_floor_dbm);
      while (auto blk = tx_q.pop()) {
        history.insert(history.end(), blk->pa_out.begin(), blk->pa_out.end());
        detail::RxBlock out;
        out.offset = blk->offset;
        out.baseband = std::move(blk->baseband);
        out.pa_out = blk->pa_out;
        out.rx.resize(out.baseband.size());
        out.remote.assign(out.baseband.size(), cdouble{0.0, 0.0});
        for (std::size_t i = 0; i < out.rx.size(); ++i) {
          const long idx = static_cast<long>(blk->offset + i);
          cdouble acc{0.0, 0.0};
          for (std::size_t t = 0; t < fir.taps.size(); ++t) {
            const long src = idx - lag - (fir.first_index + static_cast<long>(t));
            if (src >= 0) acc += fir.taps[t] * history[static_cast<std::size_t>(src)];
          }
          if (!remote.empty()) out.remote[i] = remote[static_cast<std::size_t>(idx)];
          acc += out.remote[i];
          if (noise_var > 0.0) acc += noise.complex_gaussian(noise_var);
          out.rx[i] = rx_gain * acc;
        }
        if (!rx_q.push(std::move(out))) break;
      }
    } catch (...) {
      ch_err = std::current_exception();
      tx_q.close();
    }
    rx_q.close();
  });

  // Stage 3 (this thread): collect, then digital SIC.
  std::vector<cdouble> baseband(n), pa_out(n), rx(n), remote(n);
  std::size_t received = 0;
  while (auto blk = rx_q.pop()) {
    std::copy(blk->baseband.begin(), blk->baseband.end(), baseband.begin() + blk->offset);
    std::copy(blk->pa_out.begin(), blk->pa_out.end(), pa_out.begin() + blk->offset);
    std::copy(blk->rx.begin(), blk->rx.end(), rx.begin() + blk->offset);
    std::copy(blk->remote.begin(), blk->remote.end(), remote.begin() + blk->offset);
    received += blk->rx.size();
  }
  tx_stage.join();
  channel_stage.join();
  if (tx_err) std::rethrow_exception(tx_err);
  if (ch_err) std::rethrow_exception(ch_err);
  if (received != n) throw std::runtime_error("pipeline delivered an incomplete record");

  // The canceller reference is the known baseband at unit RMS drive.
  const double rms = std::sqrt(mean_power(baseband));
  std::vector<cdouble> ref(n);
  for (std::size_t i = 0; i < n; ++i) ref[i] = rms > 0.0 ? baseband[i] / rms : cdouble{};

  const std::size_t train_begin = cfg.durations.warmup_samples;
  const std::size_t eval_begin = train_begin + cfg.durations.train_samples;
  const std::size_t eval_end = eval_begin + cfg.durations.eval_samples;

  const int est_lag = estimate_lag(std::span(ref).first(eval_begin), std::span(rx).first(eval_begin),
                                   cfg.digital.max_lag);
  std::vector<cdouble> aligned(n, cdouble{0.0, 0.0});
  for (std::size_t i = static_cast<std::size_t>(est_lag); i < n; ++i) aligned[i] = ref[i - est_lag];

  const auto fm_all = build_volterra_features(aligned, cfg.digital.basis);
  if (fm_all.first_row > train_begin || fm_all.end_row() < eval_end)
    throw ConfigError("feature rows do not cover the train/eval windows");
  FeatureMatrix train;
  train.basis = cfg.digital.basis;
  train.first_row = train_begin;
  train.matrix = fm_all.matrix.middleRows(static_cast<Eigen::Index>(train_begin - fm_all.first_row),
                                          static_cast<Eigen::Index>(cfg.durations.train_samples));
  const double ridge = cfg.digital.ridge_scale * mean_column_energy(train);
  const auto model = fit_volterra(train, std::span(rx).subspan(train_begin, cfg.durations.train_samples), ridge);

  FeatureMatrix eval;
  eval.basis = cfg.digital.basis;
  eval.first_row = eval_begin;
  eval.matrix = fm_all.matrix.middleRows(static_cast<Eigen::Index>(eval_begin - fm_all.first_row),
                                         static_cast<Eigen::Index>(cfg.durations.eval_samples));
  const auto pred = predict_volterra(model, eval);

  // Input-referred eval-window signals.
  std::vector<cdouble> post_rf(cfg.durations.eval_samples), post_dig(cfg.durations.eval_samples);
  for (std::size_t i = 0; i < post_rf.size(); ++i) {
    post_rf[i] = rx[eval_begin + i] / rx_gain;
    post_dig[i] = (rx[eval_begin + i] - pred[i]) / rx_gain;
  }

  ExperimentReport r;
  r.kind = cfg.remote ? "link" : "node";
  r.tx_power_dbm = power_dbm(std::span(pa_out).subspan(eval_begin, cfg.durations.eval_samples));
  r.post_rf_power_dbm = power_dbm(post_rf);
  r.post_dig_power_dbm = power_dbm(post_dig);
  r.rf_sic_db = r.tx_power_dbm - r.post_rf_power_dbm;
  r.dig_sic_db = digital_sic_db(post_rf, post_dig);
  r.total_sic_db = r.tx_power_dbm - r.post_dig_power_dbm;
  r.canceller_code_used = canc.code;
  r.canceller_auto_tuned = canc.auto_tuned;
  r.rf_isolation_band_db = canc.rf_isolation_band_db;
  r.canceller_sic_band_db = canc.canceller_sic_band_db;
  r.rf_band_hz = cfg.channel.rf_band_hz;
  r.noise_floor_dbm = cfg.channel.noise_floor_dbm;
  r.estimated_lag = est_lag;
  r.train_samples = cfg.durations.train_samples;
  r.eval_samples = cfg.durations.eval_samples;
  r.model = model;

  if (cfg.remote && std::isfinite(cfg.remote->power_dbm)) {
    const auto rem = std::span(remote).subspan(eval_begin, cfg.durations.eval_samples);
    DesiredSignalReport d;
    d.offset_hz = cfg.remote->offset_hz;
    d.power_dbm = power_dbm(rem);
    d.snr_reference_db = d.power_dbm - cfg.channel.noise_floor_dbm;
    d.snr_before_dig_db = detail::desired_snr_db(post_rf, rem);
    d.snr_after_dig_db = detail::desired_snr_db(post_dig, rem);
    d.snr_loss_db = d.snr_reference_db - d.snr_after_dig_db;
    r.desired = d;
  }

  r.psd_post_rf = welch_psd(ComplexBasebandSignal{post_rf, cfg.rate_hz}, cfg.psd.nfft, cfg.psd.window, cfg.psd.overlap);
  r.psd_post_dig =
      welch_psd(ComplexBasebandSignal{post_dig, cfg.rate_hz}, cfg.psd.nfft, cfg.psd.window, cfg.psd.overlap);
  r.post_rf = std::move(post_rf);
  r.post_dig = std::move(post_dig);
  return r;
}

inline ExperimentReport run_node_experiment(const ExperimentConfig& cfg) {
  if (cfg.remote) throw ConfigError("node experiment takes no remote signal; use run_link_experiment");
  return run_experiment(cfg);
}

inline ExperimentReport run_link_experiment(const ExperimentConfig& cfg) {
  if (!cfg.remote) throw ConfigError("link experiment needs a remote signal");
  if (const auto* t = std::get_if<ToneWave>(&cfg.wave))
    if (t->offset_hz == cfg.remote->offset_hz) throw ConfigError("remote offset must differ from the SI tone offset");
  return run_experiment(cfg);
}

}  // namespace fdlab
