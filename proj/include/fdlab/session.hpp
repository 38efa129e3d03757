#pragma once

// Live tuning sessions: a simulated node whose canceller code can be changed
// while PSD frames are being produced. Each frame re-simulates the RX signal
// from a cached TX block with fresh receiver noise, so frames under a fixed
// code differ only by noise.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "fdlab/config_json.hpp"
#include "fdlab/experiment.hpp"

namespace fdlab {

struct StreamSettings {
  double frame_rate_hz = 10.0;
  int nfft = 1024;
  int segments = 8;  // frame length = nfft * segments samples

  std::size_t frame_samples() const { return static_cast<std::size_t>(nfft) * static_cast<std::size_t>(segments); }

  void validate() const {
    if (!(frame_rate_hz > 0.0 && frame_rate_hz <= 1000.0)) throw ConfigError("frame_rate_hz must lie in (0, 1000]");
    if (nfft < 16 || segments < 1) throw ConfigError("stream nfft must be >= 16 and segments >= 1");
  }
};

struct PsdFrame {
  std::uint64_t seq = 0;
  std::vector<double> freqs_hz;
  std::vector<double> psd_dbm;
  double rf_sic_db = 0.0;  // measured on this frame: TX power - residual power
  CancellerCode code;
};

struct CancellerAck {
  CancellerCode code;
  double rf_sic_db = 0.0;  // predicted isolation over the RF band for this code
  double canceller_sic_band_db = 0.0;
  std::uint64_t effective_seq = 0;  // first frame simulated with this code
};

inline nlohmann::json to_json(const PsdFrame& f) {
  return nlohmann::json{{"seq", f.seq},
                        {"freqs_hz", f.freqs_hz},
                        {"psd_dbm", f.psd_dbm},
                        {"rf_sic_db", f.rf_sic_db},
                        {"code", to_json(f.code)}};
}

inline nlohmann::json to_json(const CancellerAck& a) {
  return nlohmann::json{{"code", to_json(a.code)},
                        {"rf_sic_db", a.rf_sic_db},
                        {"canceller_sic_band_db", a.canceller_sic_band_db},
                        {"effective_seq", a.effective_seq}};
}

class Session {
 public:
  Session(std::string id, ExperimentConfig cfg, StreamSettings stream = {})
      : id_(std::move(id)), cfg_(std::move(cfg)), stream_(stream), noise_(derive_seed(cfg_.seed, 3)) {
    cfg_.validate();
    stream_.validate();
    const auto& ch = cfg_.channel;
    pad_pre_ = static_cast<std::size_t>(ch.fir_post);
    const std::size_t n = stream_.frame_samples() + pad_pre_ + static_cast<std::size_t>(ch.fir_pre);
    tx_ = generate_tx(cfg_, n).pa_out;
    tx_power_dbm_ = power_dbm(std::span<const cdouble>(tx_).subspan(pad_pre_, stream_.frame_samples()));
    if (cfg_.remote)
      remote_ = gen_tone(cfg_.rate_hz, cfg_.remote->offset_hz, cfg_.remote->power_dbm, stream_.frame_samples()).samples;
    apply_code(resolve_canceller(cfg_));
  }

  const std::string& id() const { return id_; }
  const StreamSettings& stream_settings() const { return stream_; }

  ExperimentConfig config() const {
    std::lock_guard lock(mu_);
    return cfg_;
  }

  CancellerCode code() const {
    std::lock_guard lock(mu_);
    return current_.code;
  }

  CancellerAck ack() const {
    std::lock_guard lock(mu_);
    return make_ack();
  }

  CancellerAck set_canceller(const CancellerCode& code) {
    code.validate();
    std::lock_guard lock(mu_);
    apply_code(evaluate_canceller(cfg_.channel, cfg_.carrier_hz, code));
    return make_ack();
  }

  // Exhaustive search at the current CAP setting.
  CancellerAck tune() {
    std::lock_guard lock(mu_);
    const auto& ch = cfg_.channel;
    const auto caps = current_.code.caps;
    const auto h = node_si_response(ch, caps, ch.band_grid(), cfg_.carrier_hz);
    const auto r = tune_canceller(h, ch.canceller, ch.band(), TuneStrategy::exhaustive, caps, cfg_.tune_workers);
    apply_code(evaluate_canceller(ch, cfg_.carrier_hz, r.code, true));
    return make_ack();
  }

  PsdFrame next_frame() {
    std::lock_guard lock(mu_);
    const std::size_t m = stream_.frame_samples();
    const double var = dbm_to_watts(cfg_.channel.noise_floor_dbm);
    std::vector<cdouble> rx(m);
    for (std::size_t i = 0; i < m; ++i) {
      rx[i] = si_[pad_pre_ + i];
      if (!remote_.empty()) rx[i] += remote_[i];
      if (var > 0.0) rx[i] += noise_.complex_gaussian(var);
    }
    const auto psd = welch_psd(ComplexBasebandSignal{rx, cfg_.rate_hz}, stream_.nfft, cfg_.psd.window, cfg_.psd.overlap);
    PsdFrame f;
    f.seq = seq_++;
    f.freqs_hz = psd.freqs_hz;
    f.psd_dbm = psd.psd_dbm_per_bin;
    f.rf_sic_db = tx_power_dbm_ - power_dbm(rx);
    f.code = current_.code;
    return f;
  }

  // Full node/link experiment at the session's current canceller code.
  ExperimentReport run_digital_sic() const {
    ExperimentConfig c = config();
    c.canceller = code();
    return run_experiment(c);
  }

 private:
  void apply_code(CancellerOutcome outcome) {
    fir_ = residual_channel_fir(cfg_.channel, cfg_.carrier_hz, cfg_.rate_hz, outcome.code);
    si_ = apply_fir(fir_, tx_);
    current_ = std::move(outcome);
  }

  CancellerAck make_ack() const {
    return CancellerAck{current_.code, current_.rf_isolation_band_db, current_.canceller_sic_band_db, seq_};
  }

  std::string id_;
  ExperimentConfig cfg_;
  StreamSettings stream_;
  mutable std::mutex mu_;  // one writer at a time; frames see a consistent code
  Rng noise_;
  std::vector<cdouble> tx_;
  std::vector<cdouble> remote_;
  std::size_t pad_pre_ = 0;
  double tx_power_dbm_ = 0.0;
  CancellerOutcome current_;
  FirTaps fir_;
  std::vector<cdouble> si_;  // residual SI for the cached TX block under the current code
  std::uint64_t seq_ = 0;
};

class UnknownSessionError : public std::out_of_range {
 public:
  explicit UnknownSessionError(const std::string& id) : std::out_of_range("unknown session '" + id + "'") {}
};

class SessionRegistry {
 public:
  std::shared_ptr<Session> create(ExperimentConfig cfg, StreamSettings stream = {}) {
    std::string id = "s" + std::to_string(next_id_.fetch_add(1) + 1);
    auto s = std::make_shared<Session>(id, std::move(cfg), stream);
    std::unique_lock lock(mu_);
    sessions_.emplace(id, s);
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSessionError(id);
    return it->second;
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mu_);
    return sessions_.count(id) != 0;
  }

  void close(const std::string& id) {
    std::unique_lock lock(mu_);
    if (sessions_.erase(id) == 0) throw UnknownSessionError(id);
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : sessions_) out.push_back(k);
    return out;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace fdlab
