#pragma once

// JSON (de)serialization for experiment configs and reports. Parsing starts
// from a preset and overlays whatever keys the document provides; unknown keys
// are rejected so typos do not silently fall back to defaults.

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "fdlab/experiment.hpp"

namespace fdlab {

using nlohmann::json;

inline ExperimentConfig preset_config(const std::string& name) {
  if (name == "tone") return tone_experiment_config();
  if (name == "tone-5dbm") {
    auto c = tone_experiment_config();
    c.tx_power_dbm = 5.0;
    return c;
  }
  if (name == "qpsk") return qpsk_experiment_config();
  if (name == "tone-link") return tone_link_config();
  if (name == "qpsk-link") return qpsk_link_config();
  throw ConfigError("unknown preset '" + name + "'");
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"tone", "tone-5dbm", "qpsk", "tone-link", "qpsk-link"};
  return names;
}

inline const char* topology_name(TunerTopology t) {
  switch (t) {
    case TunerTopology::parallel_lc: return "parallel_lc";
    case TunerTopology::series_lc: return "series_lc";
    case TunerTopology::shunt_c1: return "shunt_c1";
    case TunerTopology::bypass: return "bypass";
  }
  return "?";
}

inline TunerTopology topology_from_name(const std::string& s) {
  for (auto t : {TunerTopology::parallel_lc, TunerTopology::series_lc, TunerTopology::shunt_c1, TunerTopology::bypass})
    if (s == topology_name(t)) return t;
  throw ConfigError("unknown tuner topology '" + s + "'");
}

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

// Accepts a number, null or "-inf" (for disabled noise / silent remote).
inline void read_dbm(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_null() || (v.is_string() && v.get<std::string>() == "-inf")) {
    out = -std::numeric_limits<double>::infinity();
    return;
  }
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number, null or \"-inf\"");
  out = v.get<double>();
}

inline json dbm_value(double v) { return std::isinf(v) && v < 0 ? json("-inf") : json(v); }

inline void read_complex(const json& j, const char* key, cdouble& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + " must be [re, im]");
  out = {v[0].get<double>(), v[1].get<double>()};
}

inline json complex_value(cdouble z) { return json::array({z.real(), z.imag()}); }

inline CancellerCode code_from_json(const json& j, const std::string& where) {
  check_keys(j, where, {"att", "ps", "caps"});
  CancellerCode c;
  read(j, "att", c.att, where);
  read(j, "ps", c.ps, where);
  read(j, "caps", c.caps, where);
  return c;
}

}  // namespace detail

inline json to_json(const CancellerCode& c) { return json{{"att", c.att}, {"ps", c.ps}, {"caps", c.caps}}; }

inline void apply_node_profile_json(const json& j, NodeProfile& p) {
  using namespace detail;
  const std::string w = "channel";
  check_keys(j, w,
             {"circulator", "tuner", "antenna", "backscatter", "canceller_hw", "pa", "noise_floor_dbm",
              "rx_lag_samples", "z0_ohm", "rf_band_hz", "rf_band_points", "fir_pre", "fir_post"});
  if (j.contains("circulator")) {
    const auto& c = j["circulator"];
    check_keys(c, w + ".circulator", {"isolation_db", "leakage_delay_ns", "insertion_loss_db"});
    read(c, "isolation_db", p.circulator.isolation_db, w);
    read(c, "leakage_delay_ns", p.circulator.leakage_delay_ns, w);
    read(c, "insertion_loss_db", p.circulator.insertion_loss_db, w);
  }
  if (j.contains("tuner")) {
    const auto& t = j["tuner"];
    check_keys(t, w + ".tuner", {"cap_codes", "inductance_h", "cap_min_f", "cap_step_f", "topology"});
    read(t, "cap_codes", p.tuner.cap_codes, w);
    read(t, "inductance_h", p.tuner.inductance_h, w);
    read(t, "cap_min_f", p.tuner.cap_min_f, w);
    read(t, "cap_step_f", p.tuner.cap_step_f, w);
    if (t.contains("topology")) p.tuner.topology = topology_from_name(t["topology"].get<std::string>());
  }
  if (j.contains("antenna")) {
    const auto& a = j["antenna"];
    check_keys(a, w + ".antenna", {"z_ohm", "slope_ohm_per_hz"});
    read_complex(a, "z_ohm", p.antenna.z, w + ".antenna");
    read_complex(a, "slope_ohm_per_hz", p.antenna.slope_ohm_per_hz, w + ".antenna");
  }
  if (j.contains("backscatter")) {
    if (!j["backscatter"].is_array()) throw ConfigError("channel.backscatter must be an array");
    p.backscatter.clear();
    for (const auto& b : j["backscatter"]) {
      check_keys(b, w + ".backscatter[]", {"gain_db", "delay_ns", "phase_deg"});
      BackscatterPath path;
      read(b, "gain_db", path.gain_db, w);
      read(b, "delay_ns", path.delay_ns, w);
      read(b, "phase_deg", path.phase_deg, w);
      p.backscatter.push_back(path);
    }
  }
  if (j.contains("canceller_hw")) {
    const auto& c = j["canceller_hw"];
    check_keys(c, w + ".canceller_hw",
               {"coupler_tap_db", "base_loss_db", "att_step_db", "phase_span_deg", "law", "measured_span_db"});
    read(c, "coupler_tap_db", p.canceller.coupler_tap_db, w);
    read(c, "base_loss_db", p.canceller.base_loss_db, w);
    read(c, "att_step_db", p.canceller.att_step_db, w);
    read(c, "phase_span_deg", p.canceller.phase_span_deg, w);
    read(c, "measured_span_db", p.canceller.measured_span_db, w);
    if (c.contains("law")) {
      const auto s = c["law"].get<std::string>();
      if (s == "ideal")
        p.canceller.law = AttenuatorLaw::ideal;
      else if (s == "measured")
        p.canceller.law = AttenuatorLaw::measured;
      else
        throw ConfigError("unknown attenuator law '" + s + "'");
    }
  }
  if (j.contains("pa")) {
    const auto& a = j["pa"];
    check_keys(a, w + ".pa", {"a3", "a5"});
    read_complex(a, "a3", p.pa_a3, w + ".pa");
    read_complex(a, "a5", p.pa_a5, w + ".pa");
  }
  read_dbm(j, "noise_floor_dbm", p.noise_floor_dbm, w);
  read(j, "rx_lag_samples", p.rx_lag_samples, w);
  read(j, "z0_ohm", p.z0_ohm, w);
  read(j, "rf_band_hz", p.rf_band_hz, w);
  read(j, "rf_band_points", p.rf_band_points, w);
  read(j, "fir_pre", p.fir_pre, w);
  read(j, "fir_post", p.fir_post, w);
}

inline json to_json(const NodeProfile& p) {
  using namespace detail;
  json bs = json::array();
  for (const auto& b : p.backscatter) bs.push_back({{"gain_db", b.gain_db}, {"delay_ns", b.delay_ns}, {"phase_deg", b.phase_deg}});
  return json{
      {"circulator",
       {{"isolation_db", p.circulator.isolation_db},
        {"leakage_delay_ns", p.circulator.leakage_delay_ns},
        {"insertion_loss_db", p.circulator.insertion_loss_db}}},
      {"tuner",
       {{"cap_codes", p.tuner.cap_codes},
        {"inductance_h", p.tuner.inductance_h},
        {"cap_min_f", p.tuner.cap_min_f},
        {"cap_step_f", p.tuner.cap_step_f},
        {"topology", topology_name(p.tuner.topology)}}},
      {"antenna", {{"z_ohm", complex_value(p.antenna.z)}, {"slope_ohm_per_hz", complex_value(p.antenna.slope_ohm_per_hz)}}},
      {"backscatter", bs},
      {"canceller_hw",
       {{"coupler_tap_db", p.canceller.coupler_tap_db},
        {"base_loss_db", p.canceller.base_loss_db},
        {"att_step_db", p.canceller.att_step_db},
        {"phase_span_deg", p.canceller.phase_span_deg},
        {"law", p.canceller.law == AttenuatorLaw::ideal ? "ideal" : "measured"},
        {"measured_span_db", p.canceller.measured_span_db}}},
      {"pa", {{"a3", complex_value(p.pa_a3)}, {"a5", complex_value(p.pa_a5)}}},
      {"noise_floor_dbm", dbm_value(p.noise_floor_dbm)},
      {"rx_lag_samples", p.rx_lag_samples},
      {"z0_ohm", p.z0_ohm},
      {"rf_band_hz", p.rf_band_hz},
      {"rf_band_points", p.rf_band_points},
      {"fir_pre", p.fir_pre},
      {"fir_post", p.fir_post},
  };
}

// Overlay a JSON document onto cfg.
inline void apply_config_json(const json& j, ExperimentConfig& cfg) {
  using namespace detail;
  const std::string w = "config";
  check_keys(j, w,
             {"preset", "rate_hz", "carrier_hz", "tx_gain_db", "rx_gain_db", "tx_power_dbm", "seed", "wave",
              "canceller", "remote", "channel", "digital", "durations", "psd", "pipeline"});
  read(j, "rate_hz", cfg.rate_hz, w);
  read(j, "carrier_hz", cfg.carrier_hz, w);
  read(j, "tx_gain_db", cfg.tx_gain_db, w);
  read(j, "rx_gain_db", cfg.rx_gain_db, w);
  read(j, "tx_power_dbm", cfg.tx_power_dbm, w);
  read(j, "seed", cfg.seed, w);
  if (j.contains("wave")) {
    const auto& v = j["wave"];
    const std::string type = v.value("type", std::holds_alternative<ToneWave>(cfg.wave) ? "tone" : "psk");
    if (type == "tone") {
      check_keys(v, "wave", {"type", "offset_hz"});
      ToneWave t = std::holds_alternative<ToneWave>(cfg.wave) ? std::get<ToneWave>(cfg.wave) : ToneWave{};
      read(v, "offset_hz", t.offset_hz, "wave");
      cfg.wave = t;
    } else if (type == "psk") {
      check_keys(v, "wave", {"type", "order", "symbol_rate_hz", "rolloff", "span_symbols"});
      PskWave p = std::holds_alternative<PskWave>(cfg.wave) ? std::get<PskWave>(cfg.wave) : PskWave{};
      read(v, "order", p.order, "wave");
      read(v, "symbol_rate_hz", p.symbol_rate_hz, "wave");
      read(v, "rolloff", p.rolloff, "wave");
      read(v, "span_symbols", p.span_symbols, "wave");
      cfg.wave = p;
    } else {
      throw ConfigError("wave.type must be 'tone' or 'psk'");
    }
  }
  if (j.contains("canceller")) {
    const auto& c = j["canceller"];
    if (c.is_string() && c.get<std::string>() == "auto")
      cfg.canceller = AutoCanceller{};
    else if (c.is_string() && c.get<std::string>() == "factory")
      cfg.canceller = factory_canceller_code();
    else if (c.is_object())
      cfg.canceller = code_from_json(c, "canceller");
    else
      throw ConfigError("canceller must be \"auto\", \"factory\" or {att, ps, caps}");
  }
  if (j.contains("remote")) {
    const auto& r = j["remote"];
    if (r.is_null()) {
      cfg.remote.reset();
    } else {
      check_keys(r, "remote", {"offset_hz", "power_dbm"});
      RemoteSpec spec = cfg.remote.value_or(RemoteSpec{});
      read(r, "offset_hz", spec.offset_hz, "remote");
      read_dbm(r, "power_dbm", spec.power_dbm, "remote");
      cfg.remote = spec;
    }
  }
  if (j.contains("channel")) apply_node_profile_json(j["channel"], cfg.channel);
  if (j.contains("digital")) {
    const auto& d = j["digital"];
    check_keys(d, "digital", {"orders", "memory", "pre_cursor", "ridge_scale", "max_lag"});
    read(d, "orders", cfg.digital.basis.orders, "digital");
    read(d, "memory", cfg.digital.basis.memory, "digital");
    read(d, "pre_cursor", cfg.digital.basis.pre_cursor, "digital");
    read(d, "ridge_scale", cfg.digital.ridge_scale, "digital");
    read(d, "max_lag", cfg.digital.max_lag, "digital");
  }
  if (j.contains("durations")) {
    const auto& d = j["durations"];
    check_keys(d, "durations", {"warmup_samples", "train_samples", "eval_samples"});
    read(d, "warmup_samples", cfg.durations.warmup_samples, "durations");
    read(d, "train_samples", cfg.durations.train_samples, "durations");
    read(d, "eval_samples", cfg.durations.eval_samples, "durations");
  }
  if (j.contains("psd")) {
    const auto& d = j["psd"];
    check_keys(d, "psd", {"nfft", "window", "overlap"});
    read(d, "nfft", cfg.psd.nfft, "psd");
    read(d, "overlap", cfg.psd.overlap, "psd");
    if (d.contains("window")) cfg.psd.window = window_from_name(d["window"].get<std::string>());
  }
  if (j.contains("pipeline")) {
    const auto& d = j["pipeline"];
    check_keys(d, "pipeline", {"block_samples", "queue_capacity", "tune_workers"});
    read(d, "block_samples", cfg.block_samples, "pipeline");
    read(d, "queue_capacity", cfg.queue_capacity, "pipeline");
    read(d, "tune_workers", cfg.tune_workers, "pipeline");
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg = preset_config(j.value("preset", std::string("tone")));
  apply_config_json(j, cfg);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const ExperimentConfig& c) {
  using namespace detail;
  json wave;
  if (const auto* t = std::get_if<ToneWave>(&c.wave))
    wave = {{"type", "tone"}, {"offset_hz", t->offset_hz}};
  else {
    const auto& p = std::get<PskWave>(c.wave);
    wave = {{"type", "psk"}, {"order", p.order}, {"symbol_rate_hz", p.symbol_rate_hz},
            {"rolloff", p.rolloff}, {"span_symbols", p.span_symbols}};
  }
  json canc = std::holds_alternative<AutoCanceller>(c.canceller) ? json("auto") : to_json(std::get<CancellerCode>(c.canceller));
  json remote = c.remote ? json{{"offset_hz", c.remote->offset_hz}, {"power_dbm", dbm_value(c.remote->power_dbm)}} : json(nullptr);
  return json{
      {"rate_hz", c.rate_hz},
      {"carrier_hz", c.carrier_hz},
      {"tx_gain_db", c.tx_gain_db},
      {"rx_gain_db", c.rx_gain_db},
      {"tx_power_dbm", c.tx_power_dbm},
      {"seed", c.seed},
      {"wave", wave},
      {"canceller", canc},
      {"remote", remote},
      {"channel", to_json(c.channel)},
      {"digital",
       {{"orders", c.digital.basis.orders},
        {"memory", c.digital.basis.memory},
        {"pre_cursor", c.digital.basis.pre_cursor},
        {"ridge_scale", c.digital.ridge_scale},
        {"max_lag", c.digital.max_lag}}},
      {"durations",
       {{"warmup_samples", c.durations.warmup_samples},
        {"train_samples", c.durations.train_samples},
        {"eval_samples", c.durations.eval_samples}}},
      {"psd", {{"nfft", c.psd.nfft}, {"window", window_name(c.psd.window)}, {"overlap", c.psd.overlap}}},
      {"pipeline",
       {{"block_samples", c.block_samples}, {"queue_capacity", c.queue_capacity}, {"tune_workers", c.tune_workers}}},
  };
}

inline json to_json(const ExperimentReport& r) {
  json j{
      {"kind", r.kind},
      {"tx_power_dbm", r.tx_power_dbm},
      {"post_rf_power_dbm", r.post_rf_power_dbm},
      {"rf_sic_db", r.rf_sic_db},
      {"post_dig_power_dbm", r.post_dig_power_dbm},
      {"dig_sic_db", r.dig_sic_db},
      {"total_sic_db", r.total_sic_db},
      {"canceller_code_used", to_json(r.canceller_code_used)},
      {"canceller_auto_tuned", r.canceller_auto_tuned},
      {"rf_isolation_band_db", r.rf_isolation_band_db},
      {"canceller_sic_band_db", r.canceller_sic_band_db},
      {"rf_band_hz", r.rf_band_hz},
      {"noise_floor_dbm", detail::dbm_value(r.noise_floor_dbm)},
      {"estimated_lag", r.estimated_lag},
      {"train_samples", r.train_samples},
      {"eval_samples", r.eval_samples},
      {"model", to_json(r.model)},
  };
  if (r.desired) {
    const auto& d = *r.desired;
    j["desired"] = {{"offset_hz", d.offset_hz},
                    {"power_dbm", d.power_dbm},
                    {"snr_reference_db", d.snr_reference_db},
                    {"snr_before_dig_db", d.snr_before_dig_db},
                    {"snr_after_dig_db", d.snr_after_dig_db},
                    {"snr_loss_db", d.snr_loss_db}};
  }
  return j;
}

}  // namespace fdlab
