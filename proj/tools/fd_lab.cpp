// fd-lab: command-line front end for the full-duplex SIC simulator.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fdlab/config_json.hpp"
#include "fdlab/experiment.hpp"
#include "fdlab/http_service.hpp"
#include "fdlab/spi_codec.hpp"

using namespace fdlab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::optional<double> rate, freq, tx_gain, rx_gain, tx_power;
  std::optional<std::uint64_t> seed;
  std::string canceller;
  bool json = false;
  std::string psd_out, psd_rf_out, iq_out;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config_path, "experiment config JSON");
  app->add_option("--preset", o.preset, "start from a named preset")
      ->check(CLI::IsMember(preset_names()));
  app->add_option("--rate", o.rate, "sample rate in S/s");
  app->add_option("--freq", o.freq, "carrier frequency in Hz");
  app->add_option("--tx-gain", o.tx_gain, "PA drive gain in dB");
  app->add_option("--rx-gain", o.rx_gain, "receiver gain in dB");
  app->add_option("--tx-power", o.tx_power, "TX output power in dBm");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--canceller", o.canceller, "auto | factory | ATT,PS[,CAP1,CAP2,CAP3]");
  app->add_flag("--json", o.json, "print the report as JSON");
  app->add_option("--psd-out", o.psd_out, "write the post-digital PSD as CSV");
  app->add_option("--psd-rf-out", o.psd_rf_out, "write the post-RF PSD as CSV");
  app->add_option("--iq-out", o.iq_out, "write post-RF eval samples as cf32 (+ .json sidecar)");
}

CancellerSetting parse_canceller(const std::string& s, const TunerConfig& tuner) {
  if (s == "auto") return AutoCanceller{};
  if (s == "factory") return factory_canceller_code();
  std::vector<int> v;
  std::size_t i = 0;
  while (i <= s.size()) {
    auto j = s.find(',', i);
    if (j == std::string::npos) j = s.size();
    try {
      v.push_back(std::stoi(s.substr(i, j - i)));
    } catch (const std::exception&) {
      throw ConfigError("--canceller expects auto, factory or ATT,PS[,CAP1,CAP2,CAP3]");
    }
    i = j + 1;
  }
  if (v.size() != 2 && v.size() != 5) throw ConfigError("--canceller expects 2 or 5 comma-separated codes");
  CancellerCode c{v[0], v[1], tuner.cap_codes};
  if (v.size() == 5) c.caps = {v[2], v[3], v[4]};
  c.validate();
  return c;
}

ExperimentConfig build_config(const CommonOpts& o, const std::string& default_preset) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config '" + o.config_path + "'");
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
  }
  if (!o.preset.empty()) j["preset"] = o.preset;
  if (!j.contains("preset")) j["preset"] = default_preset;
  ExperimentConfig cfg = preset_config(j["preset"].get<std::string>());
  apply_config_json(j, cfg);
  if (o.rate) cfg.rate_hz = *o.rate;
  if (o.freq) cfg.carrier_hz = *o.freq;
  if (o.tx_gain) cfg.tx_gain_db = *o.tx_gain;
  if (o.rx_gain) cfg.rx_gain_db = *o.rx_gain;
  if (o.tx_power) cfg.tx_power_dbm = *o.tx_power;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.canceller.empty()) cfg.canceller = parse_canceller(o.canceller, cfg.channel.tuner);
  return cfg;
}

void emit(const ExperimentReport& r, const ExperimentConfig& cfg, const CommonOpts& o) {
  if (o.json)
    std::cout << to_json(r).dump(2) << '\n';
  else
    std::cout << format_listing(r);
  if (!o.psd_out.empty()) export_psd(r.psd_post_dig, o.psd_out);
  if (!o.psd_rf_out.empty()) export_psd(r.psd_post_rf, o.psd_rf_out);
  if (!o.iq_out.empty()) write_iq(o.iq_out, ComplexBasebandSignal{r.post_rf, cfg.rate_hz}, cfg.seed);
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) std::thread([] { g_service->stop(); }).detach();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-duplex self-interference cancellation lab"};
  app.require_subcommand(1);

  CommonOpts node_opts;
  std::optional<double> node_wave;
  auto* node = app.add_subcommand("node", "single-node SIC experiment (RF + digital)");
  add_common(node, node_opts);
  node->add_option("--wave-freq", node_wave, "SI tone offset in Hz");

  CommonOpts link_opts;
  std::optional<double> link_wave, link_si, link_remote_power;
  auto* link = app.add_subcommand("link", "node experiment with a remote desired signal");
  add_common(link, link_opts);
  link->add_option("--wave-freq", link_wave, "remote tone offset in Hz");
  link->add_option("--si-freq", link_si, "SI tone offset in Hz");
  link->add_option("--remote-power", link_remote_power, "remote power at the RX in dBm");

  CommonOpts tune_opts;
  std::string strategy = "exhaustive";
  unsigned workers = 0;
  auto* tune = app.add_subcommand("tune", "search the canceller code for the configured channel");
  add_common(tune, tune_opts);
  tune->add_option("--strategy", strategy, "exhaustive | coordinate")
      ->check(CLI::IsMember({"exhaustive", "coordinate"}));
  tune->add_option("--workers", workers, "threads for the exhaustive search (0 = hardware)");

  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP/WebSocket tuning service");
  serve->add_option("--address", address, "bind address");
  serve->add_option("--port", port, "TCP port (0 = ephemeral)");

  int att = 30, ps = 110;
  std::vector<int> caps{16, 6, 6};
  double spi_clock = 8e6;
  auto* spi = app.add_subcommand("spi", "encode a canceller configuration as SPI words");
  spi->add_option("--att", att, "attenuator code 0-127");
  spi->add_option("--ps", ps, "phase shifter code 0-255");
  spi->add_option("--caps", caps, "three tuner capacitor codes 0-31")->expected(3);
  spi->add_option("--spi-clock", spi_clock, "SPI clock in Hz");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*node) {
      auto cfg = build_config(node_opts, "tone");
      if (node_wave) {
        if (!std::holds_alternative<ToneWave>(cfg.wave)) throw ConfigError("--wave-freq needs a tone waveform");
        std::get<ToneWave>(cfg.wave).offset_hz = *node_wave;
      }
      cfg.remote.reset();
      emit(run_node_experiment(cfg), cfg, node_opts);
    } else if (*link) {
      auto cfg = build_config(link_opts, "tone-link");
      if (!cfg.remote) cfg.remote = RemoteSpec{};
      if (link_wave) cfg.remote->offset_hz = *link_wave;
      if (link_remote_power) cfg.remote->power_dbm = *link_remote_power;
      if (link_si) {
        if (!std::holds_alternative<ToneWave>(cfg.wave)) throw ConfigError("--si-freq needs a tone waveform");
        std::get<ToneWave>(cfg.wave).offset_hz = *link_si;
      }
      emit(run_link_experiment(cfg), cfg, link_opts);
    } else if (*tune) {
      auto cfg = build_config(tune_opts, "tone");
      cfg.validate();
      const auto& ch = cfg.channel;
      const auto h = node_si_response(ch, ch.tuner.cap_codes, ch.band_grid(), cfg.carrier_hz);
      const unsigned w = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
      const auto r = tune_canceller(h, ch.canceller, ch.band(),
                                    strategy == "exhaustive" ? TuneStrategy::exhaustive : TuneStrategy::coordinate_descent,
                                    ch.tuner.cap_codes, w);
      const auto out = evaluate_canceller(ch, cfg.carrier_hz, r.code, true);
      if (tune_opts.json) {
        nlohmann::json j{{"code", to_json(r.code)},
                         {"strategy", strategy},
                         {"canceller_sic_band_db", out.canceller_sic_band_db},
                         {"rf_isolation_band_db", out.rf_isolation_band_db}};
        if (strategy == "coordinate") j["sweeps"] = r.sweeps;
        std::cout << j.dump(2) << '\n';
      } else {
        std::printf("ATT = %d, PS = %d, CAP = %d/%d/%d\n", r.code.att, r.code.ps, r.code.caps[0], r.code.caps[1],
                    r.code.caps[2]);
        std::printf("Canceller SIC across %.1f MHz: %.2f dB\n", ch.rf_band_hz / 1e6, out.canceller_sic_band_db);
        std::printf("RF isolation across %.1f MHz: %.2f dB\n", ch.rf_band_hz / 1e6, out.rf_isolation_band_db);
      }
    } else if (*serve) {
      HttpService svc;
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto bound = svc.start(address, port);
      std::cout << "listening on http://" << address << ':' << bound << std::endl;
      svc.wait();
      svc.stop();
      g_service = nullptr;
    } else if (*spi) {
      const auto words = encode_box_config(att, ps, {caps[0], caps[1], caps[2]});
      std::cout << hex_dump(words);
      std::printf("transfer time at %.3g Hz: %g us\n", spi_clock, transfer_time_us(words, spi_clock));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
