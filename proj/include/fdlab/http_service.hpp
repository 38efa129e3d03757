#pragma once

// HTTP JSON + WebSocket front end for live tuning sessions (Boost.Beast).
//
//   POST   /sessions                   {config?, stream?}         -> 201 session state
//   GET    /sessions                                               -> {sessions: [id...]}
//   GET    /sessions/{id}                                          -> session state
//   PATCH  /sessions/{id}/canceller    {att?, ps?, caps?}          -> ack
//   POST   /sessions/{id}/tune                                     -> ack (exhaustive search)
//   POST   /sessions/{id}/digital-sic                              -> {report, listing}
//   DELETE /sessions/{id}                                          -> 204
//   GET    /sessions/{id}/stream  (WebSocket upgrade, ?frames=N)   -> JSON frames
//
// Unknown ids give 404, out-of-range codes 422, malformed bodies 400.
// Each connection is served synchronously on its own thread.

#include <sys/socket.h>

#include <atomic>
#include <chrono>
#include <list>
#include <map>
#include <string_view>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "fdlab/config_json.hpp"
#include "fdlab/session.hpp"

namespace fdlab {

namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
namespace net = boost::asio;
using tcp = boost::asio::ip::tcp;

using HttpRequest = http::request<http::string_body>;
using HttpResponse = http::response<http::string_body>;

namespace detail {

struct Target {
  std::vector<std::string> parts;
  std::map<std::string, std::string> query;
};

inline Target parse_target(std::string_view t) {
  Target out;
  std::string_view path = t, q;
  if (auto pos = t.find('?'); pos != std::string_view::npos) {
    path = t.substr(0, pos);
    q = t.substr(pos + 1);
  }
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) out.parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  while (!q.empty()) {
    auto amp = q.find('&');
    auto kv = q.substr(0, amp);
    auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      out.query[std::string(kv)] = "";
    else
      out.query[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    q = q.substr(amp + 1);
  }
  return out;
}

inline StreamSettings stream_from_json(const nlohmann::json& j) {
  check_keys(j, "stream", {"frame_rate_hz", "nfft", "segments"});
  StreamSettings s;
  read(j, "frame_rate_hz", s.frame_rate_hz, "stream");
  read(j, "nfft", s.nfft, "stream");
  read(j, "segments", s.segments, "stream");
  s.validate();
  return s;
}

inline nlohmann::json to_json(const StreamSettings& s) {
  return {{"frame_rate_hz", s.frame_rate_hz}, {"nfft", s.nfft}, {"segments", s.segments}};
}

struct HttpError {
  http::status status;
  nlohmann::json body;
};

inline int int_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw HttpError{http::status::bad_request, {{"error", std::string(key) + " must be an integer"}}};
  return v.get<int>();
}

}  // namespace detail

class HttpService {
 public:
  HttpService() = default;
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;
  ~HttpService() { stop(); }

  SessionRegistry& registry() { return registry_; }

  // Binds and starts accepting on a background thread. Port 0 picks an
  // ephemeral port; the bound port is returned.
  unsigned short start(const std::string& address = "127.0.0.1", unsigned short port = 0) {
    tcp::endpoint ep(net::ip::make_address(address), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  unsigned short port() const { return port_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    beast::error_code ec;
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    acceptor_.close(ec);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<Connection> conns;
    {
      std::lock_guard lock(conn_mu_);
      for (auto& c : conns_) ::shutdown(c.fd, SHUT_RDWR);
      conns.splice(conns.end(), conns_);
    }
    for (auto& c : conns)
      if (c.thread.joinable()) c.thread.join();
  }

  // Blocks until stop() is called from elsewhere (e.g. a signal handler thread).
  void wait() {
    if (accept_thread_.joinable()) accept_thread_.join();
  }

  // Request router, independent of any socket.
  HttpResponse handle(const HttpRequest& req) {
    try {
      return route(req);
    } catch (const detail::HttpError& e) {
      return json_response(req, e.status, e.body);
    } catch (const UnknownSessionError& e) {
      return json_response(req, http::status::not_found, {{"error", e.what()}});
    } catch (const RangeError& e) {
      return json_response(req, http::status::unprocessable_entity,
                           {{"error", e.what()}, {"field", e.field()}, {"value", e.value()}, {"min", e.min()}, {"max", e.max()}});
    } catch (const nlohmann::json::exception& e) {
      return json_response(req, http::status::bad_request, {{"error", std::string("bad JSON: ") + e.what()}});
    } catch (const ConfigError& e) {
      return json_response(req, http::status::bad_request, {{"error", e.what()}});
    } catch (const DomainError& e) {
      return json_response(req, http::status::unprocessable_entity, {{"error", e.what()}});
    } catch (const std::exception& e) {
      return json_response(req, http::status::internal_server_error, {{"error", e.what()}});
    }
  }

 private:
  struct Connection {
    std::thread thread;
    int fd = -1;
    std::shared_ptr<std::atomic<bool>> done;
  };

  static HttpResponse json_response(const HttpRequest& req, http::status status, const nlohmann::json& body) {
    HttpResponse res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    if (status != http::status::no_content) res.body() = body.dump();
    res.keep_alive(req.keep_alive());
    res.prepare_payload();
    return res;
  }

  static nlohmann::json session_state(const Session& s) {
    const auto ack = s.ack();
    return {{"id", s.id()},
            {"code", to_json(ack.code)},
            {"rf_sic_db", ack.rf_sic_db},
            {"canceller_sic_band_db", ack.canceller_sic_band_db},
            {"next_seq", ack.effective_seq},
            {"stream", detail::to_json(s.stream_settings())},
            {"config", to_json(s.config())}};
  }

  static nlohmann::json parse_body(const HttpRequest& req) {
    if (req.body().empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body());
    if (!j.is_object()) throw detail::HttpError{http::status::bad_request, {{"error", "body must be a JSON object"}}};
    return j;
  }

  HttpResponse route(const HttpRequest& req) {
    const auto t = detail::parse_target(std::string_view(req.target().data(), req.target().size()));
    const auto& p = t.parts;
    const auto m = req.method();
    if (m == http::verb::options) {
      HttpResponse res{http::status::no_content, req.version()};
      res.set(http::field::access_control_allow_origin, "*");
      res.set(http::field::access_control_allow_methods, "GET, POST, PATCH, DELETE, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      res.keep_alive(req.keep_alive());
      res.prepare_payload();
      return res;
    }
    if (p.empty() || p[0] != "sessions") throw detail::HttpError{http::status::not_found, {{"error", "no such route"}}};
    auto not_allowed = [&] { return detail::HttpError{http::status::method_not_allowed, {{"error", "method not allowed"}}}; };

    if (p.size() == 1) {
      if (m == http::verb::get) return json_response(req, http::status::ok, {{"sessions", registry_.ids()}});
      if (m != http::verb::post) throw not_allowed();
      const auto body = parse_body(req);
      detail::check_keys(body, "request", {"config", "stream"});
      ExperimentConfig cfg = body.contains("config") ? config_from_json(body["config"]) : tone_experiment_config();
      StreamSettings stream = body.contains("stream") ? detail::stream_from_json(body["stream"]) : StreamSettings{};
      auto s = registry_.create(std::move(cfg), stream);
      return json_response(req, http::status::created, session_state(*s));
    }

    auto session = registry_.get(p[1]);
    if (p.size() == 2) {
      if (m == http::verb::get) return json_response(req, http::status::ok, session_state(*session));
      if (m == http::verb::delete_) {
        registry_.close(p[1]);
        return json_response(req, http::status::no_content, nlohmann::json());
      }
      throw not_allowed();
    }
    if (p.size() == 3 && p[2] == "canceller") {
      if (m != http::verb::patch) throw not_allowed();
      const auto body = parse_body(req);
      detail::check_keys(body, "canceller", {"att", "ps", "caps"});
      CancellerCode code = session->code();
      if (body.contains("att")) code.att = detail::int_field(body, "att");
      if (body.contains("ps")) code.ps = detail::int_field(body, "ps");
      if (body.contains("caps")) {
        const auto& c = body["caps"];
        if (!c.is_array() || c.size() != 3)
          throw detail::HttpError{http::status::bad_request, {{"error", "caps must be an array of 3 integers"}}};
        for (int i = 0; i < 3; ++i) {
          if (!c[i].is_number_integer())
            throw detail::HttpError{http::status::bad_request, {{"error", "caps must be an array of 3 integers"}}};
          code.caps[i] = c[i].get<int>();
        }
      }
      return json_response(req, http::status::ok, to_json(session->set_canceller(code)));
    }
    if (p.size() == 3 && p[2] == "tune") {
      if (m != http::verb::post) throw not_allowed();
      return json_response(req, http::status::ok, to_json(session->tune()));
    }
    if (p.size() == 3 && p[2] == "digital-sic") {
      if (m != http::verb::post) throw not_allowed();
      const auto r = session->run_digital_sic();
      return json_response(req, http::status::ok, {{"report", to_json(r)}, {"listing", format_listing(r)}});
    }
    if (p.size() == 3 && p[2] == "stream")
      throw detail::HttpError{http::status::upgrade_required, {{"error", "stream requires a WebSocket upgrade"}}};
    throw detail::HttpError{http::status::not_found, {{"error", "no such route"}}};
  }

  void accept_loop() {
    while (!stopping_) {
      tcp::socket sock(io_);
      beast::error_code ec;
      acceptor_.accept(sock, ec);
      if (ec) {
        if (stopping_) break;
        continue;
      }
      std::lock_guard lock(conn_mu_);
      reap_locked();
      auto done = std::make_shared<std::atomic<bool>>(false);
      const int fd = sock.native_handle();
      conns_.push_back(Connection{std::thread([this, s = std::move(sock), done]() mutable {
                                    serve_connection(std::move(s));
                                    *done = true;
                                  }),
                                  fd, done});
    }
  }

  void reap_locked() {
    for (auto it = conns_.begin(); it != conns_.end();) {
      if (*it->done) {
        it->thread.join();
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve_connection(tcp::socket sock) {
    beast::error_code ec;
    beast::flat_buffer buf;
    for (;;) {
      HttpRequest req;
      http::read(sock, buf, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        serve_websocket(std::move(sock), std::move(req));
        return;
      }
      auto res = handle(req);
      const bool keep = res.keep_alive();
      http::write(sock, res, ec);
      if (ec || !keep || stopping_) break;
    }
    sock.shutdown(tcp::socket::shutdown_send, ec);
  }

  void serve_websocket(tcp::socket sock, HttpRequest req) {
    beast::error_code ec;
    const auto t = detail::parse_target(std::string_view(req.target().data(), req.target().size()));
    std::shared_ptr<Session> session;
    std::optional<std::uint64_t> max_frames;
    try {
      if (t.parts.size() != 3 || t.parts[0] != "sessions" || t.parts[2] != "stream")
        throw detail::HttpError{http::status::not_found, {{"error", "no such stream"}}};
      session = registry_.get(t.parts[1]);
      if (auto it = t.query.find("frames"); it != t.query.end()) max_frames = std::stoull(it->second);
    } catch (...) {
      auto res = handle(req);
      if (session) res = json_response(req, http::status::bad_request, {{"error", "bad stream query"}});
      res.keep_alive(false);
      http::write(sock, res, ec);
      sock.shutdown(tcp::socket::shutdown_send, ec);
      return;
    }

    websocket::stream<tcp::socket> ws(std::move(sock));
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / session->stream_settings().frame_rate_hz));
    auto next = std::chrono::steady_clock::now();
    std::uint64_t sent = 0;
    while (!stopping_ && registry_.contains(session->id()) && (!max_frames || sent < *max_frames)) {
      const auto frame = session->next_frame();
      ws.write(net::buffer(to_json(frame).dump()), ec);
      if (ec) return;
      ++sent;
      next += period;
      std::this_thread::sleep_until(next);
    }
    ws.close(websocket::close_code::normal, ec);
    // Drain until the peer acknowledges the close.
    beast::flat_buffer drain;
    while (!ec) ws.read(drain, ec);
  }

  SessionRegistry registry_;
  net::io_context io_;
  tcp::acceptor acceptor_{io_};
  std::thread accept_thread_;
  std::atomic<bool> stopping_{true};
  unsigned short port_ = 0;
  std::mutex conn_mu_;
  std::list<Connection> conns_;
};

}  // namespace fdlab
