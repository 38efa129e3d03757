#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fdlab/http_service.hpp"
#include "fdlab/session.hpp"

using namespace fdlab;

namespace {

StreamSettings small_stream() { return StreamSettings{50.0, 256, 4}; }

double in_band_power(const PsdFrame& f, double half_width) {
  double w = 0.0;
  for (std::size_t i = 0; i < f.freqs_hz.size(); ++i)
    if (std::abs(f.freqs_hz[i]) <= half_width) w += dbm_to_watts(f.psd_dbm[i]);
  return watts_to_dbm(w);
}

struct Reply {
  int status;
  nlohmann::json body;
};

Reply request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
  net::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  HttpRequest req{verb, target, 11};
  req.set(http::field::host, "localhost");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(sock, req);
  beast::flat_buffer buf;
  HttpResponse res;
  http::read(sock, buf, res);
  beast::error_code ec;
  sock.shutdown(tcp::socket::shutdown_both, ec);
  Reply r{static_cast<int>(res.result_int()), nullptr};
  if (!res.body().empty()) r.body = nlohmann::json::parse(res.body());
  return r;
}

}  // namespace

TEST(Session, DetuningAttenuationRaisesInBandResidual) {
  Session s("t", tone_experiment_config(), small_stream());
  const auto tuned = s.tune();
  const double at_tuned = in_band_power(s.next_frame(), 2.5e6);
  const auto ack = s.set_canceller(CancellerCode{0, tuned.code.ps, tuned.code.caps});
  EXPECT_EQ(ack.effective_seq, 1u);
  const auto f = s.next_frame();
  EXPECT_EQ(f.seq, 1u);
  EXPECT_EQ(f.code.att, 0);
  EXPECT_GT(in_band_power(f, 2.5e6), at_tuned + 3.0);
  EXPECT_LT(ack.rf_sic_db, tuned.rf_sic_db);
}

TEST(Session, LastWriterWinsAndBothAcked) {
  Session s("t", tone_experiment_config(), small_stream());
  const auto a = s.set_canceller(CancellerCode{10, 20, {16, 6, 6}});
  const auto b = s.set_canceller(CancellerCode{11, 21, {16, 6, 6}});
  EXPECT_EQ(a.code, (CancellerCode{10, 20, {16, 6, 6}}));
  EXPECT_EQ(b.code, (CancellerCode{11, 21, {16, 6, 6}}));
  EXPECT_EQ(s.next_frame().code, b.code);
}

TEST(Session, StationaryWithoutChanges) {
  Session s("t", tone_experiment_config(), StreamSettings{10.0, 1024, 8});
  const auto a = s.next_frame(), b = s.next_frame();
  EXPECT_EQ(b.seq, a.seq + 1);
  // Bin-wise differences are noise only: the tone bin is stable, total power stable.
  const auto k = nearest_bin(PsdEstimate{a.freqs_hz, a.psd_dbm}, 200e3);
  EXPECT_NEAR(a.psd_dbm[k], b.psd_dbm[k], 0.5);
  EXPECT_NEAR(a.rf_sic_db, b.rf_sic_db, 0.1);
}

TEST(Session, ConcurrentWritersAndReaders) {
  Session s("t", tone_experiment_config(), small_stream());
  std::vector<std::thread> th;
  for (int i = 0; i < 4; ++i)
    th.emplace_back([&, i] {
      for (int k = 0; k < 10; ++k) s.set_canceller(CancellerCode{i * 10 + k, k, {16, 6, 6}});
    });
  std::vector<std::uint64_t> seqs;
  for (int k = 0; k < 20; ++k) seqs.push_back(s.next_frame().seq);
  for (auto& t : th) t.join();
  for (std::size_t i = 1; i < seqs.size(); ++i) EXPECT_GT(seqs[i], seqs[i - 1]);
}

TEST(Registry, UnknownIdsAndRangeErrors) {
  SessionRegistry reg;
  auto s = reg.create(tone_experiment_config(), small_stream());
  EXPECT_EQ(reg.get(s->id()), s);
  EXPECT_THROW(reg.get("nope"), UnknownSessionError);
  EXPECT_THROW(s->set_canceller(CancellerCode{128, 0, {0, 0, 0}}), RangeError);
  reg.close(s->id());
  EXPECT_THROW(reg.close(s->id()), UnknownSessionError);
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { port = svc.start("127.0.0.1", 0); }
  void TearDown() override { svc.stop(); }
  HttpService svc;
  unsigned short port = 0;
};

TEST_F(ServiceTest, SessionLifecycle) {
  auto r = request(port, http::verb::post, "/sessions", R"({"stream": {"frame_rate_hz": 50, "nfft": 256, "segments": 4}})");
  ASSERT_EQ(r.status, 201);
  const std::string id = r.body["id"];
  EXPECT_EQ(r.body["config"]["rate_hz"], 5e6);

  r = request(port, http::verb::patch, "/sessions/" + id + "/canceller", R"({"att": 31})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["code"]["att"], 31);
  EXPECT_TRUE(r.body.contains("rf_sic_db"));

  r = request(port, http::verb::patch, "/sessions/" + id + "/canceller", R"({"att": 200})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["field"], "ATT");
  EXPECT_EQ(r.body["min"], 0);
  EXPECT_EQ(r.body["max"], 127);

  r = request(port, http::verb::patch, "/sessions/" + id + "/canceller", R"({"caps": [1, 2, 40]})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["field"], "CAP3");

  r = request(port, http::verb::patch, "/sessions/" + id + "/canceller", R"({"att": "x"})");
  EXPECT_EQ(r.status, 400);

  r = request(port, http::verb::get, "/sessions/" + id);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["code"]["att"], 31);

  r = request(port, http::verb::post, "/sessions/" + id + "/tune");
  ASSERT_EQ(r.status, 200);
  const auto tuned = r.body["code"];
  {
    NodeProfile node;
    const auto h = node_si_response(node, node.tuner.cap_codes, node.band_grid(), 900e6);
    const auto expect = tune_exhaustive(h, node.canceller, node.band(), node.tuner.cap_codes);
    EXPECT_EQ(tuned["att"], expect.code.att);
    EXPECT_EQ(tuned["ps"], expect.code.ps);
  }

  r = request(port, http::verb::post, "/sessions/" + id + "/digital-sic");
  ASSERT_EQ(r.status, 200);
  EXPECT_GT(r.body["report"]["total_sic_db"].get<double>(), 80.0);
  EXPECT_NE(r.body["listing"].get<std::string>().find("Total SIC"), std::string::npos);

  r = request(port, http::verb::delete_, "/sessions/" + id);
  EXPECT_EQ(r.status, 204);
  EXPECT_EQ(request(port, http::verb::get, "/sessions/" + id).status, 404);
  EXPECT_EQ(request(port, http::verb::patch, "/sessions/" + id + "/canceller", R"({"att": 1})").status, 404);
  EXPECT_EQ(request(port, http::verb::delete_, "/sessions/" + id).status, 404);
}

TEST_F(ServiceTest, BadRequests) {
  EXPECT_EQ(request(port, http::verb::post, "/sessions", "{not json").status, 400);
  EXPECT_EQ(request(port, http::verb::post, "/sessions", R"({"config": {"rate_hz": -1}})").status, 400);
  EXPECT_EQ(request(port, http::verb::get, "/nothing").status, 404);
  EXPECT_EQ(request(port, http::verb::put, "/sessions").status, 405);
}

TEST_F(ServiceTest, WebSocketStreamsOrderedFrames) {
  auto r = request(port, http::verb::post, "/sessions", R"({"stream": {"frame_rate_hz": 100, "nfft": 256, "segments": 4}})");
  const std::string id = r.body["id"];

  net::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  websocket::stream<tcp::socket> ws(std::move(sock));
  ws.handshake("localhost", "/sessions/" + id + "/stream?frames=5");
  std::vector<nlohmann::json> frames;
  beast::error_code ec;
  for (;;) {
    beast::flat_buffer buf;
    ws.read(buf, ec);
    if (ec) break;
    frames.push_back(nlohmann::json::parse(beast::buffers_to_string(buf.data())));
  }
  EXPECT_EQ(ec, websocket::error::closed);
  ASSERT_EQ(frames.size(), 5u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i]["seq"], i);
    EXPECT_EQ(frames[i]["freqs_hz"].size(), 256u);
    EXPECT_EQ(frames[i]["psd_dbm"].size(), 256u);
    EXPECT_TRUE(frames[i]["rf_sic_db"].is_number());
  }
}

TEST_F(ServiceTest, WebSocketUnknownSessionRejected) {
  net::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{http::verb::get, "/sessions/missing/stream", 11};
  req.set(http::field::host, "localhost");
  req.set(http::field::connection, "Upgrade");
  req.set(http::field::upgrade, "websocket");
  req.set(http::field::sec_websocket_version, "13");
  req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
  http::write(sock, req);
  beast::flat_buffer buf;
  HttpResponse res;
  http::read(sock, buf, res);
  EXPECT_EQ(res.result_int(), 404u);
  EXPECT_EQ(nlohmann::json::parse(res.body()).at("error"), "unknown session 'missing'");
}
