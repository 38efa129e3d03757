#include <gtest/gtest.h>

#include <random>

#include "fdlab/experiment.hpp"
#include "fdlab/rf_canceller.hpp"

using namespace fdlab;

namespace {

FrequencyResponse flat(cdouble g, std::size_t n = 21) {
  const auto grid = linear_grid(-2.5e6, 2.5e6, n);
  return FrequencyResponse{grid, std::vector<cdouble>(n, g)};
}

struct OracleBest {
  CancellerCode code;
  double sic_db;
};

// Full scan computing the residual pointwise on the grid (no moment shortcut).
OracleBest brute_force(const FrequencyResponse& h, const CancellerParams& p, const Band& band) {
  double before = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < h.freqs.size(); ++i)
    if (band.contains(h.freqs[i])) {
      before += std::norm(h.gains[i]);
      ++n;
    }
  OracleBest best{{}, -1e300};
  for (int att = 0; att < 128; ++att)
    for (int ps = 0; ps < 256; ++ps) {
      const double mag = std::pow(10.0, -(p.coupler_tap_db + p.base_loss_db + att * p.att_step_db) / 20.0);
      const cdouble g = std::polar(mag, ps * 360.0 / 256.0 * M_PI / 180.0);
      double after = 0.0;
      for (std::size_t i = 0; i < h.freqs.size(); ++i)
        if (band.contains(h.freqs[i])) after += std::norm(h.gains[i] - g);
      const double sic = 10.0 * std::log10(before / after);
      if (sic > best.sic_db) best = {{att, ps, {16, 6, 6}}, sic};
    }
  return best;
}

double code_sic(const FrequencyResponse& h, const CancellerCode& c, const CancellerParams& p, const Band& band) {
  return rf_sic_db(h, residual_response(h, canceller_gain(c, p, h.freqs)), band);
}

}  // namespace

TEST(Attenuator, Examples) {
  CancellerParams p;
  EXPECT_EQ(att_code_to_attenuation_db(0, p), 0.0);
  EXPECT_EQ(att_code_to_attenuation_db(127, p), 31.75);
  EXPECT_EQ(att_code_to_attenuation_db(30, p), 7.5);
  EXPECT_THROW(att_code_to_attenuation_db(128, p), DomainError);
  EXPECT_THROW(att_code_to_attenuation_db(-1, p), DomainError);
}

TEST(Attenuator, MeasuredLawSaturatesAt29dB) {
  CancellerParams p;
  p.law = AttenuatorLaw::measured;
  EXPECT_NEAR(att_code_to_attenuation_db(127, p), 29.0, 1e-9);
  for (int c = 1; c < 128; ++c) EXPECT_GT(att_code_to_attenuation_db(c, p), att_code_to_attenuation_db(c - 1, p));
}

TEST(PhaseShifter, Examples) {
  CancellerParams p;
  EXPECT_EQ(ps_code_to_phase_deg(0, p), 0.0);
  EXPECT_EQ(ps_code_to_phase_deg(128, p), 180.0);
  EXPECT_EQ(ps_code_to_phase_deg(110, p), 154.6875);
  EXPECT_THROW(ps_code_to_phase_deg(256, p), DomainError);
}

TEST(CancellerGain, Examples) {
  CancellerParams p;
  const std::vector<double> grid{0.0};
  const auto g0 = canceller_gain(CancellerCode{0, 0, {16, 6, 6}}, p, grid).gains[0];
  EXPECT_NEAR(std::abs(g0), std::pow(10.0, -17.5 / 20.0), 1e-15);
  const auto g116 = canceller_gain(CancellerCode{116, 0, {16, 6, 6}}, p, grid).gains[0];
  EXPECT_NEAR(20.0 * std::log10(std::abs(g116)), -46.5, 1e-12);
  const auto g64 = canceller_gain(CancellerCode{0, 64, {16, 6, 6}}, p, grid).gains[0];
  EXPECT_NEAR(std::abs(g64), std::abs(g0), 1e-15);
  EXPECT_NEAR(std::arg(g64 / g0) * 180.0 / M_PI, 90.0, 1e-12);
}

TEST(CancellerGain, QuantizationSteps) {
  CancellerParams p;
  for (int a = 0; a < 127; ++a) {
    const double d = 20.0 * std::log10(std::abs(canceller_gain_value(a, 0, p)) / std::abs(canceller_gain_value(a + 1, 0, p)));
    EXPECT_NEAR(d, 0.25, 0.25 * 1e-12);
  }
  for (int s = 0; s < 255; ++s) {
    double d = std::arg(canceller_gain_value(0, s + 1, p) / canceller_gain_value(0, s, p)) * 180.0 / M_PI;
    EXPECT_NEAR(d, 360.0 / 256.0, 1e-9);
  }
}

TEST(Residual, Examples) {
  const auto h = flat(std::polar(0.1, 30.0 * M_PI / 180.0));
  for (const auto& g : residual_response(h, h).gains) EXPECT_EQ(g, cdouble(0.0, 0.0));
  const auto zero = flat(cdouble(0.0, 0.0));
  EXPECT_EQ(residual_response(h, zero).gains, h.gains);
  const auto anti = flat(std::polar(0.1, 210.0 * M_PI / 180.0));
  for (const auto& g : residual_response(h, anti).gains) EXPECT_NEAR(std::abs(g), 0.2, 1e-15);
  EXPECT_THROW(residual_response(h, flat(1.0, 5)), ShapeError);
}

TEST(RfSic, Examples) {
  const auto h = flat(cdouble(0.3, -0.1));
  const Band band;
  EXPECT_EQ(rf_sic_db(h, h, band), 0.0);
  auto small = h;
  for (auto& g : small.gains) g /= 100.0;
  EXPECT_NEAR(rf_sic_db(h, small, band), 40.0, 1e-12);
  EXPECT_EQ(rf_sic_db(h, residual_response(h, h), band), kSicCapDb);
  EXPECT_THROW(rf_sic_db(h, h, Band{1.1e6, 1.1e6 + 1.0}), DomainError);
}

TEST(Tune, RepresentableChannelRecoversCode) {
  CancellerParams p;
  const CancellerCode truth{42, 77, {16, 6, 6}};
  const auto h = flat(canceller_gain_value(truth.att, truth.ps, p));
  const auto r = tune_canceller(h, p, Band{}, TuneStrategy::exhaustive);
  EXPECT_EQ(r.code, truth);
  const auto res = residual_response(h, canceller_gain(r.code, p, h.freqs));
  EXPECT_LT(10.0 * std::log10(mean_band_power(res, Band{}) / mean_band_power(h, Band{}) + 1e-300), -100.0);
}

TEST(Tune, ExhaustiveMatchesBruteForceOnRandomFlatChannels) {
  CancellerParams p;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mag_db(-47.0, -18.0), ph(0.0, 2.0 * M_PI);
  for (int i = 0; i < 10; ++i) {
    const auto h = flat(std::polar(std::pow(10.0, mag_db(rng) / 20.0), ph(rng)), 11);
    const auto oracle = brute_force(h, p, Band{});
    const auto r = tune_canceller(h, p, Band{}, TuneStrategy::exhaustive, {16, 6, 6}, 4);
    const bool same = r.code == oracle.code;
    EXPECT_TRUE(same || std::abs(code_sic(h, r.code, p, Band{}) - oracle.sic_db) < 1e-9) << "channel " << i;
  }
}

TEST(Tune, WorkerPartitionDoesNotChangeResult) {
  NodeProfile node;
  const auto h = node_si_response(node, node.tuner.cap_codes, node.band_grid(), 900e6);
  const auto r1 = tune_exhaustive(h, node.canceller, node.band(), node.tuner.cap_codes, 1);
  for (unsigned w : {2u, 3u, 7u, 128u, 500u}) EXPECT_EQ(tune_exhaustive(h, node.canceller, node.band(), node.tuner.cap_codes, w).code, r1.code);
}

TEST(Tune, ExhaustiveIsOptimalOverFullScan) {
  NodeProfile node;
  const auto h = node_si_response(node, node.tuner.cap_codes, node.band_grid(), 900e6);
  const auto r = tune_exhaustive(h, node.canceller, node.band(), node.tuner.cap_codes);
  const double best = code_sic(h, r.code, node.canceller, node.band());
  for (int att = 0; att < 128; att += 3)
    for (int ps = 0; ps < 256; ++ps)
      EXPECT_LE(code_sic(h, CancellerCode{att, ps, node.tuner.cap_codes}, node.canceller, node.band()), best + 1e-9);
}

TEST(Tune, TiesBreakToSmallestCode) {
  // A zero channel makes every code cost |g|^2; the largest attenuation wins, smallest PS among equals.
  CancellerParams p;
  const auto r = tune_canceller(flat(cdouble(0.0, 0.0)), p, Band{}, TuneStrategy::exhaustive);
  EXPECT_EQ(r.code.att, 127);
  EXPECT_EQ(r.code.ps, 0);
}

TEST(Tune, CoordinateDescentImprovesAndTerminates) {
  NodeProfile node;
  const auto h = node_si_response(node, node.tuner.cap_codes, node.band_grid(), 900e6);
  const CancellerCode start{0, 0, node.tuner.cap_codes};
  const auto r = tune_coordinate_descent(h, node.canceller, node.band(), start);
  EXPECT_LE(r.sweeps, 20);
  EXPECT_GE(r.sic_db, code_sic(h, start, node.canceller, node.band()));
  const auto ex = tune_exhaustive(h, node.canceller, node.band(), node.tuner.cap_codes);
  EXPECT_LE(r.sic_db, ex.sic_db + 1e-12);
}

TEST(Tune, DefaultNodeReaches40dBAcross5MHz) {
  NodeProfile node;
  const auto h = node_si_response(node, node.tuner.cap_codes, node.band_grid(), 900e6);
  const auto r = tune_canceller(h, node.canceller, node.band(), TuneStrategy::exhaustive, node.tuner.cap_codes);
  const auto out = evaluate_canceller(node, 900e6, r.code);
  EXPECT_GE(out.canceller_sic_band_db, 20.0);
  EXPECT_GE(out.rf_isolation_band_db, 40.0);
}

TEST(Tune, FlatCancellerResidualGrowsTowardBandEdge) {
  // Pure delay channel: a flat canceller matched at DC leaves residual that grows with |f|.
  const auto grid = linear_grid(-2.5e6, 2.5e6, 201);
  FrequencyResponse h{grid, {}};
  for (double f : grid) h.gains.push_back(std::polar(0.05, -2.0 * M_PI * f * 20e-9));
  CancellerParams p;
  const auto r = tune_canceller(h, p, Band{}, TuneStrategy::exhaustive);
  const auto res = residual_response(h, canceller_gain(r.code, p, grid));
  EXPECT_GE(std::abs(res.gains.front()), std::abs(res.gains[100]));
  EXPECT_GE(std::abs(res.gains.back()), std::abs(res.gains[100]));
}

TEST(CancellerCode, Validation) {
  EXPECT_NO_THROW((CancellerCode{127, 255, {31, 31, 31}}.validate()));
  EXPECT_THROW((CancellerCode{128, 0, {0, 0, 0}}.validate()), RangeError);
  try {
    CancellerCode{0, 300, {0, 0, 0}}.validate();
    FAIL();
  } catch (const RangeError& e) {
    EXPECT_EQ(e.field(), "PS");
    EXPECT_EQ(e.max(), 255);
  }
  EXPECT_EQ(factory_canceller_code(), (CancellerCode{30, 110, {16, 6, 6}}));
}
