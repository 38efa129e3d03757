#pragma once

// Digital self-interference cancellation with a diagonal Volterra (memory
// polynomial) model estimated by regularized least squares.
//
// Feature column (k, m) at output sample n is
//     x[n - m + pre_cursor] * |x[n - m + pre_cursor]|^(k - 1)
// for each odd order k in basis.orders and tap m in [0, memory). Columns are
// ordered order-major: column index = order_index * memory + m.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fdlab/errors.hpp"
#include "fdlab/signal.hpp"

namespace fdlab {

struct VolterraBasis {
  std::vector<int> orders{1, 3, 5};
  int memory = 20;
  int pre_cursor = 4;

  std::size_t coeff_count() const { return orders.size() * static_cast<std::size_t>(memory); }

  void validate() const {
    if (orders.empty()) throw DomainError("Volterra basis needs at least one order");
    for (int k : orders)
      if (k < 1 || k % 2 == 0) throw DomainError("Volterra orders must be odd and >= 1");
    if (memory < 1) throw DomainError("Volterra memory must be >= 1");
    if (pre_cursor < 0) throw DomainError("Volterra pre_cursor must be >= 0");
  }

  friend bool operator==(const VolterraBasis&, const VolterraBasis&) = default;
};

struct FeatureMatrix {
  VolterraBasis basis;
  std::size_t first_row = 0;  // sample index of matrix row 0
  Eigen::MatrixXcd matrix;

  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t end_row() const { return first_row + rows(); }
};

// Valid output-sample range [first, end) for a signal of length n.
inline std::pair<std::size_t, std::size_t> volterra_valid_range(std::size_t n, const VolterraBasis& basis) {
  const long first = std::max(0L, static_cast<long>(basis.memory) - 1 - basis.pre_cursor);
  const long last = static_cast<long>(n) - 1 - basis.pre_cursor;
  if (last < first) return {0, 0};
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last + 1)};
}

inline FeatureMatrix build_volterra_features(std::span<const cdouble> tx, const VolterraBasis& basis) {
  basis.validate();
  if (tx.size() <= static_cast<std::size_t>(basis.memory))
    throw DomainError("signal shorter than the Volterra memory");
  const auto [first, end] = volterra_valid_range(tx.size(), basis);
  if (end <= first) throw DomainError("no valid feature rows for this basis and signal length");

  FeatureMatrix fm;
  fm.basis = basis;
  fm.first_row = first;
  fm.matrix.resize(static_cast<Eigen::Index>(end - first), static_cast<Eigen::Index>(basis.coeff_count()));
  for (std::size_t oi = 0; oi < basis.orders.size(); ++oi) {
    const int k = basis.orders[oi];
    for (int m = 0; m < basis.memory; ++m) {
      const auto col = static_cast<Eigen::Index>(oi * basis.memory + m);
      for (std::size_t n = first; n < end; ++n) {
        const cdouble x = tx[n - m + basis.pre_cursor];
        const cdouble v = k == 1 ? x : x * std::pow(std::abs(x), k - 1);
        fm.matrix(static_cast<Eigen::Index>(n - first), col) = v;
      }
    }
  }
  return fm;
}

struct VolterraModel {
  VolterraBasis basis;
  std::vector<cdouble> coeffs;
  double ridge = 0.0;

  void validate() const {
    basis.validate();
    if (coeffs.size() != basis.coeff_count()) throw ShapeError("coefficient count does not match basis");
    if (!all_finite(coeffs)) throw DomainError("non-finite Volterra coefficients");
  }
};

inline VolterraModel zero_model(const VolterraBasis& basis) {
  return VolterraModel{basis, std::vector<cdouble>(basis.coeff_count(), cdouble{0.0, 0.0}), 0.0};
}

// Mean squared column norm, the scale for the default relative ridge.
inline double mean_column_energy(const FeatureMatrix& fm) {
  if (fm.matrix.cols() == 0) return 0.0;
  return fm.matrix.colwise().squaredNorm().sum() / static_cast<double>(fm.matrix.cols());
}

// Pivot threshold for the rank decision at ridge = 0.
inline constexpr double kRankThreshold = 1e-12;

// Minimizes ||A c - rx||^2 + ridge ||c||^2 by a column-pivoted Householder QR of
// the augmented system [A; sqrt(ridge) I] c = [rx; 0].
inline VolterraModel fit_volterra(const FeatureMatrix& features, std::span<const cdouble> rx, double ridge) {
  const auto& a = features.matrix;
  const auto rows = a.rows();
  const auto cols = a.cols();
  if (static_cast<std::size_t>(rows) != rx.size()) throw ShapeError("feature rows and rx length differ");
  if (rows < cols) throw ShapeError("fewer samples than Volterra coefficients");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw DomainError("ridge must be finite and >= 0");

  Eigen::MatrixXcd aug(rows + (ridge > 0.0 ? cols : 0), cols);
  Eigen::VectorXcd rhs(aug.rows());
  aug.topRows(rows) = a;
  for (Eigen::Index i = 0; i < rows; ++i) rhs(i) = rx[static_cast<std::size_t>(i)];
  if (ridge > 0.0) {
    aug.bottomRows(cols) = std::sqrt(ridge) * Eigen::MatrixXcd::Identity(cols, cols);
    rhs.tail(cols).setZero();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(aug);
  qr.setThreshold(kRankThreshold);
  const auto& r = qr.matrixR();
  const double r_max = std::abs(r(0, 0));
  const double r_min = std::abs(r(cols - 1, cols - 1));
  const double cond = r_min > 0.0 ? r_max / r_min : std::numeric_limits<double>::infinity();
  if (ridge == 0.0 && qr.rank() < cols)
    throw IllConditionedError("rank-deficient Volterra system at ridge 0", cond);

  Eigen::VectorXcd c = qr.solve(rhs);
  VolterraModel model;
  model.basis = features.basis;
  model.ridge = ridge;
  model.coeffs.assign(c.data(), c.data() + c.size());
  model.validate();
  return model;
}

struct DigitalSicResult {
  ComplexBasebandSignal residual;
  std::size_t valid_begin = 0;  // samples outside [valid_begin, valid_end) pass through unmodified
  std::size_t valid_end = 0;
};

inline std::vector<cdouble> predict_volterra(const VolterraModel& model, const FeatureMatrix& fm) {
  model.validate();
  if (!(model.basis == fm.basis)) throw ShapeError("model and feature basis differ");
  Eigen::Map<const Eigen::VectorXcd> c(model.coeffs.data(), static_cast<Eigen::Index>(model.coeffs.size()));
  Eigen::VectorXcd y = fm.matrix * c;
  return {y.data(), y.data() + y.size()};
}

inline DigitalSicResult apply_digital_sic(const VolterraModel& model, const ComplexBasebandSignal& tx,
                                          const ComplexBasebandSignal& rx) {
  if (tx.size() != rx.size()) throw ShapeError("tx and rx lengths differ");
  const auto fm = build_volterra_features(tx.samples, model.basis);
  const auto pred = predict_volterra(model, fm);
  DigitalSicResult out;
  out.residual = rx;
  out.valid_begin = fm.first_row;
  out.valid_end = fm.end_row();
  for (std::size_t i = 0; i < pred.size(); ++i) out.residual.samples[fm.first_row + i] -= pred[i];
  return out;
}

inline double digital_sic_db(std::span<const cdouble> before, std::span<const cdouble> after) {
  if (before.size() != after.size()) throw ShapeError("digital_sic_db needs equal lengths");
  return ratio_db_capped(mean_power(before), mean_power(after));
}

// Integer lag in [0, max_lag] maximizing |sum_n rx[n] conj(tx[n - lag])|; ties go to the smaller lag.
inline int estimate_lag(std::span<const cdouble> tx, std::span<const cdouble> rx, int max_lag) {
  if (tx.size() != rx.size()) throw ShapeError("tx and rx lengths differ");
  if (max_lag < 0) throw DomainError("max_lag must be >= 0");
  int best_lag = 0;
  double best = -1.0;
  const auto n = static_cast<long>(rx.size());
  for (int lag = 0; lag <= max_lag && lag < n; ++lag) {
    cdouble acc{0.0, 0.0};
    for (long i = lag; i < n; ++i) acc += rx[i] * std::conj(tx[i - lag]);
    const double mag = std::abs(acc);
    if (mag > best * (1.0 + 1e-12)) {
      best = mag;
      best_lag = lag;
    }
  }
  return best_lag;
}

inline nlohmann::json to_json(const VolterraModel& m) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& c : m.coeffs) coeffs.push_back({c.real(), c.imag()});
  return nlohmann::json{{"basis", {{"orders", m.basis.orders}, {"memory", m.basis.memory}, {"pre_cursor", m.basis.pre_cursor}}},
                        {"ridge", m.ridge},
                        {"column_order", "order-major: index = order_index * memory + tap"},
                        {"coeffs", coeffs}};
}

inline VolterraModel volterra_model_from_json(const nlohmann::json& j) {
  VolterraModel m;
  const auto& b = j.at("basis");
  m.basis.orders = b.at("orders").get<std::vector<int>>();
  m.basis.memory = b.at("memory").get<int>();
  m.basis.pre_cursor = b.at("pre_cursor").get<int>();
  m.ridge = j.value("ridge", 0.0);
  for (const auto& c : j.at("coeffs")) m.coeffs.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  m.validate();
  return m;
}

}  // namespace fdlab
