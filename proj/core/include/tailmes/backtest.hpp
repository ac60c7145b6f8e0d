#pragma once

// Rolling-window forecasting on a panel of institution losses: value-weighted
// index construction, per-window MES forecasts with intervals, and the
// per-window test for equal weighted contributions.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tailmes/distributions.hpp"
#include "tailmes/garch.hpp"
#include "tailmes/inference.hpp"

namespace tailmes::backtest {

struct LossPanel {
  std::vector<std::string> dates;  // strictly increasing ISO-8601 labels
  std::vector<std::string> ids;
  Eigen::MatrixXd losses;          // T x D log-losses
  std::optional<Eigen::MatrixXd> market_caps;  // T x D, strictly positive

  std::size_t rows() const noexcept { return static_cast<std::size_t>(losses.rows()); }
  std::size_t series() const noexcept { return static_cast<std::size_t>(losses.cols()); }

  // Throws DataError on shape mismatches, non-finite values, unordered dates
  // or nonpositive caps.
  void validate() const;
  // Rows [0, end).
  LossPanel head(std::size_t end) const;
};

// X_t = sum_d w_{t-1,d} Y_{t,d} with w_{t-1,d} = M_{t-1,d} / sum_d M_{t-1,d}.
// Row 0 of the panel has no lagged caps and is dropped, so every member has
// rows() - 1 entries; weights row r holds the weights applied to index row r.
struct IndexSeries {
  std::vector<std::string> dates;
  Eigen::VectorXd losses;
  Eigen::MatrixXd weights;
};

// Without caps a single-series panel is its own index (weight 1); D > 1
// without caps is a DataError.
IndexSeries build_index(const LossPanel& panel);

struct BacktestOptions {
  std::size_t n = 1000;
  std::size_t ell_n = 10;
  double p = 0.0001;
  double iota = 0.05;
  std::size_t threads = 1;

  // Throws ConfigError: p must satisfy d_n = k_rule(n)/(n p) >= 1.
  void validate() const;
};

struct SeriesForecast {
  std::optional<double> theta;  // sigma_hat_{n+1,d} * theta_hat_{p,d}
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
  std::optional<double> gamma;
  double weight = 0.0;
};

struct ForecastRecord {
  std::string date;  // last observation of the estimation window
  std::vector<SeriesForecast> series;
  inference::WaldResult wald;
  std::size_t k = 0;
  double extrapolation_depth = 0.0;
  double wald_scale = 0.0;
  Eigen::MatrixXd sigma;  // empty when unavailable
  std::vector<std::string> flags;
};

// Number of records rolling_forecast produces: rows() - (n + ell_n).
std::size_t window_count(std::size_t panel_rows, std::size_t n, std::size_t ell_n);

// Forecast from the window of n + ell_n index rows ending at index row
// `window_end` (inclusive); uses panel rows up to window_end + 1 only.
ForecastRecord forecast_window(const LossPanel& panel, const IndexSeries& index,
                               std::size_t window_end, const BacktestOptions& options);

// One record per window, ordered by date. Windows run on options.threads workers.
std::vector<ForecastRecord> rolling_forecast(const LossPanel& panel, const BacktestOptions& options);

// ---------------------------------------------------------------------------
// CSV interfaces.

struct CsvSchema {
  std::string date_column = "date";
  std::string price_prefix = "price_";
  std::string mcap_prefix = "mcap_";
};

// Wide price CSV -> log-loss panel: loss_t = -log(P_t / P_{t-1}), caps taken
// from the same row as the loss. Errors carry the 1-based file line.
LossPanel read_price_csv(std::istream& in, const CsvSchema& schema = {});
LossPanel ingest_csv(const std::string& path, const CsvSchema& schema = {});

// Prices starting at 100 whose log-losses reproduce `panel`; one extra leading row.
void write_price_csv(std::ostream& out, const LossPanel& panel, const CsvSchema& schema = {});

void write_forecast_csv(std::ostream& out, const LossPanel& panel,
                        const std::vector<ForecastRecord>& records);
// date, k, d_n, scale and the upper triangle of sigma_hat per record.
void write_sigma_csv(std::ostream& out, const LossPanel& panel,
                     const std::vector<ForecastRecord>& records);

struct StoredForecast {
  std::string date;
  std::vector<std::string> ids;
  std::vector<std::optional<double>> theta;
  std::vector<double> weight;
  std::optional<double> wald_stat;
  std::optional<double> wald_p;
  std::size_t wald_df = 0;
};

struct StoredSigma {
  std::string date;
  std::size_t k = 0;
  double extrapolation_depth = 0.0;
  double scale = 0.0;
  Eigen::MatrixXd sigma;
};

std::vector<StoredForecast> read_forecast_csv(std::istream& in);
std::vector<StoredSigma> read_sigma_csv(std::istream& in);

// Recomputes the test from stored forecasts and sigma_hat.
inference::WaldResult retest(const StoredForecast& forecast, const StoredSigma& sigma);

// ---------------------------------------------------------------------------
// Synthetic panels.

struct SyntheticPanelSpec {
  std::size_t rows = 1100;
  dist::InnovationSpec innovations;
  std::vector<garch::GarchParams> garch;  // one per series
  std::vector<double> caps;               // initial caps; empty = no caps
  double cap_drift = 0.0;                 // caps evolve as M_t = M_{t-1} exp(-drift * loss_t)
  std::size_t burn_in = 500;
  std::uint64_t seed = 1;
  std::string start_date = "2000-01-03";
};

LossPanel synthetic_panel(const SyntheticPanelSpec& spec);

}  // namespace tailmes::backtest
