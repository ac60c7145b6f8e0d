#include "tailmes/backtest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tailmes/error.hpp"
#include "tailmes/evt.hpp"
#include "tailmes/kv_config.hpp"
#include "tailmes/numeric.hpp"
#include "tailmes/tail_dependence.hpp"

namespace tailmes::backtest {

namespace {

bool looks_like_iso_date(const std::string& s) {
  if (s.size() < 10) return false;
  for (std::size_t i = 0; i < 10; ++i) {
    const bool dash = i == 4 || i == 7;
    if (dash ? s[i] != '-' : !(s[i] >= '0' && s[i] <= '9')) return false;
  }
  return s.size() == 10 || s[10] == 'T' || s[10] == ' ';
}

std::optional<std::chrono::year_month_day> parse_ymd(const std::string& s) {
  int year = 0;
  unsigned month = 0, day = 0;
  if (!looks_like_iso_date(s) || std::sscanf(s.c_str(), "%d-%u-%u", &year, &month, &day) != 3)
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::string format_ymd(std::chrono::sys_days date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

void LossPanel::validate() const {
  const auto t = rows();
  if (dates.size() != t) throw DataError("panel: date count does not match loss rows");
  if (ids.size() != series()) throw DataError("panel: id count does not match loss columns");
  if (series() == 0) throw DataError("panel: no series");
  if (!losses.allFinite()) throw DataError("panel: non-finite loss");
  for (std::size_t i = 1; i < t; ++i)
    if (!(dates[i - 1] < dates[i]))
      throw DataError("panel: dates not strictly increasing at '" + dates[i] + "'");
  if (market_caps) {
    if (market_caps->rows() != losses.rows() || market_caps->cols() != losses.cols())
      throw DataError("panel: market cap matrix shape does not match losses");
    if (!market_caps->allFinite() || (market_caps->array() <= 0.0).any())
      throw DataError("panel: market caps must be finite and positive");
  }
}

LossPanel LossPanel::head(std::size_t end) const {
  if (end > rows()) throw DomainError("LossPanel::head: end beyond panel");
  LossPanel out;
  out.dates.assign(dates.begin(), dates.begin() + static_cast<std::ptrdiff_t>(end));
  out.ids = ids;
  out.losses = losses.topRows(static_cast<Eigen::Index>(end));
  if (market_caps) out.market_caps = market_caps->topRows(static_cast<Eigen::Index>(end));
  return out;
}

IndexSeries build_index(const LossPanel& panel) {
  const auto t = panel.rows();
  const auto d = static_cast<Eigen::Index>(panel.series());
  if (t < 2) throw DataError("build_index: need at least two rows (weights use lagged caps)");
  if (!panel.market_caps && d > 1)
    throw DataError("build_index: market caps are required for more than one series");
  if (panel.market_caps && (panel.market_caps->array() <= 0.0).any())
    throw DataError("build_index: nonpositive market cap");
  IndexSeries index;
  const auto m = static_cast<Eigen::Index>(t - 1);
  index.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  index.losses.resize(m);
  index.weights.resize(m, d);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (panel.market_caps) {
      const Eigen::RowVectorXd caps = panel.market_caps->row(r);
      index.weights.row(r) = caps / caps.sum();
    } else {
      index.weights(r, 0) = 1.0;
    }
    index.losses(r) = index.weights.row(r).dot(panel.losses.row(r + 1));
  }
  return index;
}

void BacktestOptions::validate() const {
  if (n < 50) throw ConfigError("window", "n must be at least 50");
  if (ell_n >= n) throw ConfigError("clip", "ell_n must be smaller than n");
  if (!(iota > 0.0 && iota < 1.0)) throw ConfigError("iota", "must lie in (0,1)");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p", "must lie in (0,1)");
  const double k = static_cast<double>(evt::k_rule(n));
  const double depth = k / (static_cast<double>(n) * p);
  if (depth < 1.0)
    throw ConfigError("p", "d_n = k/(n p) = " + format_double(depth) +
                               " < 1; need p <= k_rule(n)/n = " + format_double(k / static_cast<double>(n)));
}

std::size_t window_count(std::size_t panel_rows, std::size_t n, std::size_t ell_n) {
  if (panel_rows <= n + ell_n) return 0;
  return panel_rows - (n + ell_n);
}

namespace {

std::vector<double> clipped_residuals(std::span<const double> y, const garch::GarchFit& fit,
                                      std::size_t ell_n) {
  std::vector<double> out;
  out.reserve(y.size() - ell_n);
  for (std::size_t t = ell_n; t < y.size(); ++t) out.push_back(y[t] / fit.volatility(t));
  return out;
}

}  // namespace

ForecastRecord forecast_window(const LossPanel& panel, const IndexSeries& index,
                               std::size_t window_end, const BacktestOptions& options) {
  const std::size_t len = options.n + options.ell_n;
  const auto index_rows = static_cast<std::size_t>(index.losses.size());
  if (window_end + 1 < len || window_end >= index_rows)
    throw DomainError("forecast_window: window does not fit inside the index");
  const std::size_t start = window_end + 1 - len;
  const std::size_t d = panel.series();

  ForecastRecord record;
  record.date = index.dates[window_end];
  record.series.resize(d);
  // Weights for the period after the window: caps observed at its last row.
  if (panel.market_caps) {
    const Eigen::RowVectorXd caps = panel.market_caps->row(static_cast<Eigen::Index>(window_end + 1));
    const double total = caps.sum();
    for (std::size_t j = 0; j < d; ++j) record.series[j].weight = caps(static_cast<Eigen::Index>(j)) / total;
  } else {
    record.series[0].weight = 1.0;
  }

  const auto cfg = evt::TailConfig::from_rule(options.n, options.p);
  record.k = cfg.k;
  record.extrapolation_depth = cfg.extrapolation_depth();

  const Eigen::VectorXd x = index.losses.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len));
  garch::GarchFit x_fit;
  try {
    x_fit = garch::qmle_fit({x.data(), len});
  } catch (const std::exception&) {
    record.flags.push_back("index_qmle_failed");
    return record;
  }
  if (!x_fit.converged) record.flags.push_back("index_qmle_not_converged");
  const auto res_x = clipped_residuals({x.data(), len}, x_fit, options.ell_n);

  Eigen::MatrixXd res_y(static_cast<Eigen::Index>(options.n), static_cast<Eigen::Index>(d));
  std::vector<bool> available(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& id = panel.ids[j];
    const Eigen::VectorXd y = panel.losses.col(static_cast<Eigen::Index>(j))
                                  .segment(static_cast<Eigen::Index>(start + 1), static_cast<Eigen::Index>(len));
    garch::GarchFit fit;
    try {
      fit = garch::qmle_fit({y.data(), len});
    } catch (const std::exception&) {
      record.flags.push_back("qmle_failed:" + id);
      continue;
    }
    if (!fit.converged) record.flags.push_back("qmle_not_converged:" + id);
    const auto res = clipped_residuals({y.data(), len}, fit, options.ell_n);
    for (std::size_t t = 0; t < res.size(); ++t)
      res_y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = res[t];
    try {
      const auto f = evt::forecast_mes(res_x, res, fit.vol_forecast(), cfg, options.iota);
      auto& s = record.series[j];
      s.theta = f.theta_hat_np_level;
      s.ci_lower = f.ci_lower;
      s.ci_upper = f.ci_upper;
      s.gamma = f.gamma_hat;
      available[j] = true;
      if (f.degenerate) record.flags.push_back("degenerate:" + id);
      if (!f.gamma_in_range) record.flags.push_back("gamma_out_of_range:" + id);
    } catch (const std::exception&) {
      record.flags.push_back("estimation_failed:" + id);
    }
  }

  if (d < 2) return record;
  std::vector<double> v(d), gammas(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& s = record.series[j];
    if (!available[j] || !(*s.theta * s.weight > 0.0)) {
      record.flags.push_back("wald_skipped:nonpositive_or_missing");
      return record;
    }
    v[j] = std::log(s.weight * *s.theta);
    gammas[j] = *s.gamma;
  }
  if (!(record.extrapolation_depth > 1.0)) {
    record.flags.push_back("wald_skipped:d_n");
    return record;
  }
  const std::vector<std::size_t> ks(d, cfg.k1);
  const auto cov = tail::estimate_tail_covariance(res_y, gammas, ks, cfg.k);
  record.sigma = cov.sigma;
  record.wald_scale = inference::forecast_wald_scale(cfg.k, record.extrapolation_depth);
  record.wald = inference::wald_test(v, cov.sigma, record.wald_scale);
  if (!record.wald.contrast_ok) record.flags.push_back("wald_contrast_not_pd");
  return record;
}

std::vector<ForecastRecord> rolling_forecast(const LossPanel& panel, const BacktestOptions& options) {
  options.validate();
  panel.validate();
  const std::size_t count = window_count(panel.rows(), options.n, options.ell_n);
  if (count == 0)
    throw ConfigError("window", "panel has " + std::to_string(panel.rows()) +
                                    " rows; need more than n + ell_n = " +
                                    std::to_string(options.n + options.ell_n));
  const auto index = build_index(panel);
  const std::size_t first_end = options.n + options.ell_n - 1;
  std::vector<ForecastRecord> records(count);
  numeric::parallel_for(count, numeric::resolve_threads(options.threads), [&](std::size_t i) {
    records[i] = forecast_window(panel, index, first_end + i, options);
  });
  return records;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(trim(current));
  return fields;
}

std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = text.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

double require_number(const std::string& text, const std::string& column, std::size_t line) {
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan")
    throw DataError("missing value in column '" + column + "'", line);
  const auto v = parse_number(text);
  if (!v || !std::isfinite(*v)) throw DataError("cannot parse '" + text + "' in column '" + column + "'", line);
  return *v;
}

bool read_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) return true;
  }
  return false;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

LossPanel read_price_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!read_line(in, line, line_no)) throw DataError("empty CSV input");
  const auto header = split_csv(line);
  std::optional<std::size_t> date_col;
  std::map<std::string, std::size_t> price_cols, cap_cols;
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == schema.date_column) {
      date_col = c;
    } else if (h.rfind(schema.price_prefix, 0) == 0 && h.size() > schema.price_prefix.size()) {
      const auto id = h.substr(schema.price_prefix.size());
      if (price_cols.count(id)) throw DataError("duplicate price column '" + h + "'", line_no);
      price_cols[id] = c;
      ids.push_back(id);
    } else if (h.rfind(schema.mcap_prefix, 0) == 0 && h.size() > schema.mcap_prefix.size()) {
      cap_cols[h.substr(schema.mcap_prefix.size())] = c;
    }
  }
  if (!date_col) throw DataError("missing '" + schema.date_column + "' column", line_no);
  if (ids.empty()) throw DataError("no '" + schema.price_prefix + "<id>' columns", line_no);
  const bool has_caps = !cap_cols.empty();
  if (has_caps) {
    for (const auto& id : ids)
      if (!cap_cols.count(id)) throw DataError("missing column '" + schema.mcap_prefix + id + "'", line_no);
    for (const auto& [id, c] : cap_cols)
      if (!price_cols.count(id)) throw DataError("market cap column without prices: '" + schema.mcap_prefix + id + "'", line_no);
  }

  const std::size_t d = ids.size();
  std::vector<std::string> dates;
  std::vector<std::vector<double>> prices, caps;
  while (read_line(in, line, line_no)) {
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(fields.size()), line_no);
    const auto& date = fields[*date_col];
    if (!looks_like_iso_date(date)) throw DataError("invalid ISO-8601 date '" + date + "'", line_no);
    if (!dates.empty() && !(dates.back() < date))
      throw DataError("date '" + date + "' does not follow '" + dates.back() + "'", line_no);
    std::vector<double> p_row(d), c_row;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& column = header[price_cols[ids[j]]];
      p_row[j] = require_number(fields[price_cols[ids[j]]], column, line_no);
      if (!(p_row[j] > 0.0)) throw DataError("nonpositive price in column '" + column + "'", line_no);
    }
    if (has_caps) {
      c_row.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        const auto& column = header[cap_cols[ids[j]]];
        c_row[j] = require_number(fields[cap_cols[ids[j]]], column, line_no);
        if (!(c_row[j] > 0.0)) throw DataError("nonpositive market cap in column '" + column + "'", line_no);
      }
    }
    dates.push_back(date);
    prices.push_back(std::move(p_row));
    caps.push_back(std::move(c_row));
  }
  if (prices.size() < 2) throw DataError("need at least two price rows");

  LossPanel panel;
  panel.ids = ids;
  const auto t = static_cast<Eigen::Index>(prices.size() - 1);
  panel.losses.resize(t, static_cast<Eigen::Index>(d));
  if (has_caps) panel.market_caps = Eigen::MatrixXd(t, static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < t; ++r) {
    panel.dates.push_back(dates[static_cast<std::size_t>(r) + 1]);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      panel.losses(r, col) = -std::log(prices[static_cast<std::size_t>(r) + 1][j] / prices[static_cast<std::size_t>(r)][j]);
      if (has_caps) (*panel.market_caps)(r, col) = caps[static_cast<std::size_t>(r) + 1][j];
    }
  }
  return panel;
}

LossPanel ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_price_csv(in, schema);
}

void write_price_csv(std::ostream& out, const LossPanel& panel, const CsvSchema& schema) {
  panel.validate();
  const std::size_t d = panel.series();
  out << schema.date_column;
  for (const auto& id : panel.ids) out << ',' << schema.price_prefix << id;
  if (panel.market_caps)
    for (const auto& id : panel.ids) out << ',' << schema.mcap_prefix << id;
  out << '\n';
  // The leading row only anchors the price level; its date precedes the first loss.
  std::vector<double> price(d, 100.0);
  auto emit = [&](const std::string& date, Eigen::Index caps_row) {
    out << date;
    for (double p : price) out << ',' << format_double(p);
    if (panel.market_caps)
      for (std::size_t j = 0; j < d; ++j)
        out << ',' << format_double((*panel.market_caps)(caps_row, static_cast<Eigen::Index>(j)));
    out << '\n';
  };
  const auto first = parse_ymd(panel.dates.front());
  emit(first ? format_ymd(std::chrono::sys_days{*first} - std::chrono::days{1}) : "0000-01-01", 0);
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j)
      price[j] *= std::exp(-panel.losses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
    emit(panel.dates[r], static_cast<Eigen::Index>(r));
  }
}

void write_forecast_csv(std::ostream& out, const LossPanel& panel,
                        const std::vector<ForecastRecord>& records) {
  out << "date";
  for (const auto& id : panel.ids)
    out << ",theta_" << id << ",lo_" << id << ",hi_" << id << ",gamma_" << id << ",weight_" << id;
  out << ",wald_stat,wald_df,wald_p,flags\n";
  for (const auto& r : records) {
    out << r.date;
    for (const auto& s : r.series)
      out << ',' << opt(s.theta) << ',' << opt(s.ci_lower) << ',' << opt(s.ci_upper) << ','
          << opt(s.gamma) << ',' << format_double(s.weight);
    out << ',' << opt(r.wald.statistic) << ',';
    if (r.wald.statistic) out << r.wald.dof;
    out << ',' << opt(r.wald.p_value) << ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) out << (i ? ";" : "") << r.flags[i];
    out << '\n';
  }
}

void write_sigma_csv(std::ostream& out, const LossPanel& panel,
                     const std::vector<ForecastRecord>& records) {
  const std::size_t d = panel.series();
  out << "date,k,d_n,scale";
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out << ",sigma_" << panel.ids[i] << '_' << panel.ids[j];
  out << '\n';
  for (const auto& r : records) {
    if (r.sigma.size() == 0) continue;
    out << r.date << ',' << r.k << ',' << format_double(r.extrapolation_depth) << ','
        << format_double(r.wald_scale);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j)
        out << ',' << format_double(r.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
}

std::vector<StoredForecast> read_forecast_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!read_line(in, line, line_no)) throw DataError("empty forecast CSV");
  const auto header = split_csv(line);
  if (header.empty() || header.front() != "date" || header.size() < 5 ||
      header[header.size() - 4] != "wald_stat" || header.back() != "flags")
    throw DataError("not a forecast CSV header", line_no);
  const std::size_t series_fields = header.size() - 5;
  if (series_fields % 5 != 0) throw DataError("unexpected forecast CSV column count", line_no);
  const std::size_t d = series_fields / 5;
  std::vector<std::string> ids(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& h = header[1 + 5 * j];
    if (h.rfind("theta_", 0) != 0 || header[5 + 5 * j] != "weight_" + h.substr(6))
      throw DataError("unexpected forecast CSV column '" + h + "'", line_no);
    ids[j] = h.substr(6);
  }
  auto optional_field = [&](const std::string& text, const std::string& column) -> std::optional<double> {
    if (text.empty()) return std::nullopt;
    const auto v = parse_number(text);
    if (!v) throw DataError("cannot parse '" + text + "' in column '" + column + "'", line_no);
    return v;
  };
  std::vector<StoredForecast> out;
  while (read_line(in, line, line_no)) {
    const auto f = split_csv(line);
    if (f.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(f.size()), line_no);
    StoredForecast s;
    s.date = f[0];
    s.ids = ids;
    for (std::size_t j = 0; j < d; ++j) {
      s.theta.push_back(optional_field(f[1 + 5 * j], header[1 + 5 * j]));
      s.weight.push_back(require_number(f[5 + 5 * j], header[5 + 5 * j], line_no));
    }
    const std::size_t w = 1 + series_fields;
    s.wald_stat = optional_field(f[w], "wald_stat");
    if (const auto df = optional_field(f[w + 1], "wald_df")) s.wald_df = static_cast<std::size_t>(*df);
    s.wald_p = optional_field(f[w + 2], "wald_p");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<StoredSigma> read_sigma_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!read_line(in, line, line_no)) throw DataError("empty sigma CSV");
  const auto header = split_csv(line);
  if (header.size() < 5 || header[0] != "date" || header[1] != "k" || header[2] != "d_n" ||
      header[3] != "scale")
    throw DataError("not a sigma CSV header", line_no);
  const std::size_t entries = header.size() - 4;
  std::size_t d = 0;
  while (d * (d + 1) / 2 < entries) ++d;
  if (d * (d + 1) / 2 != entries) throw DataError("sigma CSV: entry count is not triangular", line_no);
  std::vector<StoredSigma> out;
  while (read_line(in, line, line_no)) {
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw DataError("sigma CSV: wrong field count", line_no);
    StoredSigma s;
    s.date = f[0];
    s.k = static_cast<std::size_t>(require_number(f[1], "k", line_no));
    s.extrapolation_depth = require_number(f[2], "d_n", line_no);
    s.scale = require_number(f[3], "scale", line_no);
    s.sigma.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    std::size_t c = 4;
    for (Eigen::Index i = 0; i < s.sigma.rows(); ++i)
      for (Eigen::Index j = i; j < s.sigma.cols(); ++j, ++c) {
        s.sigma(i, j) = require_number(f[c], header[c], line_no);
        s.sigma(j, i) = s.sigma(i, j);
      }
    out.push_back(std::move(s));
  }
  return out;
}

inference::WaldResult retest(const StoredForecast& forecast, const StoredSigma& sigma) {
  const std::size_t d = forecast.theta.size();
  if (static_cast<std::size_t>(sigma.sigma.rows()) != d)
    throw DataError("retest: sigma dimension does not match the forecast record");
  std::vector<double> v(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!forecast.theta[j] || !(*forecast.theta[j] * forecast.weight[j] > 0.0))
      throw DataError("retest: weighted forecast for '" + forecast.ids[j] + "' is missing or nonpositive");
    v[j] = std::log(forecast.weight[j] * *forecast.theta[j]);
  }
  return inference::wald_test(v, sigma.sigma, sigma.scale);
}

// ---------------------------------------------------------------------------

LossPanel synthetic_panel(const SyntheticPanelSpec& spec) {
  spec.innovations.validate();
  const std::size_t d = spec.innovations.dim();
  if (spec.garch.size() != d) throw DomainError("synthetic_panel: one GARCH parameter set per series");
  if (!spec.caps.empty() && spec.caps.size() != d) throw DomainError("synthetic_panel: one cap per series");
  if (spec.rows < 2) throw DomainError("synthetic_panel: need at least two rows");
  const auto start = parse_ymd(spec.start_date);
  if (!start) throw DomainError("synthetic_panel: start_date must be a valid YYYY-MM-DD date");

  const Eigen::MatrixXd innovations =
      dist::sample_innovations(spec.innovations, spec.burn_in + spec.rows, spec.seed);
  std::vector<double> sigma0(d);
  for (std::size_t j = 0; j < d; ++j) sigma0[j] = std::sqrt(spec.garch[j].unconditional_variance());
  const auto path = garch::simulate_ccc(spec.garch, innovations, sigma0);

  LossPanel panel;
  for (std::size_t j = 0; j < d; ++j) panel.ids.push_back("s" + std::to_string(j + 1));
  panel.losses = path.losses.bottomRows(static_cast<Eigen::Index>(spec.rows));
  std::chrono::sys_days date{*start};
  for (std::size_t r = 0; r < spec.rows; ++r, date += std::chrono::days{1})
    panel.dates.push_back(format_ymd(date));
  if (!spec.caps.empty()) {
    Eigen::MatrixXd caps(static_cast<Eigen::Index>(spec.rows), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      double m = spec.caps[j];
      for (std::size_t r = 0; r < spec.rows; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const auto col = static_cast<Eigen::Index>(j);
        m *= std::exp(-spec.cap_drift * panel.losses(row, col));
        caps(row, col) = m;
      }
    }
    panel.market_caps = std::move(caps);
  }
  return panel;
}

}  // namespace tailmes::backtest
