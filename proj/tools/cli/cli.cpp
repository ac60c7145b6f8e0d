#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tailmes/backtest.hpp"
#include "tailmes/error.hpp"
#include "tailmes/kv_config.hpp"
#include "tailmes/numeric.hpp"
#include "tailmes/simlab.hpp"

namespace tailmes::cli {

namespace {

using nlohmann::json;

class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << h;
  return s.str();
}

struct LoadedConfig {
  KeyValueConfig kv;
  std::optional<std::string> previous_output;
};

// Plain key-value text, or the config snapshot of a JSON run manifest.
LoadedConfig load_config(const std::string& path, const std::string& command) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  LoadedConfig loaded;
  if (first != std::string::npos && text[first] == '{') {
    json manifest;
    try {
      manifest = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("config", std::string("invalid manifest JSON: ") + e.what());
    }
    if (manifest.value("command", "") != command)
      throw ConfigError("config", "manifest was written by '" + manifest.value("command", "?") +
                                      "', not '" + command + "'");
    if (!manifest.contains("config_text") || !manifest["config_text"].is_string())
      throw ConfigError("config", "manifest has no config_text");
    loaded.kv = KeyValueConfig::parse(manifest["config_text"].get<std::string>());
    if (manifest.contains("outputs") && manifest["outputs"].contains("result"))
      loaded.previous_output = manifest["outputs"]["result"].get<std::string>();
    return loaded;
  }
  try {
    loaded.kv = KeyValueConfig::parse(text);
  } catch (const DataError& e) {
    throw ConfigError("config", std::string(path) + ", " + e.what());
  }
  return loaded;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path + "'");
}

json kv_json(const KeyValueConfig& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::optional<double> p;
  std::optional<double> iota;
  std::optional<std::size_t> window;
  std::optional<std::size_t> clip;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--out", f.out, "Output CSV path");
  app->add_option("--threads", f.threads, "Worker threads (default: TAILMES_THREADS or all cores)");
  app->add_option("--seed", f.seed, "Base seed");
  app->add_option("--p", f.p, "Risk level p");
  app->add_option("--iota", f.iota, "Interval level: coverage 1 - iota");
  app->add_option("--window", f.window, "Estimation window n");
  app->add_option("--clip", f.clip, "Clipped initial residuals ell_n");
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const std::string started = utc_now();
  if (f.config.empty()) throw ConfigError("config", "simulate requires --config");
  auto loaded = load_config(f.config, "simulate");
  auto& kv = loaded.kv;
  if (f.seed) kv.set("seed", std::to_string(*f.seed));
  if (f.iota) kv.set("iota", format_double(*f.iota));
  if (f.p) kv.set("p_grid", format_double(*f.p));
  if (f.window) kv.set("n", std::to_string(*f.window));
  if (f.clip) kv.set("ell_n", std::to_string(*f.clip));
  const auto config = sim::SimConfig::from_kv(kv);
  const std::string result_path =
      !f.out.empty() ? f.out : loaded.previous_output.value_or("simulate.csv");
  const std::size_t threads = numeric::resolve_threads(f.threads);

  const auto result = sim::run_study(config, threads);
  std::ostringstream csv;
  sim::write_result_csv(csv, config, result);
  write_text(result_path, csv.str());

  json manifest;
  manifest["command"] = "simulate";
  manifest["version"] = TAILMES_VERSION;
  manifest["argv"] = argv;
  manifest["config_text"] = config.to_text();
  manifest["config"] = kv_json(config.to_kv());
  manifest["seeds"] = {{"base_seed", config.base_seed},
                       {"replication_seed", "base_seed ^ splitmix64(rep_index)"},
                       {"oracle_seed", "derived from p only"}};
  manifest["threads"] = threads;
  manifest["started"] = started;
  manifest["finished"] = utc_now();
  const std::string manifest_path = result_path + ".manifest.json";
  manifest["outputs"] = {{"result", result_path}, {"manifest", manifest_path}};
  json failures = json::object();
  for (const auto& [reason, count] : result.failure_reasons) failures[reason] = count;
  manifest["diagnostics"] = {{"replications", result.replications},
                             {"failed_replications", result.failed_replications},
                             {"failure_reasons", failures}};
  write_text(manifest_path, manifest.dump(2) + "\n");

  out << csv.str();
  out << "replications " << result.replications << ", failed " << result.failed_replications
      << "; wrote " << result_path << " and " << manifest_path << '\n';
  return kOk;
}

const std::vector<std::string> kForecastKeys{"panel", "window", "clip", "p", "iota"};

int cmd_forecast(const CommonFlags& f, const std::string& panel_arg,
                 const std::vector<std::string>& argv, std::ostream& out) {
  const std::string started = utc_now();
  LoadedConfig loaded;
  if (!f.config.empty()) loaded = load_config(f.config, "forecast");
  auto& kv = loaded.kv;
  const auto unknown = kv.unknown_keys(kForecastKeys);
  if (!unknown.empty()) throw ConfigError(unknown.front(), "unknown configuration key");
  if (!panel_arg.empty()) kv.set("panel", panel_arg);
  if (f.window) kv.set("window", std::to_string(*f.window));
  if (f.clip) kv.set("clip", std::to_string(*f.clip));
  if (f.p) kv.set("p", format_double(*f.p));
  if (f.iota) kv.set("iota", format_double(*f.iota));

  const auto panel_path = kv.get("panel");
  if (!panel_path || panel_path->empty()) throw ConfigError("panel", "a panel CSV path is required");
  backtest::BacktestOptions options;
  options.n = kv.get_size("window", options.n);
  options.ell_n = kv.get_size("clip", options.ell_n);
  options.p = kv.get_double("p", options.p);
  options.iota = kv.get_double("iota", options.iota);
  options.threads = numeric::resolve_threads(f.threads);
  options.validate();
  kv.set("window", std::to_string(options.n));
  kv.set("clip", std::to_string(options.ell_n));
  kv.set("p", format_double(options.p));
  kv.set("iota", format_double(options.iota));

  std::ifstream probe(*panel_path, std::ios::binary);
  if (!probe) throw DataError("cannot open panel '" + *panel_path + "'");
  std::stringstream raw;
  raw << probe.rdbuf();
  std::istringstream parse_in(raw.str());
  const auto panel = backtest::read_price_csv(parse_in);
  if (!panel.market_caps && panel.series() > 1)
    throw ConfigError("mcap", "market cap columns are required to weight more than one series");
  const std::size_t expected = backtest::window_count(panel.rows(), options.n, options.ell_n);
  if (expected == 0)
    throw ConfigError("window", "panel has " + std::to_string(panel.rows()) +
                                    " loss rows; need more than window + clip = " +
                                    std::to_string(options.n + options.ell_n));

  const auto records = backtest::rolling_forecast(panel, options);
  const std::string result_path =
      !f.out.empty() ? f.out : loaded.previous_output.value_or("forecast.csv");
  const std::string sigma_path = result_path + ".sigma.csv";
  const std::string manifest_path = result_path + ".manifest.json";
  std::ostringstream csv, sigma;
  backtest::write_forecast_csv(csv, panel, records);
  backtest::write_sigma_csv(sigma, panel, records);
  write_text(result_path, csv.str());
  write_text(sigma_path, sigma.str());

  std::ostringstream text;
  for (const auto& key : kForecastKeys) text << key << " = " << *kv.get(key) << '\n';
  json manifest;
  manifest["command"] = "forecast";
  manifest["version"] = TAILMES_VERSION;
  manifest["argv"] = argv;
  manifest["config_text"] = text.str();
  manifest["config"] = kv_json(kv);
  manifest["seeds"] = json::object();
  manifest["threads"] = options.threads;
  manifest["inputs"] = {{"panel", *panel_path}, {"panel_fnv1a", fnv1a_hex(raw.str())},
                        {"loss_rows", panel.rows()}, {"series", panel.ids}};
  manifest["started"] = started;
  manifest["finished"] = utc_now();
  manifest["outputs"] = {{"result", result_path}, {"sigma", sigma_path}, {"manifest", manifest_path}};
  manifest["diagnostics"] = {{"records", records.size()}};
  write_text(manifest_path, manifest.dump(2) + "\n");

  out << records.size() << " records; wrote " << result_path << ", " << sigma_path << " and "
      << manifest_path << '\n';
  return kOk;
}

int cmd_test(const std::string& forecast_path, const std::string& date, std::ostream& out) {
  std::ifstream in(forecast_path);
  if (!in) throw DataError("cannot open '" + forecast_path + "'");
  const auto rows = backtest::read_forecast_csv(in);
  const auto row = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.date == date; });
  if (row == rows.end()) throw LookupError("no record dated '" + date + "' in " + forecast_path);

  inference::WaldResult result;
  result.dof = row->wald_df;
  result.statistic = row->wald_stat;
  result.p_value = row->wald_p;
  std::string source = "stored";
  if (std::ifstream sigma_in(forecast_path + ".sigma.csv"); sigma_in) {
    const auto sigmas = backtest::read_sigma_csv(sigma_in);
    const auto s = std::find_if(sigmas.begin(), sigmas.end(), [&](const auto& r) { return r.date == date; });
    if (s != sigmas.end()) {
      result = backtest::retest(*row, *s);
      source = "recomputed";
      if (!result.contrast_ok) throw DataError("record " + date + ": T Sigma T' is not positive definite");
    }
  }
  if (!result.statistic || !result.p_value)
    throw DataError("record " + date + " carries no Wald test (see its flags column)");
  out << "date " << date << '\n'
      << "statistic " << format_double(*result.statistic) << '\n'
      << "dof " << result.dof << '\n'
      << "p_value " << format_double(*result.p_value) << '\n'
      << "source " << source << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tailmes: EVT forecasts of the marginal expected shortfall"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string panel, forecast_csv, date;

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage study");
  simulate->add_option("--config", flags.config, "Study config or manifest")->required();
  add_common(simulate, flags);

  auto* forecast = app.add_subcommand("forecast", "Rolling-window forecasts on a price panel");
  forecast->add_option("panel", panel, "Price CSV (date, price_<id>, mcap_<id>)");
  forecast->add_option("--config", flags.config, "Forecast config or manifest");
  add_common(forecast, flags);

  auto* test = app.add_subcommand("test", "Equal-contribution test for a stored record");
  test->add_option("forecast_csv", forecast_csv, "Forecast CSV written by 'forecast'")->required();
  test->add_option("date", date, "Record date")->required();

  const std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(flags, args, out);
    if (*forecast) return cmd_forecast(flags, panel, args, out);
    return cmd_test(forecast_csv, date, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const DomainError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const LookupError& e) {
    err << "lookup error: " << e.what() << '\n';
    return kLookupError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace tailmes::cli
