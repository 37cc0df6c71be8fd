#include "flowclust/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "flowclust/csv.hpp"
#include "flowclust/rng.hpp"

namespace flowclust {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool valid_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const int m = std::stoi(s.substr(5, 2));
  const int d = std::stoi(s.substr(8, 2));
  return m >= 1 && m <= 12 && d >= 1 && d <= 31;
}

std::chrono::sys_days parse_date(const std::string& s) {
  if (!valid_date(s)) throw PipelineError("bad date (want yyyy-mm-dd): " + s);
  const std::chrono::year_month_day ymd{
      std::chrono::year{std::stoi(s.substr(0, 4))},
      std::chrono::month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
      std::chrono::day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
  if (!ymd.ok()) throw PipelineError("bad calendar date: " + s);
  return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days sd) {
  const std::chrono::year_month_day ymd{sd};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

double sample_mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  const double m = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::optional<double> sharpe_of(std::span<const double> daily, int annualization_days) {
  if (daily.size() < 2) return std::nullopt;
  const double sd = sample_std(daily);
  if (!(sd > 0.0)) return std::nullopt;
  return sample_mean(daily) / sd * std::sqrt(static_cast<double>(annualization_days));
}

void require_keys(const json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw PipelineError(std::string("config: ") + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw PipelineError(std::string("config: unknown key \"") + key + "\" in " + where);
    }
  }
}

std::string header_comment(const PipelineConfig& config) {
  return "# config_hash=" + config_hash(config) + " version=" + kVersion;
}

ordered_json meta_object(const PipelineConfig& config) {
  return ordered_json{{"config_hash", config_hash(config)}, {"version", kVersion}};
}

void write_text_file(const std::string& path, const std::string& body) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot open for writing: " + path);
  out << body;
  if (!out) throw PipelineError("write failed: " + path);
}

void write_json_file(const std::string& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

std::uint64_t PipelineConfig::effective_clustering_seed() const {
  if (clustering_seed) return *clustering_seed;
  return mix_seed(seed, hash_string("clustering"));
}

std::string PipelineConfig::reference_symbol() const {
  if (reference_stock) return *reference_stock;
  if (stocks.empty()) throw PipelineError("config has no stocks");
  return stocks.front().symbol;
}

void PipelineConfig::validate() const {
  if (stocks.empty()) throw PipelineError("config: stocks must be non-empty");
  std::set<std::string> seen;
  for (const auto& s : stocks) {
    if (s.symbol.empty()) throw PipelineError("config: empty stock symbol");
    if (s.symbol.find('_') != std::string::npos || s.symbol.find('/') != std::string::npos) {
      throw PipelineError("config: stock symbol may not contain '_' or '/': " + s.symbol);
    }
    if (!seen.insert(s.symbol).second) {
      throw PipelineError("config: duplicate stock symbol: " + s.symbol);
    }
  }
  if (reference_stock && !seen.count(*reference_stock)) {
    throw PipelineError("config: reference_stock is not in stocks: " + *reference_stock);
  }
  for (const auto* r : {&train, &test}) {
    if (!valid_date(r->start) || !valid_date(r->end)) {
      throw PipelineError("config: date ranges need yyyy-mm-dd bounds");
    }
    if (r->end < r->start) throw PipelineError("config: date range ends before it starts");
  }
  if (!(train.end < test.start)) {
    throw PipelineError("config: train range must precede the test range");
  }
  if (!valid_date(synth_start_date)) {
    throw PipelineError("config: synth_start_date needs yyyy-mm-dd");
  }
  if (session.end_seconds <= session.start_seconds) {
    throw PipelineError("config: session must have positive length");
  }
  if (normalization_window < 2) {
    throw PipelineError("config: normalization_window must be at least 2");
  }
  if (k < 1) throw PipelineError("config: k must be positive");
  if (kmeans.max_iterations < 1) throw PipelineError("config: max_iterations must be positive");
  if (kmeans.tolerance < 0.0) throw PipelineError("config: tolerance must be non-negative");
  if (subsample && *subsample < static_cast<std::size_t>(k)) {
    throw PipelineError("config: subsample smaller than k");
  }
  if (event_scopes.empty()) throw PipelineError("config: event_scopes must be non-empty");
  std::set<int> scope_seen;
  for (auto s : event_scopes) {
    if (!scope_seen.insert(static_cast<int>(s)).second) {
      throw PipelineError("config: duplicate event scope");
    }
  }
  if (!(vol_target_annual > 0.0)) throw PipelineError("config: vol_target_annual must be positive");
  if (annualization_days < 1) throw PipelineError("config: annualization_days must be positive");
  if (workers < 1) throw PipelineError("config: workers must be positive");
  if (synth.n_days < 1) throw PipelineError("config: synth.n_days must be positive");
  if (synth.events_per_day < static_cast<int>(normalization_window)) {
    throw PipelineError("config: synth.events_per_day below the normalization window");
  }
}

PipelineConfig default_config() {
  PipelineConfig c;
  c.stocks = {{"SYNA", "small"},  {"SYNB", "small"},  {"SYNC", "medium"},
              {"SYND", "medium"}, {"SYNE", "large"},  {"SYNF", "large"}};
  c.synth.n_days = 250;  // covers the default train+test calendar
  return c;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c = default_config();
  require_keys(j, {"data_root", "out_dir", "stocks", "train", "test", "session",
                   "normalization_window", "k", "kmeans", "subsample", "reference_stock",
                   "seed", "clustering_seed", "event_scopes", "legacy_trade_sign",
                   "vol_target_annual", "annualization_days", "workers", "synth",
                   "synth_start_date"},
               "top level");
  c.data_root = j.value("data_root", c.data_root);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("stocks")) {
    c.stocks.clear();
    for (const auto& s : j.at("stocks")) {
      require_keys(s, {"symbol", "group"}, "stocks[]");
      c.stocks.push_back({s.at("symbol").get<std::string>(), s.value("group", std::string("small"))});
    }
  }
  auto read_range = [&](const char* key, DateRange& r) {
    if (!j.contains(key)) return;
    require_keys(j.at(key), {"start", "end"}, key);
    r.start = j.at(key).value("start", r.start);
    r.end = j.at(key).value("end", r.end);
  };
  read_range("train", c.train);
  read_range("test", c.test);
  if (j.contains("session")) {
    const auto& s = j.at("session");
    require_keys(s, {"start_seconds", "end_seconds", "include_hidden_executions"}, "session");
    c.session.start_seconds = s.value("start_seconds", c.session.start_seconds);
    c.session.end_seconds = s.value("end_seconds", c.session.end_seconds);
    c.session.include_hidden_executions =
        s.value("include_hidden_executions", c.session.include_hidden_executions);
  }
  c.normalization_window = j.value("normalization_window", c.normalization_window);
  c.k = j.value("k", c.k);
  if (j.contains("kmeans")) {
    const auto& m = j.at("kmeans");
    require_keys(m, {"max_iterations", "tolerance"}, "kmeans");
    c.kmeans.max_iterations = m.value("max_iterations", c.kmeans.max_iterations);
    c.kmeans.tolerance = m.value("tolerance", c.kmeans.tolerance);
  }
  if (j.contains("subsample") && !j.at("subsample").is_null()) {
    c.subsample = j.at("subsample").get<std::size_t>();
  }
  if (j.contains("reference_stock") && !j.at("reference_stock").is_null()) {
    c.reference_stock = j.at("reference_stock").get<std::string>();
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("clustering_seed") && !j.at("clustering_seed").is_null()) {
    c.clustering_seed = j.at("clustering_seed").get<std::uint64_t>();
  }
  if (j.contains("event_scopes")) {
    c.event_scopes.clear();
    for (const auto& s : j.at("event_scopes")) {
      c.event_scopes.push_back(event_scope_from_string(s.get<std::string>()));
    }
  }
  c.legacy_trade_sign = j.value("legacy_trade_sign", c.legacy_trade_sign);
  c.vol_target_annual = j.value("vol_target_annual", c.vol_target_annual);
  c.annualization_days = j.value("annualization_days", c.annualization_days);
  c.workers = j.value("workers", c.workers);
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    require_keys(s, {"seed", "n_days", "events_per_day", "lot_size", "tick_size",
                     "initial_mid", "archetype_weights", "separation", "kappa", "emit_books"},
                 "synth");
    c.synth.seed = s.value("seed", c.synth.seed);
    c.synth.n_days = s.value("n_days", c.synth.n_days);
    c.synth.events_per_day = s.value("events_per_day", c.synth.events_per_day);
    c.synth.lot_size = s.value("lot_size", c.synth.lot_size);
    c.synth.tick_size = s.value("tick_size", c.synth.tick_size);
    c.synth.initial_mid = s.value("initial_mid", c.synth.initial_mid);
    if (s.contains("archetype_weights")) {
      const auto& w = s.at("archetype_weights");
      if (!w.is_array() || w.size() != 3) {
        throw PipelineError("config: synth.archetype_weights needs 3 entries");
      }
      for (int i = 0; i < 3; ++i) c.synth.archetype_weights[i] = w[i].get<double>();
    }
    c.synth.separation = s.value("separation", c.synth.separation);
    c.synth.kappa = s.value("kappa", c.synth.kappa);
    c.synth.emit_books = s.value("emit_books", c.synth.emit_books);
  }
  c.synth_start_date = j.value("synth_start_date", c.synth_start_date);
  c.synth.session = c.session;
  return c;
}

ordered_json config_to_json(const PipelineConfig& config) {
  ordered_json j;
  j["data_root"] = config.data_root;
  j["out_dir"] = config.out_dir;
  j["stocks"] = ordered_json::array();
  for (const auto& s : config.stocks) {
    j["stocks"].push_back(ordered_json{{"symbol", s.symbol}, {"group", s.group}});
  }
  j["train"] = ordered_json{{"start", config.train.start}, {"end", config.train.end}};
  j["test"] = ordered_json{{"start", config.test.start}, {"end", config.test.end}};
  j["session"] = ordered_json{
      {"start_seconds", config.session.start_seconds},
      {"end_seconds", config.session.end_seconds},
      {"include_hidden_executions", config.session.include_hidden_executions}};
  j["normalization_window"] = config.normalization_window;
  j["k"] = config.k;
  j["kmeans"] = ordered_json{{"max_iterations", config.kmeans.max_iterations},
                             {"tolerance", config.kmeans.tolerance}};
  j["subsample"] = config.subsample ? ordered_json(*config.subsample) : ordered_json(nullptr);
  j["reference_stock"] =
      config.reference_stock ? ordered_json(*config.reference_stock) : ordered_json(nullptr);
  j["seed"] = config.seed;
  j["clustering_seed"] =
      config.clustering_seed ? ordered_json(*config.clustering_seed) : ordered_json(nullptr);
  j["event_scopes"] = ordered_json::array();
  for (auto s : config.event_scopes) j["event_scopes"].push_back(to_string(s));
  j["legacy_trade_sign"] = config.legacy_trade_sign;
  j["vol_target_annual"] = config.vol_target_annual;
  j["annualization_days"] = config.annualization_days;
  j["workers"] = config.workers;
  j["synth"] = ordered_json{{"seed", config.synth.seed},
                            {"n_days", config.synth.n_days},
                            {"events_per_day", config.synth.events_per_day},
                            {"lot_size", config.synth.lot_size},
                            {"tick_size", config.synth.tick_size},
                            {"initial_mid", config.synth.initial_mid},
                            {"archetype_weights", config.synth.archetype_weights},
                            {"separation", config.synth.separation},
                            {"kappa", config.synth.kappa},
                            {"emit_books", config.synth.emit_books}};
  j["synth_start_date"] = config.synth_start_date;
  return j;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw PipelineError("config parse error in " + path + ": " + ex.what());
  }
  return config_from_json(j);
}

void apply_env_overrides(PipelineConfig& config) {
  if (const char* v = std::getenv("FLOWCLUST_WORKERS")) {
    config.workers = std::stoi(v);
  }
  if (const char* v = std::getenv("FLOWCLUST_SEED")) {
    config.seed = std::stoull(v);
  }
  if (const char* v = std::getenv("FLOWCLUST_OUT")) {
    config.out_dir = v;
  }
}

std::string config_hash(const PipelineConfig& config) {
  // Identifies the computation, not the run: thread count and artifact
  // destination cannot change any result, so equal data + parameters must
  // yield equal hashes (and therefore byte-identical artifacts).
  PipelineConfig canon = config;
  canon.workers = 1;
  canon.out_dir.clear();
  const std::uint64_t h = hash_string(config_to_json(canon).dump());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Calendar and paths.

std::vector<std::string> trading_dates(const std::string& start_date, int count) {
  if (count < 0) throw PipelineError("trading_dates: negative count");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  auto day = parse_date(start_date);
  while (static_cast<int>(out.size()) < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) {
      out.push_back(format_date(day));
    }
    day += std::chrono::days{1};
  }
  return out;
}

bool date_in_range(const std::string& date, const DateRange& range) {
  return range.start <= date && date <= range.end;
}

namespace {
std::string data_file(const PipelineConfig& c, const std::string& symbol,
                      const std::string& date, const char* kind) {
  return (fs::path(c.data_root) / symbol / (symbol + "_" + date + "_" + kind + ".csv")).string();
}
}  // namespace

std::string message_path(const PipelineConfig& c, const std::string& symbol,
                         const std::string& date) {
  return data_file(c, symbol, date, "message");
}
std::string orderbook_path(const PipelineConfig& c, const std::string& symbol,
                           const std::string& date) {
  return data_file(c, symbol, date, "orderbook");
}
std::string truth_path(const PipelineConfig& c, const std::string& symbol,
                       const std::string& date) {
  return data_file(c, symbol, date, "truth");
}

// ---------------------------------------------------------------------------
// Worker pool.

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int use = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (use == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(use));
  for (int t = 0; t < use; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Per-day replay.

StockDayFlows compute_stock_day(const PipelineConfig& config, const std::string& symbol,
                                const std::string& date) {
  StockDayFlows out;
  out.symbol = symbol;
  out.date = date;
  try {
    const auto path = message_path(config, symbol, date);
    if (!fs::exists(path)) throw PipelineError("missing message file: " + path);
    const auto parsed = parse_message_file(path);
    if (parsed.events.empty()) throw PipelineError("no parseable rows in " + path);

    const auto& session = config.session;
    OrderBook book;
    PriceLevelHistory history;
    MidState mid;
    NormalizationWindow norm(config.normalization_window);
    std::vector<std::pair<TimeNs, std::int64_t>> mid_path;

    const auto featurizable = [&](const MboEvent& e) {
      if (e.time < session.start_ns() || e.time > session.end_ns()) return false;
      if (e.type == EventType::kAuction || e.type == EventType::kHalt) return false;
      if (e.type == EventType::kExecHidden && !session.include_hidden_executions) return false;
      return true;
    };

    for (const auto& e : parsed.events) {
      if (featurizable(e)) {
        if (const auto raw = compute_raw_features(e, book, history, mid)) {
          if (const auto z = norm.push(*raw)) {
            LabeledFlow flow;
            flow.bucket = bucket_index(e.time, session);
            flow.cluster = -1;
            flow.contribution =
                classify_contribution(e, book.best_price(Side::kBid), book.best_price(Side::kAsk));
            out.flows.push_back(flow);
            out.points.push_back(*z);
          }
        }
      }
      book.apply(e);
      history.record(e, book.volume_at(e.side, e.price));
      mid.update(book, e.time);
      if (mid.seen && (mid_path.empty() || mid_path.back().second != mid.mid_times2)) {
        mid_path.emplace_back(e.time, mid.mid_times2);
      }
    }
    out.returns = compute_bucket_returns(compute_boundary_mids(mid_path, session));
    out.ok = true;
  } catch (const std::exception& ex) {
    out.ok = false;
    out.error = ex.what();
    out.flows.clear();
    out.points.clear();
  }
  return out;
}

std::vector<std::string> list_available_dates(const PipelineConfig& config,
                                              const std::string& symbol) {
  std::vector<std::string> dates;
  const fs::path dir = fs::path(config.data_root) / symbol;
  if (!fs::is_directory(dir)) return dates;
  const std::string prefix = symbol + "_";
  const std::string suffix = "_message.csv";
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= prefix.size() + suffix.size()) continue;
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const std::string date = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (valid_date(date)) dates.push_back(date);
  }
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  return dates;
}

std::vector<StockDayFlows> compute_universe(const PipelineConfig& config,
                                            const DateRange& range) {
  std::vector<std::pair<std::string, std::string>> tasks;
  for (const auto& stock : config.stocks) {
    for (const auto& date : list_available_dates(config, stock.symbol)) {
      if (date_in_range(date, range)) tasks.emplace_back(stock.symbol, date);
    }
  }
  std::vector<StockDayFlows> results(tasks.size());
  parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
    results[i] = compute_stock_day(config, tasks[i].first, tasks[i].second);
  });
  return results;
}

// ---------------------------------------------------------------------------
// Training internals shared by the stages.

namespace {

struct TrainedModels {
  ClusterModel reference;
  std::vector<std::pair<std::string, ClusterModel>> stock_models;
};

const ClusterModel* find_model(const TrainedModels& models, const std::string& symbol) {
  for (const auto& [sym, model] : models.stock_models) {
    if (sym == symbol) return &model;
  }
  return nullptr;
}

std::vector<FeaturePoint> maybe_subsample(const PipelineConfig& config,
                                          const std::vector<FeaturePoint>& points) {
  if (!config.subsample || points.size() <= *config.subsample) return points;
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(config.effective_clustering_seed());
  rng.shuffle(idx);
  idx.resize(*config.subsample);
  std::sort(idx.begin(), idx.end());
  std::vector<FeaturePoint> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(points[i]);
  return out;
}

// Concatenated normalized feature points per stock over the ok days, in
// config stock order.
std::vector<std::pair<std::string, std::vector<FeaturePoint>>> train_points_by_stock(
    const PipelineConfig& config, std::span<const StockDayFlows> train) {
  std::vector<std::pair<std::string, std::vector<FeaturePoint>>> out;
  for (const auto& stock : config.stocks) out.emplace_back(stock.symbol, std::vector<FeaturePoint>{});
  auto slot = [&](const std::string& sym) -> std::vector<FeaturePoint>& {
    for (auto& [s, pts] : out) {
      if (s == sym) return pts;
    }
    throw PipelineError("unknown symbol in universe: " + sym);
  };
  for (const auto& day : train) {
    if (!day.ok) continue;
    auto& pts = slot(day.symbol);
    pts.insert(pts.end(), day.points.begin(), day.points.end());
  }
  return out;
}

TrainedModels fit_models(const PipelineConfig& config, std::span<const StockDayFlows> train) {
  const auto by_stock = train_points_by_stock(config, train);
  const auto ref_sym = config.reference_symbol();
  const std::vector<FeaturePoint>* ref_points = nullptr;
  for (const auto& [sym, pts] : by_stock) {
    if (sym == ref_sym) ref_points = &pts;
  }
  if (ref_points == nullptr || ref_points->empty()) {
    throw PipelineError("reference stock has no training features: " + ref_sym);
  }
  TrainedModels models;
  const auto seed = config.effective_clustering_seed();
  {
    const auto pts = maybe_subsample(config, *ref_points);
    auto fit = kmeans_fit_seeded(pts, config.k, seed, config.kmeans);
    models.reference = fit.model;
    if (config.subsample) models.reference.subsample = *config.subsample;
  }
  for (const auto& [sym, pts] : by_stock) {
    if (pts.empty()) continue;
    if (sym == ref_sym) {
      models.stock_models.emplace_back(sym, models.reference);
      continue;
    }
    auto fit = base_initialize(models.reference, maybe_subsample(config, pts), config.kmeans);
    if (config.subsample) fit.model.subsample = *config.subsample;
    models.stock_models.emplace_back(sym, fit.model);
  }
  return models;
}

// Writes cluster labels into each ok day via the day's stock model. Days of
// stocks without a trained model are marked failed so they never reach an
// imbalance aggregation with unlabeled flow.
void label_universe(const TrainedModels& models, std::vector<StockDayFlows>& days) {
  for (auto& day : days) {
    if (!day.ok) continue;
    const ClusterModel* model = find_model(models, day.symbol);
    if (model == nullptr) {
      day.ok = false;
      day.error = "no trained cluster model for " + day.symbol;
      continue;
    }
    const auto labels = predict(*model, day.points);
    for (std::size_t i = 0; i < labels.size(); ++i) day.flows[i].cluster = labels[i];
  }
}

// Pools every ok (day, bucket) pair of one stock into per-cluster imbalance
// series and scores them against contemporaneous and to-close returns.
StockRoleVote vote_for_stock(const PipelineConfig& config, const std::string& symbol,
                             std::span<const StockDayFlows> train, int k) {
  std::array<std::optional<double>, 3> dir_score;
  std::array<std::optional<double>, 3> opp_score;
  const Measure measures[] = {Measure::kSize, Measure::kCount};
  for (int c = 0; c < std::min(k, 3); ++c) {
    for (const Measure m : measures) {
      std::vector<double> ofi_conr, conr, ofi_freb, freb;
      for (const auto& day : train) {
        if (!day.ok || day.symbol != symbol) continue;
        const auto ofi = aggregate_ofi(day.flows, c, EventScope::kAll, m,
                                       config.legacy_trade_sign);
        for (int b = 0; b < kBucketsPerDay; ++b) {
          ofi_conr.push_back(static_cast<double>(ofi[b]));
          conr.push_back(day.returns.contemporaneous[b]);
        }
        for (int b = 0; b < kBucketsPerDay - 1; ++b) {
          ofi_freb.push_back(static_cast<double>(ofi[b]));
          freb.push_back(day.returns.forward_to_close[b]);
        }
      }
      try {
        const double r = pearson_correlation(ofi_conr, conr);
        if (!dir_score[c] || r > *dir_score[c]) dir_score[c] = r;
      } catch (const StrategyError&) {
      }
      try {
        const double r = pearson_correlation(ofi_freb, freb);
        if (!opp_score[c] || r > *opp_score[c]) opp_score[c] = r;
      } catch (const StrategyError&) {
      }
    }
  }
  return make_stock_vote(symbol, dir_score, opp_score);
}

std::vector<StockRoleVote> build_votes(const PipelineConfig& config,
                                       const TrainedModels& models,
                                       std::span<const StockDayFlows> train) {
  std::vector<StockRoleVote> votes;
  for (const auto& [sym, model] : models.stock_models) {
    votes.push_back(vote_for_stock(config, sym, train, model.k));
  }
  return votes;
}

// Equal-weighted daily pnl of one strategy across the universe: per date, the
// mean over the stocks that have an evaluable day. The date axis (dates with
// at least one ok day) is identical for every spec.
std::vector<double> strategy_daily(std::span<const StockDayFlows> days,
                                   const StrategySpec& spec, const RoleMap& roles,
                                   bool legacy_trade_sign,
                                   std::vector<std::string>* dates_out = nullptr) {
  if (spec.horizon == ReturnKind::kContemporaneous) {
    throw PipelineError("strategies trade forward returns only");
  }
  const int cluster_scope =
      spec.is_benchmark() ? kAllClusters : roles.raw_of_canonical(spec.canonical_cluster);
  std::map<std::string, std::pair<double, int>> by_date;
  for (const auto& day : days) {
    if (!day.ok) continue;
    const auto ofi =
        aggregate_ofi(day.flows, cluster_scope, spec.event_scope, spec.measure, legacy_trade_sign);
    const auto& fr = spec.horizon == ReturnKind::kForwardNextBucket
                         ? day.returns.forward_next_bucket
                         : day.returns.forward_to_close;
    const double pnl = daily_pnl(std::span(ofi).first(kBucketsPerDay - 1), fr);
    auto& acc = by_date[day.date];
    acc.first += pnl;
    acc.second += 1;
  }
  std::vector<double> series;
  series.reserve(by_date.size());
  if (dates_out) dates_out->clear();
  for (const auto& [date, acc] : by_date) {
    series.push_back(acc.first / acc.second);
    if (dates_out) dates_out->push_back(date);
  }
  return series;
}

// The ten-metric suite with per-metric nulls instead of hard failures, for
// out-of-sample reports where a degenerate series must still be reportable.
ordered_json lenient_metrics(std::span<const double> daily, int annualization_days,
                             std::string& note) {
  ordered_json m;
  const std::size_t n = daily.size();
  m["n_days"] = n;
  const char* keys[] = {"expected_return", "volatility", "downside_deviation",
                        "max_drawdown",    "sharpe",     "sortino",
                        "calmar",          "hit_rate",   "avg_profit_over_avg_loss",
                        "pnl_per_trade"};
  auto undefined = [&](const char* key, const std::string& why) {
    m[key] = nullptr;
    note += std::string(key) + " undefined: " + why + "; ";
  };
  if (n < 2) {
    for (const char* key : keys) undefined(key, "fewer than two days");
    return m;
  }
  const double ann = static_cast<double>(annualization_days);
  const double root_ann = std::sqrt(ann);
  const double mean = sample_mean(daily);
  const double sd = sample_std(daily);
  double downside_sq = 0.0;
  std::size_t wins = 0, losses = 0;
  double win_sum = 0.0, loss_sum = 0.0;
  for (double v : daily) {
    if (v < 0.0) {
      downside_sq += v * v;
      ++losses;
      loss_sum += v;
    } else if (v > 0.0) {
      ++wins;
      win_sum += v;
    }
  }
  const double dd = std::sqrt(downside_sq / static_cast<double>(n)) * root_ann;
  double cum = 0.0, peak = -std::numeric_limits<double>::infinity(), mdd = 0.0;
  for (double v : daily) {
    cum += v;
    peak = std::max(peak, cum);
    mdd = std::min(mdd, cum - peak);
  }
  m["expected_return"] = mean * ann;
  m["volatility"] = sd * root_ann;
  m["downside_deviation"] = dd;
  m["max_drawdown"] = mdd;
  if (sd > 0.0) m["sharpe"] = mean / sd * root_ann;
  else undefined("sharpe", "zero variance");
  if (dd > 0.0) m["sortino"] = mean * ann / dd;
  else undefined("sortino", "no losing days");
  if (mdd < 0.0) m["calmar"] = mean * ann / std::abs(mdd);
  else undefined("calmar", "no drawdown");
  m["hit_rate"] = static_cast<double>(wins) / static_cast<double>(n);
  if (wins > 0 && losses > 0) {
    m["avg_profit_over_avg_loss"] = (win_sum / static_cast<double>(wins)) /
                                    (std::abs(loss_sum) / static_cast<double>(losses));
  } else {
    undefined("avg_profit_over_avg_loss", "need both winning and losing days");
  }
  if (sd > 0.0) m["pnl_per_trade"] = mean / sd * 100.0;
  else undefined("pnl_per_trade", "zero variance");
  return m;
}

StrategyEvaluation evaluate_on_test(const PipelineConfig& config,
                                    std::span<const StockDayFlows> test,
                                    const StrategySpec& spec, const RoleMap& roles,
                                    std::optional<double> train_sharpe) {
  StrategyEvaluation eval;
  eval.spec = spec;
  eval.train_sharpe = train_sharpe;
  const auto raw = strategy_daily(test, spec, roles, config.legacy_trade_sign);
  eval.test_sharpe = sharpe_of(raw, config.annualization_days);
  try {
    eval.test_daily = vol_target(raw, config.vol_target_annual, config.annualization_days);
  } catch (const StrategyError& ex) {
    eval.test_daily.assign(raw.begin(), raw.end());
    eval.note += std::string("vol targeting skipped: ") + ex.what() + "; ";
  }
  eval.test_metrics = lenient_metrics(eval.test_daily, config.annualization_days, eval.note);
  return eval;
}

}  // namespace

// ---------------------------------------------------------------------------
// End-to-end core.

EndToEndResult run_end_to_end(const PipelineConfig& config) {
  config.validate();
  auto train = compute_universe(config, config.train);
  auto test = compute_universe(config, config.test);

  EndToEndResult out;
  TrainedModels models = fit_models(config, train);
  label_universe(models, train);
  label_universe(models, test);
  out.reference_model = models.reference;
  out.stock_models = models.stock_models;
  out.votes = build_votes(config, models, train);
  out.roles = assign_roles(out.votes);

  {
    std::set<std::string> dates;
    for (const auto& day : test) {
      if (day.ok) dates.insert(day.date);
    }
    out.test_dates.assign(dates.begin(), dates.end());
  }
  if (out.test_dates.empty()) throw PipelineError("empty test set: no evaluable test days");

  const ReturnKind horizons[] = {ReturnKind::kForwardNextBucket, ReturnKind::kForwardToClose};
  const Measure measures[] = {Measure::kSize, Measure::kCount};
  for (const ReturnKind horizon : horizons) {
    for (const EventScope scope : config.event_scopes) {
      BacktestFamily family;
      family.horizon = horizon;
      family.scope = scope;
      for (const Measure measure : measures) {
        for (int canonical = 0; canonical < std::min(config.k, 3); ++canonical) {
          StrategySpec spec{measure, canonical, scope, horizon};
          const auto series = strategy_daily(train, spec, out.roles, config.legacy_trade_sign);
          if (const auto sr = sharpe_of(series, config.annualization_days)) {
            family.train_table.push_back({spec, *sr});
          }
        }
      }
      if (family.train_table.empty()) {
        throw PipelineError(std::string("no candidate with a defined train Sharpe for ") +
                            to_string(horizon) + "/" + to_string(scope));
      }
      family.best = select_best_strategy(family.train_table);
      std::optional<double> best_train;
      for (const auto& cand : family.train_table) {
        if (cand.spec == family.best) best_train = cand.train_sharpe;
      }
      family.best_eval = evaluate_on_test(config, test, family.best, out.roles, best_train);

      for (const Measure measure : measures) {
        StrategySpec bench{measure, kAllClusters, scope, horizon};
        const auto series = strategy_daily(train, bench, out.roles, config.legacy_trade_sign);
        auto eval = evaluate_on_test(config, test, bench, out.roles,
                                     sharpe_of(series, config.annualization_days));
        if (measure == Measure::kSize) family.benchmark_size = std::move(eval);
        else family.benchmark_count = std::move(eval);
      }
      out.families.push_back(std::move(family));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages.

namespace {

void log_skipped(const PipelineConfig& config, const char* stage,
                 std::span<const StockDayFlows> days) {
  std::vector<const StockDayFlows*> bad;
  for (const auto& day : days) {
    if (!day.ok) bad.push_back(&day);
  }
  if (bad.empty()) return;
  std::sort(bad.begin(), bad.end(), [](const StockDayFlows* a, const StockDayFlows* b) {
    return std::tie(a->symbol, a->date) < std::tie(b->symbol, b->date);
  });
  std::ostringstream body;
  body << header_comment(config) << "\n" << "symbol,date,error\n";
  for (const auto* day : bad) {
    body << day->symbol << "," << day->date << "," << csv::quote(day->error) << "\n";
    std::cerr << "[" << stage << "] skipping " << day->symbol << " " << day->date << ": "
              << day->error << "\n";
  }
  write_text_file((fs::path(config.out_dir) / (std::string(stage) + "_skipped.csv")).string(),
                  body.str());
}

DateRange full_range(const PipelineConfig& config) {
  return DateRange{std::min(config.train.start, config.test.start),
                   std::max(config.train.end, config.test.end)};
}

std::string eval_csv_name(const StrategyEvaluation& eval) {
  if (!eval.spec.is_benchmark()) return "best";
  return eval.spec.measure == Measure::kSize ? "benchmark_size" : "benchmark_count";
}

ordered_json evaluation_to_json(const StrategyEvaluation& eval) {
  ordered_json j;
  j["strategy"] = to_string(eval.spec);
  j["measure"] = to_string(eval.spec.measure);
  j["cluster"] = eval.spec.is_benchmark() ? ordered_json("pooled")
                                          : ordered_json(eval.spec.canonical_cluster + 1);
  j["event_scope"] = to_string(eval.spec.event_scope);
  j["horizon"] = to_string(eval.spec.horizon);
  j["train_sharpe"] = eval.train_sharpe ? ordered_json(*eval.train_sharpe) : ordered_json(nullptr);
  j["test_sharpe"] = eval.test_sharpe ? ordered_json(*eval.test_sharpe) : ordered_json(nullptr);
  j["test_metrics"] = eval.test_metrics;
  j["note"] = eval.note;
  return j;
}

}  // namespace

void run_synth(const PipelineConfig& config) {
  config.validate();
  const auto dates = trading_dates(config.synth_start_date, config.synth.n_days);
  std::vector<std::pair<std::size_t, std::size_t>> tasks;  // (stock idx, day idx)
  for (std::size_t s = 0; s < config.stocks.size(); ++s) {
    for (std::size_t d = 0; d < dates.size(); ++d) tasks.emplace_back(s, d);
  }
  parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
    const auto& symbol = config.stocks[tasks[i].first].symbol;
    const int day_index = static_cast<int>(tasks[i].second);
    const auto& date = dates[tasks[i].second];
    SynthConfig sc = config.synth;
    sc.session = config.session;
    sc.seed = mix_seed(config.synth.seed, hash_string(symbol));
    const SynthDay day = generate_day(sc, day_index);
    fs::create_directories(fs::path(config.data_root) / symbol);
    write_message_file(message_path(config, symbol, date), day.events);
    if (sc.emit_books) {
      write_orderbook_file(orderbook_path(config, symbol, date), day.books);
    }
    write_truth_file(truth_path(config, symbol, date), day.truth);
  });
}

void run_features(const PipelineConfig& config) {
  config.validate();
  const auto range = full_range(config);
  std::vector<std::pair<std::string, std::string>> tasks;
  for (const auto& stock : config.stocks) {
    for (const auto& date : list_available_dates(config, stock.symbol)) {
      if (date_in_range(date, range)) tasks.emplace_back(stock.symbol, date);
    }
  }
  std::vector<StockDayFlows> days(tasks.size());
  parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
    const auto& [symbol, date] = tasks[i];
    // Recompute raw + normalized aligned to message rows for the export.
    days[i].symbol = symbol;
    days[i].date = date;
    try {
      const auto parsed = parse_message_file(message_path(config, symbol, date));
      const auto feats =
          compute_day_features(parsed.events, config.session, config.normalization_window);
      std::ostringstream body;
      body << header_comment(config) << "\n" << "row";
      for (const char* name : feature_names()) body << "," << name;
      for (const char* name : feature_names()) body << ",z_" << name;
      body << "\n";
      const std::size_t offset = feats.normalized_offset(config.normalization_window);
      for (std::size_t r = 0; r < feats.raw.size(); ++r) {
        body << feats.event_rows[r];
        const auto arr = feats.raw[r].as_array();
        for (double v : arr) body << "," << format_double(v);
        if (r >= offset && r - offset < feats.normalized.size()) {
          for (double v : feats.normalized[r - offset]) body << "," << format_double(v);
        } else {
          for (int c = 0; c < kFeatureDim; ++c) body << ",";
        }
        body << "\n";
      }
      write_text_file((fs::path(config.out_dir) / "features" /
                       (symbol + "_" + date + "_features.csv")).string(),
                      body.str());
      days[i].ok = true;
    } catch (const std::exception& ex) {
      days[i].ok = false;
      days[i].error = ex.what();
    }
  });
  log_skipped(config, "features", days);
}

void run_cluster(const PipelineConfig& config) {
  config.validate();
  auto train = compute_universe(config, config.train);
  log_skipped(config, "cluster", train);
  const TrainedModels models = fit_models(config, train);
  auto with_meta = [&](const ClusterModel& model) {
    ordered_json j = model_to_json(model);
    j["meta"] = meta_object(config);
    return j;
  };
  write_json_file((fs::path(config.out_dir) / "models" / "reference.json").string(),
                  with_meta(models.reference));
  for (const auto& [symbol, model] : models.stock_models) {
    write_json_file((fs::path(config.out_dir) / "models" / (symbol + ".json")).string(),
                    with_meta(model));
  }
}

void run_signals(const PipelineConfig& config) {
  config.validate();
  auto train = compute_universe(config, config.train);
  auto test = compute_universe(config, config.test);
  const TrainedModels models = fit_models(config, train);
  label_universe(models, train);
  label_universe(models, test);

  std::vector<const StockDayFlows*> days;
  for (const auto& day : train) days.push_back(&day);
  for (const auto& day : test) days.push_back(&day);

  std::vector<StockDayFlows> flat;
  for (const auto* day : days) flat.push_back(*day);
  log_skipped(config, "signals", flat);

  parallel_for(days.size(), config.workers, [&](std::size_t i) {
    const auto& day = *days[i];
    if (!day.ok) return;
    std::ostringstream ofi_body;
    ofi_body << header_comment(config) << "\n" << "event_scope,measure,cluster";
    for (int b = 1; b <= kBucketsPerDay; ++b) ofi_body << ",b" << b;
    ofi_body << "\n";
    const Measure measures[] = {Measure::kSize, Measure::kCount};
    for (const EventScope scope : config.event_scopes) {
      for (const Measure measure : measures) {
        for (int c = 0; c <= config.k; ++c) {
          const int cluster_scope = (c == config.k) ? kAllClusters : c;
          const auto ofi = aggregate_ofi(day.flows, cluster_scope, scope, measure,
                                         config.legacy_trade_sign);
          ofi_body << to_string(scope) << "," << to_string(measure) << ","
                   << (cluster_scope == kAllClusters ? std::string("pooled")
                                                     : std::to_string(c + 1));
          for (const auto v : ofi) ofi_body << "," << v;
          ofi_body << "\n";
        }
      }
    }
    write_text_file((fs::path(config.out_dir) / "signals" /
                     (day.symbol + "_" + day.date + "_ofi.csv")).string(),
                    ofi_body.str());

    std::ostringstream ret_body;
    ret_body << header_comment(config) << "\n" << "kind";
    for (int b = 1; b <= kBucketsPerDay; ++b) ret_body << ",b" << b;
    ret_body << "\n";
    ret_body << to_string(ReturnKind::kContemporaneous);
    for (const double v : day.returns.contemporaneous) ret_body << "," << format_double(v);
    ret_body << "\n" << to_string(ReturnKind::kForwardNextBucket);
    for (const double v : day.returns.forward_next_bucket) ret_body << "," << format_double(v);
    ret_body << ",\n" << to_string(ReturnKind::kForwardToClose);
    for (const double v : day.returns.forward_to_close) ret_body << "," << format_double(v);
    ret_body << ",\n";
    write_text_file((fs::path(config.out_dir) / "signals" /
                     (day.symbol + "_" + day.date + "_returns.csv")).string(),
                    ret_body.str());
  });
}

void run_roles(const PipelineConfig& config) {
  config.validate();
  auto train = compute_universe(config, config.train);
  log_skipped(config, "roles", train);
  TrainedModels models = fit_models(config, train);
  label_universe(models, train);
  const auto votes = build_votes(config, models, train);
  const RoleMap roles = assign_roles(votes);
  ordered_json j = role_map_to_json(roles, votes);
  j["meta"] = meta_object(config);
  write_json_file((fs::path(config.out_dir) / "roles.json").string(), j);
}

void run_backtest(const PipelineConfig& config) {
  config.validate();
  const EndToEndResult result = run_end_to_end(config);

  std::ostringstream table;
  table << header_comment(config) << "\n"
        << "horizon,event_scope,measure,cluster,train_sharpe,selected\n";
  for (const auto& family : result.families) {
    for (const auto& cand : family.train_table) {
      table << to_string(family.horizon) << "," << to_string(family.scope) << ","
            << to_string(cand.spec.measure) << "," << cand.spec.canonical_cluster + 1 << ","
            << format_double(cand.train_sharpe) << "," << (cand.spec == family.best ? 1 : 0)
            << "\n";
    }
  }
  write_text_file((fs::path(config.out_dir) / "backtest" / "train_table.csv").string(),
                  table.str());

  for (const auto& family : result.families) {
    const std::string tag =
        std::string(to_string(family.horizon)) + "_" + to_string(family.scope);
    ordered_json report;
    report["meta"] = meta_object(config);
    report["horizon"] = to_string(family.horizon);
    report["event_scope"] = to_string(family.scope);
    report["n_test_days"] = result.test_dates.size();
    report["best"] = evaluation_to_json(family.best_eval);
    report["benchmark_size"] = evaluation_to_json(family.benchmark_size);
    report["benchmark_count"] = evaluation_to_json(family.benchmark_count);
    write_json_file((fs::path(config.out_dir) / "backtest" / ("report_" + tag + ".json")).string(),
                    report);

    for (const auto* eval : {&family.best_eval, &family.benchmark_size, &family.benchmark_count}) {
      std::ostringstream pnl;
      pnl << header_comment(config) << "\n" << "date,daily,cumulative\n";
      double cum = 0.0;
      for (std::size_t i = 0; i < eval->test_daily.size(); ++i) {
        cum += eval->test_daily[i];
        pnl << result.test_dates[i] << "," << format_double(eval->test_daily[i]) << ","
            << format_double(cum) << "\n";
      }
      write_text_file((fs::path(config.out_dir) / "backtest" /
                       ("pnl_" + tag + "_" + eval_csv_name(*eval) + ".csv")).string(),
                      pnl.str());
    }
  }
}

void run_all(const PipelineConfig& config) {
  config.validate();
  // Generate the synthetic universe only when the reference stock has no data
  // yet; an `all` run over real (or previously generated) data must not touch
  // the inputs.
  if (list_available_dates(config, config.reference_symbol()).empty()) {
    run_synth(config);
  }
  run_features(config);
  run_cluster(config);
  run_signals(config);
  run_roles(config);
  run_backtest(config);
}

int run_stage(const std::string& stage, const PipelineConfig& config) {
  const fs::path out_dir(config.out_dir);
  const fs::path marker = out_dir / "INCOMPLETE";
  const fs::path report = out_dir / "error_report.json";
  try {
    fs::create_directories(out_dir);
    write_text_file(marker.string(), "INCOMPLETE\n");
    if (stage == "synth") run_synth(config);
    else if (stage == "features") run_features(config);
    else if (stage == "cluster") run_cluster(config);
    else if (stage == "signals") run_signals(config);
    else if (stage == "roles") run_roles(config);
    else if (stage == "backtest") run_backtest(config);
    else if (stage == "all") run_all(config);
    else throw PipelineError("unknown stage: " + stage);
    fs::remove(marker);
    fs::remove(report);
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "stage " << stage << " failed: " << ex.what() << "\n";
    try {
      ordered_json err;
      err["stage"] = stage;
      err["error"] = ex.what();
      err["config_hash"] = config_hash(config);
      err["version"] = kVersion;
      write_json_file(report.string(), err);
    } catch (...) {
    }
    return 1;
  }
}

}  // namespace flowclust
