// pipeline.hpp — configuration, stage orchestration, artifact IO and the
// end-to-end train/test evaluation over a stock universe.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowclust/clustering.hpp"
#include "flowclust/features.hpp"
#include "flowclust/flow_signals.hpp"
#include "flowclust/market_data.hpp"
#include "flowclust/strategy.hpp"
#include "flowclust/synth.hpp"

namespace flowclust {

inline constexpr const char* kVersion = "1.0.0";

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StockSpec {
  std::string symbol;
  std::string group;  // tick-size group tag: small | medium | large
};

struct DateRange {
  std::string start;  // ISO yyyy-mm-dd, inclusive
  std::string end;
};

struct PipelineConfig {
  std::string data_root = "data";
  std::string out_dir = "out";
  std::vector<StockSpec> stocks;
  DateRange train{"2021-01-01", "2021-06-30"};
  DateRange test{"2021-07-01", "2021-12-31"};
  SessionConfig session;

  std::size_t normalization_window = 100;  // w
  int k = 3;
  KMeansOptions kmeans;
  std::optional<std::size_t> subsample;       // training-point cap, none = all
  std::optional<std::string> reference_stock; // default: first configured stock

  std::uint64_t seed = 7;  // master seed; stage seeds derive from it
  std::optional<std::uint64_t> clustering_seed;

  std::vector<EventScope> event_scopes{EventScope::kAll, EventScope::kAdd,
                                       EventScope::kCancel, EventScope::kTrade};
  bool legacy_trade_sign = false;
  double vol_target_annual = 0.15;
  int annualization_days = 252;
  int workers = 1;

  SynthConfig synth;
  std::string synth_start_date = "2021-01-04";

  // Derived accessors.
  std::uint64_t effective_clustering_seed() const;
  std::string reference_symbol() const;
  void validate() const;
};

PipelineConfig default_config();
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

// Environment overrides mirroring the CLI flags: FLOWCLUST_CONFIG is applied
// by the CLI before load; FLOWCLUST_STAGE, FLOWCLUST_WORKERS, FLOWCLUST_SEED,
// FLOWCLUST_OUT override config fields here.
void apply_env_overrides(PipelineConfig& config);

// Stable 64-bit hash of the canonical JSON form, as a hex string. Written
// into every artifact header so outputs are traceable to their config.
std::string config_hash(const PipelineConfig& config);

// First `count` weekdays starting at `start_date` (inclusive if a weekday).
std::vector<std::string> trading_dates(const std::string& start_date, int count);
bool date_in_range(const std::string& date, const DateRange& range);

// data_root/SYMBOL/SYMBOL_DATE_{message,orderbook,truth}.csv
std::string message_path(const PipelineConfig& c, const std::string& symbol,
                         const std::string& date);
std::string orderbook_path(const PipelineConfig& c, const std::string& symbol,
                           const std::string& date);
std::string truth_path(const PipelineConfig& c, const std::string& symbol,
                       const std::string& date);

// Runs `fn(i)` for i in [0, n) on `workers` threads. Exceptions are captured
// and the first one (by task index) is rethrown after the pool drains.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// In-memory per-(stock, day) artifacts shared by the stages.

struct StockDayFlows {
  std::string symbol;
  std::string date;
  bool ok = false;
  std::string error;  // set when !ok (day skipped)
  // One entry per normalized (clusterable) event; cluster starts unset (-1).
  std::vector<LabeledFlow> flows;
  std::vector<FeaturePoint> points;  // aligned with flows
  BucketReturns returns;
};

// Replays one stock-day from the message file: features, per-event flow
// classification, bucket returns. Never throws for per-day data problems —
// failures land in `.error`.
StockDayFlows compute_stock_day(const PipelineConfig& config,
                                const std::string& symbol,
                                const std::string& date);

// All configured (stock, date-in-range) pairs, in deterministic order,
// computed with the configured worker count. Dates come from the files
// present under data_root.
std::vector<StockDayFlows> compute_universe(const PipelineConfig& config,
                                            const DateRange& range);

std::vector<std::string> list_available_dates(const PipelineConfig& config,
                                              const std::string& symbol);

// ---------------------------------------------------------------------------
// Stage results for the end-to-end run.

struct StrategyEvaluation {
  StrategySpec spec;
  std::optional<double> train_sharpe;
  std::optional<double> test_sharpe;
  std::vector<double> test_daily;  // vol-targeted when possible
  nlohmann::ordered_json test_metrics;  // per-metric value or null + notes
  std::string note;
};

struct BacktestFamily {
  ReturnKind horizon;
  EventScope scope;
  std::vector<StrategyCandidate> train_table;  // clustered candidates, defined SR only
  StrategySpec best;
  StrategyEvaluation best_eval;
  StrategyEvaluation benchmark_size;
  StrategyEvaluation benchmark_count;
};

struct EndToEndResult {
  ClusterModel reference_model;
  std::vector<std::pair<std::string, ClusterModel>> stock_models;
  RoleMap roles;
  std::vector<StockRoleVote> votes;
  // Test dates with at least one evaluable stock-day; every evaluation's
  // test_daily series is aligned with this axis.
  std::vector<std::string> test_dates;
  std::vector<BacktestFamily> families;
};

// Algorithm core: train-range clustering (reference + per-stock warm starts),
// role consensus, strategy selection on the train half, out-of-sample
// evaluation on the test half. Pure computation; writes nothing.
EndToEndResult run_end_to_end(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// CLI stages. Each writes its artifacts under config.out_dir (or data_root
// for synth) and throws PipelineError on failure.

void run_synth(const PipelineConfig& config);
void run_features(const PipelineConfig& config);
void run_cluster(const PipelineConfig& config);
void run_signals(const PipelineConfig& config);
void run_roles(const PipelineConfig& config);
void run_backtest(const PipelineConfig& config);
void run_all(const PipelineConfig& config);

// Dispatches one named stage: synth | features | cluster | signals | roles |
// backtest | all. Returns the process exit code; on failure writes
// out_dir/error_report.json and leaves an INCOMPLETE marker.
int run_stage(const std::string& stage, const PipelineConfig& config);

}  // namespace flowclust
