// strategy.hpp — cluster role identification, imbalance-sign trading rules,
// and the risk-adjusted performance suite.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowclust/flow_signals.hpp"

namespace flowclust {

class StrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sample Pearson correlation. Throws StrategyError on length mismatch, fewer
// than two observations, or a zero-variance input.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Behavioural roles, in canonical order: cluster 1 = directional,
// cluster 2 = opportunistic, cluster 3 = market-making.
enum class Role : std::uint8_t { kDirectional = 0, kOpportunistic = 1, kMarketMaking = 2 };

const char* to_string(Role role);

// One stock's evidence: per raw cluster, the best (over the size and count
// measures) correlation of its bucket imbalances with contemporaneous
// returns (directional affinity) and with returns to the close
// (opportunistic affinity). A score is absent when every candidate series
// had zero variance.
struct StockRoleVote {
  std::string symbol;
  std::array<std::optional<double>, 3> directional_score;
  std::array<std::optional<double>, 3> opportunistic_score;
  // Votes derived from the scores: directional first, then opportunistic
  // among the remaining clusters, market-making takes the leftover.
  std::optional<int> vote[3];  // indexed by Role
};

StockRoleVote make_stock_vote(std::string symbol,
                              std::array<std::optional<double>, 3> directional_score,
                              std::array<std::optional<double>, 3> opportunistic_score);

// Consensus mapping between raw cluster indices and roles.
struct RoleMap {
  std::array<int, 3> cluster_for_role{};  // [Role] -> raw cluster index
  std::array<int, 3> role_for_cluster{};  // raw cluster index -> Role

  int canonical_of_raw(int raw_cluster) const { return role_for_cluster.at(raw_cluster); }
  int raw_of_canonical(int canonical) const { return cluster_for_role.at(canonical); }
};

// Majority vote across stocks, resolved greedily in role order (directional,
// opportunistic, market-making); ties and exhausted votes fall to the lowest
// still-unassigned cluster index. Always yields a bijection.
RoleMap assign_roles(std::span<const StockRoleVote> votes);

nlohmann::ordered_json role_map_to_json(const RoleMap& map,
                                        std::span<const StockRoleVote> votes);
RoleMap role_map_from_json(const nlohmann::json& j);

// One trading day: long/short one bucket-return unit by the sign of the
// bucket's imbalance, summed over the twelve buckets that have a forward
// return. A zero imbalance stays flat.
double daily_pnl(std::span<const std::int64_t> ofi_by_bucket,
                 std::span<const double> forward_returns);

// Equal-weighted average across stocks, day by day. All series must have the
// same length.
std::vector<double> equal_weighted_pnl(
    std::span<const std::vector<double>> per_stock_daily);

// Scales a daily series to an annualized volatility target (sample standard
// deviation). Throws StrategyError when the series has zero variance.
std::vector<double> vol_target(std::span<const double> daily, double target,
                               int annualization_days = 252);

struct MetricsReport {
  std::size_t n_days = 0;
  double expected_return = 0.0;      // annualized mean
  double volatility = 0.0;           // annualized sample std
  double downside_deviation = 0.0;   // annualized, negative days only
  double max_drawdown = 0.0;         // most negative peak-to-trough of the cumulative sum
  double sharpe = 0.0;
  double sortino = 0.0;
  double calmar = 0.0;
  double hit_rate = 0.0;
  double avg_profit_over_avg_loss = 0.0;
  double pnl_per_trade = 0.0;        // mean over std, in percent
};

// Computes the ten-metric suite over a daily pnl series. Throws
// StrategyError when a metric is undefined: fewer than two days, zero
// variance, no losing day, or a flat cumulative path with no drawdown.
MetricsReport compute_metrics(std::span<const double> daily,
                              int annualization_days = 252);

nlohmann::ordered_json metrics_to_json(const MetricsReport& m);

// A candidate trading rule: which cluster's imbalance (canonical index, or
// kAllClusters for the pooled no-clustering benchmark) drives the signal,
// which measure and event scope it is computed on, and which forward-return
// horizon it trades.
struct StrategySpec {
  Measure measure = Measure::kSize;
  int canonical_cluster = kAllClusters;
  EventScope event_scope = EventScope::kAll;
  ReturnKind horizon = ReturnKind::kForwardNextBucket;

  bool is_benchmark() const { return canonical_cluster == kAllClusters; }

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

std::string to_string(const StrategySpec& spec);

struct StrategyCandidate {
  StrategySpec spec;
  double train_sharpe = 0.0;
};

// Highest in-sample Sharpe wins; ties prefer the size measure, then the
// lowest cluster index.
StrategySpec select_best_strategy(std::span<const StrategyCandidate> candidates);

}  // namespace flowclust
