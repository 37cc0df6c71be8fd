#include "flowclust/strategy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace flowclust {
namespace {

// Ten-day hand series used by the frozen metrics oracle below.
const std::vector<double> kTenDays{0.012, -0.005, 0.021,  0.003, -0.014,
                                   0.007, -0.002, 0.016, -0.009, 0.004};

TEST(PearsonCorrelation, MatchesClosedForm) {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> y{2, 4, 7};
  // r = 5 / sqrt(2 * 114/9)
  EXPECT_NEAR(pearson_correlation(x, y), 0.9933992677987828, 1e-12);
  EXPECT_DOUBLE_EQ(pearson_correlation(x, x), 1.0);
  const std::vector<double> neg{-1, -2, -3};
  EXPECT_DOUBLE_EQ(pearson_correlation(x, neg), -1.0);
}

TEST(PearsonCorrelation, RejectsDegenerateInputs) {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> shorter{1, 2};
  const std::vector<double> flat{5, 5, 5};
  const std::vector<double> one{1};
  EXPECT_THROW(pearson_correlation(x, shorter), StrategyError);
  EXPECT_THROW(pearson_correlation(one, one), StrategyError);
  EXPECT_THROW(pearson_correlation(x, flat), StrategyError);
  EXPECT_THROW(pearson_correlation(flat, x), StrategyError);
}

TEST(StockVote, DirectionalFirstThenOpportunisticAmongTheRest) {
  const auto v = make_stock_vote(
      "TEST",
      {0.2, 0.9, 0.1},   // directional affinity: cluster 1 wins
      {0.8, 0.95, 0.3}); // opportunistic: cluster 1 excluded, cluster 0 wins
  ASSERT_TRUE(v.vote[0].has_value());
  EXPECT_EQ(*v.vote[0], 1);
  ASSERT_TRUE(v.vote[1].has_value());
  EXPECT_EQ(*v.vote[1], 0);
  ASSERT_TRUE(v.vote[2].has_value());
  EXPECT_EQ(*v.vote[2], 2);
}

TEST(StockVote, MissingScoresYieldMissingVotes) {
  const auto v = make_stock_vote("TEST", {std::nullopt, std::nullopt, std::nullopt},
                                 {0.1, 0.2, 0.3});
  EXPECT_FALSE(v.vote[0].has_value());
  EXPECT_TRUE(v.vote[1].has_value());   // opportunistic still voted
  EXPECT_FALSE(v.vote[2].has_value());  // leftover undefined without both
}

TEST(AssignRoles, MajorityWithGreedyTieBreaks) {
  std::vector<StockRoleVote> votes;
  votes.push_back(make_stock_vote("A", {0.1, 0.9, 0.2}, {0.9, 0.1, 0.2}));  // dir=1 opp=0
  votes.push_back(make_stock_vote("B", {0.1, 0.8, 0.2}, {0.7, 0.1, 0.2}));  // dir=1 opp=0
  votes.push_back(make_stock_vote("C", {0.1, 0.2, 0.9}, {0.9, 0.2, 0.1}));  // dir=2 opp=0
  const auto map = assign_roles(votes);
  EXPECT_EQ(map.cluster_for_role[0], 1);  // directional: two of three votes
  EXPECT_EQ(map.cluster_for_role[1], 0);
  EXPECT_EQ(map.cluster_for_role[2], 2);
  EXPECT_EQ(map.canonical_of_raw(1), 0);
  EXPECT_EQ(map.raw_of_canonical(2), 2);

  // No votes at all: greedy falls back to identity.
  const auto identity = assign_roles(std::vector<StockRoleVote>{});
  EXPECT_EQ(identity.cluster_for_role[0], 0);
  EXPECT_EQ(identity.cluster_for_role[1], 1);
  EXPECT_EQ(identity.cluster_for_role[2], 2);
}

TEST(RoleMapJson, RoundTripsAndValidates) {
  std::vector<StockRoleVote> votes{
      make_stock_vote("A", {0.1, 0.9, 0.2}, {0.9, 0.1, 0.2})};
  const auto map = assign_roles(votes);
  const auto j = role_map_to_json(map, votes);
  const auto back = role_map_from_json(j);
  EXPECT_EQ(back.cluster_for_role, map.cluster_for_role);
  EXPECT_EQ(back.role_for_cluster, map.role_for_cluster);
  EXPECT_EQ(j.at("stock_votes").size(), 1u);
  EXPECT_EQ(j.at("stock_votes")[0].at("symbol"), "A");

  auto broken = j;
  broken["cluster_for_role"]["directional"] = broken["cluster_for_role"]["opportunistic"];
  EXPECT_THROW(role_map_from_json(broken), StrategyError);
}

TEST(DailyPnl, TradesTheSignOfTheImbalance) {
  const std::vector<std::int64_t> ofi{5, -3, 0};
  const std::vector<double> fwd{0.01, 0.02, 0.5};
  EXPECT_DOUBLE_EQ(daily_pnl(ofi, fwd), 0.01 - 0.02);
  // Only the sign matters.
  const std::vector<std::int64_t> scaled{5000, -3000, 0};
  EXPECT_DOUBLE_EQ(daily_pnl(scaled, fwd), daily_pnl(ofi, fwd));
  const std::vector<double> shorter{0.01};
  EXPECT_THROW(daily_pnl(ofi, shorter), StrategyError);
}

TEST(EqualWeightedPnl, AveragesDayByDay) {
  const std::vector<std::vector<double>> series{{0.01, 0.02}, {0.03, -0.02}};
  const auto avg = equal_weighted_pnl(series);
  ASSERT_EQ(avg.size(), 2u);
  EXPECT_DOUBLE_EQ(avg[0], 0.02);
  EXPECT_DOUBLE_EQ(avg[1], 0.0);
  const std::vector<std::vector<double>> ragged{{0.01, 0.02}, {0.03}};
  EXPECT_THROW(equal_weighted_pnl(ragged), StrategyError);
  EXPECT_THROW(equal_weighted_pnl(std::vector<std::vector<double>>{}), StrategyError);
}

TEST(VolTarget, HitsTheTargetExactly) {
  const auto scaled = vol_target(kTenDays, 0.15);
  ASSERT_EQ(scaled.size(), kTenDays.size());
  // Recompute the annualized sample volatility of the scaled series.
  double mean = 0.0;
  for (double v : scaled) mean += v;
  mean /= static_cast<double>(scaled.size());
  double sq = 0.0;
  for (double v : scaled) sq += (v - mean) * (v - mean);
  const double ann_vol =
      std::sqrt(sq / static_cast<double>(scaled.size() - 1)) * std::sqrt(252.0);
  EXPECT_NEAR(ann_vol, 0.15, 1e-12);

  const std::vector<double> flat{0.01, 0.01, 0.01};
  EXPECT_THROW(vol_target(flat, 0.15), StrategyError);
  const std::vector<double> one{0.01};
  EXPECT_THROW(vol_target(one, 0.15), StrategyError);
}

TEST(Metrics, MatchFrozenTenDayOracle) {
  const auto m = compute_metrics(kTenDays);
  const double rel = 1e-10;
  EXPECT_EQ(m.n_days, 10u);
  EXPECT_NEAR(m.expected_return, 0.8316, rel * 0.8316);
  EXPECT_NEAR(m.volatility, 0.17646189390347145, rel * 0.17646189390347145);
  EXPECT_NEAR(m.downside_deviation, 0.08781343860708336, rel * 0.08781343860708336);
  EXPECT_NEAR(m.max_drawdown, -0.014, rel * 0.014);
  EXPECT_NEAR(m.sharpe, 4.712632181398346, rel * 4.712632181398346);
  EXPECT_NEAR(m.sortino, 9.470076712528599, rel * 9.470076712528599);
  EXPECT_NEAR(m.calmar, 59.400000000000006, rel * 59.4);
  EXPECT_NEAR(m.hit_rate, 0.6, rel * 0.6);
  EXPECT_NEAR(m.avg_profit_over_avg_loss, 1.4, rel * 1.4);
  EXPECT_NEAR(m.pnl_per_trade, 29.686792315475845, rel * 29.686792315475845);

  const auto j = metrics_to_json(m);
  EXPECT_DOUBLE_EQ(j.at("sharpe").get<double>(), m.sharpe);
  EXPECT_DOUBLE_EQ(j.at("pnl_per_trade").get<double>(), m.pnl_per_trade);
}

TEST(Metrics, SpotChecksAndScaleInvariance) {
  const std::vector<double> three{0.01, -0.01, 0.03};
  // mean 0.01, sample std 0.02: sharpe = 0.5 * sqrt(252).
  EXPECT_NEAR(compute_metrics(three, 252).sharpe / 7.937253933193772 - 1.0, 0.0, 1e-12);

  const std::vector<double> dip{0.1, -0.2, 0.1};
  EXPECT_DOUBLE_EQ(compute_metrics(dip).max_drawdown, -0.2);

  const auto base = compute_metrics(kTenDays).sharpe;
  for (double c : {1e-6, 0.5, 3.0, 1e4}) {
    std::vector<double> scaled;
    for (double v : kTenDays) scaled.push_back(c * v);
    EXPECT_NEAR(compute_metrics(scaled).sharpe, base, 1e-9 * std::abs(base));
  }
}

TEST(Metrics, ThrowWhenUndefined) {
  const std::vector<double> one{0.01};
  EXPECT_THROW(compute_metrics(one), StrategyError);
  const std::vector<double> flat{0.01, 0.01};
  EXPECT_THROW(compute_metrics(flat), StrategyError);  // zero variance
  const std::vector<double> no_loss{0.01, 0.03};
  EXPECT_THROW(compute_metrics(no_loss), StrategyError);  // no downside
  const std::vector<double> no_drawdown{-0.01, 0.02};
  EXPECT_THROW(compute_metrics(no_drawdown), StrategyError);  // flat-at-peak path
  const std::vector<double> no_win{-0.01, -0.02};
  EXPECT_THROW(compute_metrics(no_win), StrategyError);  // profit/loss ratio
}

TEST(StrategySpecTest, NamesAndSelection) {
  StrategySpec spec;
  spec.measure = Measure::kCount;
  spec.canonical_cluster = 1;
  spec.event_scope = EventScope::kAll;
  spec.horizon = ReturnKind::kForwardNextBucket;
  EXPECT_EQ(to_string(spec), "next_bucket_all_count_cluster2");
  EXPECT_FALSE(spec.is_benchmark());

  StrategySpec pooled;
  pooled.horizon = ReturnKind::kForwardToClose;
  pooled.event_scope = EventScope::kTrade;
  EXPECT_TRUE(pooled.is_benchmark());
  EXPECT_EQ(to_string(pooled), "to_close_trade_size_pooled");
}

TEST(SelectBestStrategy, HighestSharpeWithDeterministicTies) {
  StrategyCandidate a{{Measure::kCount, 2, EventScope::kAll,
                       ReturnKind::kForwardNextBucket}, 1.5};
  StrategyCandidate b{{Measure::kSize, 0, EventScope::kAll,
                       ReturnKind::kForwardNextBucket}, 2.0};
  StrategyCandidate c{{Measure::kCount, 1, EventScope::kAll,
                       ReturnKind::kForwardNextBucket}, 2.0};
  StrategyCandidate d{{Measure::kSize, 1, EventScope::kAll,
                       ReturnKind::kForwardNextBucket}, 2.0};
  // b, c, d tie on sharpe: size beats count, then cluster 0 beats cluster 1.
  std::vector<StrategyCandidate> candidates{a, b, c, d};
  EXPECT_EQ(select_best_strategy(candidates), b.spec);
  std::vector<StrategyCandidate> reversed{d, c, b, a};
  EXPECT_EQ(select_best_strategy(reversed), b.spec);
  EXPECT_THROW(select_best_strategy(std::vector<StrategyCandidate>{}), StrategyError);
}

}  // namespace
}  // namespace flowclust
