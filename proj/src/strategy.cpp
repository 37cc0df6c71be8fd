#include "flowclust/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace flowclust {

namespace {

double sample_mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sample standard deviation (n-1 divisor), used throughout the strategy
// metrics. The feature normalization uses the population divisor instead —
// each formula as written.
double sample_std(std::span<const double> x) {
  const double mean = sample_mean(x);
  double sq = 0.0;
  for (double v : x) {
    const double d = v - mean;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(x.size() - 1));
}

}  // namespace

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StrategyError("correlation: length mismatch");
  if (x.size() < 2) throw StrategyError("correlation: need at least 2 observations");
  const double mx = sample_mean(x);
  const double my = sample_mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw StrategyError("correlation undefined: zero-variance series");
  }
  return sxy / std::sqrt(sxx * syy);
}

const char* to_string(Role role) {
  switch (role) {
    case Role::kDirectional: return "directional";
    case Role::kOpportunistic: return "opportunistic";
    case Role::kMarketMaking: return "market_making";
  }
  return "?";
}

StockRoleVote make_stock_vote(std::string symbol,
                              std::array<std::optional<double>, 3> directional_score,
                              std::array<std::optional<double>, 3> opportunistic_score) {
  StockRoleVote v;
  v.symbol = std::move(symbol);
  v.directional_score = directional_score;
  v.opportunistic_score = opportunistic_score;

  const auto argmax = [](const std::array<std::optional<double>, 3>& scores,
                         std::optional<int> skip) -> std::optional<int> {
    std::optional<int> best;
    for (int c = 0; c < 3; ++c) {
      if (skip && *skip == c) continue;
      if (!scores[c]) continue;
      if (!best || *scores[c] > *scores[*best]) best = c;
    }
    return best;
  };

  v.vote[static_cast<int>(Role::kDirectional)] = argmax(directional_score, std::nullopt);
  v.vote[static_cast<int>(Role::kOpportunistic)] =
      argmax(opportunistic_score, v.vote[static_cast<int>(Role::kDirectional)]);
  const auto dir = v.vote[static_cast<int>(Role::kDirectional)];
  const auto opp = v.vote[static_cast<int>(Role::kOpportunistic)];
  if (dir && opp) {
    for (int c = 0; c < 3; ++c) {
      if (c != *dir && c != *opp) {
        v.vote[static_cast<int>(Role::kMarketMaking)] = c;
        break;
      }
    }
  }
  return v;
}

RoleMap assign_roles(std::span<const StockRoleVote> votes) {
  // Ballot counts per role, then greedy resolution in role order with ties
  // and vote-less roles falling to the lowest unassigned cluster index.
  std::array<std::array<int, 3>, 3> tally{};  // [role][cluster]
  for (const auto& v : votes) {
    for (int r = 0; r < 3; ++r) {
      if (v.vote[r]) ++tally[r][*v.vote[r]];
    }
  }
  RoleMap map;
  std::array<bool, 3> taken{};
  for (int r = 0; r < 3; ++r) {
    int best = -1;
    for (int c = 0; c < 3; ++c) {
      if (taken[c]) continue;
      if (best < 0 || tally[r][c] > tally[r][best]) best = c;
    }
    map.cluster_for_role[r] = best;
    taken[best] = true;
  }
  for (int r = 0; r < 3; ++r) map.role_for_cluster[map.cluster_for_role[r]] = r;
  return map;
}

nlohmann::ordered_json role_map_to_json(const RoleMap& map,
                                        std::span<const StockRoleVote> votes) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json roles;
  for (int r = 0; r < 3; ++r) {
    roles[to_string(static_cast<Role>(r))] = map.cluster_for_role[r];
  }
  j["cluster_for_role"] = roles;
  j["role_for_cluster"] = map.role_for_cluster;
  nlohmann::ordered_json vote_list = nlohmann::ordered_json::array();
  for (const auto& v : votes) {
    nlohmann::ordered_json jv;
    jv["symbol"] = v.symbol;
    const auto opt_array = [](const std::array<std::optional<double>, 3>& a) {
      nlohmann::ordered_json out = nlohmann::ordered_json::array();
      for (const auto& s : a) {
        if (s) {
          out.push_back(*s);
        } else {
          out.push_back(nullptr);
        }
      }
      return out;
    };
    jv["directional_score"] = opt_array(v.directional_score);
    jv["opportunistic_score"] = opt_array(v.opportunistic_score);
    nlohmann::ordered_json jvotes;
    for (int r = 0; r < 3; ++r) {
      const char* name = to_string(static_cast<Role>(r));
      if (v.vote[r]) {
        jvotes[name] = *v.vote[r];
      } else {
        jvotes[name] = nullptr;
      }
    }
    jv["votes"] = jvotes;
    vote_list.push_back(jv);
  }
  j["stock_votes"] = vote_list;
  return j;
}

RoleMap role_map_from_json(const nlohmann::json& j) {
  RoleMap map;
  const auto& roles = j.at("cluster_for_role");
  map.cluster_for_role[static_cast<int>(Role::kDirectional)] =
      roles.at("directional").get<int>();
  map.cluster_for_role[static_cast<int>(Role::kOpportunistic)] =
      roles.at("opportunistic").get<int>();
  map.cluster_for_role[static_cast<int>(Role::kMarketMaking)] =
      roles.at("market_making").get<int>();
  std::array<bool, 3> seen{};
  for (int r = 0; r < 3; ++r) {
    const int c = map.cluster_for_role[r];
    if (c < 0 || c > 2 || seen[c]) throw StrategyError("role map is not a bijection");
    seen[c] = true;
    map.role_for_cluster[c] = r;
  }
  return map;
}

double daily_pnl(std::span<const std::int64_t> ofi_by_bucket,
                 std::span<const double> forward_returns) {
  if (ofi_by_bucket.size() != forward_returns.size()) {
    throw StrategyError("daily_pnl: bucket count mismatch");
  }
  double pnl = 0.0;
  for (std::size_t j = 0; j < ofi_by_bucket.size(); ++j) {
    if (ofi_by_bucket[j] > 0) {
      pnl += forward_returns[j];
    } else if (ofi_by_bucket[j] < 0) {
      pnl -= forward_returns[j];
    }
  }
  return pnl;
}

std::vector<double> equal_weighted_pnl(
    std::span<const std::vector<double>> per_stock_daily) {
  if (per_stock_daily.empty()) throw StrategyError("no stock series to average");
  const std::size_t n_days = per_stock_daily.front().size();
  for (const auto& s : per_stock_daily) {
    if (s.size() != n_days) throw StrategyError("stock series lengths differ");
  }
  std::vector<double> out(n_days, 0.0);
  for (const auto& s : per_stock_daily) {
    for (std::size_t d = 0; d < n_days; ++d) out[d] += s[d];
  }
  const double n = static_cast<double>(per_stock_daily.size());
  for (double& v : out) v /= n;
  return out;
}

std::vector<double> vol_target(std::span<const double> daily, double target,
                               int annualization_days) {
  if (daily.size() < 2) throw StrategyError("vol targeting needs at least 2 days");
  const double sd = sample_std(daily);
  if (sd <= 0.0) throw StrategyError("vol targeting undefined: zero variance");
  const double scale = target / (sd * std::sqrt(static_cast<double>(annualization_days)));
  std::vector<double> out(daily.begin(), daily.end());
  for (double& v : out) v *= scale;
  return out;
}

MetricsReport compute_metrics(std::span<const double> daily, int annualization_days) {
  if (daily.size() < 2) throw StrategyError("metrics need at least 2 days");
  const double ann = static_cast<double>(annualization_days);
  const double root_ann = std::sqrt(ann);
  const double mean = sample_mean(daily);
  const double sd = sample_std(daily);
  const double n = static_cast<double>(daily.size());

  MetricsReport m;
  m.n_days = daily.size();
  m.expected_return = mean * ann;
  m.volatility = sd * root_ann;

  double downside_sq = 0.0;
  for (double v : daily) {
    if (v < 0.0) downside_sq += v * v;
  }
  m.downside_deviation = std::sqrt(downside_sq / n) * root_ann;

  // Most negative gap to the running peak of the cumulative-sum path.
  double cum = 0.0, peak = -std::numeric_limits<double>::infinity(), mdd = 0.0;
  for (double v : daily) {
    cum += v;
    peak = std::max(peak, cum);
    mdd = std::min(mdd, cum - peak);
  }
  m.max_drawdown = mdd;

  if (sd <= 0.0) throw StrategyError("sharpe undefined: zero variance");
  m.sharpe = mean / sd * root_ann;
  m.pnl_per_trade = mean / sd * 100.0;

  if (m.downside_deviation <= 0.0) {
    throw StrategyError("sortino undefined: no losing days");
  }
  m.sortino = m.expected_return / m.downside_deviation;

  if (mdd >= 0.0) throw StrategyError("calmar undefined: no drawdown");
  m.calmar = m.expected_return / std::abs(mdd);

  std::size_t wins = 0, losses = 0;
  double win_sum = 0.0, loss_sum = 0.0;
  for (double v : daily) {
    if (v > 0.0) {
      ++wins;
      win_sum += v;
    } else if (v < 0.0) {
      ++losses;
      loss_sum += v;
    }
  }
  m.hit_rate = static_cast<double>(wins) / n;
  if (wins == 0 || losses == 0) {
    throw StrategyError("profit/loss ratio undefined: need both winning and losing days");
  }
  m.avg_profit_over_avg_loss =
      (win_sum / static_cast<double>(wins)) / std::abs(loss_sum / static_cast<double>(losses));
  return m;
}

nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["n_days"] = m.n_days;
  j["expected_return"] = m.expected_return;
  j["volatility"] = m.volatility;
  j["downside_deviation"] = m.downside_deviation;
  j["max_drawdown"] = m.max_drawdown;
  j["sharpe"] = m.sharpe;
  j["sortino"] = m.sortino;
  j["calmar"] = m.calmar;
  j["hit_rate"] = m.hit_rate;
  j["avg_profit_over_avg_loss"] = m.avg_profit_over_avg_loss;
  j["pnl_per_trade"] = m.pnl_per_trade;
  return j;
}

std::string to_string(const StrategySpec& spec) {
  std::string cluster = spec.is_benchmark()
                            ? "pooled"
                            : "cluster" + std::to_string(spec.canonical_cluster + 1);
  return std::string(to_string(spec.horizon)) + "_" + to_string(spec.event_scope) +
         "_" + to_string(spec.measure) + "_" + cluster;
}

StrategySpec select_best_strategy(std::span<const StrategyCandidate> candidates) {
  if (candidates.empty()) throw StrategyError("no strategy candidates");
  const auto better = [](const StrategyCandidate& a, const StrategyCandidate& b) {
    if (a.train_sharpe != b.train_sharpe) return a.train_sharpe > b.train_sharpe;
    // Ties: size measure first, then the lowest cluster index.
    if (a.spec.measure != b.spec.measure) return a.spec.measure == Measure::kSize;
    return a.spec.canonical_cluster < b.spec.canonical_cluster;
  };
  const StrategyCandidate* best = &candidates[0];
  for (const auto& c : candidates.subspan(1)) {
    if (better(c, *best)) best = &c;
  }
  return best->spec;
}

}  // namespace flowclust
