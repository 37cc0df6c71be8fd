#include "test_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>

namespace oracle {

using flowclust::EventType;
using flowclust::MboEvent;
using flowclust::Price;
using flowclust::SessionConfig;
using flowclust::Side;
using flowclust::TimeNs;
using flowclust::Volume;

namespace {

// Self-contained book + lifecycle state rebuilt per query.
struct Replay {
  std::map<Price, Volume> bids;  // ascending; best = rbegin
  std::map<Price, Volume> asks;  // ascending; best = begin
  std::map<std::pair<int, Price>, std::pair<TimeNs, TimeNs>> arrivals;
  bool mid_seen = false;
  std::int64_t mid2 = 0;
  TimeNs mid_changed = 0;

  void apply(const MboEvent& e) {
    auto& side = e.side == Side::kBid ? bids : asks;
    switch (e.type) {
      case EventType::kAdd: {
        side[e.price] += e.size;
        auto key = std::make_pair(e.side == Side::kBid ? 0 : 1, e.price);
        auto it = arrivals.find(key);
        if (it == arrivals.end()) {
          arrivals[key] = {e.time, e.time};
        } else {
          it->second.second = e.time;
        }
        break;
      }
      case EventType::kPartialCancel:
      case EventType::kDelete:
      case EventType::kExecVisible: {
        auto it = side.find(e.price);
        if (it != side.end()) {
          it->second -= e.size;
          if (it->second <= 0) side.erase(it);
        }
        if (side.find(e.price) == side.end()) {
          arrivals.erase(std::make_pair(e.side == Side::kBid ? 0 : 1, e.price));
        }
        break;
      }
      default:
        return;  // hidden executions, auctions, halts
    }
    if (!bids.empty() && !asks.empty()) {
      const std::int64_t m2 = bids.rbegin()->first + asks.begin()->first;
      if (!mid_seen || m2 != mid2) {
        mid_seen = true;
        mid2 = m2;
        mid_changed = e.time;
      }
    }
  }
};

bool featurizable(const MboEvent& e, const SessionConfig& s) {
  if (e.time < s.start_ns() || e.time > s.end_ns()) return false;
  if (e.type == EventType::kAuction || e.type == EventType::kHalt) return false;
  if (e.type == EventType::kExecHidden && !s.include_hidden_executions) return false;
  return true;
}

}  // namespace

DayFeaturesOracle day_features(std::span<const MboEvent> events,
                               const SessionConfig& session) {
  DayFeaturesOracle out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!featurizable(e, session)) continue;

    Replay st;
    for (std::size_t j = 0; j < i; ++j) st.apply(events[j]);

    if (st.bids.empty() || st.asks.empty() || !st.mid_seen) {
      ++out.skipped;
      continue;
    }

    std::array<double, 6> f{};
    const auto& own = e.side == Side::kBid ? st.bids : st.asks;
    auto vit = own.find(e.price);
    f[0] = vit == own.end() ? 0.0 : static_cast<double>(vit->second);
    f[1] = static_cast<double>(e.time - st.mid_changed) * 1e-9;
    auto ait = st.arrivals.find(std::make_pair(e.side == Side::kBid ? 0 : 1, e.price));
    if (ait != st.arrivals.end()) {
      f[2] = static_cast<double>(e.time - ait->second.first) * 1e-9;
      f[3] = static_cast<double>(e.time - ait->second.second) * 1e-9;
    }
    Volume same = 0;
    if (e.side == Side::kBid) {
      for (const auto& [p, v] : st.bids) {
        if (p >= e.price) same += v;
      }
    } else {
      for (const auto& [p, v] : st.asks) {
        if (p <= e.price) same += v;
      }
    }
    f[4] = static_cast<double>(same);
    const std::int64_t mid2 = st.bids.rbegin()->first + st.asks.begin()->first;
    const Price mirrored = mid2 - e.price;
    Volume opp = 0;
    if (e.side == Side::kBid) {
      for (const auto& [p, v] : st.asks) {
        if (p <= mirrored) opp += v;
      }
    } else {
      for (const auto& [p, v] : st.bids) {
        if (p >= mirrored) opp += v;
      }
    }
    f[5] = static_cast<double>(opp);

    out.rows.push_back(i);
    out.raw.push_back(f);
  }
  return out;
}

std::vector<std::array<double, 6>> rolling_z(
    std::span<const std::array<double, 6>> raw, std::size_t window) {
  std::vector<std::array<double, 6>> out;
  if (window == 0 || raw.size() < window) return out;
  for (std::size_t end = window; end <= raw.size(); ++end) {
    std::array<double, 6> z{};
    for (int d = 0; d < 6; ++d) {
      double sum = 0.0;
      for (std::size_t i = end - window; i < end; ++i) sum += raw[i][d];
      const double mean = sum / static_cast<double>(window);
      double sq = 0.0;
      for (std::size_t i = end - window; i < end; ++i) {
        sq += (raw[i][d] - mean) * (raw[i][d] - mean);
      }
      const double sd = std::sqrt(sq / static_cast<double>(window));
      z[d] = sd > 0.0 ? (raw[end - 1][d] - mean) / sd : 0.0;
    }
    out.push_back(z);
  }
  return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  const std::size_t n = a.size();
  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    ++cells[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto choose2 = [](std::int64_t x) {
    return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0;
  };
  double sij = 0.0, si = 0.0, sj = 0.0;
  for (const auto& [k, v] : cells) sij += choose2(v);
  for (const auto& [k, v] : ra) si += choose2(v);
  for (const auto& [k, v] : rb) sj += choose2(v);
  const double expected = si * sj / choose2(static_cast<std::int64_t>(n));
  const double maximum = (si + sj) / 2.0;
  return (sij - expected) / (maximum - expected);
}

std::array<int, 3> best_permutation(std::span<const int> truth,
                                    std::span<const int> labels) {
  std::array<std::array<std::int64_t, 3>, 3> agree{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= 0 && truth[i] < 3 && labels[i] >= 0 && labels[i] < 3) {
      ++agree[labels[i]][truth[i]];
    }
  }
  std::array<int, 3> ident{0, 1, 2};
  std::array<int, 3> best = ident;
  std::int64_t best_score = -1;
  std::array<int, 3> perm = ident;
  std::sort(perm.begin(), perm.end());
  do {
    std::int64_t score = 0;
    for (int l = 0; l < 3; ++l) score += agree[l][perm[l]];
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double permuted_agreement(std::span<const int> truth, std::span<const int> labels,
                          const std::array<int, 3>& perm) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (perm[labels[i]] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace oracle
