#include "flowclust/flow_signals.hpp"

#include <cmath>

namespace flowclust {

FlowContribution classify_contribution(const MboEvent& event,
                                       std::optional<Price> best_bid,
                                       std::optional<Price> best_ask) {
  FlowContribution c;
  switch (event.type) {
    case EventType::kAdd:
      if (event.side == Side::kBid) {
        // At or improving the best: nothing better was quoted, or the add
        // becomes the best itself (including seeding an empty side).
        if (!best_bid || event.price >= *best_bid) c.term = FlowTerm::kLimitBid;
      } else {
        if (!best_ask || event.price <= *best_ask) c.term = FlowTerm::kLimitAsk;
      }
      break;
    case EventType::kPartialCancel:
    case EventType::kDelete:
      if (event.side == Side::kBid) {
        if (best_bid && event.price == *best_bid) c.term = FlowTerm::kCancelBid;
      } else {
        if (best_ask && event.price == *best_ask) c.term = FlowTerm::kCancelAsk;
      }
      break;
    case EventType::kExecVisible:
      if (event.side == Side::kBid) {
        if (best_bid && event.price == *best_bid) c.term = FlowTerm::kTradeBid;
      } else {
        if (best_ask && event.price == *best_ask) c.term = FlowTerm::kTradeAsk;
      }
      break;
    default:
      break;  // hidden executions, auctions, halts carry no best-level flow
  }
  if (c.term != FlowTerm::kNone) c.size = event.size;
  return c;
}

int bucket_index(TimeNs time, const SessionConfig& session) {
  if (time < session.start_ns() || time > session.end_ns()) {
    throw SignalError("time " + format_time(time) + " outside the session");
  }
  if (time == session.start_ns()) return 1;
  const TimeNs bucket_ns = kBucketSeconds * kNsPerSecond;
  // Buckets are (start+(i-1)*1800, start+i*1800]: right edge inclusive.
  const TimeNs offset = time - session.start_ns();
  return static_cast<int>((offset + bucket_ns - 1) / bucket_ns);
}

std::span<const EventScope> all_event_scopes() {
  static constexpr EventScope kScopes[] = {EventScope::kAll, EventScope::kAdd,
                                           EventScope::kCancel, EventScope::kTrade};
  return kScopes;
}

const char* to_string(EventScope scope) {
  switch (scope) {
    case EventScope::kAll: return "all";
    case EventScope::kAdd: return "add";
    case EventScope::kCancel: return "cancel";
    case EventScope::kTrade: return "trade";
  }
  return "?";
}

const char* to_string(Measure measure) {
  return measure == Measure::kSize ? "size" : "count";
}

EventScope event_scope_from_string(std::string_view s) {
  if (s == "all") return EventScope::kAll;
  if (s == "add") return EventScope::kAdd;
  if (s == "cancel") return EventScope::kCancel;
  if (s == "trade") return EventScope::kTrade;
  throw SignalError("unknown event scope: " + std::string(s));
}

Measure measure_from_string(std::string_view s) {
  if (s == "size") return Measure::kSize;
  if (s == "count") return Measure::kCount;
  throw SignalError("unknown measure: " + std::string(s));
}

int term_sign(FlowTerm term, bool legacy_trade_sign) {
  switch (term) {
    case FlowTerm::kLimitBid: return 1;
    case FlowTerm::kCancelBid: return -1;
    case FlowTerm::kTradeBid: return legacy_trade_sign ? -1 : 1;
    case FlowTerm::kLimitAsk: return -1;
    case FlowTerm::kCancelAsk: return 1;
    case FlowTerm::kTradeAsk: return legacy_trade_sign ? 1 : -1;
    case FlowTerm::kNone: return 0;
  }
  return 0;
}

bool term_in_scope(FlowTerm term, EventScope scope) {
  switch (term) {
    case FlowTerm::kLimitBid:
    case FlowTerm::kLimitAsk:
      return scope == EventScope::kAll || scope == EventScope::kAdd;
    case FlowTerm::kCancelBid:
    case FlowTerm::kCancelAsk:
      return scope == EventScope::kAll || scope == EventScope::kCancel;
    case FlowTerm::kTradeBid:
    case FlowTerm::kTradeAsk:
      return scope == EventScope::kAll || scope == EventScope::kTrade;
    case FlowTerm::kNone:
      return false;
  }
  return false;
}

std::array<std::int64_t, kBucketsPerDay> aggregate_ofi(
    std::span<const LabeledFlow> events, int cluster_scope, EventScope scope,
    Measure measure, bool legacy_trade_sign) {
  std::array<std::int64_t, kBucketsPerDay> ofi{};
  for (const auto& e : events) {
    if (e.cluster < 0) {
      throw SignalError("imbalance aggregation requires labeled events");
    }
    if (e.bucket < 1 || e.bucket > kBucketsPerDay) {
      throw SignalError("bucket index out of range: " + std::to_string(e.bucket));
    }
    if (cluster_scope != kAllClusters && e.cluster != cluster_scope) continue;
    if (!term_in_scope(e.contribution.term, scope)) continue;
    const int sign = term_sign(e.contribution.term, legacy_trade_sign);
    const std::int64_t value =
        measure == Measure::kSize ? e.contribution.size : std::int64_t{1};
    ofi[e.bucket - 1] += sign * value;
  }
  return ofi;
}

std::array<std::int64_t, kBucketsPerDay + 1> compute_boundary_mids(
    std::span<const std::pair<TimeNs, std::int64_t>> mid_path,
    const SessionConfig& session) {
  std::array<std::int64_t, kBucketsPerDay + 1> mids{};
  const TimeNs bucket_ns = kBucketSeconds * kNsPerSecond;
  std::size_t pos = 0;
  std::int64_t last_mid = 0;
  bool have_mid = false;
  for (int b = 0; b <= kBucketsPerDay; ++b) {
    const TimeNs boundary = session.start_ns() + b * bucket_ns;
    while (pos < mid_path.size() && mid_path[pos].first <= boundary) {
      last_mid = mid_path[pos].second;
      have_mid = true;
      ++pos;
    }
    if (!have_mid) {
      throw SignalError("no mid-price observation at or before bucket boundary " +
                        std::to_string(b));
    }
    mids[b] = last_mid;
  }
  return mids;
}

const char* to_string(ReturnKind kind) {
  switch (kind) {
    case ReturnKind::kContemporaneous: return "contemporaneous";
    case ReturnKind::kForwardNextBucket: return "next_bucket";
    case ReturnKind::kForwardToClose: return "to_close";
  }
  return "?";
}

ReturnKind return_kind_from_string(std::string_view s) {
  if (s == "contemporaneous") return ReturnKind::kContemporaneous;
  if (s == "next_bucket") return ReturnKind::kForwardNextBucket;
  if (s == "to_close") return ReturnKind::kForwardToClose;
  throw SignalError("unknown return kind: " + std::string(s));
}

BucketReturns compute_bucket_returns(
    const std::array<std::int64_t, kBucketsPerDay + 1>& boundary_mid2) {
  for (auto m : boundary_mid2) {
    if (m <= 0) throw SignalError("non-positive boundary mid");
  }
  BucketReturns r;
  for (int i = 1; i <= kBucketsPerDay; ++i) {
    r.contemporaneous[i - 1] = std::log(static_cast<double>(boundary_mid2[i]) /
                                        static_cast<double>(boundary_mid2[i - 1]));
  }
  for (int i = 1; i < kBucketsPerDay; ++i) {
    r.forward_next_bucket[i - 1] =
        std::log(static_cast<double>(boundary_mid2[i + 1]) /
                 static_cast<double>(boundary_mid2[i]));
    r.forward_to_close[i - 1] =
        std::log(static_cast<double>(boundary_mid2[kBucketsPerDay]) /
                 static_cast<double>(boundary_mid2[i]));
  }
  return r;
}

}  // namespace flowclust
