// flow_signals.hpp — order-flow classification into six signed terms,
// intraday bucketing, order-flow imbalance aggregation, and bucket returns.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "flowclust/market_data.hpp"
#include "flowclust/types.hpp"

namespace flowclust {

class SignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kBucketsPerDay = 13;
constexpr std::int64_t kBucketSeconds = 1800;

// The six flow terms: limit-order additions, cancellations and trades, per
// book side.
enum class FlowTerm : std::uint8_t {
  kLimitBid,
  kCancelBid,
  kTradeBid,
  kLimitAsk,
  kCancelAsk,
  kTradeAsk,
  kNone,
};

struct FlowContribution {
  FlowTerm term = FlowTerm::kNone;
  Volume size = 0;  // 0 iff term == kNone

  int count() const { return term == FlowTerm::kNone ? 0 : 1; }
};

// Classifies one event against the pre-event best quotes. Adds at or
// improving the own-side best are limit contributions; cancellations
// (partial or full) exactly at the best are cancel contributions; visible
// executions exactly at the best are trade contributions. Everything else —
// including deeper events, hidden executions, auction and halt messages —
// contributes nothing.
FlowContribution classify_contribution(const MboEvent& event,
                                       std::optional<Price> best_bid,
                                       std::optional<Price> best_ask);

// 1-based half-hour bucket of a session timestamp. Buckets are left-open,
// right-closed; the session-open timestamp itself belongs to bucket 1.
// Throws SignalError outside the session window.
int bucket_index(TimeNs time, const SessionConfig& session);

enum class EventScope : std::uint8_t { kAll, kAdd, kCancel, kTrade };
enum class Measure : std::uint8_t { kSize, kCount };

std::span<const EventScope> all_event_scopes();
const char* to_string(EventScope scope);
const char* to_string(Measure measure);
EventScope event_scope_from_string(std::string_view s);
Measure measure_from_string(std::string_view s);

// Signed weight of a term inside an imbalance. Bid-side additions count
// positive, ask-side negative; cancellations count against their side; trades
// count with the side of the standing order they remove (an execution at the
// bid is positive). `legacy_trade_sign` flips the two trade terms to the
// older aggressor-side convention for sensitivity runs.
int term_sign(FlowTerm term, bool legacy_trade_sign);
bool term_in_scope(FlowTerm term, EventScope scope);

// One classified event carrying its intraday bucket and cluster label.
struct LabeledFlow {
  int bucket = 0;   // 1..13
  int cluster = 0;  // 0-based cluster index
  FlowContribution contribution;
};

constexpr int kAllClusters = -1;

// Sums the signed per-term values into one bucket series. `cluster_scope`
// selects one cluster, or kAllClusters for the union of labeled events.
// Events with a negative cluster label are an error: imbalances are defined
// over labeled flow only.
std::array<std::int64_t, kBucketsPerDay> aggregate_ofi(
    std::span<const LabeledFlow> events, int cluster_scope, EventScope scope,
    Measure measure, bool legacy_trade_sign = false);

// Boundary mid-prices m(t_0)..m(t_13) (as 2*mid) selected previous-tick from
// a time-ordered mid path: the last observation at or before each boundary.
// Throws SignalError when a boundary has no prior observation.
std::array<std::int64_t, kBucketsPerDay + 1> compute_boundary_mids(
    std::span<const std::pair<TimeNs, std::int64_t>> mid_path,
    const SessionConfig& session);

enum class ReturnKind : std::uint8_t {
  kContemporaneous,    // over the bucket itself
  kForwardNextBucket,  // over the following bucket
  kForwardToClose,     // from bucket close to session close
};

const char* to_string(ReturnKind kind);
ReturnKind return_kind_from_string(std::string_view s);

// Log-returns of the boundary mids. contemporaneous[i-1] covers bucket i for
// i = 1..13; the two forward series are defined for buckets 1..12, and the
// to-close return of bucket 12 coincides with its next-bucket return.
struct BucketReturns {
  std::array<double, kBucketsPerDay> contemporaneous{};
  std::array<double, kBucketsPerDay - 1> forward_next_bucket{};
  std::array<double, kBucketsPerDay - 1> forward_to_close{};
};

BucketReturns compute_bucket_returns(
    const std::array<std::int64_t, kBucketsPerDay + 1>& boundary_mid2);

}  // namespace flowclust
