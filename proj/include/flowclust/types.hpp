// types.hpp — core domain types shared across the pipeline.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowclust {

// Time of day in integer nanoseconds since midnight. LOBSTER timestamps are
// decimal seconds with up to nanosecond precision; integer nanos keep parsing,
// arithmetic and re-serialization exact.
using TimeNs = std::int64_t;

// Prices in 1/10000-dollar units as stored in the source files ($500.00 ->
// 5000000). Tick size $0.01 == 100 units. Mid-price is the only half-tick
// quantity and is carried as 2*mid in the same units (see BookSnapshot).
using Price = std::int64_t;

// Shares.
using Volume = std::int64_t;

constexpr TimeNs kNsPerSecond = 1'000'000'000LL;

inline double to_seconds(TimeNs t) { return static_cast<double>(t) * 1e-9; }
inline TimeNs seconds_to_ns(std::int64_t s) { return s * kNsPerSecond; }

enum class Side : std::uint8_t { kBid, kAsk };

inline Side opposite(Side s) { return s == Side::kBid ? Side::kAsk : Side::kBid; }

// LOBSTER event type codes.
enum class EventType : std::uint8_t {
  kAdd = 1,
  kPartialCancel = 2,
  kDelete = 3,
  kExecVisible = 4,
  kExecHidden = 5,
  kAuction = 6,
  kHalt = 7,
};

struct MboEvent {
  TimeNs time = 0;
  EventType type = EventType::kAdd;
  std::uint64_t order_id = 0;
  Volume size = 0;
  Price price = 0;
  Side side = Side::kBid;
};

struct BookLevel {
  Price price = 0;
  Volume volume = 0;
  friend bool operator==(const BookLevel&, const BookLevel&) = default;
};

class BookError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Top-of-book state: up to 10 ask levels ascending and 10 bid levels
// descending. Unoccupied levels are simply absent.
struct BookSnapshot {
  TimeNs time = 0;
  std::vector<BookLevel> asks;  // ascending price
  std::vector<BookLevel> bids;  // descending price

  bool has_asks() const { return !asks.empty(); }
  bool has_bids() const { return !bids.empty(); }
  bool has_both_sides() const { return has_asks() && has_bids(); }

  Price best_ask() const { return asks.front().price; }
  Price best_bid() const { return bids.front().price; }
  Price spread() const { return best_ask() - best_bid(); }

  // 2*mid in 1/10000-dollar units, i.e. the mid-price in 1/20000-dollar
  // units. Exact even when the mid sits on a half tick.
  std::int64_t mid_times2() const { return best_ask() + best_bid(); }

  const std::vector<BookLevel>& side(Side s) const {
    return s == Side::kBid ? bids : asks;
  }

  // Throws BookError when an invariant is broken (crossed book, non-monotone
  // level prices, non-positive volumes).
  void validate() const;

  friend bool operator==(const BookSnapshot&, const BookSnapshot&) = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decimal-seconds timestamp <-> integer nanoseconds. Accepts up to nine
// fractional digits; serialization always emits nine.
TimeNs parse_time(const std::string& text);
std::string format_time(TimeNs t);

}  // namespace flowclust
