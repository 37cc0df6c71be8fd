// market_data.hpp — LOBSTER-style message/orderbook file IO, session
// filtering, and the depth-tracking order book used for replay.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowclust/types.hpp"

namespace flowclust {

// Continuous-trading session expressed in seconds since midnight. The
// interval is closed on both ends.
struct SessionConfig {
  std::int64_t start_seconds = 34200;  // 09:30
  std::int64_t end_seconds = 57600;    // 16:00
  bool include_hidden_executions = false;

  TimeNs start_ns() const { return seconds_to_ns(start_seconds); }
  TimeNs end_ns() const { return seconds_to_ns(end_seconds); }
  std::int64_t length_seconds() const { return end_seconds - start_seconds; }
};

struct RowIssue {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

struct ParsedMessages {
  std::vector<MboEvent> events;
  std::vector<RowIssue> issues;  // skipped malformed rows, in file order
};

// Parses a message file: time, type, order id, size, price, direction.
// Malformed rows are reported in `issues` and skipped; a timestamp that goes
// backwards is a hard ParseError (the file is unusable for replay).
ParsedMessages parse_message_file(std::istream& in);
ParsedMessages parse_message_file(const std::string& path);

void write_message_file(std::ostream& out, std::span<const MboEvent> events);
void write_message_file(const std::string& path, std::span<const MboEvent> events);

// Orderbook rows hold `levels` price/volume pairs per side in the LOBSTER
// column order ask1,asksz1,bid1,bidsz1,ask2,... Sentinel prices mark unused
// ask (>= kUnusedAskSentinel) and bid (<= kUnusedBidSentinel) slots.
constexpr Price kUnusedAskSentinel = 9999999999LL;
constexpr Price kUnusedBidSentinel = -9999999999LL;
constexpr int kBookLevels = 10;

BookSnapshot parse_orderbook_row(std::string_view line, TimeNs time,
                                 std::size_t line_number = 0);

// Row-aligned with `times` (one snapshot per message row). Throws ParseError
// on count mismatch or malformed rows.
std::vector<BookSnapshot> parse_orderbook_file(std::istream& in,
                                               std::span<const TimeNs> times);
std::vector<BookSnapshot> parse_orderbook_file(const std::string& path,
                                               std::span<const TimeNs> times);

std::string format_orderbook_row(const BookSnapshot& snap);
void write_orderbook_file(std::ostream& out, std::span<const BookSnapshot> snaps);
void write_orderbook_file(const std::string& path, std::span<const BookSnapshot> snaps);

// Keeps events inside the closed session window, drops auction/halt messages,
// and (by default) hidden executions.
std::vector<MboEvent> filter_session(std::span<const MboEvent> events,
                                     const SessionConfig& config);

// Full-depth order book maintained from the event flow. Tracks per-price
// aggregate volume only: LOBSTER events carry enough information to keep
// level volumes exact without per-order state.
class OrderBook {
 public:
  void clear();

  // Applies one event. Hidden executions, auction and halt messages leave the
  // book untouched. Throws BookError on inconsistencies: cancel/execution
  // exceeding the standing volume, or an add that crosses the opposite side.
  void apply(const MboEvent& event);

  Volume volume_at(Side side, Price price) const;
  std::optional<Price> best_price(Side side) const;
  bool has_both_sides() const;

  // Top `levels` per side as a snapshot stamped with `time`.
  BookSnapshot snapshot(TimeNs time, int levels = kBookLevels) const;

  // For depth sums: bids keyed descending, asks ascending.
  const std::map<Price, Volume, std::greater<Price>>& bids() const { return bids_; }
  const std::map<Price, Volume>& asks() const { return asks_; }

 private:
  std::map<Price, Volume, std::greater<Price>> bids_;
  std::map<Price, Volume> asks_;
};

// Replays `events` through an OrderBook and compares each resulting top-10
// snapshot against the corresponding row. Returns the index of the first
// mismatching row, or nullopt when everything matches.
std::optional<std::size_t> replay_mismatch(std::span<const MboEvent> events,
                                           std::span<const BookSnapshot> books);

}  // namespace flowclust
