#include "flowclust/market_data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

namespace flowclust {
namespace {

MboEvent ev(TimeNs t, EventType type, std::uint64_t id, Volume size, Price price,
            Side side) {
  return {t, type, id, size, price, side};
}

TEST(TimeCodec, ParsesAndFormatsNanosecondPrecision) {
  EXPECT_EQ(parse_time("34200.000000001"), 34200 * kNsPerSecond + 1);
  EXPECT_EQ(parse_time("34200"), 34200 * kNsPerSecond);
  EXPECT_EQ(parse_time("0.5"), kNsPerSecond / 2);
  EXPECT_EQ(format_time(34200 * kNsPerSecond + 1), "34200.000000001");
  EXPECT_EQ(format_time(parse_time("57599.999999999")), "57599.999999999");
}

TEST(TimeCodec, RejectsGarbage) {
  EXPECT_THROW(parse_time("abc"), ParseError);
  EXPECT_THROW(parse_time("1.0000000001"), ParseError);  // ten fractional digits
  EXPECT_THROW(parse_time(""), ParseError);
}

TEST(MessageParser, ReadsValidRowsAndReportsBadOnes) {
  std::istringstream in(
      "34200.000000001,1,11,100,5000000,1\n"
      "34200.000000001,4,11,40,5000000,1\n"      // equal timestamp is fine
      "not-a-row\n"                              // malformed: skipped
      "34201.5,3,12,60,5000100,-1\n"
      "34202,9,13,60,5000100,-1\n");             // unknown type: skipped
  const auto parsed = parse_message_file(in);
  ASSERT_EQ(parsed.events.size(), 3u);
  ASSERT_EQ(parsed.issues.size(), 2u);
  EXPECT_EQ(parsed.issues[0].line_number, 3u);
  EXPECT_EQ(parsed.issues[1].line_number, 5u);
  EXPECT_EQ(parsed.events[0].side, Side::kBid);
  EXPECT_EQ(parsed.events[2].side, Side::kAsk);
  EXPECT_EQ(parsed.events[2].type, EventType::kDelete);
  EXPECT_EQ(parsed.events[2].time, parse_time("34201.5"));
}

TEST(MessageParser, BackwardsTimestampIsFatal) {
  std::istringstream in(
      "34201,1,11,100,5000000,1\n"
      "34200,1,12,100,5000000,1\n");
  EXPECT_THROW(parse_message_file(in), ParseError);
}

TEST(MessageParser, WriteReadRoundTripIsByteStable) {
  std::vector<MboEvent> events{
      ev(parse_time("34200.000000001"), EventType::kAdd, 7, 100, 5000000, Side::kBid),
      ev(parse_time("34205.25"), EventType::kExecVisible, 7, 30, 5000000, Side::kBid),
      ev(parse_time("40000"), EventType::kDelete, 9, 10, 5001000, Side::kAsk),
  };
  std::ostringstream first;
  write_message_file(first, events);
  std::istringstream in(first.str());
  const auto parsed = parse_message_file(in);
  ASSERT_TRUE(parsed.issues.empty());
  std::ostringstream second;
  write_message_file(second, parsed.events);
  EXPECT_EQ(first.str(), second.str());
}

TEST(OrderbookRow, SentinelsMarkAbsentLevels) {
  BookSnapshot snap;
  snap.time = 1;
  snap.asks = {{5000100, 10}};
  snap.bids = {{5000000, 20}, {4999900, 5}};
  const auto line = format_orderbook_row(snap);
  const auto parsed = parse_orderbook_row(line, snap.time);
  EXPECT_EQ(parsed, snap);
  // 10 levels x 4 columns
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 39);
}

TEST(OrderbookRow, AllSentinelRowIsAnError) {
  std::string line;
  for (int level = 0; level < kBookLevels; ++level) {
    if (level > 0) line += ',';
    line += "9999999999,0,-9999999999,0";
  }
  EXPECT_THROW(parse_orderbook_row(line, 0), ParseError);
}

TEST(OrderbookRow, CrossedBookIsAnError) {
  BookSnapshot snap;
  snap.asks = {{5000000, 10}};
  snap.bids = {{5000100, 10}};
  const auto line = format_orderbook_row(snap);
  EXPECT_THROW(parse_orderbook_row(line, 0), ParseError);
}

TEST(OrderbookRow, WrongColumnCountIsAnError) {
  EXPECT_THROW(parse_orderbook_row("1,2,3", 0), ParseError);
}

TEST(OrderbookFile, RowCountMustMatchMessageTimes) {
  BookSnapshot snap;
  snap.asks = {{5000100, 10}};
  snap.bids = {{5000000, 20}};
  std::ostringstream out;
  write_orderbook_file(out, std::vector<BookSnapshot>{snap});
  const std::vector<TimeNs> too_many{1, 2};
  std::istringstream in(out.str());
  EXPECT_THROW(parse_orderbook_file(in, too_many), ParseError);
}

TEST(SessionFilter, ClosedWindowAndTypeRules) {
  SessionConfig session;
  const TimeNs t0 = session.start_ns();
  const TimeNs t1 = session.end_ns();
  std::vector<MboEvent> events{
      ev(t0 - 1, EventType::kAdd, 1, 1, 100, Side::kBid),       // before open
      ev(t0, EventType::kAdd, 2, 1, 100, Side::kBid),           // at open: kept
      ev(t0 + 1, EventType::kAuction, 3, 1, 100, Side::kBid),   // dropped
      ev(t0 + 2, EventType::kHalt, 4, 1, 100, Side::kBid),      // dropped
      ev(t0 + 3, EventType::kExecHidden, 5, 1, 100, Side::kBid),// dropped by default
      ev(t1, EventType::kDelete, 6, 1, 100, Side::kBid),        // at close: kept
      ev(t1 + 1, EventType::kAdd, 7, 1, 100, Side::kBid),       // after close
  };
  auto kept = filter_session(events, session);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].order_id, 2u);
  EXPECT_EQ(kept[1].order_id, 6u);

  session.include_hidden_executions = true;
  kept = filter_session(events, session);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[1].type, EventType::kExecHidden);
}

TEST(OrderBookTest, TracksLevelsThroughAddCancelExec) {
  OrderBook book;
  book.apply(ev(1, EventType::kAdd, 1, 100, 5000000, Side::kBid));
  book.apply(ev(2, EventType::kAdd, 2, 50, 5000200, Side::kAsk));
  book.apply(ev(3, EventType::kAdd, 3, 25, 5000000, Side::kBid));
  EXPECT_EQ(book.volume_at(Side::kBid, 5000000), 125);
  ASSERT_TRUE(book.best_price(Side::kBid));
  EXPECT_EQ(*book.best_price(Side::kBid), 5000000);

  book.apply(ev(4, EventType::kPartialCancel, 1, 30, 5000000, Side::kBid));
  EXPECT_EQ(book.volume_at(Side::kBid, 5000000), 95);
  book.apply(ev(5, EventType::kExecVisible, 1, 95, 5000000, Side::kBid));
  EXPECT_EQ(book.volume_at(Side::kBid, 5000000), 0);
  EXPECT_FALSE(book.best_price(Side::kBid).has_value());
  EXPECT_FALSE(book.has_both_sides());
}

TEST(OrderBookTest, InvisibleTypesLeaveTheBookAlone) {
  OrderBook book;
  book.apply(ev(1, EventType::kAdd, 1, 100, 5000000, Side::kBid));
  const auto before = book.snapshot(1);
  book.apply(ev(2, EventType::kExecHidden, 9, 50, 4999000, Side::kBid));
  book.apply(ev(3, EventType::kAuction, 9, 50, 4999000, Side::kBid));
  book.apply(ev(4, EventType::kHalt, 9, 50, 4999000, Side::kBid));
  auto after = book.snapshot(1);
  EXPECT_EQ(before, after);
}

TEST(OrderBookTest, OverRemovalAndCrossingAddsThrow) {
  OrderBook book;
  book.apply(ev(1, EventType::kAdd, 1, 100, 5000000, Side::kBid));
  book.apply(ev(2, EventType::kAdd, 2, 100, 5000200, Side::kAsk));
  EXPECT_THROW(book.apply(ev(3, EventType::kDelete, 1, 101, 5000000, Side::kBid)),
               BookError);
  EXPECT_THROW(book.apply(ev(4, EventType::kExecVisible, 1, 1, 4000000, Side::kBid)),
               BookError);
  EXPECT_THROW(book.apply(ev(5, EventType::kAdd, 3, 10, 5000200, Side::kBid)),
               BookError);
  EXPECT_THROW(book.apply(ev(6, EventType::kAdd, 4, 10, 5000000, Side::kAsk)),
               BookError);
}

TEST(OrderBookTest, SnapshotReturnsTopLevelsInOrder) {
  OrderBook book;
  for (int i = 0; i < 12; ++i) {
    book.apply(ev(i + 1, EventType::kAdd, i + 1, 10 + i, 5000000 - 100 * i, Side::kBid));
    book.apply(ev(i + 1, EventType::kAdd, 100 + i, 20 + i, 5000200 + 100 * i, Side::kAsk));
  }
  const auto snap = book.snapshot(99);
  ASSERT_EQ(snap.bids.size(), static_cast<std::size_t>(kBookLevels));
  ASSERT_EQ(snap.asks.size(), static_cast<std::size_t>(kBookLevels));
  EXPECT_EQ(snap.time, 99);
  EXPECT_EQ(snap.best_bid(), 5000000);
  EXPECT_EQ(snap.best_ask(), 5000200);
  for (std::size_t i = 1; i < snap.bids.size(); ++i) {
    EXPECT_LT(snap.bids[i].price, snap.bids[i - 1].price);
  }
  for (std::size_t i = 1; i < snap.asks.size(); ++i) {
    EXPECT_GT(snap.asks[i].price, snap.asks[i - 1].price);
  }
  EXPECT_EQ(snap.mid_times2(), 5000000 + 5000200);
  const auto three = book.snapshot(99, 3);
  EXPECT_EQ(three.bids.size(), 3u);
  EXPECT_EQ(three.asks.size(), 3u);
}

TEST(ReplayCheck, DetectsTheFirstDivergingRow) {
  std::vector<MboEvent> events{
      ev(1, EventType::kAdd, 1, 100, 5000000, Side::kBid),
      ev(2, EventType::kAdd, 2, 50, 5000200, Side::kAsk),
      ev(3, EventType::kExecVisible, 1, 40, 5000000, Side::kBid),
  };
  OrderBook book;
  std::vector<BookSnapshot> books;
  for (const auto& e : events) {
    book.apply(e);
    books.push_back(book.snapshot(e.time));
  }
  EXPECT_FALSE(replay_mismatch(events, books).has_value());
  books[2].bids[0].volume += 1;
  const auto bad = replay_mismatch(events, books);
  ASSERT_TRUE(bad.has_value());
  EXPECT_EQ(*bad, 2u);
}

TEST(SnapshotValidate, RejectsBrokenInvariants) {
  BookSnapshot snap;
  snap.asks = {{5000200, 10}};
  snap.bids = {{5000000, 10}};
  EXPECT_NO_THROW(snap.validate());
  snap.bids[0].volume = 0;
  EXPECT_THROW(snap.validate(), BookError);
  snap.bids[0].volume = 10;
  snap.asks.push_back({5000100, 5});  // not ascending
  EXPECT_THROW(snap.validate(), BookError);
}

}  // namespace
}  // namespace flowclust
