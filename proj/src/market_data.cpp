#include "flowclust/market_data.hpp"

#include <fstream>
#include <sstream>

#include "flowclust/csv.hpp"

namespace flowclust {

namespace {

MboEvent parse_message_row(std::string_view line, std::size_t line_no) {
  const auto fields = csv::split(line);
  if (fields.size() != 6) {
    throw ParseError("expected 6 columns, got " + std::to_string(fields.size()));
  }
  const std::string ctx = "line " + std::to_string(line_no);
  MboEvent e;
  e.time = parse_time(std::string(fields[0]));
  const auto type = csv::parse_int(fields[1], ctx);
  if (type < 1 || type > 7) throw ParseError("unknown event type " + std::to_string(type));
  e.type = static_cast<EventType>(type);
  const auto id = csv::parse_int(fields[2], ctx);
  if (id < 0) throw ParseError("negative order id");
  e.order_id = static_cast<std::uint64_t>(id);
  e.size = csv::parse_int(fields[3], ctx);
  if (e.size <= 0) throw ParseError("non-positive size");
  e.price = csv::parse_int(fields[4], ctx);
  if (e.price <= 0) throw ParseError("non-positive price");
  const auto dir = csv::parse_int(fields[5], ctx);
  if (dir == 1) {
    e.side = Side::kBid;
  } else if (dir == -1) {
    e.side = Side::kAsk;
  } else {
    throw ParseError("direction must be 1 or -1, got " + std::to_string(dir));
  }
  return e;
}

}  // namespace

ParsedMessages parse_message_file(std::istream& in) {
  ParsedMessages out;
  std::string line;
  std::size_t line_no = 0;
  TimeNs prev_time = -1;
  while (csv::get_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MboEvent e;
    try {
      e = parse_message_row(line, line_no);
    } catch (const std::exception& ex) {
      out.issues.push_back({line_no, ex.what()});
      continue;
    }
    if (e.time < prev_time) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": timestamp goes backwards (" + format_time(e.time) +
                       " after " + format_time(prev_time) + ")");
    }
    prev_time = e.time;
    out.events.push_back(e);
  }
  return out;
}

ParsedMessages parse_message_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open message file: " + path);
  return parse_message_file(in);
}

void write_message_file(std::ostream& out, std::span<const MboEvent> events) {
  for (const auto& e : events) {
    out << format_time(e.time) << ',' << static_cast<int>(e.type) << ','
        << e.order_id << ',' << e.size << ',' << e.price << ','
        << (e.side == Side::kBid ? 1 : -1) << '\n';
  }
}

void write_message_file(const std::string& path, std::span<const MboEvent> events) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_message_file(out, events);
}

BookSnapshot parse_orderbook_row(std::string_view line, TimeNs time,
                                 std::size_t line_number) {
  const auto fields = csv::split(line);
  const std::string ctx = "orderbook line " + std::to_string(line_number);
  if (fields.size() != 4 * kBookLevels) {
    throw ParseError(ctx + ": expected " + std::to_string(4 * kBookLevels) +
                     " columns, got " + std::to_string(fields.size()));
  }
  BookSnapshot snap;
  snap.time = time;
  for (int level = 0; level < kBookLevels; ++level) {
    const Price ask_price = csv::parse_int(fields[4 * level + 0], ctx);
    const Volume ask_vol = csv::parse_int(fields[4 * level + 1], ctx);
    const Price bid_price = csv::parse_int(fields[4 * level + 2], ctx);
    const Volume bid_vol = csv::parse_int(fields[4 * level + 3], ctx);
    if (ask_price < kUnusedAskSentinel) snap.asks.push_back({ask_price, ask_vol});
    if (bid_price > 0) snap.bids.push_back({bid_price, bid_vol});
  }
  if (!snap.has_asks() && !snap.has_bids()) {
    throw ParseError(ctx + ": empty book row");
  }
  try {
    snap.validate();
  } catch (const BookError& ex) {
    throw ParseError(ctx + ": " + ex.what());
  }
  return snap;
}

std::vector<BookSnapshot> parse_orderbook_file(std::istream& in,
                                               std::span<const TimeNs> times) {
  std::vector<BookSnapshot> snaps;
  snaps.reserve(times.size());
  std::string line;
  std::size_t line_no = 0;
  while (csv::get_line(in, line)) {
    if (line.empty()) continue;
    ++line_no;
    if (line_no > times.size()) {
      throw ParseError("orderbook file has more rows than the message file");
    }
    snaps.push_back(parse_orderbook_row(line, times[line_no - 1], line_no));
  }
  if (snaps.size() != times.size()) {
    throw ParseError("orderbook file has " + std::to_string(snaps.size()) +
                     " rows, expected " + std::to_string(times.size()));
  }
  return snaps;
}

std::vector<BookSnapshot> parse_orderbook_file(const std::string& path,
                                               std::span<const TimeNs> times) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open orderbook file: " + path);
  return parse_orderbook_file(in, times);
}

std::string format_orderbook_row(const BookSnapshot& snap) {
  std::ostringstream out;
  for (int level = 0; level < kBookLevels; ++level) {
    if (level > 0) out << ',';
    if (level < static_cast<int>(snap.asks.size())) {
      out << snap.asks[level].price << ',' << snap.asks[level].volume;
    } else {
      out << kUnusedAskSentinel << ",0";
    }
    out << ',';
    if (level < static_cast<int>(snap.bids.size())) {
      out << snap.bids[level].price << ',' << snap.bids[level].volume;
    } else {
      out << kUnusedBidSentinel << ",0";
    }
  }
  return out.str();
}

void write_orderbook_file(std::ostream& out, std::span<const BookSnapshot> snaps) {
  for (const auto& snap : snaps) out << format_orderbook_row(snap) << '\n';
}

void write_orderbook_file(const std::string& path,
                          std::span<const BookSnapshot> snaps) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_orderbook_file(out, snaps);
}

std::vector<MboEvent> filter_session(std::span<const MboEvent> events,
                                     const SessionConfig& config) {
  std::vector<MboEvent> kept;
  kept.reserve(events.size());
  for (const auto& e : events) {
    if (e.time < config.start_ns() || e.time > config.end_ns()) continue;
    if (e.type == EventType::kAuction || e.type == EventType::kHalt) continue;
    if (e.type == EventType::kExecHidden && !config.include_hidden_executions) continue;
    kept.push_back(e);
  }
  return kept;
}

void OrderBook::clear() {
  bids_.clear();
  asks_.clear();
}

void OrderBook::apply(const MboEvent& event) {
  switch (event.type) {
    case EventType::kAdd: {
      if (event.side == Side::kBid) {
        if (!asks_.empty() && event.price >= asks_.begin()->first) {
          throw BookError("bid add at " + std::to_string(event.price) +
                          " crosses best ask " + std::to_string(asks_.begin()->first));
        }
        bids_[event.price] += event.size;
      } else {
        if (!bids_.empty() && event.price <= bids_.begin()->first) {
          throw BookError("ask add at " + std::to_string(event.price) +
                          " crosses best bid " + std::to_string(bids_.begin()->first));
        }
        asks_[event.price] += event.size;
      }
      return;
    }
    case EventType::kPartialCancel:
    case EventType::kDelete:
    case EventType::kExecVisible: {
      const auto reduce = [&](auto& side_map) {
        auto it = side_map.find(event.price);
        if (it == side_map.end() || it->second < event.size) {
          throw BookError("removal of " + std::to_string(event.size) + " at " +
                          std::to_string(event.price) + " exceeds resting volume");
        }
        it->second -= event.size;
        if (it->second == 0) side_map.erase(it);
      };
      if (event.side == Side::kBid) {
        reduce(bids_);
      } else {
        reduce(asks_);
      }
      return;
    }
    case EventType::kExecHidden:
    case EventType::kAuction:
    case EventType::kHalt:
      return;  // no visible-book impact
  }
  throw BookError("unhandled event type");
}

Volume OrderBook::volume_at(Side side, Price price) const {
  if (side == Side::kBid) {
    auto it = bids_.find(price);
    return it == bids_.end() ? 0 : it->second;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? 0 : it->second;
}

std::optional<Price> OrderBook::best_price(Side side) const {
  if (side == Side::kBid) {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
  }
  if (asks_.empty()) return std::nullopt;
  return asks_.begin()->first;
}

bool OrderBook::has_both_sides() const { return !bids_.empty() && !asks_.empty(); }

BookSnapshot OrderBook::snapshot(TimeNs time, int levels) const {
  BookSnapshot snap;
  snap.time = time;
  snap.asks.reserve(levels);
  snap.bids.reserve(levels);
  int n = 0;
  for (const auto& [price, vol] : asks_) {
    if (n++ == levels) break;
    snap.asks.push_back({price, vol});
  }
  n = 0;
  for (const auto& [price, vol] : bids_) {
    if (n++ == levels) break;
    snap.bids.push_back({price, vol});
  }
  return snap;
}

std::optional<std::size_t> replay_mismatch(std::span<const MboEvent> events,
                                           std::span<const BookSnapshot> books) {
  if (events.size() != books.size()) return events.size() < books.size() ? events.size() : books.size();
  OrderBook book;
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      book.apply(events[i]);
    } catch (const BookError&) {
      return i;
    }
    if (book.snapshot(events[i].time) != books[i]) return i;
  }
  return std::nullopt;
}

}  // namespace flowclust
