#include "flowclust/features.hpp"

#include <cmath>
#include <stdexcept>

namespace flowclust {

namespace {
constexpr const char* kFeatureNames[kFeatureDim] = {
    "level_volume",        "secs_since_mid_change", "secs_since_first_arrival",
    "secs_since_prev_arrival", "same_side_depth",   "opposite_side_depth"};
}

std::span<const char* const> feature_names() {
  return {kFeatureNames, kFeatureDim};
}

std::optional<PriceLevelHistory::ArrivalTimes> PriceLevelHistory::lookup(
    Side side, Price price) const {
  const auto& m = side_map(side);
  auto it = m.find(price);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

void PriceLevelHistory::record(const MboEvent& event, Volume level_volume_after) {
  switch (event.type) {
    case EventType::kAdd: {
      auto& m = side_map(event.side);
      auto [it, inserted] = m.try_emplace(event.price, ArrivalTimes{event.time, event.time});
      if (!inserted) it->second.last = event.time;
      break;
    }
    case EventType::kPartialCancel:
    case EventType::kDelete:
    case EventType::kExecVisible:
      break;
    default:
      return;  // hidden executions, auctions, halts: no lifecycle impact
  }
  if (level_volume_after == 0) side_map(event.side).erase(event.price);
}

void PriceLevelHistory::clear() {
  bid_levels_.clear();
  ask_levels_.clear();
}

void MidState::update(const OrderBook& book, TimeNs time) {
  if (!book.has_both_sides()) return;
  const std::int64_t m2 = *book.best_price(Side::kAsk) + *book.best_price(Side::kBid);
  if (!seen || m2 != mid_times2) {
    seen = true;
    mid_times2 = m2;
    last_change = time;
  }
}

std::optional<FeatureVector> compute_raw_features(const MboEvent& event,
                                                  const OrderBook& book_before,
                                                  const PriceLevelHistory& history,
                                                  const MidState& mid) {
  if (!book_before.has_both_sides() || !mid.seen) return std::nullopt;

  FeatureVector f;
  f.level_volume = static_cast<double>(book_before.volume_at(event.side, event.price));
  f.secs_since_mid_change = to_seconds(event.time - mid.last_change);

  if (const auto times = history.lookup(event.side, event.price)) {
    f.secs_since_first_arrival = to_seconds(event.time - times->first);
    f.secs_since_prev_arrival = to_seconds(event.time - times->last);
  }

  // Same-side depth: cumulative volume from the best through the order's
  // price. An order improving its own best has nothing ahead of it: 0.
  Volume same = 0;
  if (event.side == Side::kBid) {
    for (const auto& [price, vol] : book_before.bids()) {
      if (price < event.price) break;
      same += vol;
    }
  } else {
    for (const auto& [price, vol] : book_before.asks()) {
      if (price > event.price) break;
      same += vol;
    }
  }
  f.same_side_depth = static_cast<double>(same);

  // Opposite-side depth: from the opposite best through the price mirrored
  // about the mid. 2*mid - p is exact in integer price units.
  const std::int64_t mid2 =
      *book_before.best_price(Side::kAsk) + *book_before.best_price(Side::kBid);
  const Price mirrored = mid2 - event.price;
  Volume opposite = 0;
  if (event.side == Side::kBid) {
    for (const auto& [price, vol] : book_before.asks()) {
      if (price > mirrored) break;
      opposite += vol;
    }
  } else {
    for (const auto& [price, vol] : book_before.bids()) {
      if (price < mirrored) break;
      opposite += vol;
    }
  }
  f.opposite_side_depth = static_cast<double>(opposite);
  return f;
}

void update_history(const MboEvent& event, const OrderBook& /*book_before*/,
                    const OrderBook& book_after, PriceLevelHistory& history,
                    MidState& mid) {
  history.record(event, book_after.volume_at(event.side, event.price));
  mid.update(book_after, event.time);
}

NormalizationWindow::NormalizationWindow(std::size_t window) : window_(window) {
  if (window_ == 0) throw std::invalid_argument("normalization window must be positive");
  ring_.resize(window_);
}

std::optional<FeaturePoint> NormalizationWindow::push(const FeatureVector& raw) {
  const FeaturePoint current = raw.as_array();
  ring_[count_ % window_] = current;
  ++count_;
  if (count_ < window_) return std::nullopt;

  FeaturePoint z{};
  const double w = static_cast<double>(window_);
  for (int d = 0; d < kFeatureDim; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < window_; ++i) sum += ring_[i][d];
    const double mean = sum / w;
    double sq = 0.0;
    for (std::size_t i = 0; i < window_; ++i) {
      const double diff = ring_[i][d] - mean;
      sq += diff * diff;
    }
    const double std_dev = std::sqrt(sq / w);  // population divisor
    z[d] = std_dev > 0.0 ? (current[d] - mean) / std_dev : 0.0;
  }
  return z;
}

void NormalizationWindow::reset() {
  count_ = 0;
  for (auto& p : ring_) p = FeaturePoint{};
}

std::vector<FeaturePoint> rolling_normalize(std::span<const FeatureVector> raw,
                                            std::size_t window) {
  std::vector<FeaturePoint> out;
  if (raw.size() < window) return out;
  out.reserve(raw.size() - window + 1);
  NormalizationWindow norm(window);
  for (const auto& f : raw) {
    if (auto z = norm.push(f)) out.push_back(*z);
  }
  return out;
}

DayFeatures compute_day_features(std::span<const MboEvent> events,
                                 const SessionConfig& session,
                                 std::size_t window) {
  DayFeatures day;
  OrderBook book;
  PriceLevelHistory history;
  MidState mid;

  const auto featurizable = [&](const MboEvent& e) {
    if (e.time < session.start_ns() || e.time > session.end_ns()) return false;
    if (e.type == EventType::kAuction || e.type == EventType::kHalt) return false;
    if (e.type == EventType::kExecHidden && !session.include_hidden_executions)
      return false;
    return true;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (featurizable(e)) {
      if (auto f = compute_raw_features(e, book, history, mid)) {
        day.event_rows.push_back(i);
        day.raw.push_back(*f);
      } else {
        ++day.skipped_empty_book;
      }
    }
    book.apply(e);
    history.record(e, book.volume_at(e.side, e.price));
    mid.update(book, e.time);
  }
  day.normalized = rolling_normalize(day.raw, window);
  return day;
}

}  // namespace flowclust
