// features.hpp — per-order microstructure features and forward-rolling
// z-score normalization.
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "flowclust/market_data.hpp"
#include "flowclust/types.hpp"

namespace flowclust {

constexpr int kFeatureDim = 6;

using FeaturePoint = std::array<double, kFeatureDim>;

// Raw per-order descriptors, all computed against the book state immediately
// before the order's event and the arrival history of earlier events.
struct FeatureVector {
  double level_volume = 0.0;            // standing volume at the order's price, own side
  double secs_since_mid_change = 0.0;   // age of the current mid-price
  double secs_since_first_arrival = 0.0;  // since the price level was first seeded
  double secs_since_prev_arrival = 0.0;   // since the previous arrival at that price
  double same_side_depth = 0.0;         // cumulative own-side volume, best through the order's price
  double opposite_side_depth = 0.0;     // opposite-side volume, best through the mirrored price

  FeaturePoint as_array() const {
    return {level_volume,          secs_since_mid_change, secs_since_first_arrival,
            secs_since_prev_arrival, same_side_depth,     opposite_side_depth};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Feature column names in as_array() order, for CSV headers.
std::span<const char* const> feature_names();

// First/last order-arrival times per (side, price). Entries are cleared when
// the level's standing volume returns to zero, so a later reuse of the price
// counts as a fresh level.
class PriceLevelHistory {
 public:
  struct ArrivalTimes {
    TimeNs first = 0;
    TimeNs last = 0;
  };

  std::optional<ArrivalTimes> lookup(Side side, Price price) const;

  // Feeds one event through the arrival/lifecycle accounting. Adds record an
  // arrival; any event that leaves the level's displayed volume at zero
  // clears the entry. Hidden executions, auction and halt messages are
  // ignored.
  void record(const MboEvent& event, Volume level_volume_after);

  void clear();

 private:
  std::map<Price, ArrivalTimes>& side_map(Side s) {
    return s == Side::kBid ? bid_levels_ : ask_levels_;
  }
  const std::map<Price, ArrivalTimes>& side_map(Side s) const {
    return s == Side::kBid ? bid_levels_ : ask_levels_;
  }
  std::map<Price, ArrivalTimes> bid_levels_;
  std::map<Price, ArrivalTimes> ask_levels_;
};

// Tracks the current mid-price (as 2*mid) and when it last changed.
struct MidState {
  bool seen = false;
  std::int64_t mid_times2 = 0;
  TimeNs last_change = 0;

  // Call with the book state *after* each event.
  void update(const OrderBook& book, TimeNs time);
};

// Computes the six raw features for `event` from the book state before the
// event. Returns nullopt when the book lacks a side (mid undefined), in which
// case the event produces no feature row.
std::optional<FeatureVector> compute_raw_features(const MboEvent& event,
                                                  const OrderBook& book_before,
                                                  const PriceLevelHistory& history,
                                                  const MidState& mid);

// Advances history and mid state by one event; `book_after` is the book with
// the event already applied. Arrival entries are cleared when the level's
// displayed volume reaches zero, so the next arrival re-seeds the level.
void update_history(const MboEvent& event, const OrderBook& book_before,
                    const OrderBook& book_after, PriceLevelHistory& history,
                    MidState& mid);

// Forward-rolling z-score over the trailing `window` values of each feature,
// current value included, population standard deviation. A window with zero
// spread yields z = 0 for that feature. Emits nothing until `window` values
// have been seen; a series of n vectors yields n - window + 1 outputs.
class NormalizationWindow {
 public:
  explicit NormalizationWindow(std::size_t window);

  std::optional<FeaturePoint> push(const FeatureVector& raw);

  std::size_t window() const { return window_; }
  void reset();

 private:
  std::size_t window_;
  std::size_t count_ = 0;
  std::vector<FeaturePoint> ring_;
};

std::vector<FeaturePoint> rolling_normalize(std::span<const FeatureVector> raw,
                                            std::size_t window);

// One day's feature extraction: replays every message row in order, computes
// raw features for the rows selected by `filter_session`, and normalizes.
struct DayFeatures {
  // Indices into the *original* event vector, one per raw feature row.
  std::vector<std::size_t> event_rows;
  std::vector<FeatureVector> raw;
  // normalized[j] belongs to event_rows[j + window - 1].
  std::vector<FeaturePoint> normalized;
  std::size_t skipped_empty_book = 0;

  std::size_t normalized_offset(std::size_t window) const { return window - 1; }
};

DayFeatures compute_day_features(std::span<const MboEvent> events,
                                 const SessionConfig& session,
                                 std::size_t window);

}  // namespace flowclust
