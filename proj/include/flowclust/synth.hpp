// synth.hpp — synthetic market-by-order stream generator with planted trader
// archetypes, per-bucket mid drift, and a tunable predictive link between one
// archetype's flow and next-bucket drift. Everything downstream is testable
// against the ground truth this emits.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowclust/market_data.hpp"
#include "flowclust/types.hpp"

namespace flowclust {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Archetype codes used in ground-truth labels. Structural events (book
// build-up, mid-move machinery, depth replenishment) carry kBackground.
enum class Archetype : int {
  kBackground = -1,
  kDirectional = 0,
  kOpportunistic = 1,
  kMarketMaking = 2,
};

struct SynthConfig {
  std::uint64_t seed = 42;
  int n_days = 120;
  // Approximate total rows per day, structural events included.
  int events_per_day = 2000;
  Volume lot_size = 1;
  Price tick_size = 100;         // $0.01 in price units
  Price initial_mid = 5000000;   // $500.00
  // Mixture of regular (non-structural) events:
  // directional / opportunistic / market-making.
  std::array<double, 3> archetype_weights{0.45, 0.25, 0.30};
  // Archetype distinctness in feature space; >= 10 means crisply separated,
  // 0 collapses every archetype onto the same behaviour.
  double separation = 10.0;
  // P(next-bucket drift direction == opportunistic flow sign) = (1+kappa)/2.
  double kappa = 0.9;
  SessionConfig session;
  // Skip building the aligned snapshot stream (large-throughput runs).
  bool emit_books = true;
};

struct GroundTruth {
  // One label per emitted message row.
  std::vector<Archetype> archetype;
  // Planted drift direction (+1/-1) per intraday bucket 1..13 (index 0..12).
  std::array<int, 13> bucket_drift{};
  // The opportunistic archetype's target flow sign per bucket; next-bucket
  // drift copies it with probability (1+kappa)/2.
  std::array<int, 13> opportunistic_sign{};
};

struct SynthDay {
  std::vector<MboEvent> events;
  std::vector<BookSnapshot> books;  // row-aligned; empty when !emit_books
  GroundTruth truth;
};

// Deterministic per (config.seed, day_index). The stream replays exactly:
// apply_event reproduces every emitted snapshot. Throws SynthError on an
// infeasible configuration.
SynthDay generate_day(const SynthConfig& config, int day_index);

// True iff replaying `events` through an OrderBook reproduces `books` row by
// row (top-10 comparison).
bool replay_check(std::span<const MboEvent> events,
                  std::span<const BookSnapshot> books);

// File emission: the same message/orderbook pair the real pipeline consumes,
// plus a ground-truth CSV (row index, archetype, bucket drifts per day).
void write_truth_file(const std::string& path, const GroundTruth& truth);
GroundTruth read_truth_file(const std::string& path);

}  // namespace flowclust
