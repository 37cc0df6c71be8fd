#include "flowclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <utility>

#include "flowclust/csv.hpp"
#include "flowclust/rng.hpp"

namespace flowclust {

namespace {

// Maintained depth per side; snapshots expose the top 10 of these.
constexpr int kSidesLevels = 12;
constexpr std::int64_t kBucketLenSeconds = 1800;
constexpr int kBuckets = 13;

enum class PlanKind {
  kBuild,
  kSplitRemove,   // clear the best level: alternating exec/delete halves
  kRelocAdd,      // thin re-seed at the old mid, completing a 1-tick move
  kGapFill,       // deep add restoring price contiguity behind the new best
  kReplenish,     // fresh tail level so depth stays constant
  kTrim,          // delete the deepest level on the side that gained one
  kDir,
  kBurstJumbo,    // deep volume one tick behind best, about to be promoted
  kBurstSplit,    // clears the best so the jumbo level becomes the best
  kBurstMain,     // the labelled opportunistic adds on the promoted level
  kBurstRestore,  // thin re-seed closing the spread the burst opened
  kMm,
};

struct Plan {
  TimeNs t = 0;
  int seq = 0;
  PlanKind kind = PlanKind::kBuild;
  Side side = Side::kBid;
  Volume size = 0;
  Price price = 0;       // resolved at plan time where the geometry allows
  int depth = 0;         // market-making placement, ticks behind the best
  bool cascade = false;  // split keeps clearing while the promoted level is fat
  int burst_id = -1;
  int bucket = 0;
  int slot = -1;  // >=0: margin top-up burst, skipped once the margin is met
};

// Geometric interpolation between a "near" band (full separation) and a "far"
// band (separation collapsed); two draws regardless of weight keeps the RNG
// stream layout fixed.
double lerp_band(Rng& rng, double near_lo, double near_hi, double far_lo,
                 double far_hi, double w) {
  const double a = std::log(rng.uniform(near_lo, near_hi));
  const double b = std::log(rng.uniform(far_lo, far_hi));
  return std::exp(w * a + (1.0 - w) * b);
}

TimeNs ns_from(double seconds) {
  return static_cast<TimeNs>(std::llround(seconds * 1e9));
}

}  // namespace

SynthDay generate_day(const SynthConfig& config, int day_index) {
  if (day_index < 0) throw SynthError("negative day index");
  if (config.kappa < 0.0 || config.kappa > 1.0) {
    throw SynthError("kappa must lie in [0, 1]");
  }
  double weight_sum = 0.0;
  for (double w : config.archetype_weights) {
    if (w < 0.0) throw SynthError("archetype weights must be non-negative");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw SynthError("archetype weights must sum to 1");
  }
  if (config.separation < 0.0) throw SynthError("separation must be >= 0");
  if (config.tick_size <= 0 || config.lot_size <= 0) {
    throw SynthError("tick and lot sizes must be positive");
  }
  if (config.events_per_day < 400) {
    throw SynthError("events_per_day below the structural minimum of 400");
  }
  if (config.session.length_seconds() != kBuckets * kBucketLenSeconds) {
    throw SynthError("session length must cover exactly 13 half-hour buckets");
  }
  // Event-budget scaling relative to the ~2000-row reference day. The regular
  // (labelled) mix follows archetype_weights over a per-bucket base of ~78.
  const double f = static_cast<double>(config.events_per_day) / 2000.0;
  const Price tick = config.tick_size;
  // Net drift per bucket tops out around lround(4f)+1 ticks; the balanced
  // up/down pairs cancel.
  const Price drift_ticks =
      static_cast<Price>(kBuckets * (std::lround(4.0 * f) + 2));
  if (config.initial_mid <= tick * (kSidesLevels + drift_ticks)) {
    throw SynthError("initial mid too small for the book depth and drift range");
  }

  Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(day_index)));

  // Per-bucket opportunistic flow signs and the drift they predict.
  std::array<int, kBuckets> opp_sign{};
  std::array<int, kBuckets> drift{};
  for (int b = 0; b < kBuckets; ++b) opp_sign[b] = rng.bernoulli(0.5) ? 1 : -1;
  drift[0] = rng.bernoulli(0.5) ? 1 : -1;
  for (int b = 1; b < kBuckets; ++b) {
    drift[b] = rng.bernoulli((1.0 + config.kappa) / 2.0) ? opp_sign[b - 1]
                                                         : -opp_sign[b - 1];
  }

  const double regular_base = 78.0 * f;
  const int n_pairs = std::max<int>(1, std::lround(2.0 * f));
  const int n_dir = std::max<int>(
      2, std::lround(regular_base * config.archetype_weights[0]));
  const int n_bursts = std::max<int>(
      1, std::lround(regular_base * config.archetype_weights[1] / 5.0));
  const int n_mm = std::max<int>(
      2, std::lround(regular_base * config.archetype_weights[2]));
  const double sep_w = std::clamp(config.separation / 10.0, 0.0, 1.0);
  const int margin_count = std::max<int>(2, std::lround(6.0 * f));
  const int n_slots = n_bursts + (margin_count + 4) / 5 + 1;

  const TimeNs t0 = config.session.start_ns();
  const Volume lot = config.lot_size;
  std::vector<Plan> plans;
  int seq = 0;
  auto push = [&](Plan p) {
    p.seq = seq++;
    plans.push_back(p);
  };

  // Opening book, every row stamped exactly at the session open so bucket
  // boundary t_0 has a mid observation. Both best levels share one volume so
  // the bucket-1 flow starts balanced; 11 deeper levels per side follow.
  const Volume v0 = (20 + static_cast<Volume>(rng.uniform_int(11))) * lot;
  const Price bid0 = config.initial_mid - tick;
  const Price ask0 = config.initial_mid + tick;
  push({.t = t0, .kind = PlanKind::kBuild, .side = Side::kBid, .size = v0, .price = bid0});
  push({.t = t0, .kind = PlanKind::kBuild, .side = Side::kAsk, .size = v0, .price = ask0});
  for (int k = 1; k < kSidesLevels; ++k) {
    const Volume vb = (20 + static_cast<Volume>(rng.uniform_int(11))) * lot;
    const Volume va = (20 + static_cast<Volume>(rng.uniform_int(11))) * lot;
    push({.t = t0, .kind = PlanKind::kBuild, .side = Side::kBid, .size = vb,
          .price = bid0 - tick * k});
    push({.t = t0, .kind = PlanKind::kBuild, .side = Side::kAsk, .size = va,
          .price = ask0 + tick * k});
  }

  int next_burst_id = 0;
  // One burst: promote a deep jumbo to the best, stack the labelled adds on
  // it, then close the spread again. Emitted through a shared lambda so the
  // margin top-up bursts at the bucket tail are byte-identical in shape.
  auto plan_burst = [&](TimeNs at, TimeNs cap, Side side, int bucket, int slot) {
    const int id = next_burst_id++;
    TimeNs t = std::min(at, cap);
    const Volume jumbo = static_cast<Volume>(
        std::llround(lerp_band(rng, 200.0, 240.0, 20.0, 60.0, sep_w))) * lot;
    push({.t = t, .kind = PlanKind::kBurstJumbo, .side = side, .size = jumbo,
          .burst_id = id, .bucket = bucket, .slot = slot});
    t += ns_from(rng.uniform(0.002, 0.004));
    push({.t = t, .kind = PlanKind::kBurstSplit, .side = side, .burst_id = id,
          .bucket = bucket, .slot = slot});
    for (int e = 0; e < 5; ++e) {
      t += ns_from(rng.uniform(0.020, 0.080));
      const Volume sz = static_cast<Volume>(
          std::llround(lerp_band(rng, 10.0, 14.99, 1.0, 30.0, sep_w))) * lot;
      push({.t = t, .kind = PlanKind::kBurstMain, .side = side, .size = sz,
            .burst_id = id, .bucket = bucket, .slot = slot});
    }
    t += ns_from(rng.uniform(0.020, 0.080));
    push({.t = t, .kind = PlanKind::kBurstRestore, .side = side,
          .size = 2 * lot, .burst_id = id, .bucket = bucket, .slot = slot});
  };

  int net_ticks = 0;  // cumulative mid displacement, tracked so move prices
                      // are known at plan time and stay on the one-tick grid
  for (int b = 0; b < kBuckets; ++b) {
    const TimeNs bucket_start = t0 + seconds_to_ns(b * kBucketLenSeconds);
    const TimeNs bucket_end = bucket_start + seconds_to_ns(kBucketLenSeconds);

    // Mid-moves: balanced up/down pairs plus net moves with the drift. Each
    // move relocates both best levels; the removals alternate execution and
    // delete halves whose imbalance terms carry opposite signs, so structural
    // flow nets to at most one lot per move however the rows cluster.
    int n_drift = std::max<int>(1, std::lround(4.0 * f)) +
                  static_cast<int>(rng.uniform_int(3)) - 1;
    n_drift = std::max(1, n_drift);
    std::vector<int> moves;
    for (int p = 0; p < n_pairs; ++p) {
      moves.push_back(1);
      moves.push_back(-1);
    }
    for (int j = 0; j < n_drift; ++j) moves.push_back(drift[b]);
    rng.shuffle(moves);

    const int n_moves = static_cast<int>(moves.size());
    const double usable = kBucketLenSeconds - 45.0;  // [start+5, end-40]
    const double spacing = usable / n_moves;
    std::vector<TimeNs> move_times(n_moves);
    for (int i = 0; i < n_moves; ++i) {
      const double at = 5.0 + (i + 0.5) * spacing + rng.uniform(-0.3, 0.3) * spacing;
      move_times[i] = bucket_start + ns_from(at);
    }

    for (int i = 0; i < n_moves; ++i) {
      const int dir = moves[i];
      const Side victim = dir > 0 ? Side::kAsk : Side::kBid;
      const Side gained = dir > 0 ? Side::kBid : Side::kAsk;
      const Price reloc = config.initial_mid + tick * net_ticks;  // old mid
      net_ticks += dir;
      TimeNs t = move_times[i];
      auto step = [&] { return t += ns_from(rng.uniform(0.0015, 0.0030)); };
      // Moves cascade: besides the best, they also clear any burst leftover
      // they would otherwise promote, so labelled adds later never land on
      // stale fat levels by accident.
      push({.t = t, .kind = PlanKind::kSplitRemove, .side = victim,
            .cascade = true});
      push({.t = step(), .kind = PlanKind::kSplitRemove, .side = gained,
            .cascade = true});
      push({.t = step(), .kind = PlanKind::kRelocAdd, .side = gained,
            .size = 2 * lot, .price = reloc});
      push({.t = step(), .kind = PlanKind::kGapFill, .side = gained,
            .size = (20 + static_cast<Volume>(rng.uniform_int(11))) * lot,
            .price = gained == Side::kBid ? reloc - tick : reloc + tick});
      push({.t = step(), .kind = PlanKind::kReplenish, .side = victim,
            .size = (20 + static_cast<Volume>(rng.uniform_int(11))) * lot});
      push({.t = step(), .kind = PlanKind::kTrim, .side = gained});
    }

    const TimeNs regular_cap = bucket_end - seconds_to_ns(35);
    // Directional adds chase a just-completed move on its freshly relocated
    // side, so the level they hit is milliseconds old. The drift tilt comes
    // from which move they chase, not from overriding the side.
    std::vector<int> drift_moves, counter_moves;
    for (int i = 0; i < n_moves; ++i) {
      (moves[i] == drift[b] ? drift_moves : counter_moves).push_back(i);
    }
    for (int j = 0; j < n_dir; ++j) {
      const bool with_drift = rng.bernoulli(0.5 + 0.4 * sep_w);
      const auto& pool = with_drift ? drift_moves : counter_moves;
      const int m = pool[static_cast<std::size_t>(j) % pool.size()];
      const double offset = lerp_band(rng, 0.020, 0.080, 10.0, 100.0, sep_w);
      const TimeNs t = std::min(move_times[m] + ns_from(offset), regular_cap);
      const Volume sz = static_cast<Volume>(
          std::llround(lerp_band(rng, 8.0, 12.99, 1.0, 30.0, sep_w))) * lot;
      push({.t = t, .kind = PlanKind::kDir,
            .side = moves[m] > 0 ? Side::kBid : Side::kAsk,
            .size = sz});
    }

    const Side opp_side = opp_sign[b] > 0 ? Side::kBid : Side::kAsk;
    for (int u = 0; u < n_bursts; ++u) {
      const int m = (u * n_moves) / n_bursts % n_moves;
      const double offset = lerp_band(rng, 5.0, 12.0, 10.0, 150.0, sep_w);
      const bool with_sign = rng.bernoulli(0.5 + 0.35 * sep_w);
      plan_burst(move_times[m] + ns_from(offset), regular_cap,
                 with_sign ? opp_side : opposite(opp_side), b, -1);
    }

    for (int j = 0; j < n_mm; ++j) {
      const int m = j % n_moves;
      const double offset = lerp_band(rng, 0.8, 1.6, 10.0, 200.0, sep_w);
      const TimeNs t = std::min(move_times[m] + ns_from(offset), regular_cap);
      const int depth = static_cast<int>(
          lerp_band(rng, 7.0, 10.99, 0.2, 2.99, sep_w));
      push({.t = t, .kind = PlanKind::kMm,
            .side = rng.bernoulli(0.5) ? Side::kBid : Side::kAsk,
            .size = (1 + static_cast<Volume>(rng.uniform_int(3))) * lot,
            .depth = depth});
    }

    // Pre-planned margin top-ups near the bucket tail; materialization stops
    // consuming them once the labelled flow clears the planted-sign margin.
    for (int k = 0; k < n_slots; ++k) {
      const TimeNs at = bucket_end - seconds_to_ns(30) + seconds_to_ns(3) * k;
      plan_burst(at, bucket_end - seconds_to_ns(10), opp_side, b, k);
    }
  }

  std::stable_sort(plans.begin(), plans.end(), [](const Plan& a, const Plan& b) {
    return a.t != b.t ? a.t < b.t : a.seq < b.seq;
  });

  // Materialize in time order against a live book.
  SynthDay day;
  day.truth.bucket_drift = drift;
  day.truth.opportunistic_sign = opp_sign;

  OrderBook book;
  std::map<std::pair<int, Price>, std::uint64_t> level_order;  // base order per level
  std::array<int, kBuckets> opp_net_count{};
  std::map<int, bool> jumbo_skipped;             // burst id -> promotion skipped
  std::map<std::pair<int, int>, bool> slot_skip;  // (bucket, slot) -> margin met
  std::uint64_t next_id = 1;
  TimeNs last_time = 0;

  auto emit = [&](TimeNs t, EventType type, std::uint64_t id, Volume size,
                  Price price, Side side, Archetype label) {
    MboEvent ev{std::max(t, last_time), type, id, size, price, side};
    last_time = ev.time;
    book.apply(ev);
    day.events.push_back(ev);
    if (config.emit_books) day.books.push_back(book.snapshot(ev.time));
    day.truth.archetype.push_back(label);
  };
  auto level_key = [](Side side, Price price) {
    return std::make_pair(side == Side::kBid ? 0 : 1, price);
  };
  auto base_id = [&](Side side, Price price) {
    const auto it = level_order.find(level_key(side, price));
    return it != level_order.end() ? it->second : next_id++;
  };
  auto best = [&](Side side) {
    const auto p = book.best_price(side);
    if (!p) throw SynthError("generator lost a book side");
    return *p;
  };
  // Clear the whole best level as alternating execution/delete halves in
  // chunks. The two halves carry opposite imbalance signs and sit next to
  // each other in feature space, so the removal nets out within whatever
  // cluster picks it up, leaving mid moves invisible to the flow signal.
  // With cascade set, keep going while the newly promoted level is fat, so
  // burst leftovers never linger past the next move.
  auto split_remove = [&](TimeNs t, Side side, bool cascade) {
    int cleared = 0;
    for (int rounds = 0; rounds < 6; ++rounds) {
      const Price price = best(side);
      Volume remaining = book.volume_at(side, price);
      const std::uint64_t id = base_id(side, price);
      level_order.erase(level_key(side, price));
      while (remaining > 0) {
        const Volume chunk = std::min<Volume>(remaining, 90 * lot);
        const Volume exec_half = (chunk + 1) / 2;
        emit(t, EventType::kExecVisible, id, exec_half, price, side,
             Archetype::kBackground);
        t += ns_from(0.00025);
        if (chunk > exec_half) {
          emit(t, EventType::kDelete, id, chunk - exec_half, price, side,
               Archetype::kBackground);
          t += ns_from(0.00025);
        }
        remaining -= chunk;
      }
      ++cleared;
      if (!cascade || book.volume_at(side, best(side)) <= 90 * lot) break;
    }
    // The move plan replenishes exactly one level per split, so every cascade
    // round past the first would leave the side a level short. Dense days run
    // enough bursts per bucket that the deficits outpace the trim-skip heals
    // and a side can drain entirely; re-seed the extras at the tail, too deep
    // to touch the mid or the flow signal.
    for (int e = 1; e < cleared; ++e) {
      const Price price = side == Side::kAsk ? book.asks().rbegin()->first + tick
                                             : book.bids().rbegin()->first - tick;
      const std::uint64_t id = next_id++;
      level_order[level_key(side, price)] = id;
      emit(t, EventType::kAdd, id,
           (20 + static_cast<Volume>(rng.uniform_int(11))) * lot, price, side,
           Archetype::kBackground);
      t += ns_from(0.00025);
    }
  };
  // Margin top-up slots stop materializing once the labelled flow already
  // clears the planted sign by the required count.
  auto slot_active = [&](const Plan& plan) {
    if (plan.slot < 0) return true;
    const auto key = std::make_pair(plan.bucket, plan.slot);
    auto it = slot_skip.find(key);
    if (it == slot_skip.end()) {
      const bool met =
          opp_net_count[plan.bucket] * opp_sign[plan.bucket] >= margin_count;
      it = slot_skip.emplace(key, met).first;
    }
    return !it->second;
  };

  for (const Plan& plan : plans) {
    switch (plan.kind) {
      case PlanKind::kBuild: {
        const std::uint64_t id = next_id++;
        level_order[level_key(plan.side, plan.price)] = id;
        emit(plan.t, EventType::kAdd, id, plan.size, plan.price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kSplitRemove: {
        split_remove(plan.t, plan.side, plan.cascade);
        break;
      }
      case PlanKind::kRelocAdd: {
        // Both bests are gone; the planner's old-mid price completes a
        // one-tick move and restores the two-tick spread. Fall back to a
        // plain top-up if extreme event density left the spread closed.
        Price price = plan.price;
        const bool crosses = plan.side == Side::kBid
                                 ? price >= best(Side::kAsk)
                                 : price <= best(Side::kBid);
        if (crosses) price = best(plan.side);
        const std::uint64_t id = next_id++;
        if (!crosses) level_order[level_key(plan.side, price)] = id;
        emit(plan.t, EventType::kAdd, id, plan.size, price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kGapFill: {
        const std::uint64_t id = next_id++;
        level_order[level_key(plan.side, plan.price)] = id;
        emit(plan.t, EventType::kAdd, id, plan.size, plan.price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kReplenish: {
        const Price price = plan.side == Side::kAsk
                                ? book.asks().rbegin()->first + tick
                                : book.bids().rbegin()->first - tick;
        const std::uint64_t id = next_id++;
        level_order[level_key(plan.side, price)] = id;
        emit(plan.t, EventType::kAdd, id, plan.size, price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kTrim: {
        // Only trim back down to the target depth; skipping here heals any
        // deficit a crossed-spread fallback elsewhere may have left. Among
        // the deepest three ranks the youngest goes, so long-standing seats
        // survive the churn and the book keeps genuinely old resting levels
        // all session.
        const std::size_t n_levels = plan.side == Side::kBid
                                         ? book.bids().size()
                                         : book.asks().size();
        if (n_levels <= static_cast<std::size_t>(kSidesLevels)) break;
        auto tail_pick = [&](auto& levels) {
          Price choice = levels.rbegin()->first;
          std::uint64_t youngest = 0;
          auto it = levels.rbegin();
          for (int r = 0; r < 3 && it != levels.rend(); ++r, ++it) {
            const auto entry = level_order.find(level_key(plan.side, it->first));
            const std::uint64_t id =
                entry != level_order.end() ? entry->second : next_id;
            if (id > youngest) {
              youngest = id;
              choice = it->first;
            }
          }
          return choice;
        };
        const Price price = plan.side == Side::kBid ? tail_pick(book.bids())
                                                    : tail_pick(book.asks());
        const Volume vol = book.volume_at(plan.side, price);
        const std::uint64_t id = base_id(plan.side, price);
        level_order.erase(level_key(plan.side, price));
        emit(plan.t, EventType::kDelete, id, vol, price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kDir: {
        emit(plan.t, EventType::kAdd, next_id++, plan.size, best(plan.side),
             plan.side, Archetype::kDirectional);
        break;
      }
      case PlanKind::kBurstJumbo: {
        if (!slot_active(plan)) break;
        // Already-fat best (an earlier burst's leftover): stack straight on
        // it and leave the spread alone.
        if (book.volume_at(plan.side, best(plan.side)) >= 120 * lot) {
          jumbo_skipped[plan.burst_id] = true;
          break;
        }
        jumbo_skipped[plan.burst_id] = false;
        const Price price = plan.side == Side::kBid ? best(Side::kBid) - tick
                                                    : best(Side::kAsk) + tick;
        emit(plan.t, EventType::kAdd, next_id++, plan.size, price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kBurstSplit: {
        if (!slot_active(plan) || jumbo_skipped[plan.burst_id]) break;
        // No cascade here: promoting the jumbo is the point.
        split_remove(plan.t, plan.side, false);
        break;
      }
      case PlanKind::kBurstMain: {
        if (!slot_active(plan)) break;
        emit(plan.t, EventType::kAdd, next_id++, plan.size, best(plan.side),
             plan.side, Archetype::kOpportunistic);
        opp_net_count[plan.bucket] += plan.side == Side::kBid ? 1 : -1;
        break;
      }
      case PlanKind::kBurstRestore: {
        if (!slot_active(plan) || jumbo_skipped[plan.burst_id]) break;
        // Re-seed one tick inside; if an intervening move already closed the
        // spread, top up the standing best instead of crossing.
        Price price = plan.side == Side::kBid ? best(Side::kBid) + tick
                                              : best(Side::kAsk) - tick;
        const bool crosses = plan.side == Side::kBid ? price >= best(Side::kAsk)
                                                     : price <= best(Side::kBid);
        if (crosses) price = best(plan.side);
        const std::uint64_t id = next_id++;
        if (!crosses) level_order[level_key(plan.side, price)] = id;
        emit(plan.t, EventType::kAdd, id, plan.size, price, plan.side,
             Archetype::kBackground);
        break;
      }
      case PlanKind::kMm: {
        // Separated market-making (deep target depth) keeps a handful of
        // seats on the oldest standing levels in the whole book, wherever
        // they sit: seats with real history read as passive depth no matter
        // how churned the tail gets. The pool is small and stable (trims
        // spare old levels; the fat bar is above what the seats themselves
        // accumulate, while burst jumbos stay excluded), so revisit gaps stay
        // regular instead of jumping to virgin levels hours old. The
        // collapsed band (shallow target) keeps the plain rank walk on fresh
        // front levels, blurring into the directional flow by design.
        Side side = plan.side;
        Price price = 0;
        bool seated = false;
        if (plan.depth >= 4) {
          struct Seat {
            std::uint64_t id;
            Price price;
            Side side;
          };
          std::vector<Seat> cands;
          auto collect = [&](auto& levels, Side s) {
            for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
              if (it->second > 180 * lot) continue;
              const auto entry = level_order.find(level_key(s, it->first));
              if (entry != level_order.end()) {
                cands.push_back({entry->second, it->first, s});
              }
            }
          };
          collect(book.bids(), Side::kBid);
          collect(book.asks(), Side::kAsk);
          if (!cands.empty()) {
            std::sort(cands.begin(), cands.end(),
                      [](const Seat& a, const Seat& b) { return a.id < b.id; });
            const Seat& seat = cands[static_cast<std::size_t>(plan.depth) %
                                     std::min<std::size_t>(4, cands.size())];
            side = seat.side;
            price = seat.price;
            seated = true;
          }
        }
        if (!seated) {
          auto walk = [&](auto& levels) {
            const int last = static_cast<int>(levels.size()) - 1;
            auto it = std::next(levels.begin(), std::min(plan.depth, last));
            while (std::next(it) != levels.end() && it->second > 90 * lot) ++it;
            while (it != levels.begin() && it->second > 90 * lot) --it;
            if (it == levels.begin() && last > 0) ++it;  // stay off the best
            return it->first;
          };
          price = side == Side::kBid ? walk(book.bids()) : walk(book.asks());
        }
        emit(plan.t, EventType::kAdd, next_id++, plan.size, price, side,
             Archetype::kMarketMaking);
        break;
      }
    }
  }

  return day;
}

bool replay_check(std::span<const MboEvent> events,
                  std::span<const BookSnapshot> books) {
  return !replay_mismatch(events, books).has_value();
}

void write_truth_file(const std::string& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw SynthError("cannot open truth file for writing: " + path);
  for (std::size_t b = 0; b < truth.bucket_drift.size(); ++b) {
    out << "b," << b + 1 << ',' << truth.bucket_drift[b] << ','
        << truth.opportunistic_sign[b] << '\n';
  }
  for (std::size_t i = 0; i < truth.archetype.size(); ++i) {
    out << "e," << i << ',' << static_cast<int>(truth.archetype[i]) << '\n';
  }
  if (!out) throw SynthError("failed writing truth file: " + path);
}

GroundTruth read_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SynthError("cannot open truth file: " + path);
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (csv::get_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields[0] == "b") {
      if (fields.size() != 4) throw SynthError("malformed bucket row at " + where);
      const auto b = csv::parse_int(fields[1], where);
      if (b < 1 || b > kBuckets) throw SynthError("bucket out of range at " + where);
      truth.bucket_drift[b - 1] = static_cast<int>(csv::parse_int(fields[2], where));
      truth.opportunistic_sign[b - 1] =
          static_cast<int>(csv::parse_int(fields[3], where));
    } else if (fields[0] == "e") {
      if (fields.size() != 3) throw SynthError("malformed event row at " + where);
      if (csv::parse_int(fields[1], where) !=
          static_cast<std::int64_t>(truth.archetype.size())) {
        throw SynthError("event rows out of order at " + where);
      }
      truth.archetype.push_back(
          static_cast<Archetype>(csv::parse_int(fields[2], where)));
    } else {
      throw SynthError("unknown truth row tag at " + where);
    }
  }
  return truth;
}

}  // namespace flowclust
