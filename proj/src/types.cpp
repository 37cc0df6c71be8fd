#include "flowclust/types.hpp"

#include <charconv>
#include <cstdio>

namespace flowclust {

void BookSnapshot::validate() const {
  for (std::size_t i = 0; i < asks.size(); ++i) {
    if (asks[i].volume <= 0) throw BookError("ask level with non-positive volume");
    if (i > 0 && asks[i].price <= asks[i - 1].price)
      throw BookError("ask prices not strictly ascending");
  }
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (bids[i].volume <= 0) throw BookError("bid level with non-positive volume");
    if (i > 0 && bids[i].price >= bids[i - 1].price)
      throw BookError("bid prices not strictly descending");
  }
  if (has_both_sides() && best_ask() <= best_bid()) {
    throw BookError("crossed book: best ask " + std::to_string(best_ask()) +
                    " <= best bid " + std::to_string(best_bid()));
  }
}

TimeNs parse_time(const std::string& text) {
  if (text.empty()) throw ParseError("empty timestamp");
  const char* begin = text.data();
  const char* end = begin + text.size();
  std::int64_t secs = 0;
  auto [ptr, ec] = std::from_chars(begin, end, secs);
  if (ec != std::errc() || secs < 0) throw ParseError("bad timestamp: " + text);
  std::int64_t nanos = 0;
  if (ptr != end) {
    if (*ptr != '.') throw ParseError("bad timestamp: " + text);
    ++ptr;
    const auto digits = static_cast<std::size_t>(end - ptr);
    if (digits == 0 || digits > 9) throw ParseError("bad timestamp fraction: " + text);
    for (const char* p = ptr; p != end; ++p) {
      if (*p < '0' || *p > '9') throw ParseError("bad timestamp fraction: " + text);
      nanos = nanos * 10 + (*p - '0');
    }
    for (std::size_t i = digits; i < 9; ++i) nanos *= 10;
  }
  return secs * kNsPerSecond + nanos;
}

std::string format_time(TimeNs t) {
  if (t < 0) throw ParseError("negative timestamp");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%09lld",
                static_cast<long long>(t / kNsPerSecond),
                static_cast<long long>(t % kNsPerSecond));
  return buf;
}

}  // namespace flowclust
