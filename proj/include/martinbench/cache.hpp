#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace martinbench {

struct GreenResult;

/// Directory for persisted Green solves. Empty disables the disk cache.
/// Defaults to $MARTINBENCH_CACHE when never set explicitly.
void set_cache_dir(const std::string& dir);
std::string cache_dir();

/// Binary record layout (native little-endian):
///   char[8]  magic "MBGREEN1"
///   u64      key
///   f64      r
///   i32      iterations, i32 accelerated flag
///   f64 x 6  last_increment, contraction, series_tail, accelerated_change, exit_bound, exit_rate
///   u64      count
///   f64 x count values
std::optional<GreenResult> cache_load(std::uint64_t key);
void cache_store(std::uint64_t key, const GreenResult& result);

}  // namespace martinbench
