#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eprb/dataset.hpp"

namespace eprb {

inline constexpr Ticks kDefaultHistogramBinWidth = 1;
inline constexpr Ticks kDefaultHistogramMaxLag = 200000;

/// Counts of cross-station time differences lag = t1 - t2.
///
/// Bin k holds lags in [k * bin_width, (k + 1) * bin_width - 1]; the bins
/// span every lag in [-max_lag, +max_lag]. Only lags inside that range are
/// counted.
struct LagHistogram {
  Ticks bin_width = kDefaultHistogramBinWidth;
  Ticks max_lag = kDefaultHistogramMaxLag;
  Ticks first_bin = 0;  // k of counts[0]
  std::vector<std::uint64_t> counts;

  [[nodiscard]] Ticks bin_start(std::size_t i) const noexcept {
    return (first_bin + static_cast<Ticks>(i)) * bin_width;
  }
  [[nodiscard]] Ticks bin_center(std::size_t i) const noexcept {
    return bin_start(i) + (bin_width - 1) / 2;
  }
  [[nodiscard]] std::uint64_t total() const noexcept;

  friend bool operator==(const LagHistogram&, const LagHistogram&) = default;
};

enum class MatchMode {
  causal_greedy,     // decisions use only events that have already arrived
  max_cardinality,   // maximum matching; looks ahead, hence acausal
};

struct MatchConfig {
  Ticks window = 4;
  Ticks delta_g = 0;
  MatchMode mode = MatchMode::causal_greedy;
};

/// Indices into the station-1 and station-2 event lists.
struct MatchedPair {
  std::size_t n = 0;
  std::size_t m = 0;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// C_xy for one setting pair. Index 0 means outcome +1, index 1 means -1.
struct SettingCounts {
  std::array<std::array<std::uint64_t, 2>, 2> c{};

  [[nodiscard]] std::uint64_t at(int x, int y) const noexcept {
    return c[x == 1 ? 0 : 1][y == 1 ? 0 : 1];
  }
  std::uint64_t& at(int x, int y) noexcept { return c[x == 1 ? 0 : 1][y == 1 ? 0 : 1]; }
  [[nodiscard]] std::uint64_t total() const noexcept {
    return c[0][0] + c[0][1] + c[1][0] + c[1][1];
  }

  friend bool operator==(const SettingCounts&, const SettingCounts&) = default;
};

/// Coincidence counters indexed by [setting1][setting2].
struct CoincidenceCounts {
  std::array<std::array<SettingCounts, 2>, 2> by_setting{};
  std::array<std::uint64_t, 2> matched{};    // per station
  std::array<std::uint64_t, 2> unmatched{};  // per station

  [[nodiscard]] const SettingCounts& at(int setting1, int setting2) const noexcept {
    return by_setting[setting1][setting2];
  }
  [[nodiscard]] std::uint64_t coincidences(int setting1, int setting2) const noexcept {
    return by_setting[setting1][setting2].total();
  }
  [[nodiscard]] std::uint64_t total() const noexcept;

  friend bool operator==(const CoincidenceCounts&, const CoincidenceCounts&) = default;
};

/// Histogram of t1 - t2 over all cross-station pairs with |lag| <= max_lag.
/// Two-pointer sweep, parallelized over chunks of station-1 events.
LagHistogram lag_histogram(const StationDataset& ds1, const StationDataset& ds2,
                           Ticks bin_width = kDefaultHistogramBinWidth,
                           Ticks max_lag = kDefaultHistogramMaxLag);

/// Single-threaded reference for lag_histogram.
LagHistogram lag_histogram_serial(const StationDataset& ds1, const StationDataset& ds2,
                                  Ticks bin_width = kDefaultHistogramBinWidth,
                                  Ticks max_lag = kDefaultHistogramMaxLag);

/// Offset to add to station 1 so the histogram maximum lands on lag 0.
/// Ties go to the smallest magnitude, then to the positive sign.
Ticks estimate_global_offset(const LagHistogram& h);

/// Shifts every time tag of `ds` by `delta_g`. If a tag would become
/// negative, the tags are re-based to start at zero and the shift that was
/// removed is kept in origin_ticks, so effective times are exact and
/// apply_offset(apply_offset(ds, d), -d) == ds.
StationDataset apply_offset(const StationDataset& ds, Ticks delta_g);

/// Disjoint pairs with |t1 - t2| <= window, sorted by station-1 index.
/// Offsets are not applied here; `cfg.delta_g` is ignored.
std::vector<MatchedPair> match_pairs(const StationDataset& ds1, const StationDataset& ds2,
                                     const MatchConfig& cfg);

CoincidenceCounts count_coincidences(const StationDataset& ds1, const StationDataset& ds2,
                                     const std::vector<MatchedPair>& pairs);

/// Offset, match and count in one step.
CoincidenceCounts coincidences(const StationDataset& ds1, const StationDataset& ds2,
                               const MatchConfig& cfg);

/// W -> infinity limit: event n of station 1 is paired with event n of
/// station 2 after truncating both lists to the shorter length.
CoincidenceCounts infinite_window_counts(const StationDataset& ds1, const StationDataset& ds2);

std::string histogram_tsv(const LagHistogram& h);
std::string pairs_tsv(const StationDataset& ds1, const StationDataset& ds2,
                      const std::vector<MatchedPair>& pairs);

MatchMode parse_match_mode(const std::string& text);
std::string to_string(MatchMode mode);

}  // namespace eprb
