#include "eprb/coincidence.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <limits>
#include <sstream>

#include "eprb/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eprb {
namespace {

Ticks floor_div(Ticks a, Ticks b) {
  Ticks q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

LagHistogram empty_histogram(Ticks bin_width, Ticks max_lag) {
  if (bin_width < 1) fail(ErrorKind::usage, "histogram bin width must be >= 1 tick");
  if (max_lag < bin_width) fail(ErrorKind::usage, "histogram max lag must be >= bin width");
  LagHistogram h;
  h.bin_width = bin_width;
  h.max_lag = max_lag;
  h.first_bin = floor_div(-max_lag, bin_width);
  const Ticks last_bin = floor_div(max_lag, bin_width);
  h.counts.assign(static_cast<std::size_t>(last_bin - h.first_bin + 1), 0);
  return h;
}

// Adds lags t1[n] - t2[m] for n in [n_begin, n_end) into `counts`.
void accumulate_lags(const StationDataset& ds1, const StationDataset& ds2, std::size_t n_begin,
                     std::size_t n_end, const LagHistogram& shape, std::vector<std::uint64_t>& counts) {
  const std::size_t n2 = ds2.size();
  if (n_begin >= n_end || n2 == 0) return;
  // First station-2 event that can fall inside the range of event n_begin.
  std::size_t lo = 0;
  {
    const Ticks lower = ds1.time_of(n_begin) - shape.max_lag;
    std::size_t a = 0;
    std::size_t b = n2;
    while (a < b) {
      const std::size_t mid = a + (b - a) / 2;
      if (ds2.time_of(mid) < lower) a = mid + 1; else b = mid;
    }
    lo = a;
  }
  for (std::size_t n = n_begin; n < n_end; ++n) {
    const Ticks t1 = ds1.time_of(n);
    while (lo < n2 && ds2.time_of(lo) < t1 - shape.max_lag) ++lo;
    for (std::size_t m = lo; m < n2; ++m) {
      const Ticks lag = t1 - ds2.time_of(m);
      if (lag < -shape.max_lag) break;
      counts[static_cast<std::size_t>(floor_div(lag, shape.bin_width) - shape.first_bin)] += 1;
    }
  }
}

}  // namespace

std::uint64_t LagHistogram::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::uint64_t CoincidenceCounts::total() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& row : by_setting) {
    for (const auto& cell : row) sum += cell.total();
  }
  return sum;
}

LagHistogram lag_histogram_serial(const StationDataset& ds1, const StationDataset& ds2,
                                  Ticks bin_width, Ticks max_lag) {
  auto h = empty_histogram(bin_width, max_lag);
  accumulate_lags(ds1, ds2, 0, ds1.size(), h, h.counts);
  return h;
}

LagHistogram lag_histogram(const StationDataset& ds1, const StationDataset& ds2, Ticks bin_width,
                           Ticks max_lag) {
  auto h = empty_histogram(bin_width, max_lag);
  const std::size_t n1 = ds1.size();
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
  if (threads > 1 && n1 > 4096) {
    const std::size_t chunks = static_cast<std::size_t>(threads) * 4;
    const std::size_t step = (n1 + chunks - 1) / chunks;
    std::vector<std::vector<std::uint64_t>> partial(chunks);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < chunks; ++c) {
      partial[c].assign(h.counts.size(), 0);
      accumulate_lags(ds1, ds2, std::min(n1, c * step), std::min(n1, (c + 1) * step), h, partial[c]);
    }
    for (const auto& p : partial) {
      for (std::size_t i = 0; i < p.size(); ++i) h.counts[i] += p[i];
    }
    return h;
  }
#endif
  accumulate_lags(ds1, ds2, 0, n1, h, h.counts);
  return h;
}

Ticks estimate_global_offset(const LagHistogram& h) {
  std::uint64_t best = 0;
  for (auto c : h.counts) best = std::max(best, c);
  if (best == 0) fail(ErrorKind::numerical, "no coincidences in range");
  bool found = false;
  Ticks chosen = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] != best) continue;
    const Ticks offset = -h.bin_center(i);
    if (!found || std::llabs(offset) < std::llabs(chosen) ||
        (std::llabs(offset) == std::llabs(chosen) && offset > chosen)) {
      chosen = offset;
      found = true;
    }
  }
  return chosen;
}

StationDataset apply_offset(const StationDataset& ds, Ticks delta_g) {
  StationDataset out = ds;
  if (ds.events.empty()) {
    out.origin_ticks = 0;
    return out;
  }
  const Ticks earliest = ds.time_of(0) + delta_g;
  const Ticks origin = std::min<Ticks>(0, earliest);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    out.events[n].time_tag = static_cast<std::uint64_t>(ds.time_of(n) + delta_g - origin);
  }
  out.origin_ticks = origin;
  return out;
}

std::vector<MatchedPair> match_pairs(const StationDataset& ds1, const StationDataset& ds2,
                                     const MatchConfig& cfg) {
  if (cfg.window <= 0) fail(ErrorKind::usage, "coincidence window must be > 0");
  const Ticks w = cfg.window;
  const std::size_t n1 = ds1.size();
  const std::size_t n2 = ds2.size();
  std::vector<MatchedPair> pairs;

  if (cfg.mode == MatchMode::causal_greedy) {
    // Merge both streams in arrival order; on a tie station 1 goes first.
    // An arriving event takes the earliest pending partner that is still
    // inside the window, otherwise it waits.
    std::deque<std::size_t> pending1;
    std::deque<std::size_t> pending2;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n1 || j < n2) {
      const bool take1 = j >= n2 || (i < n1 && ds1.time_of(i) <= ds2.time_of(j));
      if (take1) {
        const Ticks t = ds1.time_of(i);
        while (!pending2.empty() && ds2.time_of(pending2.front()) < t - w) pending2.pop_front();
        if (!pending2.empty()) {
          pairs.push_back({i, pending2.front()});
          pending2.pop_front();
        } else {
          pending1.push_back(i);
        }
        ++i;
      } else {
        const Ticks t = ds2.time_of(j);
        while (!pending1.empty() && ds1.time_of(pending1.front()) < t - w) pending1.pop_front();
        if (!pending1.empty()) {
          pairs.push_back({pending1.front(), j});
          pending1.pop_front();
        } else {
          pending2.push_back(j);
        }
        ++j;
      }
    }
  } else {
    // Each station-1 event is adjacent to a contiguous run of station-2
    // events, and both run ends are monotone in n. For such convex bipartite
    // graphs, scanning station 2 in order and taking the admissible station-1
    // event whose run ends first (= the earliest one) yields a maximum
    // matching. Admission looks W ticks into the future.
    std::deque<std::size_t> open;
    std::size_t p = 0;
    for (std::size_t m = 0; m < n2; ++m) {
      const Ticks t = ds2.time_of(m);
      while (p < n1 && ds1.time_of(p) <= t + w) open.push_back(p++);
      while (!open.empty() && ds1.time_of(open.front()) < t - w) open.pop_front();
      if (!open.empty()) {
        pairs.push_back({open.front(), m});
        open.pop_front();
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.n < b.n; });
  return pairs;
}

CoincidenceCounts count_coincidences(const StationDataset& ds1, const StationDataset& ds2,
                                     const std::vector<MatchedPair>& pairs) {
  CoincidenceCounts out;
  for (const auto& p : pairs) {
    const auto& e1 = ds1.events.at(p.n);
    const auto& e2 = ds2.events.at(p.m);
    out.by_setting[e1.setting][e2.setting].at(e1.outcome, e2.outcome) += 1;
  }
  out.matched = {pairs.size(), pairs.size()};
  out.unmatched = {ds1.size() - pairs.size(), ds2.size() - pairs.size()};
  return out;
}

CoincidenceCounts coincidences(const StationDataset& ds1, const StationDataset& ds2,
                               const MatchConfig& cfg) {
  if (cfg.delta_g == 0) return count_coincidences(ds1, ds2, match_pairs(ds1, ds2, cfg));
  const auto shifted = apply_offset(ds1, cfg.delta_g);
  return count_coincidences(shifted, ds2, match_pairs(shifted, ds2, cfg));
}

CoincidenceCounts infinite_window_counts(const StationDataset& ds1, const StationDataset& ds2) {
  const std::size_t n = std::min(ds1.size(), ds2.size());
  std::vector<MatchedPair> pairs(n);
  for (std::size_t k = 0; k < n; ++k) pairs[k] = {k, k};
  return count_coincidences(ds1, ds2, pairs);
}

std::string histogram_tsv(const LagHistogram& h) {
  std::ostringstream out;
  out << "lag_ticks\tcount\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << h.bin_center(i) << '\t' << h.counts[i] << '\n';
  }
  return out.str();
}

std::string pairs_tsv(const StationDataset& ds1, const StationDataset& ds2,
                      const std::vector<MatchedPair>& pairs) {
  std::ostringstream out;
  out << "n\tm\tt1\tt2\n";
  for (const auto& p : pairs) {
    out << p.n << '\t' << p.m << '\t' << ds1.time_of(p.n) << '\t' << ds2.time_of(p.m) << '\n';
  }
  return out.str();
}

MatchMode parse_match_mode(const std::string& text) {
  if (text == "causal" || text == "causal_greedy") return MatchMode::causal_greedy;
  if (text == "maxcard" || text == "max_cardinality") return MatchMode::max_cardinality;
  fail(ErrorKind::usage, "unknown match mode '" + text + "' (causal_greedy|max_cardinality)");
}

std::string to_string(MatchMode mode) {
  return mode == MatchMode::causal_greedy ? "causal_greedy" : "max_cardinality";
}

}  // namespace eprb
