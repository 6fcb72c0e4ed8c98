#include <doctest.h>

#include <random>

#include <omp.h>

#include "eprb/coincidence.hpp"
#include "eprb/error.hpp"
#include "eprb/simulator.hpp"
#include "oracles.hpp"

using namespace eprb;

namespace {

std::vector<std::int64_t> times(const StationDataset& ds) {
  std::vector<std::int64_t> t;
  for (std::size_t n = 0; n < ds.size(); ++n) t.push_back(ds.time_of(n));
  return t;
}

bool is_valid_matching(const StationDataset& ds1, const StationDataset& ds2, const std::vector<MatchedPair>& pairs,
                       Ticks w) {
  std::vector<char> used1(ds1.size(), 0);
  std::vector<char> used2(ds2.size(), 0);
  for (const auto& p : pairs) {
    if (used1[p.n] || used2[p.m]) return false;
    used1[p.n] = used2[p.m] = 1;
    if (std::llabs(ds1.time_of(p.n) - ds2.time_of(p.m)) > w) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("histogram sign convention") {
  const auto h0 = lag_histogram(oracle::dataset(1, {10}), oracle::dataset(2, {10}), 1, 20);
  CHECK(h0.total() == 1);
  const auto h5 = lag_histogram(oracle::dataset(1, {15}), oracle::dataset(2, {10}), 1, 20);
  for (std::size_t i = 0; i < h5.counts.size(); ++i) {
    if (h5.counts[i] > 0) CHECK(h5.bin_start(i) == 5);
  }
  CHECK(estimate_global_offset(h5) == -5);
}

TEST_CASE("empty input gives an empty histogram") {
  const auto h = lag_histogram(StationDataset{}, oracle::dataset(2, {1}));
  CHECK(h.total() == 0);
  CHECK_THROWS_AS(estimate_global_offset(h), Error);
  CHECK_THROWS_AS(lag_histogram(StationDataset{}, StationDataset{}, 0, 10), Error);
}

TEST_CASE("histogram matches the quadratic oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ds1 = oracle::random_dataset(rng, 1, 1 + trial * 3, 2000);
    const auto ds2 = oracle::random_dataset(rng, 2, 2 + trial * 2, 2000);
    const Ticks width = 1 + trial % 7;
    const Ticks max_lag = width + (trial * 37) % 500;
    Ticks first = 0;
    const auto expected = oracle::lag_counts(ds1, ds2, width, max_lag, first);
    const auto h = lag_histogram_serial(ds1, ds2, width, max_lag);
    CHECK(h.first_bin == first);
    CHECK(h.counts == expected);
  }
}

TEST_CASE("parallel histogram equals serial") {
  SimulationConfig cfg;
  cfg.pair_count = 20'000;
  cfg.seed = 3;
  const auto [ds1, ds2] = run_simulation(cfg);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto parallel = lag_histogram(ds1, ds2, 3, 50'000);
  omp_set_num_threads(saved);
  CHECK(parallel == lag_histogram_serial(ds1, ds2, 3, 50'000));
}

TEST_CASE("global offset") {
  LagHistogram h;
  h.bin_width = 1;
  h.max_lag = 10;
  h.first_bin = -10;
  h.counts.assign(21, 0);
  h.counts[10] = 5;
  CHECK(estimate_global_offset(h) == 0);

  h.counts[10] = 0;
  h.counts[6] = 7;   // lag -4
  h.counts[14] = 7;  // lag +4
  CHECK(estimate_global_offset(h) == 4);

  std::mt19937_64 rng(4);
  const auto ds1 = oracle::random_dataset(rng, 1, 300, 1'000'000);
  auto ds2 = ds1;
  ds2.station_id = 2;
  for (auto& e : ds2.events) e.time_tag += 10;
  const Ticks d = estimate_global_offset(lag_histogram(ds1, ds2));
  CHECK(d == 10);
  const auto shifted = apply_offset(ds1, d);
  CHECK(estimate_global_offset(lag_histogram(shifted, ds2)) == 0);
}

TEST_CASE("apply_offset") {
  const auto ds = oracle::dataset(1, {0, 5});
  CHECK(apply_offset(ds, 0) == ds);
  const auto plus = apply_offset(ds, 1);
  CHECK(plus.events[0].time_tag == 1);
  CHECK(plus.events[1].time_tag == 6);
  const auto minus = apply_offset(ds, -3);
  CHECK(minus.time_of(0) == -3);
  CHECK(minus.time_of(1) == 2);

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<Ticks> shift(-5000, 5000);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = oracle::random_dataset(rng, 1, trial % 20, 3000);
    const Ticks d = shift(rng);
    CHECK(apply_offset(apply_offset(r, d), -d) == r);
  }
}

TEST_CASE("matching examples") {
  const MatchConfig causal{3, 0, MatchMode::causal_greedy};
  const MatchConfig maxcard{3, 0, MatchMode::max_cardinality};

  CHECK(match_pairs(oracle::dataset(1, {0}), oracle::dataset(2, {4}), causal).empty());
  CHECK(match_pairs(oracle::dataset(1, {0}), oracle::dataset(2, {4}), maxcard).empty());

  const auto a1 = oracle::dataset(1, {0, 2});
  const auto a2 = oracle::dataset(2, {3});
  CHECK(match_pairs(a1, a2, causal) == std::vector<MatchedPair>{{0, 0}});
  CHECK(match_pairs(a1, a2, maxcard).size() == 1);

  const auto b1 = oracle::dataset(1, {0, 4});
  const auto b2 = oracle::dataset(2, {3, 5});
  CHECK(match_pairs(b1, b2, causal) == std::vector<MatchedPair>{{0, 0}, {1, 1}});
  CHECK(match_pairs(b1, b2, maxcard).size() == 2);

  CHECK_THROWS_AS(match_pairs(b1, b2, MatchConfig{0, 0, MatchMode::causal_greedy}), Error);
}

TEST_CASE("matchings are valid and maximum on random instances") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(0, 20);
  for (int trial = 0; trial < 500; ++trial) {
    const auto ds1 = oracle::random_dataset(rng, 1, static_cast<std::size_t>(size(rng)), 60);
    const auto ds2 = oracle::random_dataset(rng, 2, static_cast<std::size_t>(size(rng)), 60);
    const Ticks w = 1 + trial % 6;
    const auto best = oracle::max_matching(times(ds1), times(ds2), w);
    const auto greedy = match_pairs(ds1, ds2, {w, 0, MatchMode::causal_greedy});
    const auto maxcard = match_pairs(ds1, ds2, {w, 0, MatchMode::max_cardinality});
    CHECK(is_valid_matching(ds1, ds2, greedy, w));
    CHECK(is_valid_matching(ds1, ds2, maxcard, w));
    CHECK(greedy.size() <= best);
    CHECK(maxcard.size() == best);
    CHECK(std::is_sorted(greedy.begin(), greedy.end(),
                         [](const MatchedPair& a, const MatchedPair& b) { return a.n < b.n; }));
  }
}

TEST_CASE("causal matching never revisits the past") {
  // Truncating both streams at time T keeps exactly the pairs completed by T.
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ds1 = oracle::random_dataset(rng, 1, 30, 200);
    const auto ds2 = oracle::random_dataset(rng, 2, 30, 200);
    const MatchConfig cfg{4, 0, MatchMode::causal_greedy};
    const auto full = match_pairs(ds1, ds2, cfg);
    const Ticks cut = trial;
    auto prefix = [&](const StationDataset& ds) {
      auto out = ds;
      out.events.clear();
      for (const auto& e : ds.events) {
        if (static_cast<Ticks>(e.time_tag) <= cut) out.events.push_back(e);
      }
      return out;
    };
    const auto p1 = prefix(ds1);
    const auto p2 = prefix(ds2);
    std::vector<MatchedPair> expected;
    for (const auto& p : full) {
      if (p.n < p1.size() && p.m < p2.size()) expected.push_back(p);
    }
    CHECK(match_pairs(p1, p2, cfg) == expected);
  }
}

TEST_CASE("coincidence counters") {
  const auto ds1 = oracle::dataset(1, {10}, {0}, {1});
  const auto ds2 = oracle::dataset(2, {11}, {0}, {1});
  const auto c = coincidences(ds1, ds2, {2, 0, MatchMode::causal_greedy});
  CHECK(c.at(0, 0).at(1, 1) == 1);
  CHECK(c.total() == 1);
  CHECK(c.matched[0] == 1);

  const auto none = count_coincidences(ds1, ds2, {});
  CHECK(none.total() == 0);
  CHECK(none.unmatched[0] == 1);
  CHECK(none.unmatched[1] == 1);

  const auto far = coincidences(ds1, ds2, {2, 100, MatchMode::causal_greedy});
  CHECK(far.total() == 0);
  const auto back = coincidences(oracle::dataset(1, {110}, {0}, {1}), ds2, {2, -100, MatchMode::causal_greedy});
  CHECK(back.total() == 1);
}

TEST_CASE("counts conserve matched pairs on simulated data") {
  SimulationConfig cfg;
  cfg.pair_count = 10'000;
  cfg.seed = 8;
  const auto [ds1, ds2] = run_simulation(cfg);
  for (auto mode : {MatchMode::causal_greedy, MatchMode::max_cardinality}) {
    const MatchConfig mc{100'000, 0, mode};
    const auto pairs = match_pairs(ds1, ds2, mc);
    const auto c = count_coincidences(ds1, ds2, pairs);
    CHECK(c.total() == pairs.size());
    CHECK(c.matched[0] + c.unmatched[0] == ds1.size());
  }
}

TEST_CASE("coincidences grow with the window under maximum matching") {
  SimulationConfig cfg;
  cfg.pair_count = 20'000;
  cfg.seed = 12;
  const auto [ds1, ds2] = run_simulation(cfg);
  std::uint64_t last = 0;
  for (Ticks w : {1, 2, 4, 8, 20, 100, 400, 4000}) {
    const auto n = coincidences(ds1, ds2, {w, 0, MatchMode::max_cardinality}).total();
    CHECK(n >= last);
    last = n;
  }
}

TEST_CASE("infinite window pairs by index") {
  const auto five = oracle::dataset(1, {1, 2, 3, 4, 5});
  const auto three = oracle::dataset(2, {1, 2, 3});
  CHECK(infinite_window_counts(five, three).total() == 3);
  CHECK(infinite_window_counts(five, oracle::dataset(2, {9, 10, 11, 12, 13})).total() == 5);

  // Strictly alternating streams: every station-1 event has exactly one
  // partner within the window, so windowed matching equals index pairing.
  std::vector<std::uint64_t> t1;
  std::vector<std::uint64_t> t2;
  for (std::uint64_t k = 0; k < 100; ++k) {
    t1.push_back(100 * k);
    t2.push_back(100 * k + 7);
  }
  std::mt19937_64 rng(2);
  std::vector<std::uint8_t> s1(100), s2(100);
  std::vector<std::int8_t> x1(100), x2(100);
  for (int k = 0; k < 100; ++k) {
    s1[k] = rng() & 1;
    s2[k] = rng() & 1;
    x1[k] = (rng() & 1) ? 1 : -1;
    x2[k] = (rng() & 1) ? 1 : -1;
  }
  const auto d1 = oracle::dataset(1, t1, s1, x1);
  const auto d2 = oracle::dataset(2, t2, s2, x2);
  CHECK(infinite_window_counts(d1, d2) == coincidences(d1, d2, {50, 0, MatchMode::causal_greedy}));
}

TEST_CASE("match mode names") {
  CHECK(parse_match_mode("causal") == MatchMode::causal_greedy);
  CHECK(parse_match_mode("maxcard") == MatchMode::max_cardinality);
  CHECK(to_string(MatchMode::max_cardinality) == "max_cardinality");
  CHECK_THROWS_AS(parse_match_mode("best"), Error);
}
