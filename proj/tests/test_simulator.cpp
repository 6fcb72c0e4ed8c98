#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "eprb/coincidence.hpp"
#include "eprb/dataset.hpp"
#include "eprb/error.hpp"
#include "eprb/rng.hpp"
#include "eprb/simulator.hpp"
#include "oracles.hpp"

using namespace eprb;
using std::numbers::pi;

namespace {

std::string bytes(const StationDataset& ds) {
  std::ostringstream out(std::ios::binary);
  write_station_data(ds, out);
  return out.str();
}

std::vector<double> delays(TimeTagModel model, double alpha, std::size_t count, std::uint64_t seed) {
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = time_tag_delay(model, alpha, 2000.0, EventDraws(seed, Stream::delay1, n).open01());
  }
  return out;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniform draws stay inside their intervals") {
  for (std::uint64_t n = 0; n < 100'000; ++n) {
    const EventDraws d(7, Stream::splitter1, n);
    CHECK(d.open01() > 0.0);
    CHECK(d.open01() < 1.0);
    CHECK(d.closed_open01(1) < 1.0);
  }
}

TEST_CASE("source angles are uniform") {
  const int bins = 50;
  std::vector<double> counts(bins, 0.0);
  const std::size_t n = 100'000;
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = draw_source_angle(1, k);
    REQUIRE(xi >= 0.0);
    REQUIRE(xi < 2 * pi);
    counts[static_cast<std::size_t>(xi / (2 * pi) * bins)] += 1.0;
  }
  const double expected = static_cast<double>(n) / bins;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(oracle::chi2_pvalue(chi2, bins - 1) > 0.001);
}

TEST_CASE("interarrival times are exponential with the configured mean") {
  const std::size_t n = 100'000;
  std::vector<double> gaps(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += gaps[k] = draw_interarrival(1, k, 30000.0);
  CHECK(sum / n == doctest::Approx(30000.0).epsilon(0.02));
  const double d = oracle::ks_statistic(gaps, [](double t) { return 1.0 - std::exp(-t / 30000.0); });
  CHECK(oracle::ks_pvalue(d, n) > 0.001);

  SimulationConfig cfg;
  cfg.pair_count = 1000;
  const auto pairs = emit_pairs(cfg);
  for (std::size_t k = 1; k < pairs.size(); ++k) CHECK(pairs[k].emission_ns > pairs[k - 1].emission_ns);
  CHECK(pairs[3].polarization(2) - pairs[3].polarization(1) == pi / 2);
}

TEST_CASE("EOM rotation") {
  CHECK(eom_rotate(0.3, 1, 0, 0.3, pi / 4) == 0.0);
  CHECK(eom_rotate(0.0, 2, 1, pi / 8, pi / 4) == doctest::Approx(pi / 8));
  CHECK(eom_rotate(1.1, 1, 0, 0.2, 0.0) == eom_rotate(1.1, 1, 1, 0.2, 0.0));
}

TEST_CASE("beam splitter") {
  for (std::uint64_t n = 0; n < 10'000; ++n) {
    const double r = EventDraws(3, Stream::malus_probe, n).open01();
    CHECK(beam_splitter(0.0, r) == 1);
    CHECK(beam_splitter(pi / 2, r) == -1);
  }
  CHECK(malus_frequency(pi / 6, 1'000'000, 1) == doctest::Approx(0.75).epsilon(0.002 / 0.75));
}

TEST_CASE("time-tag delays") {
  CHECK(lambda_of(pi / 4, 2000.0) == doctest::Approx(2000.0));
  CHECK(lambda_of(0.0, 2000.0) == 0.0);
  for (auto model : {TimeTagModel::uniform, TimeTagModel::exponential}) {
    for (double d : delays(model, 0.0, 1000, 2)) CHECK(d == 0.0);
  }

  const auto u = delays(TimeTagModel::uniform, pi / 4, 100'000, 4);
  double sum = 0.0;
  double peak = 0.0;
  for (double d : u) {
    sum += d;
    peak = std::max(peak, d);
  }
  CHECK(sum / u.size() == doctest::Approx(1000.0).epsilon(0.01));
  CHECK(peak <= lambda_of(pi / 4, 2000.0));
  for (double d : delays(TimeTagModel::uniform, 0.3, 10'000, 5)) CHECK(d <= lambda_of(0.3, 2000.0));

  const auto e = delays(TimeTagModel::exponential, pi / 4, 100'000, 6);
  sum = 0.0;
  for (double d : e) sum += d;
  CHECK(sum / e.size() == doctest::Approx(2000.0).epsilon(0.02));
  const double lambda = lambda_of(0.6, 2000.0);
  const auto e2 = delays(TimeTagModel::exponential, 0.6, 100'000, 7);
  const double d = oracle::ks_statistic(e2, [&](double t) { return 1.0 - std::exp(-t / lambda); });
  CHECK(oracle::ks_pvalue(d, e2.size()) > 0.001);
}

TEST_CASE("quantization rounds half up") {
  CHECK(quantize(0.0, 0.5) == 0);
  CHECK(quantize(0.24, 0.5) == 0);
  CHECK(quantize(0.25, 0.5) == 1);
  CHECK(quantize(1.0, 0.5) == 2);
}

TEST_CASE("parallel simulation equals the serial reference") {
  for (auto model : {TimeTagModel::uniform, TimeTagModel::exponential}) {
    SimulationConfig cfg;
    cfg.pair_count = 50'000;
    cfg.seed = 99;
    cfg.model = model;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    const auto [p1, p2] = run_simulation(cfg);
    omp_set_num_threads(saved);
    const auto [s1, s2] = run_simulation_serial(cfg);
    CHECK(bytes(p1) == bytes(s1));
    CHECK(bytes(p2) == bytes(s2));
  }
}

TEST_CASE("one pair per station, reproducibly") {
  SimulationConfig cfg;
  cfg.pair_count = 1;
  cfg.seed = 5;
  const auto [a1, a2] = run_simulation(cfg);
  const auto [b1, b2] = run_simulation(cfg);
  CHECK(a1.size() == 1);
  CHECK(a2.size() == 1);
  CHECK(bytes(a1) == bytes(b1));
  CHECK(bytes(a2) == bytes(b2));
  cfg.seed = 6;
  CHECK(bytes(run_simulation(cfg).first) != bytes(a1));
}

TEST_CASE("station 1 output ignores station 2") {
  SimulationConfig cfg;
  cfg.pair_count = 20'000;
  cfg.seed = 31;
  const auto pairs = emit_pairs(cfg);
  const auto reference = bytes(simulate_station(cfg, 1, pairs));

  SimulationConfig other = cfg;
  other.angle2 = 1.234;
  CHECK(bytes(simulate_station(other, 1, pairs)) == reference);
  CHECK(bytes(run_simulation(other).first) == bytes(run_simulation(cfg).first));

  // Forcing station 2 to a fixed setting sequence does not touch station 1.
  std::vector<std::uint8_t> all_ones(pairs.size(), 1);
  const auto forced2 = simulate_station(cfg, 2, pairs, all_ones);
  for (const auto& e : forced2.events) CHECK(e.setting == 1);
  CHECK(bytes(simulate_station(cfg, 1, pairs)) == reference);
}

TEST_CASE("settings are balanced coin flips") {
  SimulationConfig cfg;
  cfg.pair_count = 100'000;
  const auto [ds1, ds2] = run_simulation(cfg);
  for (const auto* ds : {&ds1, &ds2}) {
    double ones = 0.0;
    for (const auto& e : ds->events) ones += e.setting;
    CHECK(std::abs(ones / ds->size() - 0.5) < 5.0 * 0.5 / std::sqrt(static_cast<double>(ds->size())));
  }
}

TEST_CASE("configuration") {
  SimulationConfig cfg;
  cfg.seed = 42;
  cfg.model = TimeTagModel::exponential;
  const auto back = parse_config_json(config_json(cfg));
  CHECK(config_json(back) == config_json(cfg));

  const auto partial = parse_config_json(R"({"pair_count": 12})");
  CHECK(partial.pair_count == 12);
  CHECK(partial.angle2 == pi / 8);

  auto error_of = [](const std::string& text) {
    try {
      parse_config_json(text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::usage);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("{\n\"seed\": 1,\n\"t0_ns\": ]\n}").find("line 3") != std::string::npos);
  CHECK(error_of(R"({"colour": 1})").find("colour") != std::string::npos);
  CHECK(error_of(R"({"t0_ns": "fast"})").find("t0_ns") != std::string::npos);
  CHECK(error_of(R"({"t0_ns": -1})").find("t0_ns") != std::string::npos);
  CHECK(error_of(R"({"time_tag_model": "gaussian"})").find("gaussian") != std::string::npos);

  SimulationConfig crowded;
  crowded.mean_interarrival_ns = 1000.0;
  CHECK(config_warnings(crowded).size() == 1);
  CHECK(config_warnings(SimulationConfig{}).empty());
}

TEST_CASE("correlation curve pools by angle") {
  SimulationConfig cfg;
  cfg.pair_count = 20'000;
  std::vector<double> thetas;
  for (int k = 0; k < 8; ++k) thetas.push_back(k * pi / 8);
  const auto curve = correlation_curve(cfg, thetas, 4);
  REQUIRE(curve.size() == 16);
  for (const auto& p : curve) {
    CHECK(p.reference == doctest::Approx(-std::cos(2 * (p.theta - p.b))));
    CHECK(p.coincidences > 0);
  }
  CHECK(curve_tsv(curve).rfind("theta\tb\tNc\tE\tE_singlet\n", 0) == 0);
  CHECK(curve_tsv(curve) == curve_tsv(correlation_curve(cfg, thetas, 4)));
}
