#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "eprb/efficiency.hpp"
#include "eprb/error.hpp"
#include "eprb/quantum_reference.hpp"
#include "eprb/statistics.hpp"

using namespace eprb;
using std::numbers::pi;

namespace {

// Reference measurement row with (a',b') excluded.
StateTable reference_row_state() {
  StateTable s;
  s.e1 = {-0.17, -0.23};
  s.e2 = {0.11, -0.13};
  s.e = {{{-0.72, 0.47}, {-0.52, 0.0}}};
  return s;
}

StateTable random_physical_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    StateTable s;
    for (int i = 0; i < 2; ++i) {
      s.e1[i] = 0.6 * u(rng);
      s.e2[i] = 0.6 * u(rng);
      for (int j = 0; j < 2; ++j) s.e[i][j] = u(rng);
    }
    if (s.physical()) return s;
  }
}

// Independent check of the forward map: weight the ideal probabilities by
// the detector efficiencies and renormalize.
Averages forward_by_probabilities(const EfficiencyParams& p, double e1, double e2, double e) {
  double c[2][2];
  for (int xi = 0; xi < 2; ++xi) {
    for (int yi = 0; yi < 2; ++yi) {
      const int x = xi == 0 ? 1 : -1;
      const int y = yi == 0 ? 1 : -1;
      c[xi][yi] = (1 + x * p.r1) * (1 + y * p.r2) * (1 + x * e1 + y * e2 + x * y * e);
    }
  }
  return averages_from_counts(c[0][0], c[1][1], c[0][1], c[1][0]);
}

double coordinate_descent(const MeasuredTable& m, std::mt19937_64& rng, int restarts) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    UnknownVector x{};
    for (auto& v : x) v = u(rng);
    auto eval = [&](const UnknownVector& v) {
      StateTable s;
      s.e1 = {v[2], v[3]};
      s.e2 = {v[4], v[5]};
      s.e = {{{v[6], v[7]}, {v[8], v[9]}}};
      try {
        return full_residual({v[0], v[1]}, s, m);
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    double f = eval(x);
    for (double step = 0.25; step > 1e-9; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t k = 0; k < kUnknowns; ++k) {
          for (double dir : {step, -step}) {
            auto y = x;
            y[k] = std::clamp(y[k] + dir, -1.0, 1.0);
            const double g = eval(y);
            if (g < f) {
              x = y;
              f = g;
              improved = true;
            }
          }
        }
      }
    }
    best = std::min(best, f);
  }
  return best;
}

}  // namespace

TEST_CASE("forward model limits") {
  const auto same = forward_e({0.0, 0.0}, -0.3, 0.2, -0.6);
  CHECK(same.e1 == -0.3);
  CHECK(same.e2 == 0.2);
  CHECK(same.e == -0.6);
  const auto ones = forward_e({1.0, 1.0}, -0.3, 0.2, -0.6);
  CHECK(ones.e1 == doctest::Approx(1.0));
  CHECK(ones.e2 == doctest::Approx(1.0));
  CHECK(ones.e == doctest::Approx(1.0));
  CHECK_THROWS_AS(forward_e({1.0, 1.0}, -1.0, -1.0, 1.0), Error);
}

TEST_CASE("forward model agrees with efficiency-weighted probabilities") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> r(-0.9, 0.9);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_physical_state(rng);
    const EfficiencyParams p{r(rng), r(rng)};
    const auto a = forward_e(p, s.e1[0], s.e2[1], s.e[0][1]);
    const auto b = forward_by_probabilities(p, s.e1[0], s.e2[1], s.e[0][1]);
    CHECK(a.e1 == doctest::Approx(b.e1).epsilon(1e-12));
    CHECK(a.e2 == doctest::Approx(b.e2).epsilon(1e-12));
    CHECK(a.e == doctest::Approx(b.e).epsilon(1e-12));
  }
}

TEST_CASE("estimates of expected counts reproduce the forward model") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eta(0.05, 1.0);
  std::uniform_real_distribution<double> kappa(0.1, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_physical_state(rng);
    const DetectorEfficiencies d{eta(rng), eta(rng), eta(rng), eta(rng)};
    const auto c = forward_counts(d, s.e1[1], s.e2[0], s.e[1][0], 1e6, kappa(rng), kappa(rng));
    if (c.pp + c.mm + c.pm + c.mp < 1e-6) continue;
    const auto est = averages_from_counts(c.pp, c.mm, c.pm, c.mp);
    const auto model = forward_e(d.relative(), s.e1[1], s.e2[0], s.e[1][0]);
    CHECK(std::abs(est.e1 - model.e1) < 1e-12);
    CHECK(std::abs(est.e2 - model.e2) < 1e-12);
    CHECK(std::abs(est.e - model.e) < 1e-12);
  }
}

TEST_CASE("expected counts") {
  const DetectorEfficiencies equal{0.5, 0.5, 0.8, 0.8};
  const auto s = QuantumState::singlet();
  const auto c = forward_counts(equal, 0.0, 0.0, s.e(0.3, 0.3), 1000.0);
  CHECK(c.pp == doctest::Approx(0.0));
  CHECK(c.mm == doctest::Approx(0.0));
  CHECK(c.pm == doctest::Approx(0.4 * 1000.0 * 0.5));
  const auto g = forward_counts(equal, 0.0, 0.0, s.e(0.0, 0.2), 1000.0);
  CHECK(g.pp / g.pm == doctest::Approx(probability_xy(1, 1, 0.0, 0.2, s) / probability_xy(1, -1, 0.0, 0.2, s)));
  CHECK_THROWS_AS(forward_counts({0.0, 1.0, 1.0, 1.0}, 0, 0, 0, 10.0), Error);
  CHECK_THROWS_AS(forward_counts(equal, 0, 0, 0, 10.0, 1.5), Error);
}

TEST_CASE("reference row round trip") {
  const EfficiencyParams p{0.17, -0.01};
  const auto state = reference_row_state();
  const auto measured = forward_table(p, state);
  const auto sol = solve_triple(measured, {1, 1});
  REQUIRE(sol.converged);
  const auto got = pack(sol.params, sol.state);
  const auto want = pack(p, state);
  for (std::size_t k = 0; k < 9; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-6));
  CHECK(std::isnan(got[9]));
}

TEST_CASE("singlet data recovers symmetric detectors") {
  const auto state = StateTable::from_state(QuantumState::singlet(), 0.0, pi / 4, pi / 8, 3 * pi / 8);
  const auto table = consistency_table(forward_table({0.0, 0.0}, state));
  CHECK(table.all_converged());
  for (const auto& row : table.rows) {
    CHECK(std::abs(row.params.r1) < 1e-6);
    CHECK(std::abs(row.params.r2) < 1e-6);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(row.state.e1[i]) < 1e-6);
      CHECK(std::abs(row.state.e2[i]) < 1e-6);
    }
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        if (row.excluded == SettingPair{i, j}) continue;
        CHECK(row.state.e[i][j] == doctest::Approx(state.e[i][j]).epsilon(1e-6));
      }
    }
  }
  CHECK(table.max_spread() < 1e-5);
}

TEST_CASE("self-consistent data gives identical rows") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> r(-0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto state = random_physical_state(rng);
    const EfficiencyParams p{r(rng), r(rng)};
    const auto measured = forward_table(p, state);
    const auto table = consistency_table(measured);
    CHECK(table.max_spread() < 1e-5);
    const auto fit = minimize_full_residual(measured);
    CHECK(fit.residual_norm < 1e-8);
    CHECK(full_residual(p, state, measured) < 1e-14);
  }
}

TEST_CASE("a triple can have a second exact root") {
  // Three setting pairs leave r1 and r2 pinned by two nonlinear consistency
  // conditions, which may have more than one physical solution. This draw
  // has one; the full twelve equations still single out the truth.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> r(-0.5, 0.5);
  StateTable state;
  EfficiencyParams p;
  for (int trial = 0; trial < 10; ++trial) {
    state = random_physical_state(rng);
    p = {r(rng), r(rng)};
  }
  const auto measured = forward_table(p, state);
  const auto sol = solve_triple(measured, {0, 1});
  REQUIRE(sol.converged);
  CHECK(sol.params.r1 == doctest::Approx(p.r1).epsilon(1e-6));
  CHECK(std::abs(sol.params.r2 - p.r2) > 0.1);
  for (const auto pair : {SettingPair{0, 0}, SettingPair{1, 0}, SettingPair{1, 1}}) {
    const auto i = pair.setting1;
    const auto j = pair.setting2;
    const auto got = forward_e(sol.params, sol.state.e1[i], sol.state.e2[j], sol.state.e[i][j]);
    CHECK(std::abs(got.e1 - measured[i][j].e1) < 1e-9);
    CHECK(std::abs(got.e2 - measured[i][j].e2) < 1e-9);
    CHECK(std::abs(got.e - measured[i][j].e) < 1e-9);
  }
  const auto fit = minimize_full_residual(measured);
  CHECK(fit.params.r2 == doctest::Approx(p.r2).epsilon(1e-6));
}

TEST_CASE("perturbed data has a positive residual floor") {
  const auto state = StateTable::from_state(QuantumState::singlet(), 0.0, pi / 4, pi / 8, 3 * pi / 8);
  auto measured = forward_table({0.0, 0.0}, state);
  CHECK(full_residual({0.0, 0.0}, state, measured) == 0.0);
  measured[1][1].e1 += 0.1;
  std::mt19937_64 rng(15);
  const double floor = coordinate_descent(measured, rng, 6);
  const auto fit = minimize_full_residual(measured);
  CHECK(floor > 1e-3);
  CHECK(fit.residual_norm > 1e-3);
  CHECK(fit.residual_norm <= floor + 1e-6);
  CHECK(full_residual(fit.params, fit.state, measured) == doctest::Approx(fit.residual_norm));
}

TEST_CASE("measurement parsing") {
  const std::string json = R"({"estimates": [
    {"A1": 0, "A2": 0, "E1": 0.1, "E2": 0.2, "E": -0.7},
    {"A1": 0, "A2": 1, "E1": 0.1, "E2": 0.2, "E": 0.7},
    {"A1": 1, "A2": 0, "E1": 0.1, "E2": 0.2, "E": -0.7},
    {"A1": 1, "A2": 1, "E1": 0.1, "E2": 0.3, "E": -0.6}]})";
  const auto m = parse_measurements(json);
  CHECK(m[1][1].e2 == 0.3);
  CHECK(m[0][1].e == 0.7);

  const std::string tsv = "A1\tA2\tE1\tE2\tE\n0\t0\t0.1\t0.2\t-0.7\n0\t1\t0\t0\t0.7\n1\t0\t0\t0\t-0.7\n1\t1\t0\t0.5\t-0.7\n";
  CHECK(parse_measurements(tsv)[1][1].e2 == 0.5);

  const std::string missing = "A1\tA2\tE1\tE2\tE\n0\t0\t0.1\t0.2\t-0.7\n";
  try {
    parse_measurements(missing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("missing setting pair") != std::string::npos);
  }
}

TEST_CASE("consistency TSV layout") {
  const auto state = StateTable::from_state(QuantumState::singlet(), 0.0, pi / 4, pi / 8, 3 * pi / 8);
  const auto measured = forward_table({0.1, -0.1}, state);
  const auto tsv = consistency_tsv(consistency_table(measured), minimize_full_residual(measured));
  CHECK(tsv.rfind("r1\tr2\tE1(a)\tE1(a')\tE2(b)\tE2(b')\tE(a,b)\tE(a,b')\tE(a',b)\tE(a',b')", 0) == 0);
  std::size_t dashes = 0;
  for (std::size_t pos = tsv.find("--"); pos != std::string::npos; pos = tsv.find("--", pos + 2)) ++dashes;
  CHECK(dashes == 4);
  CHECK(tsv.find("# spread") != std::string::npos);
  CHECK(tsv.find("+0.100000") != std::string::npos);
}
