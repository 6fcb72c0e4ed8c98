#pragma once

#include <array>
#include <string>

#include "eprb/quantum_reference.hpp"
#include "eprb/statistics.hpp"

namespace eprb {

/// Relative detector efficiencies r_i = (eta_i(+) - eta_i(-)) / (eta_i(+) + eta_i(-)).
struct EfficiencyParams {
  double r1 = 0.0;
  double r2 = 0.0;
};

struct DetectorEfficiencies {
  double eta1_plus = 1.0;
  double eta1_minus = 1.0;
  double eta2_plus = 1.0;
  double eta2_minus = 1.0;

  [[nodiscard]] EfficiencyParams relative() const;
};

/// Quantum state restricted to the two settings per station.
/// Index 0 is a (or b), index 1 is a' (or b').
struct StateTable {
  std::array<double, 2> e1{};
  std::array<double, 2> e2{};
  std::array<std::array<double, 2>, 2> e{};  // [setting1][setting2]

  /// Every entry in [-1, 1] and all sixteen P(xy|ab) in [0, 1].
  [[nodiscard]] bool physical() const;

  static StateTable from_state(const QuantumState& state, double a, double a_prime, double b,
                               double b_prime);
};

/// Measured (E1, E2, E) indexed by [setting1][setting2].
using MeasuredTable = std::array<std::array<Averages, 2>, 2>;

struct SettingPair {
  int setting1 = 0;
  int setting2 = 0;

  friend bool operator==(const SettingPair&, const SettingPair&) = default;
};

/// Observed averages produced by detectors with relative efficiencies
/// `params` looking at a state with the given ideal averages:
///
///   E1 = (r1 + E1^ + r1 r2 E2^ + r2 E^) / D
///   E2 = (r2 + r1 r2 E1^ + E2^ + r1 E^) / D
///   E  = (r1 r2 + r2 E1^ + r1 E2^ + E^) / D
///   D  = 1 + r1 E1^ + r2 E2^ + r1 r2 E^
///
/// which is what estimates() returns for counts proportional to
/// eta1(x) eta2(y) P(xy|ab). Throws Error(numerical) when |D| < 1e-12.
Averages forward_e(const EfficiencyParams& params, double e1_hat, double e2_hat, double e_hat);

/// forward_e for all four setting pairs.
MeasuredTable forward_table(const EfficiencyParams& params, const StateTable& state);

/// Expected C_xy = kappa1 kappa2 eta1(x) eta2(y) N P(xy|ab).
struct ExpectedCounts {
  double pp = 0.0;
  double mm = 0.0;
  double pm = 0.0;
  double mp = 0.0;
};

ExpectedCounts forward_counts(const DetectorEfficiencies& eta, double e1_hat, double e2_hat,
                              double e_hat, double pairs, double kappa1 = 1.0, double kappa2 = 1.0);

/// Unknown order: r1 r2 E1(a) E1(a') E2(b) E2(b') E(a,b) E(a,b') E(a',b) E(a',b').
inline constexpr std::size_t kUnknowns = 10;
using UnknownVector = std::array<double, kUnknowns>;

UnknownVector pack(const EfficiencyParams& params, const StateTable& state);
std::array<const char*, kUnknowns> unknown_names();
/// Position of E(setting1, setting2) in an UnknownVector.
std::size_t correlation_slot(SettingPair pair);

struct ConsistencySolution {
  SettingPair excluded;
  EfficiencyParams params;
  StateTable state;  // the excluded correlation entry is NaN
  double residual_norm = 0.0;
  double residual_inf = 0.0;
  bool converged = false;
  int start_index = -1;
};

/// Solves the nine equations of the three setting pairs other than
/// `excluded` for r1, r2 and the seven state entries they involve.
///
/// Nine starts: r1, r2 in {0, -0.2, +0.2} (r1 outer), state seeded from the
/// measured averages. Among converged starts the lowest start index wins;
/// if none converged, the lowest residual wins.
ConsistencySolution solve_triple(const MeasuredTable& measured, SettingPair excluded);

struct ConsistencyTable {
  /// Excluding (a',b'), (a',b), (a,b'), (a,b).
  std::array<ConsistencySolution, 4> rows;
  /// max - min per unknown over the rows that contain it.
  UnknownVector spread{};

  [[nodiscard]] double max_spread() const;
  [[nodiscard]] bool all_converged() const;
};

ConsistencyTable consistency_table(const MeasuredTable& measured);

/// ||F||_2 of all twelve equations at the given point.
double full_residual(const EfficiencyParams& params, const StateTable& state,
                     const MeasuredTable& measured);

struct FullFit {
  EfficiencyParams params;
  StateTable state;
  double residual_norm = 0.0;
};

/// Least-squares fit of all twelve equations with the multi-start solver.
FullFit minimize_full_residual(const MeasuredTable& measured);

/// Measured averages from `estimates` JSON ({"estimates": [{"A1","A2","E1","E2","E"}...]})
/// or TSV with a header line containing A1 A2 E1 E2 E. Throws Error(format)
/// when a setting pair is missing.
MeasuredTable parse_measurements(const std::string& text);

MeasuredTable measured_from_counts(const CoincidenceCounts& counts);

/// Consistency TSV: one row per excluded pair, "--" marking the excluded
/// entry, followed by residual columns, then comment lines with the spread
/// and the best twelve-equation residual.
std::string consistency_tsv(const ConsistencyTable& table, const FullFit& fit);

}  // namespace eprb
