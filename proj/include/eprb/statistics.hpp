#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eprb/coincidence.hpp"
#include "eprb/dataset.hpp"

namespace eprb {

inline constexpr double kLocalityThresholdSigmas = 5.0;
inline constexpr double kErrorBarSigmas = 2.5;

/// E1, E2 and E for one setting pair.
struct Averages {
  double e1 = 0.0;
  double e2 = 0.0;
  double e = 0.0;
};

/// Ratios of the counter combinations; counts may be expected (real) values.
/// Requires pp + mm + pm + mp > 0.
Averages averages_from_counts(double pp, double mm, double pm, double mp);

/// Averages for one setting pair. Empty optionals mean N_c == 0.
struct CorrelationEstimates {
  int setting1 = 0;
  int setting2 = 0;
  std::uint64_t coincidences = 0;
  std::optional<double> e1;
  std::optional<double> e2;
  std::optional<double> e;
  std::optional<double> sigma_bound;

  [[nodiscard]] bool defined() const noexcept { return coincidences > 0; }
};

/// CHSH combination S = E(a,b) - E(a,b') + E(a',b) + E(a',b'), where a/a'
/// are station-1 settings 0/1 and b/b' are station-2 settings 0/1.
struct BellResult {
  std::optional<double> s;
  std::array<std::array<std::optional<double>, 2>, 2> e{};  // [setting1][setting2]
  Ticks window = 0;
  Ticks delta_g = 0;
};

/// One comparison of a single-particle average across the remote setting.
struct LocalityCheck {
  int station = 1;
  int local_setting = 0;
  std::optional<double> average_remote0;
  std::optional<double> average_remote1;
  std::optional<double> difference;  // |average_remote0 - average_remote1|
  std::optional<double> threshold;
  bool violated = false;
};

struct LocalityTestReport {
  double threshold_sigmas = kLocalityThresholdSigmas;
  std::array<LocalityCheck, 4> checks{};  // station 1: a, a'; station 2: b, b'

  [[nodiscard]] bool any_violated() const noexcept;
  [[nodiscard]] bool all_defined() const noexcept;
  [[nodiscard]] std::string verdict() const;  // compatible | violated | undefined
};

std::optional<double> sigma_bound(std::uint64_t coincidences);

CorrelationEstimates estimates(const CoincidenceCounts& counts, int setting1, int setting2);
CorrelationEstimates estimates(const SettingCounts& counts);

BellResult bell_s(const CoincidenceCounts& counts);

LocalityTestReport locality_test(const CoincidenceCounts& counts,
                                 double threshold_sigmas = kLocalityThresholdSigmas);

struct WindowPoint {
  Ticks window = 0;
  CoincidenceCounts counts;
  BellResult bell;
  LocalityTestReport locality;
  std::array<std::array<CorrelationEstimates, 2>, 2> estimates{};
};

struct SweepOptions {
  Ticks delta_g = 0;
  MatchMode mode = MatchMode::causal_greedy;
  double threshold_sigmas = kLocalityThresholdSigmas;
};

WindowPoint analyze_window(const StationDataset& ds1, const StationDataset& ds2, Ticks window,
                           const SweepOptions& options);

/// One WindowPoint per entry of `windows` (ascending, nonempty), evaluated in
/// parallel; output order follows `windows`.
std::vector<WindowPoint> window_sweep(const StationDataset& ds1, const StationDataset& ds2,
                                      const std::vector<Ticks>& windows,
                                      const SweepOptions& options = {});

/// Single-threaded reference for window_sweep.
std::vector<WindowPoint> window_sweep_serial(const StationDataset& ds1, const StationDataset& ds2,
                                             const std::vector<Ticks>& windows,
                                             const SweepOptions& options = {});

/// TSV: W_ticks S E_ab E_ab' E_a'b E_a'b' Nc_total verdict.
std::string sweep_tsv(const std::vector<WindowPoint>& points);

/// JSON mirror of the sweep with every per-setting estimate.
std::string sweep_json(const std::vector<WindowPoint>& points, double tau_ns);

}  // namespace eprb
