#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eprb/coincidence.hpp"
#include "eprb/dataset.hpp"
#include "eprb/rng.hpp"

namespace eprb {

enum class TimeTagModel {
  uniform,      // delay = lambda(alpha) * r
  exponential,  // delay = -lambda(alpha) * ln r
};

TimeTagModel parse_time_tag_model(const std::string& text);
std::string to_string(TimeTagModel model);

struct SimulationConfig {
  std::uint64_t pair_count = 1'000'000;
  double t0_ns = 2000.0;
  TimeTagModel model = TimeTagModel::uniform;
  double angle1 = 0.0;                       // a; a' = a + angle_increment
  double angle2 = std::numbers::pi / 8.0;    // b; b' = b + angle_increment
  double angle_increment = std::numbers::pi / 4.0;
  double mean_interarrival_ns = 30000.0;
  double tau_ns = kDefaultTauNs;
  std::uint64_t seed = 1;
};

/// Throws Error(usage) on an invalid configuration.
void validate(const SimulationConfig& cfg);

/// Soft problems, such as pairs that are not well separated in time.
std::vector<std::string> config_warnings(const SimulationConfig& cfg);

std::string config_json(const SimulationConfig& cfg);

/// Parses the JSON config; every field is optional. Unknown keys and type
/// mismatches raise Error(usage) naming the field.
SimulationConfig parse_config_json(const std::string& text, SimulationConfig base = {});

/// Shared polarization angle and emission time of pair n. Photon 1 carries
/// polarization xi, photon 2 carries xi + pi/2.
struct ParticlePair {
  double xi = 0.0;
  double emission_ns = 0.0;

  [[nodiscard]] double polarization(int station) const noexcept {
    return xi + (station - 1) * (std::numbers::pi / 2.0);
  }
};

/// xi of pair n, uniform on [0, 2 pi).
double draw_source_angle(std::uint64_t seed, std::uint64_t n);

/// Exponential gap preceding pair n.
double draw_interarrival(std::uint64_t seed, std::uint64_t n, double mean_ns);

/// Pairs 0..count-1; emission times are the running sum of the gaps.
std::vector<ParticlePair> emit_pairs(const SimulationConfig& cfg);

/// Polarization after the EOM: xi + (station - 1) pi/2 - (base + setting * increment).
double eom_rotate(double xi, int station, int setting, double base_angle, double increment);

/// +1 if r <= cos^2(alpha), else -1.
int beam_splitter(double alpha, double r);

/// T0 sin^4(2 alpha).
double lambda_of(double alpha, double t0_ns);

double time_tag_uniform(double alpha, double t0_ns, double r);
double time_tag_exponential(double alpha, double t0_ns, double r);
double time_tag_delay(TimeTagModel model, double alpha, double t0_ns, double r);

/// Round-half-up quantization of a time in ns onto ticks of tau.
std::uint64_t quantize(double time_ns, double tau_ns);

/// Detection record of pair n at one station. Reads only the station's own
/// substreams, the shared particle and the station's configuration.
EventRecord detect(const SimulationConfig& cfg, int station, std::uint64_t n,
                   const ParticlePair& pair, std::optional<int> forced_setting = std::nullopt);

/// All detections at one station, sorted by time tag (stable on ties).
/// `forced_settings`, when nonempty, replaces the random setting sequence.
StationDataset simulate_station(const SimulationConfig& cfg, int station,
                                std::span<const ParticlePair> pairs,
                                std::span<const std::uint8_t> forced_settings = {});

/// Both station datasets; the per-pair work runs in parallel.
std::pair<StationDataset, StationDataset> run_simulation(const SimulationConfig& cfg);

/// Single-threaded reference producing the same bytes as run_simulation.
std::pair<StationDataset, StationDataset> run_simulation_serial(const SimulationConfig& cfg);

struct CurvePoint {
  double theta = 0.0;  // station-1 angle
  double b = 0.0;      // station-2 angle
  std::uint64_t coincidences = 0;
  std::optional<double> e;
  double reference = 0.0;  // -cos 2(theta - b)
};

/// Sweeps the station-1 base angle over `thetas` (one simulation per grid
/// point, child seeds derived from cfg.seed) and pools coincidences by the
/// (station-1 angle, station-2 angle) actually used. Station-1 angles that
/// fall on another grid point are credited there, so each returned point
/// collects every run that visited it. Points are ordered by theta, then b.
std::vector<CurvePoint> correlation_curve(const SimulationConfig& cfg,
                                          const std::vector<double>& thetas, Ticks window,
                                          MatchMode mode = MatchMode::causal_greedy);

std::string curve_tsv(const std::vector<CurvePoint>& points);

/// Fraction of +1 outcomes over `trials` splitter draws at fixed alpha.
double malus_frequency(double alpha, std::uint64_t trials, std::uint64_t seed);

}  // namespace eprb
