#include "eprb/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "eprb/error.hpp"

namespace eprb {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAngleMatchTolerance = 1e-9;

Stream setting_stream(int station) { return station == 1 ? Stream::setting1 : Stream::setting2; }
Stream splitter_stream(int station) { return station == 1 ? Stream::splitter1 : Stream::splitter2; }
Stream delay_stream(int station) { return station == 1 ? Stream::delay1 : Stream::delay2; }

StationDataset station_shell(const SimulationConfig& cfg, int station) {
  StationDataset ds;
  ds.station_id = station;
  ds.tau_ns = cfg.tau_ns;
  ds.base_angle = station == 1 ? cfg.angle1 : cfg.angle2;
  ds.angle_increment = cfg.angle_increment;
  ds.provenance = "simulation seed=" + std::to_string(cfg.seed) + " model=" + to_string(cfg.model) +
                  " pairs=" + std::to_string(cfg.pair_count) + " t0_ns=" + format_double(cfg.t0_ns);
  return ds;
}

void sort_by_time(std::vector<EventRecord>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.time_tag < b.time_tag; });
}

double reduce_pi(double angle) {
  double r = std::fmod(angle, std::numbers::pi);
  if (r < 0.0) r += std::numbers::pi;
  return r >= std::numbers::pi ? 0.0 : r;
}

bool same_angle(double x, double y) {
  const double d = std::abs(reduce_pi(x) - reduce_pi(y));
  return d < kAngleMatchTolerance || std::numbers::pi - d < kAngleMatchTolerance;
}

}  // namespace

TimeTagModel parse_time_tag_model(const std::string& text) {
  if (text == "uniform") return TimeTagModel::uniform;
  if (text == "exponential") return TimeTagModel::exponential;
  fail(ErrorKind::usage, "unknown time-tag model '" + text + "' (uniform|exponential)");
}

std::string to_string(TimeTagModel model) {
  return model == TimeTagModel::uniform ? "uniform" : "exponential";
}

void validate(const SimulationConfig& cfg) {
  if (cfg.pair_count < 1) fail(ErrorKind::usage, "pair_count must be >= 1");
  if (!(cfg.t0_ns > 0.0) || !std::isfinite(cfg.t0_ns)) fail(ErrorKind::usage, "t0_ns must be > 0");
  if (!(cfg.mean_interarrival_ns > 0.0) || !std::isfinite(cfg.mean_interarrival_ns)) {
    fail(ErrorKind::usage, "mean_interarrival_ns must be > 0");
  }
  if (!(cfg.tau_ns > 0.0) || !std::isfinite(cfg.tau_ns)) fail(ErrorKind::usage, "tau_ns must be > 0");
  if (!std::isfinite(cfg.angle1) || !std::isfinite(cfg.angle2) || !std::isfinite(cfg.angle_increment)) {
    fail(ErrorKind::usage, "angles must be finite");
  }
  // Largest tag: total span plus one T0 delay (exponential tails are longer,
  // but not by 2^53 / 10^13).
  const double span_ticks =
      (static_cast<double>(cfg.pair_count) * cfg.mean_interarrival_ns * 2.0 + 50.0 * cfg.t0_ns) / cfg.tau_ns;
  if (span_ticks > 0x1p53) fail(ErrorKind::usage, "simulated time span exceeds exact tick range");
}

std::vector<std::string> config_warnings(const SimulationConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.mean_interarrival_ns < 10.0 * cfg.t0_ns) {
    out.push_back("mean_interarrival_ns (" + format_double(cfg.mean_interarrival_ns) +
                  ") is not much larger than t0_ns (" + format_double(cfg.t0_ns) +
                  "); pairs will overlap in time");
  }
  return out;
}

std::string config_json(const SimulationConfig& cfg) {
  nlohmann::ordered_json j;
  j["pair_count"] = cfg.pair_count;
  j["t0_ns"] = cfg.t0_ns;
  j["time_tag_model"] = to_string(cfg.model);
  j["angle1_rad"] = cfg.angle1;
  j["angle2_rad"] = cfg.angle2;
  j["angle_increment_rad"] = cfg.angle_increment;
  j["mean_interarrival_ns"] = cfg.mean_interarrival_ns;
  j["tau_ns"] = cfg.tau_ns;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

SimulationConfig parse_config_json(const std::string& text, SimulationConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fail(ErrorKind::usage, "config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::usage, "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "pair_count") {
        base.pair_count = v.get<std::uint64_t>();
      } else if (key == "t0_ns") {
        base.t0_ns = v.get<double>();
      } else if (key == "time_tag_model") {
        base.model = parse_time_tag_model(v.get<std::string>());
      } else if (key == "angle1_rad") {
        base.angle1 = v.get<double>();
      } else if (key == "angle2_rad") {
        base.angle2 = v.get<double>();
      } else if (key == "angle_increment_rad") {
        base.angle_increment = v.get<double>();
      } else if (key == "mean_interarrival_ns") {
        base.mean_interarrival_ns = v.get<double>();
      } else if (key == "tau_ns") {
        base.tau_ns = v.get<double>();
      } else if (key == "seed") {
        base.seed = v.get<std::uint64_t>();
      } else {
        fail(ErrorKind::usage, "config: unknown field '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::usage, "config: bad value for field '" + key + "': " + e.what());
    }
  }
  validate(base);
  return base;
}

double draw_source_angle(std::uint64_t seed, std::uint64_t n) {
  return kTwoPi * EventDraws(seed, Stream::source_angle, n).closed_open01();
}

double draw_interarrival(std::uint64_t seed, std::uint64_t n, double mean_ns) {
  return -mean_ns * std::log(EventDraws(seed, Stream::arrival, n).open01());
}

std::vector<ParticlePair> emit_pairs(const SimulationConfig& cfg) {
  validate(cfg);
  const auto count = static_cast<std::ptrdiff_t>(cfg.pair_count);
  std::vector<ParticlePair> pairs(cfg.pair_count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < count; ++n) {
    pairs[n].xi = draw_source_angle(cfg.seed, static_cast<std::uint64_t>(n));
    pairs[n].emission_ns = draw_interarrival(cfg.seed, static_cast<std::uint64_t>(n), cfg.mean_interarrival_ns);
  }
  double clock = 0.0;
  for (auto& p : pairs) {
    clock += p.emission_ns;
    p.emission_ns = clock;
  }
  return pairs;
}

double eom_rotate(double xi, int station, int setting, double base_angle, double increment) {
  const double zeta = base_angle + setting * increment;
  return xi + (station - 1) * (std::numbers::pi / 2.0) - zeta;
}

int beam_splitter(double alpha, double r) {
  const double c = std::cos(alpha);
  return r <= c * c ? 1 : -1;
}

double lambda_of(double alpha, double t0_ns) {
  const double s = std::sin(2.0 * alpha);
  const double s2 = s * s;
  return t0_ns * s2 * s2;
}

double time_tag_uniform(double alpha, double t0_ns, double r) { return lambda_of(alpha, t0_ns) * r; }

double time_tag_exponential(double alpha, double t0_ns, double r) {
  return -lambda_of(alpha, t0_ns) * std::log(r);
}

double time_tag_delay(TimeTagModel model, double alpha, double t0_ns, double r) {
  return model == TimeTagModel::uniform ? time_tag_uniform(alpha, t0_ns, r)
                                        : time_tag_exponential(alpha, t0_ns, r);
}

std::uint64_t quantize(double time_ns, double tau_ns) {
  return static_cast<std::uint64_t>(std::floor(time_ns / tau_ns + 0.5));
}

EventRecord detect(const SimulationConfig& cfg, int station, std::uint64_t n, const ParticlePair& pair,
                   std::optional<int> forced_setting) {
  const int setting = forced_setting ? *forced_setting
                                     : static_cast<int>(EventDraws(cfg.seed, setting_stream(station), n).word(0) >> 31);
  const double base = station == 1 ? cfg.angle1 : cfg.angle2;
  const double alpha = eom_rotate(pair.xi, station, setting, base, cfg.angle_increment);
  const int outcome = beam_splitter(alpha, EventDraws(cfg.seed, splitter_stream(station), n).open01());
  const double delay =
      time_tag_delay(cfg.model, alpha, cfg.t0_ns, EventDraws(cfg.seed, delay_stream(station), n).open01());
  return {quantize(pair.emission_ns + delay, cfg.tau_ns), static_cast<std::uint8_t>(setting),
          static_cast<std::int8_t>(outcome)};
}

StationDataset simulate_station(const SimulationConfig& cfg, int station, std::span<const ParticlePair> pairs,
                                std::span<const std::uint8_t> forced_settings) {
  if (station != 1 && station != 2) fail(ErrorKind::usage, "station must be 1 or 2");
  if (!forced_settings.empty() && forced_settings.size() != pairs.size()) {
    fail(ErrorKind::usage, "forced setting sequence length differs from pair count");
  }
  auto ds = station_shell(cfg, station);
  ds.events.resize(pairs.size());
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < count; ++n) {
    std::optional<int> forced;
    if (!forced_settings.empty()) forced = forced_settings[n];
    ds.events[n] = detect(cfg, station, static_cast<std::uint64_t>(n), pairs[n], forced);
  }
  sort_by_time(ds.events);
  return ds;
}

std::pair<StationDataset, StationDataset> run_simulation(const SimulationConfig& cfg) {
  const auto pairs = emit_pairs(cfg);
  return {simulate_station(cfg, 1, pairs), simulate_station(cfg, 2, pairs)};
}

std::pair<StationDataset, StationDataset> run_simulation_serial(const SimulationConfig& cfg) {
  validate(cfg);
  auto ds1 = station_shell(cfg, 1);
  auto ds2 = station_shell(cfg, 2);
  ds1.events.reserve(cfg.pair_count);
  ds2.events.reserve(cfg.pair_count);
  double clock = 0.0;
  for (std::uint64_t n = 0; n < cfg.pair_count; ++n) {
    clock += draw_interarrival(cfg.seed, n, cfg.mean_interarrival_ns);
    const ParticlePair pair{draw_source_angle(cfg.seed, n), clock};
    ds1.events.push_back(detect(cfg, 1, n, pair));
    ds2.events.push_back(detect(cfg, 2, n, pair));
  }
  sort_by_time(ds1.events);
  sort_by_time(ds2.events);
  return {std::move(ds1), std::move(ds2)};
}

std::vector<CurvePoint> correlation_curve(const SimulationConfig& cfg, const std::vector<double>& thetas,
                                          Ticks window, MatchMode mode) {
  if (thetas.empty()) fail(ErrorKind::usage, "theta grid is empty");
  struct Tally {
    double sum_xy = 0.0;
    std::uint64_t n = 0;
  };
  const std::array<double, 2> station2_angles{cfg.angle2, cfg.angle2 + cfg.angle_increment};
  std::vector<std::array<Tally, 2>> tallies(thetas.size());

  for (std::size_t k = 0; k < thetas.size(); ++k) {
    SimulationConfig run = cfg;
    run.angle1 = thetas[k];
    run.seed = mix_seed(cfg.seed ^ mix_seed(k + 1));
    const auto [ds1, ds2] = run_simulation(run);
    const auto counts = coincidences(ds1, ds2, MatchConfig{window, 0, mode});
    for (int s1 = 0; s1 < 2; ++s1) {
      const double theta = setting_angle(ds1, s1);
      for (std::size_t g = 0; g < thetas.size(); ++g) {
        if (!same_angle(theta, thetas[g])) continue;
        for (int s2 = 0; s2 < 2; ++s2) {
          const auto& c = counts.at(s1, s2);
          auto& t = tallies[g][s2];
          t.sum_xy += static_cast<double>(c.at(1, 1)) + static_cast<double>(c.at(-1, -1)) -
                      static_cast<double>(c.at(1, -1)) - static_cast<double>(c.at(-1, 1));
          t.n += c.total();
        }
        break;
      }
    }
  }

  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < thetas.size(); ++g) {
    for (int s2 = 0; s2 < 2; ++s2) {
      CurvePoint p;
      p.theta = thetas[g];
      p.b = station2_angles[s2];
      p.coincidences = tallies[g][s2].n;
      if (p.coincidences > 0) p.e = tallies[g][s2].sum_xy / static_cast<double>(p.coincidences);
      p.reference = -std::cos(2.0 * (p.theta - p.b));
      out.push_back(p);
    }
  }
  return out;
}

std::string curve_tsv(const std::vector<CurvePoint>& points) {
  std::ostringstream out;
  out << "theta\tb\tNc\tE\tE_singlet\n";
  for (const auto& p : points) {
    out << format_double(p.theta) << '\t' << format_double(p.b) << '\t' << p.coincidences << '\t'
        << (p.e ? format_double(*p.e) : std::string("NA")) << '\t' << format_double(p.reference) << '\n';
  }
  return out.str();
}

double malus_frequency(double alpha, std::uint64_t trials, std::uint64_t seed) {
  if (trials == 0) fail(ErrorKind::usage, "trials must be > 0");
  std::uint64_t plus = 0;
  const auto count = static_cast<std::ptrdiff_t>(trials);
#pragma omp parallel for reduction(+ : plus) schedule(static)
  for (std::ptrdiff_t n = 0; n < count; ++n) {
    if (beam_splitter(alpha, EventDraws(seed, Stream::malus_probe, static_cast<std::uint64_t>(n)).open01()) == 1) {
      ++plus;
    }
  }
  return static_cast<double>(plus) / static_cast<double>(trials);
}

}  // namespace eprb
