#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eprb/coincidence.hpp"
#include "eprb/dataset.hpp"
#include "eprb/efficiency.hpp"
#include "eprb/error.hpp"
#include "eprb/io.hpp"
#include "eprb/quantum_reference.hpp"
#include "eprb/simulator.hpp"
#include "eprb/statistics.hpp"

namespace eprb::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct OutputSpec {
  std::string out_dir;
  std::string prefix;

  [[nodiscard]] std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

// Collects outputs and writes the run manifest last.
class Run {
 public:
  Run(std::string subcommand, OutputSpec spec)
      : subcommand_(std::move(subcommand)), spec_(std::move(spec)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) { inputs_.push_back(path); }
  json& config() { return config_; }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const std::string& name, std::string_view content) {
    write_file_atomic(spec_.path(name), content);
    outputs_.push_back(name);
  }

  std::string finish() {
    json manifest;
    manifest["subcommand"] = subcommand_;
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = config_;
    manifest["inputs"] = inputs_;
    manifest["outputs"] = outputs_;
    manifest["seed"] = seed_ ? json(*seed_) : json(nullptr);
    manifest["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const auto name = spec_.prefix + ".manifest.json";
    write_file_atomic(spec_.path(name), manifest.dump(2) + "\n");
    return spec_.path(name);
  }

 private:
  std::string subcommand_;
  OutputSpec spec_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::optional<std::uint64_t> seed_;
};

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

void add_output_options(CLI::App* cmd, OutputSpec& spec, const std::string& default_prefix) {
  spec.out_dir = default_out_dir();
  spec.prefix = default_prefix;
  cmd->add_option("--out-dir", spec.out_dir, "Output directory (default $EPRB_OUT_DIR or .)");
  cmd->add_option("--prefix", spec.prefix, "Output file name prefix")->capture_default_str();
}

struct StationInputs {
  std::string file1;
  std::string file2;
  bool text = false;
};

void add_station_inputs(CLI::App* cmd, StationInputs& in) {
  cmd->add_option("file1", in.file1, "Station 1 data file")->required();
  cmd->add_option("file2", in.file2, "Station 2 data file")->required();
  cmd->add_flag("--text", in.text, "Inputs use the TSV record encoding");
}

std::pair<StationDataset, StationDataset> load_pair(const StationInputs& in, Run& run) {
  const auto encoding = in.text ? DataEncoding::text : DataEncoding::binary;
  auto ds1 = load_station_file(in.file1, encoding);
  auto ds2 = load_station_file(in.file2, encoding);
  run.input(in.file1);
  run.input(in.file2);
  if (ds1.station_id != 1 || ds2.station_id != 2) {
    fail(ErrorKind::format, "expected station 1 file followed by station 2 file");
  }
  if (ds1.tau_ns != ds2.tau_ns) fail(ErrorKind::format, "stations disagree on tau_ns");
  return {std::move(ds1), std::move(ds2)};
}

Ticks window_ticks(double window_ns, double tau_ns) {
  if (!(window_ns > 0.0)) fail(ErrorKind::usage, "window must be > 0 ns");
  const auto ticks = static_cast<Ticks>(std::llround(window_ns / tau_ns));
  if (ticks <= 0) fail(ErrorKind::usage, "window " + format_double(window_ns) + " ns is below one tick");
  return ticks;
}

Ticks resolve_offset(const std::string& spec, const StationDataset& ds1, const StationDataset& ds2) {
  if (spec == "auto") return estimate_global_offset(lag_histogram(ds1, ds2));
  Ticks value = 0;
  const auto* end = spec.data() + spec.size();
  auto [ptr, ec] = std::from_chars(spec.data(), end, value);
  if (ec != std::errc{} || ptr != end) fail(ErrorKind::usage, "--offset must be 'auto' or an integer tick count");
  return value;
}

double parse_decimal(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) fail(ErrorKind::usage, what + ": cannot parse '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(parse_angle(item));
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config_path;
  std::optional<std::uint64_t> pairs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<double> t0;
  std::optional<std::string> angle1;
  std::optional<std::string> angle2;
  std::optional<std::string> increment;
  std::optional<double> interarrival;
  std::optional<double> tau;
  bool text = false;
  OutputSpec output;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  SimulationConfig cfg;
  if (!o.config_path.empty()) cfg = parse_config_json(read_file(o.config_path), cfg);
  if (o.pairs) cfg.pair_count = *o.pairs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.model) cfg.model = parse_time_tag_model(*o.model);
  if (o.t0) cfg.t0_ns = *o.t0;
  if (o.angle1) cfg.angle1 = parse_angle(*o.angle1);
  if (o.angle2) cfg.angle2 = parse_angle(*o.angle2);
  if (o.increment) cfg.angle_increment = parse_angle(*o.increment);
  if (o.interarrival) cfg.mean_interarrival_ns = *o.interarrival;
  if (o.tau) cfg.tau_ns = *o.tau;
  validate(cfg);
  for (const auto& w : config_warnings(cfg)) err << "warning: " << w << '\n';

  Run run("simulate", o.output);
  if (!o.config_path.empty()) run.input(o.config_path);
  run.config() = json::parse(config_json(cfg));
  run.config()["text"] = o.text;
  run.seed(cfg.seed);

  const auto [ds1, ds2] = run_simulation(cfg);
  const auto encoding = o.text ? DataEncoding::text : DataEncoding::binary;
  const std::string ext = o.text ? ".tsv" : ".eprb";
  for (const auto* ds : {&ds1, &ds2}) {
    std::ostringstream buf(std::ios::binary);
    write_station_data(*ds, buf, encoding);
    run.write(o.output.prefix + "_station" + std::to_string(ds->station_id) + ext, buf.str());
  }
  run.write(o.output.prefix + "_config.json", config_json(cfg));
  const auto manifest = run.finish();
  out << "station1\t" << o.output.path(o.output.prefix + "_station1" + ext) << "\t" << ds1.size() << " events\n"
      << "station2\t" << o.output.path(o.output.prefix + "_station2" + ext) << "\t" << ds2.size() << " events\n"
      << "manifest\t" << manifest << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- histogram

struct HistogramOptions {
  StationInputs inputs;
  Ticks bin_width = kDefaultHistogramBinWidth;
  Ticks max_lag = kDefaultHistogramMaxLag;
  OutputSpec output;
};

int cmd_histogram(const HistogramOptions& o, std::ostream& out) {
  Run run("histogram", o.output);
  const auto [ds1, ds2] = load_pair(o.inputs, run);
  run.config() = {{"bin_width_ticks", o.bin_width}, {"max_lag_ticks", o.max_lag}, {"text", o.inputs.text}};
  const auto h = lag_histogram(ds1, ds2, o.bin_width, o.max_lag);
  run.write(o.output.prefix + ".tsv", histogram_tsv(h));
  run.finish();
  out << "pairs_in_range\t" << h.total() << '\n';
  if (h.total() > 0) out << "delta_g_ticks\t" << estimate_global_offset(h) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- match

struct MatchOptions {
  StationInputs inputs;
  double window_ns = 0.0;
  std::string offset = "0";
  std::string mode = "causal_greedy";
  OutputSpec output;
};

int cmd_match(const MatchOptions& o, std::ostream& out) {
  Run run("match", o.output);
  const auto [ds1, ds2] = load_pair(o.inputs, run);
  const MatchConfig cfg{window_ticks(o.window_ns, ds1.tau_ns), resolve_offset(o.offset, ds1, ds2),
                        parse_match_mode(o.mode)};
  run.config() = {{"window_ns", o.window_ns},
                  {"window_ticks", cfg.window},
                  {"delta_g_ticks", cfg.delta_g},
                  {"mode", to_string(cfg.mode)},
                  {"text", o.inputs.text}};
  const auto shifted = apply_offset(ds1, cfg.delta_g);
  const auto pairs = match_pairs(shifted, ds2, cfg);
  run.write(o.output.prefix + ".tsv", pairs_tsv(shifted, ds2, pairs));
  run.finish();
  out << "pairs\t" << pairs.size() << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- analyze / sweep

struct AnalyzeOptions {
  StationInputs inputs;
  double window_ns = 0.0;
  std::vector<std::string> windows;
  std::string offset = "auto";
  std::string mode = "causal_greedy";
  double threshold = kLocalityThresholdSigmas;
  OutputSpec output;
};

json estimates_json(const WindowPoint& p) {
  json list = json::array();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const auto& e = p.estimates[i][j];
      list.push_back({{"A1", i},
                      {"A2", j},
                      {"Nc", e.coincidences},
                      {"E1", e.e1 ? json(*e.e1) : json(nullptr)},
                      {"E2", e.e2 ? json(*e.e2) : json(nullptr)},
                      {"E", e.e ? json(*e.e) : json(nullptr)}});
    }
  }
  return list;
}

void print_point(const WindowPoint& p, double tau_ns, std::ostream& out) {
  out << "W_ns\t" << format_double(static_cast<double>(p.window) * tau_ns) << '\n'
      << "S\t" << (p.bell.s ? format_double(*p.bell.s) : "NA") << '\n'
      << "Nc_total\t" << p.counts.total() << '\n'
      << "locality\t" << p.locality.verdict() << '\n';
}

int run_windows(const std::string& name, const AnalyzeOptions& o, const std::vector<double>& windows_ns,
                std::ostream& out, std::ostream& err) {
  Run run(name, o.output);
  const auto [ds1, ds2] = load_pair(o.inputs, run);
  SweepOptions sweep;
  sweep.delta_g = resolve_offset(o.offset, ds1, ds2);
  sweep.mode = parse_match_mode(o.mode);
  sweep.threshold_sigmas = o.threshold;
  std::vector<Ticks> ticks;
  for (double w : windows_ns) ticks.push_back(window_ticks(w, ds1.tau_ns));
  run.config() = {{"windows_ns", windows_ns},
                  {"windows_ticks", ticks},
                  {"offset", o.offset},
                  {"delta_g_ticks", sweep.delta_g},
                  {"mode", to_string(sweep.mode)},
                  {"threshold_sigmas", o.threshold},
                  {"text", o.inputs.text}};
  const auto points = window_sweep(ds1, ds2, ticks, sweep);

  auto doc = json::parse(sweep_json(points, ds1.tau_ns));
  doc["delta_g_ticks"] = sweep.delta_g;
  doc["mode"] = to_string(sweep.mode);
  if (points.size() == 1) doc["estimates"] = estimates_json(points.front());
  run.write(o.output.prefix + ".tsv", sweep_tsv(points));
  run.write(o.output.prefix + ".json", doc.dump(2) + "\n");
  run.finish();

  out << "delta_g_ticks\t" << sweep.delta_g << '\n';
  for (const auto& p : points) print_point(p, ds1.tau_ns, out);
  const bool any_coincidences =
      std::any_of(points.begin(), points.end(), [](const WindowPoint& p) { return p.counts.total() > 0; });
  if (!any_coincidences) {
    err << "error: zero coincidences\n";
    return kNumerical;
  }
  return kSuccess;
}

// ---------------------------------------------------------------- efficiency

struct EfficiencyOptions {
  std::string measurements;
  OutputSpec output;
};

int cmd_efficiency(const EfficiencyOptions& o, std::ostream& out) {
  Run run("efficiency", o.output);
  run.input(o.measurements);
  const auto measured = parse_measurements(read_file(o.measurements));
  const auto table = consistency_table(measured);
  const auto fit = minimize_full_residual(measured);
  const auto tsv = consistency_tsv(table, fit);
  run.write(o.output.prefix + ".tsv", tsv);
  run.finish();
  out << tsv;
  return kSuccess;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  std::string state = "singlet";
  std::string alpha1 = "0";
  std::string alpha2 = "0";
  std::string angles = "0,pi/4,pi/8,3pi/8";
  OutputSpec output;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  QuantumState state = QuantumState::singlet();
  if (o.state == "product") {
    state = QuantumState::product(parse_angle(o.alpha1), parse_angle(o.alpha2));
  } else if (o.state != "singlet") {
    fail(ErrorKind::usage, "unknown state '" + o.state + "' (singlet|product)");
  }
  const auto angles = parse_list(o.angles);
  if (angles.size() != 4) fail(ErrorKind::usage, "--angles takes four values a,a',b,b'");
  Run run("predict", o.output);
  run.config() = {{"state", state.label()}, {"angles", angles}};
  const auto tsv = predict_tsv(state, {angles[0], angles[1]}, {angles[2], angles[3]});
  run.write(o.output.prefix + ".tsv", tsv);
  run.finish();
  out << tsv << "S\t" << format_double(chsh_s(state, angles[0], angles[1], angles[2], angles[3])) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------- curve

struct CurveOptions {
  std::string config_path;
  std::uint64_t pairs = 1'000'000;
  std::uint64_t seed = 1;
  std::string model = "uniform";
  double t0 = 2000.0;
  std::string b = "pi/8";
  int points = 16;
  double window_ns = 2.0;
  OutputSpec output;
};

int cmd_curve(const CurveOptions& o, std::ostream& out) {
  SimulationConfig cfg;
  if (!o.config_path.empty()) cfg = parse_config_json(read_file(o.config_path), cfg);
  cfg.pair_count = o.pairs;
  cfg.seed = o.seed;
  cfg.model = parse_time_tag_model(o.model);
  cfg.t0_ns = o.t0;
  cfg.angle2 = parse_angle(o.b);
  validate(cfg);
  if (o.points < 1) fail(ErrorKind::usage, "--points must be >= 1");
  std::vector<double> thetas;
  for (int k = 0; k < o.points; ++k) thetas.push_back(k * std::numbers::pi / o.points);
  Run run("curve", o.output);
  run.config() = json::parse(config_json(cfg));
  run.config()["points"] = o.points;
  run.config()["window_ns"] = o.window_ns;
  run.seed(cfg.seed);
  const auto curve = correlation_curve(cfg, thetas, window_ticks(o.window_ns, cfg.tau_ns));
  const auto tsv = curve_tsv(curve);
  run.write(o.output.prefix + ".tsv", tsv);
  run.finish();
  out << tsv;
  return kSuccess;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return kUsage;
    case ErrorKind::numerical:
      return kNumerical;
    case ErrorKind::format:
    case ErrorKind::io:
      return kDataFormat;
  }
  return kDataFormat;
}

}  // namespace

double parse_angle(const std::string& raw) {
  std::string text;
  for (char c : raw) {
    if (c != ' ' && c != '*') text += c;
  }
  const auto pos = text.find("pi");
  const auto parse_number = [&](const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) fail(ErrorKind::usage, "cannot parse angle '" + raw + "'");
    return v;
  };
  if (pos == std::string::npos) return parse_number(text);
  const auto head = text.substr(0, pos);
  const auto tail = text.substr(pos + 2);
  double factor = 1.0;
  if (head == "-") {
    factor = -1.0;
  } else if (!head.empty() && head != "+") {
    factor = parse_number(head);
  }
  double divisor = 1.0;
  if (!tail.empty()) {
    if (tail[0] != '/') fail(ErrorKind::usage, "cannot parse angle '" + raw + "'");
    divisor = parse_number(tail.substr(1));
    if (divisor == 0.0) fail(ErrorKind::usage, "cannot parse angle '" + raw + "'");
  }
  return factor * std::numbers::pi / divisor;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-by-event EPRB simulation and time-tag coincidence analysis", "eprb"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate two station data files");
  simulate->add_option("--config", sim.config_path, "JSON configuration file");
  simulate->add_option("--pairs", sim.pairs, "Number of emitted pairs");
  simulate->add_option("--seed", sim.seed, "64-bit seed");
  simulate->add_option("--model", sim.model, "Time-tag model: uniform|exponential");
  simulate->add_option("--t0", sim.t0, "Time-tag scale T0 in ns");
  simulate->add_option("--angle1", sim.angle1, "Station-1 base angle a");
  simulate->add_option("--angle2", sim.angle2, "Station-2 base angle b");
  simulate->add_option("--increment", sim.increment, "Angle added when the setting is 1");
  simulate->add_option("--interarrival", sim.interarrival, "Mean time between pairs in ns");
  simulate->add_option("--tau", sim.tau, "Time-tag resolution in ns");
  simulate->add_flag("--text", sim.text, "Write TSV records instead of binary");
  add_output_options(simulate, sim.output, "eprb");

  HistogramOptions hist;
  auto* histogram = app.add_subcommand("histogram", "Histogram of time-tag differences");
  add_station_inputs(histogram, hist.inputs);
  histogram->add_option("--bin-width", hist.bin_width, "Bin width in ticks")->capture_default_str();
  histogram->add_option("--max-lag", hist.max_lag, "Largest |lag| in ticks")->capture_default_str();
  add_output_options(histogram, hist.output, "histogram");

  MatchOptions match;
  auto* match_cmd = app.add_subcommand("match", "Export the coincidence pair list");
  add_station_inputs(match_cmd, match.inputs);
  match_cmd->add_option("--window", match.window_ns, "Coincidence window W in ns")->required();
  match_cmd->add_option("--offset", match.offset, "Global offset in ticks, or auto")->capture_default_str();
  match_cmd->add_option("--mode", match.mode, "causal_greedy|max_cardinality")->capture_default_str();
  add_output_options(match_cmd, match.output, "pairs");

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Correlations, S and locality test at one window");
  add_station_inputs(analyze_cmd, analyze.inputs);
  analyze_cmd->add_option("--window", analyze.window_ns, "Coincidence window W in ns")->required();
  analyze_cmd->add_option("--offset", analyze.offset, "Global offset in ticks, or auto")->capture_default_str();
  analyze_cmd->add_option("--mode", analyze.mode, "causal_greedy|max_cardinality")->capture_default_str();
  analyze_cmd->add_option("--threshold", analyze.threshold, "Locality threshold in sigmas")->capture_default_str();
  add_output_options(analyze_cmd, analyze.output, "analysis");

  AnalyzeOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat the analysis over a list of windows");
  add_station_inputs(sweep_cmd, sweep.inputs);
  sweep_cmd->add_option("--windows", sweep.windows, "Ascending windows in ns")->required()->delimiter(',');
  sweep_cmd->add_option("--offset", sweep.offset, "Global offset in ticks, or auto")->capture_default_str();
  sweep_cmd->add_option("--mode", sweep.mode, "causal_greedy|max_cardinality")->capture_default_str();
  sweep_cmd->add_option("--threshold", sweep.threshold, "Locality threshold in sigmas")->capture_default_str();
  add_output_options(sweep_cmd, sweep.output, "sweep");

  EfficiencyOptions eff;
  auto* efficiency = app.add_subcommand("efficiency", "Detector-efficiency consistency table");
  efficiency->add_option("measurements", eff.measurements, "JSON or TSV with E1, E2, E per setting pair")
      ->required();
  add_output_options(efficiency, eff.output, "efficiency");

  PredictOptions pred;
  auto* predict = app.add_subcommand("predict", "Quantum-theoretical averages");
  predict->add_option("--state", pred.state, "singlet|product")->capture_default_str();
  predict->add_option("--alpha1", pred.alpha1, "Product state: photon-1 polarization");
  predict->add_option("--alpha2", pred.alpha2, "Product state: photon-2 polarization");
  predict->add_option("--angles", pred.angles, "a,a',b,b'")->capture_default_str();
  add_output_options(predict, pred.output, "predict");

  CurveOptions curve;
  auto* curve_cmd = app.add_subcommand("curve", "Simulated E(theta, b) over a theta grid");
  curve_cmd->add_option("--config", curve.config_path, "JSON configuration file");
  curve_cmd->add_option("--pairs", curve.pairs, "Pairs per grid point")->capture_default_str();
  curve_cmd->add_option("--seed", curve.seed, "64-bit seed")->capture_default_str();
  curve_cmd->add_option("--model", curve.model, "uniform|exponential")->capture_default_str();
  curve_cmd->add_option("--t0", curve.t0, "Time-tag scale T0 in ns")->capture_default_str();
  curve_cmd->add_option("--b", curve.b, "Station-2 base angle")->capture_default_str();
  curve_cmd->add_option("--points", curve.points, "Grid points over [0, pi)")->capture_default_str();
  curve_cmd->add_option("--window", curve.window_ns, "Coincidence window W in ns")->capture_default_str();
  add_output_options(curve_cmd, curve.output, "curve");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out, err);
    if (*histogram) return cmd_histogram(hist, out);
    if (*match_cmd) return cmd_match(match, out);
    if (*analyze_cmd) return run_windows("analyze", analyze, {analyze.window_ns}, out, err);
    if (*sweep_cmd) {
      std::vector<double> windows;
      for (const auto& w : sweep.windows) {
        if (!w.empty()) windows.push_back(parse_decimal(w, "--windows"));
      }
      if (windows.empty()) fail(ErrorKind::usage, "--windows is empty");
      return run_windows("sweep", sweep, windows, out, err);
    }
    if (*efficiency) return cmd_efficiency(eff, out);
    if (*predict) return cmd_predict(pred, out);
    if (*curve_cmd) return cmd_curve(curve, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }
  return kUsage;
}

}  // namespace eprb::cli
