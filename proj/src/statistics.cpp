#include "eprb/statistics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "eprb/error.hpp"

namespace eprb {
namespace {

std::string na_or(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

nlohmann::json json_or_null(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void check_windows(const std::vector<Ticks>& windows) {
  if (windows.empty()) fail(ErrorKind::usage, "window list is empty");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i] <= 0) fail(ErrorKind::usage, "coincidence window must be > 0");
    if (i > 0 && windows[i] < windows[i - 1]) fail(ErrorKind::usage, "window list must be ascending");
  }
}

}  // namespace

bool LocalityTestReport::any_violated() const noexcept {
  for (const auto& c : checks) {
    if (c.violated) return true;
  }
  return false;
}

bool LocalityTestReport::all_defined() const noexcept {
  for (const auto& c : checks) {
    if (!c.difference) return false;
  }
  return true;
}

std::string LocalityTestReport::verdict() const {
  if (any_violated()) return "violated";
  return all_defined() ? "compatible" : "undefined";
}

std::optional<double> sigma_bound(std::uint64_t coincidences) {
  if (coincidences == 0) return std::nullopt;
  return 1.0 / std::sqrt(static_cast<double>(coincidences));
}

Averages averages_from_counts(double pp, double mm, double pm, double mp) {
  const double nc = pp + mm + pm + mp;
  return {(pp - mm + pm - mp) / nc, (pp - mm - pm + mp) / nc, (pp + mm - pm - mp) / nc};
}

CorrelationEstimates estimates(const SettingCounts& counts) {
  CorrelationEstimates out;
  out.coincidences = counts.total();
  if (out.coincidences == 0) return out;
  const auto avg = averages_from_counts(
      static_cast<double>(counts.at(1, 1)), static_cast<double>(counts.at(-1, -1)),
      static_cast<double>(counts.at(1, -1)), static_cast<double>(counts.at(-1, 1)));
  out.e1 = avg.e1;
  out.e2 = avg.e2;
  out.e = avg.e;
  out.sigma_bound = sigma_bound(out.coincidences);
  return out;
}

CorrelationEstimates estimates(const CoincidenceCounts& counts, int setting1, int setting2) {
  auto out = estimates(counts.at(setting1, setting2));
  out.setting1 = setting1;
  out.setting2 = setting2;
  return out;
}

BellResult bell_s(const CoincidenceCounts& counts) {
  BellResult out;
  bool complete = true;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.e[i][j] = estimates(counts, i, j).e;
      complete = complete && out.e[i][j].has_value();
    }
  }
  if (complete) out.s = *out.e[0][0] - *out.e[0][1] + *out.e[1][0] + *out.e[1][1];
  return out;
}

LocalityTestReport locality_test(const CoincidenceCounts& counts, double threshold_sigmas) {
  LocalityTestReport report;
  report.threshold_sigmas = threshold_sigmas;
  std::size_t k = 0;
  for (int station = 1; station <= 2; ++station) {
    for (int local = 0; local < 2; ++local) {
      // Station 1 contrasts E1(local, b) with E1(local, b'); station 2
      // contrasts E2(a, local) with E2(a', local).
      const auto first = station == 1 ? estimates(counts, local, 0) : estimates(counts, 0, local);
      const auto second = station == 1 ? estimates(counts, local, 1) : estimates(counts, 1, local);
      LocalityCheck check;
      check.station = station;
      check.local_setting = local;
      check.average_remote0 = station == 1 ? first.e1 : first.e2;
      check.average_remote1 = station == 1 ? second.e1 : second.e2;
      if (check.average_remote0 && check.average_remote1) {
        check.difference = std::abs(*check.average_remote0 - *check.average_remote1);
        check.threshold = threshold_sigmas * std::max(*first.sigma_bound, *second.sigma_bound);
        check.violated = *check.difference > *check.threshold;
      }
      report.checks[k++] = check;
    }
  }
  return report;
}

WindowPoint analyze_window(const StationDataset& ds1, const StationDataset& ds2, Ticks window,
                           const SweepOptions& options) {
  WindowPoint point;
  point.window = window;
  MatchConfig cfg{window, options.delta_g, options.mode};
  point.counts = coincidences(ds1, ds2, cfg);
  point.bell = bell_s(point.counts);
  point.bell.window = window;
  point.bell.delta_g = options.delta_g;
  point.locality = locality_test(point.counts, options.threshold_sigmas);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) point.estimates[i][j] = estimates(point.counts, i, j);
  }
  return point;
}

std::vector<WindowPoint> window_sweep_serial(const StationDataset& ds1, const StationDataset& ds2,
                                             const std::vector<Ticks>& windows,
                                             const SweepOptions& options) {
  check_windows(windows);
  const auto shifted = apply_offset(ds1, options.delta_g);
  SweepOptions applied = options;
  applied.delta_g = 0;
  std::vector<WindowPoint> out;
  out.reserve(windows.size());
  for (auto w : windows) {
    out.push_back(analyze_window(shifted, ds2, w, applied));
    out.back().bell.delta_g = options.delta_g;
  }
  return out;
}

std::vector<WindowPoint> window_sweep(const StationDataset& ds1, const StationDataset& ds2,
                                      const std::vector<Ticks>& windows, const SweepOptions& options) {
  check_windows(windows);
  const auto shifted = apply_offset(ds1, options.delta_g);
  SweepOptions applied = options;
  applied.delta_g = 0;
  std::vector<WindowPoint> out(windows.size());
  const auto count = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    out[k] = analyze_window(shifted, ds2, windows[k], applied);
    out[k].bell.delta_g = options.delta_g;
  }
  return out;
}

std::string sweep_tsv(const std::vector<WindowPoint>& points) {
  std::ostringstream out;
  out << "W_ticks\tS\tE_ab\tE_ab'\tE_a'b\tE_a'b'\tNc_total\tverdict\n";
  for (const auto& p : points) {
    out << p.window << '\t' << na_or(p.bell.s) << '\t' << na_or(p.bell.e[0][0]) << '\t'
        << na_or(p.bell.e[0][1]) << '\t' << na_or(p.bell.e[1][0]) << '\t' << na_or(p.bell.e[1][1])
        << '\t' << p.counts.total() << '\t' << p.locality.verdict() << '\n';
  }
  return out.str();
}

std::string sweep_json(const std::vector<WindowPoint>& points, double tau_ns) {
  nlohmann::json root;
  root["tau_ns"] = tau_ns;
  root["error_bar_sigmas"] = kErrorBarSigmas;
  auto& rows = root["windows"] = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json row;
    row["W_ticks"] = p.window;
    row["W_ns"] = static_cast<double>(p.window) * tau_ns;
    row["delta_g_ticks"] = p.bell.delta_g;
    row["S"] = json_or_null(p.bell.s);
    row["Nc_total"] = p.counts.total();
    row["verdict"] = p.locality.verdict();
    auto& est = row["estimates"] = nlohmann::json::array();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const auto& e = p.estimates[i][j];
        const auto& c = p.counts.at(i, j);
        nlohmann::json item;
        item["A1"] = i;
        item["A2"] = j;
        item["C_pp"] = c.at(1, 1);
        item["C_mm"] = c.at(-1, -1);
        item["C_pm"] = c.at(1, -1);
        item["C_mp"] = c.at(-1, 1);
        item["Nc"] = e.coincidences;
        item["E1"] = json_or_null(e.e1);
        item["E2"] = json_or_null(e.e2);
        item["E"] = json_or_null(e.e);
        item["sigma_bound"] = json_or_null(e.sigma_bound);
        if (e.sigma_bound) item["error_bar"] = kErrorBarSigmas * *e.sigma_bound;
        est.push_back(item);
      }
    }
    auto& loc = row["locality"] = nlohmann::json::array();
    for (const auto& c : p.locality.checks) {
      loc.push_back({{"station", c.station},
                     {"local_setting", c.local_setting},
                     {"average_remote0", json_or_null(c.average_remote0)},
                     {"average_remote1", json_or_null(c.average_remote1)},
                     {"difference", json_or_null(c.difference)},
                     {"threshold", json_or_null(c.threshold)},
                     {"violated", c.violated}});
    }
    rows.push_back(row);
  }
  return root.dump(2) + "\n";
}

}  // namespace eprb
