#include "eprb/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "eprb/error.hpp"
#include "eprb/solver.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eprb {
namespace {

constexpr double kSingularDenominator = 1e-12;
constexpr double kPhysicalSlack = 1e-12;
constexpr std::array<double, 3> kStartEfficiencies{0.0, -0.2, 0.2};

// Output row order.
constexpr std::array<SettingPair, 4> kExcludedOrder{
    SettingPair{1, 1}, SettingPair{1, 0}, SettingPair{0, 1}, SettingPair{0, 0}};

StateTable unpack_state(const UnknownVector& u) {
  StateTable s;
  s.e1 = {u[2], u[3]};
  s.e2 = {u[4], u[5]};
  s.e = {{{u[6], u[7]}, {u[8], u[9]}}};
  return s;
}

// State guess taken from the measured averages of the pairs in use.
UnknownVector measured_start(const MeasuredTable& m, double r1, double r2,
                             const std::array<std::array<bool, 2>, 2>& used) {
  UnknownVector u{};
  u[0] = r1;
  u[1] = r2;
  for (int s = 0; s < 2; ++s) {
    double sum1 = 0.0;
    int n1 = 0;
    double sum2 = 0.0;
    int n2 = 0;
    for (int t = 0; t < 2; ++t) {
      if (used[s][t]) {
        sum1 += m[s][t].e1;
        ++n1;
      }
      if (used[t][s]) {
        sum2 += m[t][s].e2;
        ++n2;
      }
    }
    u[2 + s] = n1 > 0 ? sum1 / n1 : 0.0;
    u[4 + s] = n2 > 0 ? sum2 / n2 : 0.0;
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) u[correlation_slot({i, j})] = m[i][j].e;
  }
  for (auto& v : u) v = std::clamp(v, -1.0, 1.0);
  return u;
}

struct Problem {
  std::vector<std::size_t> free_slots;  // UnknownVector positions being solved for
  std::vector<SettingPair> pairs;       // equations in use
};

Problem make_problem(const std::array<std::array<bool, 2>, 2>& used) {
  Problem p;
  p.free_slots = {0, 1};
  for (int s = 0; s < 2; ++s) {
    if (used[s][0] || used[s][1]) p.free_slots.push_back(2 + s);
  }
  for (int s = 0; s < 2; ++s) {
    if (used[0][s] || used[1][s]) p.free_slots.push_back(4 + s);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (used[i][j]) {
        p.free_slots.push_back(correlation_slot({i, j}));
        p.pairs.push_back({i, j});
      }
    }
  }
  return p;
}

struct Attempt {
  UnknownVector unknowns{};
  SolverResult result;
};

// Runs every start (in parallel) and returns them in start order.
std::vector<Attempt> run_starts(const MeasuredTable& measured, const Problem& problem,
                                const std::array<std::array<bool, 2>, 2>& used) {
  std::vector<UnknownVector> starts;
  for (double r1 : kStartEfficiencies) {
    for (double r2 : kStartEfficiencies) starts.push_back(measured_start(measured, r1, r2, used));
  }
  std::vector<Attempt> attempts(starts.size());
  const auto count = static_cast<std::ptrdiff_t>(starts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    UnknownVector base = starts[k];
    const auto residual = [&](const Eigen::VectorXd& x) {
      UnknownVector u = base;
      for (std::size_t i = 0; i < problem.free_slots.size(); ++i) u[problem.free_slots[i]] = x[i];
      const EfficiencyParams params{u[0], u[1]};
      const auto state = unpack_state(u);
      Eigen::VectorXd f(static_cast<Eigen::Index>(3 * problem.pairs.size()));
      Eigen::Index row = 0;
      for (const auto& pr : problem.pairs) {
        const auto model = forward_e(params, state.e1[pr.setting1], state.e2[pr.setting2],
                                     state.e[pr.setting1][pr.setting2]);
        const auto& obs = measured[pr.setting1][pr.setting2];
        f[row++] = model.e1 - obs.e1;
        f[row++] = model.e2 - obs.e2;
        f[row++] = model.e - obs.e;
      }
      return f;
    };
    Eigen::VectorXd x0(static_cast<Eigen::Index>(problem.free_slots.size()));
    for (std::size_t i = 0; i < problem.free_slots.size(); ++i) x0[i] = base[problem.free_slots[i]];
    attempts[k].result = solve_box_constrained(residual, x0);
    attempts[k].unknowns = base;
    for (std::size_t i = 0; i < problem.free_slots.size(); ++i) {
      attempts[k].unknowns[problem.free_slots[i]] = attempts[k].result.x[i];
    }
  }
  return attempts;
}

std::string signed_fixed(double v) {
  std::ostringstream out;
  out.setf(std::ios::showpos);
  out.setf(std::ios::fixed);
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

EfficiencyParams DetectorEfficiencies::relative() const {
  return {(eta1_plus - eta1_minus) / (eta1_plus + eta1_minus),
          (eta2_plus - eta2_minus) / (eta2_plus + eta2_minus)};
}

bool StateTable::physical() const {
  const auto in_range = [](double v) { return v >= -1.0 - kPhysicalSlack && v <= 1.0 + kPhysicalSlack; };
  for (int i = 0; i < 2; ++i) {
    if (!in_range(e1[i]) || !in_range(e2[i])) return false;
    for (int j = 0; j < 2; ++j) {
      if (!in_range(e[i][j])) return false;
      for (int x : {1, -1}) {
        for (int y : {1, -1}) {
          if ((1.0 + x * e1[i] + y * e2[j] + x * y * e[i][j]) / 4.0 < -kPhysicalSlack) return false;
        }
      }
    }
  }
  return true;
}

StateTable StateTable::from_state(const QuantumState& state, double a, double a_prime, double b,
                                  double b_prime) {
  const std::array<double, 2> alpha{a, a_prime};
  const std::array<double, 2> beta{b, b_prime};
  StateTable t;
  for (int i = 0; i < 2; ++i) {
    t.e1[i] = state.e1(alpha[i]);
    t.e2[i] = state.e2(beta[i]);
    for (int j = 0; j < 2; ++j) t.e[i][j] = state.e(alpha[i], beta[j]);
  }
  return t;
}

Averages forward_e(const EfficiencyParams& p, double e1_hat, double e2_hat, double e_hat) {
  const double r1 = p.r1;
  const double r2 = p.r2;
  const double den = 1.0 + r1 * e1_hat + r2 * e2_hat + r1 * r2 * e_hat;
  if (std::abs(den) < kSingularDenominator) {
    fail(ErrorKind::numerical, "singular efficiency model: denominator " + format_double(den));
  }
  return {(r1 + e1_hat + r1 * r2 * e2_hat + r2 * e_hat) / den,
          (r2 + r1 * r2 * e1_hat + e2_hat + r1 * e_hat) / den,
          (r1 * r2 + r2 * e1_hat + r1 * e2_hat + e_hat) / den};
}

MeasuredTable forward_table(const EfficiencyParams& params, const StateTable& state) {
  MeasuredTable m{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      try {
        m[i][j] = forward_e(params, state.e1[i], state.e2[j], state.e[i][j]);
      } catch (const Error& e) {
        fail(e.kind(), std::string(e.what()) + " at setting pair (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      }
    }
  }
  return m;
}

ExpectedCounts forward_counts(const DetectorEfficiencies& eta, double e1_hat, double e2_hat, double e_hat,
                              double pairs, double kappa1, double kappa2) {
  for (double v : {eta.eta1_plus, eta.eta1_minus, eta.eta2_plus, eta.eta2_minus, kappa1, kappa2}) {
    if (!(v > 0.0 && v <= 1.0)) fail(ErrorKind::usage, "efficiencies must lie in (0, 1]");
  }
  if (!(pairs > 0.0)) fail(ErrorKind::usage, "pair count must be > 0");
  const double scale = kappa1 * kappa2 * pairs;
  return {scale * eta.eta1_plus * eta.eta2_plus * probability_xy(1, 1, e1_hat, e2_hat, e_hat),
          scale * eta.eta1_minus * eta.eta2_minus * probability_xy(-1, -1, e1_hat, e2_hat, e_hat),
          scale * eta.eta1_plus * eta.eta2_minus * probability_xy(1, -1, e1_hat, e2_hat, e_hat),
          scale * eta.eta1_minus * eta.eta2_plus * probability_xy(-1, 1, e1_hat, e2_hat, e_hat)};
}

UnknownVector pack(const EfficiencyParams& params, const StateTable& s) {
  return {params.r1, params.r2, s.e1[0], s.e1[1], s.e2[0], s.e2[1], s.e[0][0], s.e[0][1], s.e[1][0], s.e[1][1]};
}

std::array<const char*, kUnknowns> unknown_names() {
  return {"r1", "r2", "E1(a)", "E1(a')", "E2(b)", "E2(b')", "E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"};
}

std::size_t correlation_slot(SettingPair pair) {
  return 6 + 2 * static_cast<std::size_t>(pair.setting1) + static_cast<std::size_t>(pair.setting2);
}

ConsistencySolution solve_triple(const MeasuredTable& measured, SettingPair excluded) {
  std::array<std::array<bool, 2>, 2> used{{{true, true}, {true, true}}};
  used[excluded.setting1][excluded.setting2] = false;
  const auto problem = make_problem(used);
  const auto attempts = run_starts(measured, problem, used);

  int best = -1;
  for (std::size_t k = 0; k < attempts.size(); ++k) {
    if (attempts[k].result.converged) {
      best = static_cast<int>(k);
      break;
    }
  }
  if (best < 0) {
    for (std::size_t k = 0; k < attempts.size(); ++k) {
      if (best < 0 || attempts[k].result.residual_norm < attempts[best].result.residual_norm) {
        best = static_cast<int>(k);
      }
    }
  }
  const auto& chosen = attempts[static_cast<std::size_t>(best)];
  ConsistencySolution out;
  out.excluded = excluded;
  out.params = {chosen.unknowns[0], chosen.unknowns[1]};
  out.state = unpack_state(chosen.unknowns);
  out.state.e[excluded.setting1][excluded.setting2] = std::numeric_limits<double>::quiet_NaN();
  out.residual_norm = chosen.result.residual_norm;
  out.residual_inf = chosen.result.residual_inf;
  out.converged = chosen.result.converged;
  out.start_index = best;
  return out;
}

double ConsistencyTable::max_spread() const { return *std::max_element(spread.begin(), spread.end()); }

bool ConsistencyTable::all_converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConsistencySolution& r) { return r.converged; });
}

ConsistencyTable consistency_table(const MeasuredTable& measured) {
  ConsistencyTable table;
  for (std::size_t k = 0; k < kExcludedOrder.size(); ++k) table.rows[k] = solve_triple(measured, kExcludedOrder[k]);
  for (std::size_t u = 0; u < kUnknowns; ++u) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& row : table.rows) {
      const double v = pack(row.params, row.state)[u];
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    table.spread[u] = hi - lo;
  }
  return table;
}

double full_residual(const EfficiencyParams& params, const StateTable& state, const MeasuredTable& measured) {
  const auto model = forward_table(params, state);
  double sum = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double d1 = model[i][j].e1 - measured[i][j].e1;
      const double d2 = model[i][j].e2 - measured[i][j].e2;
      const double d = model[i][j].e - measured[i][j].e;
      sum += d1 * d1 + d2 * d2 + d * d;
    }
  }
  return std::sqrt(sum);
}

FullFit minimize_full_residual(const MeasuredTable& measured) {
  const std::array<std::array<bool, 2>, 2> used{{{true, true}, {true, true}}};
  const auto problem = make_problem(used);
  const auto attempts = run_starts(measured, problem, used);
  std::size_t best = 0;
  for (std::size_t k = 1; k < attempts.size(); ++k) {
    if (attempts[k].result.residual_norm < attempts[best].result.residual_norm) best = k;
  }
  FullFit fit;
  fit.params = {attempts[best].unknowns[0], attempts[best].unknowns[1]};
  fit.state = unpack_state(attempts[best].unknowns);
  fit.residual_norm = attempts[best].result.residual_norm;
  return fit;
}

MeasuredTable measured_from_counts(const CoincidenceCounts& counts) {
  MeasuredTable m{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const auto est = estimates(counts, i, j);
      if (!est.defined()) {
        fail(ErrorKind::numerical, "no coincidences for setting pair (" + std::to_string(i) + "," +
                                       std::to_string(j) + ")");
      }
      m[i][j] = {*est.e1, *est.e2, *est.e};
    }
  }
  return m;
}

MeasuredTable parse_measurements(const std::string& text) {
  MeasuredTable m{};
  std::array<std::array<bool, 2>, 2> seen{};
  const auto store = [&](long a1, long a2, double e1, double e2, double e) {
    if ((a1 != 0 && a1 != 1) || (a2 != 0 && a2 != 1)) {
      fail(ErrorKind::format, "measurements: settings must be 0 or 1");
    }
    m[a1][a2] = {e1, e2, e};
    seen[a1][a2] = true;
  };

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::format, std::string("measurements: ") + e.what());
    }
    const auto& list = j.is_object() ? j.at("estimates") : j;
    try {
      for (const auto& item : list) {
        if (item.at("E1").is_null() || item.at("E2").is_null() || item.at("E").is_null()) {
          fail(ErrorKind::numerical, "measurements: undefined estimate for setting pair (" +
                                         item.at("A1").dump() + "," + item.at("A2").dump() + ")");
        }
        store(item.at("A1").get<long>(), item.at("A2").get<long>(), item.at("E1").get<double>(),
              item.at("E2").get<double>(), item.at("E").get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::format, std::string("measurements: ") + e.what());
    }
  } else {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> columns;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::vector<std::string> cells;
      for (std::string cell; row >> cell;) cells.push_back(cell);
      if (columns.empty()) {
        columns = cells;
        continue;
      }
      const auto col = [&](const std::string& name) -> const std::string& {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) fail(ErrorKind::format, "measurements: missing column " + name);
        const auto idx = static_cast<std::size_t>(it - columns.begin());
        if (idx >= cells.size()) fail(ErrorKind::format, "measurements: short row '" + line + "'");
        return cells[idx];
      };
      try {
        store(std::stol(col("A1")), std::stol(col("A2")), std::stod(col("E1")), std::stod(col("E2")),
              std::stod(col("E")));
      } catch (const std::logic_error&) {
        fail(ErrorKind::format, "measurements: bad row '" + line + "'");
      }
    }
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (!seen[i][j]) {
        fail(ErrorKind::format, "measurements: missing setting pair (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      }
    }
  }
  return m;
}

std::string consistency_tsv(const ConsistencyTable& table, const FullFit& fit) {
  std::ostringstream out;
  const auto names = unknown_names();
  for (std::size_t u = 0; u < kUnknowns; ++u) out << names[u] << '\t';
  out << "residual_norm\tconverged\n";
  for (const auto& row : table.rows) {
    const auto values = pack(row.params, row.state);
    for (std::size_t u = 0; u < kUnknowns; ++u) {
      out << (std::isnan(values[u]) ? std::string("--") : signed_fixed(values[u])) << '\t';
    }
    out << format_double(row.residual_norm) << '\t' << (row.converged ? "yes" : "no") << '\n';
  }
  out << "# spread";
  for (double s : table.spread) out << '\t' << signed_fixed(s);
  out << '\n';
  out << "# full_residual\t" << format_double(fit.residual_norm) << '\n';
  return out.str();
}

}  // namespace eprb
