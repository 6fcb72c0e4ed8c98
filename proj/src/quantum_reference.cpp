#include "eprb/quantum_reference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eprb/dataset.hpp"
#include "eprb/error.hpp"

namespace eprb {

namespace {
constexpr double kProbabilitySlack = 1e-12;
}

std::string QuantumState::label() const {
  if (kind_ == Kind::singlet) return "singlet";
  return "product(" + format_double(alpha1_) + "," + format_double(alpha2_) + ")";
}

double QuantumState::e1(double a) const {
  return kind_ == Kind::singlet ? 0.0 : std::cos(2.0 * (a - alpha1_));
}

double QuantumState::e2(double b) const {
  return kind_ == Kind::singlet ? 0.0 : std::cos(2.0 * (b - alpha2_));
}

double QuantumState::e(double a, double b) const {
  return kind_ == Kind::singlet ? singlet_e(a, b) : product_e(a, b, alpha1_, alpha2_);
}

double singlet_e(double a, double b) { return -std::cos(2.0 * (a - b)); }

double product_e(double a, double b, double alpha1, double alpha2) {
  return std::cos(2.0 * (a - alpha1)) * std::cos(2.0 * (b - alpha2));
}

double probability_xy(int x, int y, double e1, double e2, double e) {
  if ((x != 1 && x != -1) || (y != 1 && y != -1)) {
    fail(ErrorKind::usage, "outcomes must be +1 or -1");
  }
  const double p = (1.0 + x * e1 + y * e2 + x * y * e) / 4.0;
  if (!(p >= -kProbabilitySlack && p <= 1.0 + kProbabilitySlack)) {
    fail(ErrorKind::numerical, "non-physical state table: P(" + std::to_string(x) + "," +
                                   std::to_string(y) + ") = " + format_double(p));
  }
  return std::clamp(p, 0.0, 1.0);
}

double probability_xy(int x, int y, double a, double b, const QuantumState& state) {
  return probability_xy(x, y, state.e1(a), state.e2(b), state.e(a, b));
}

double chsh_s(const QuantumState& state, double a, double a_prime, double b, double b_prime) {
  return state.e(a, b) - state.e(a, b_prime) + state.e(a_prime, b) + state.e(a_prime, b_prime);
}

std::string predict_tsv(const QuantumState& state, const std::vector<double>& angles1,
                        const std::vector<double>& angles2) {
  std::ostringstream out;
  out << "a\tb\tE1\tE2\tE\tP_pp\tP_pm\tP_mp\tP_mm\n";
  for (double a : angles1) {
    for (double b : angles2) {
      out << format_double(a) << '\t' << format_double(b) << '\t' << format_double(state.e1(a))
          << '\t' << format_double(state.e2(b)) << '\t' << format_double(state.e(a, b));
      for (auto [x, y] : {std::pair{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}) {
        out << '\t' << format_double(probability_xy(x, y, a, b, state));
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace eprb
