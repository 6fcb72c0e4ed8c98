#pragma once

#include <string>
#include <vector>

namespace eprb {

/// Closed-form quantum predictions for a photon pair, polarization
/// convention (angles enter doubled).
class QuantumState {
 public:
  enum class Kind { singlet, product };

  static QuantumState singlet() { return QuantumState(Kind::singlet, 0.0, 0.0); }
  /// Separable state with photon 1 polarized along alpha1, photon 2 along alpha2.
  static QuantumState product(double alpha1, double alpha2) {
    return QuantumState(Kind::product, alpha1, alpha2);
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] std::string label() const;

  [[nodiscard]] double e1(double a) const;
  [[nodiscard]] double e2(double b) const;
  [[nodiscard]] double e(double a, double b) const;

 private:
  QuantumState(Kind kind, double alpha1, double alpha2)
      : kind_(kind), alpha1_(alpha1), alpha2_(alpha2) {}

  Kind kind_;
  double alpha1_;
  double alpha2_;
};

/// -cos 2(a - b).
double singlet_e(double a, double b);

/// cos 2(a - alpha1) * cos 2(b - alpha2).
double product_e(double a, double b, double alpha1, double alpha2);

/// (1 + x E1 + y E2 + x y E) / 4 for x, y in {+1, -1}. Throws
/// Error(numerical) "non-physical state table" when the value leaves [0, 1]
/// by more than rounding.
double probability_xy(int x, int y, double e1, double e2, double e);
double probability_xy(int x, int y, double a, double b, const QuantumState& state);

/// CHSH S for a state at settings (a, a', b, b').
double chsh_s(const QuantumState& state, double a, double a_prime, double b, double b_prime);

/// TSV rows `a b E1 E2 E P_pp P_pm P_mp P_mm` for every (a, b) in the grid.
std::string predict_tsv(const QuantumState& state, const std::vector<double>& angles1,
                        const std::vector<double>& angles2);

}  // namespace eprb
