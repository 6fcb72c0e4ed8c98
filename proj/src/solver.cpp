#include "eprb/solver.hpp"

#include <cmath>
#include <limits>

namespace eprb {
namespace {

Eigen::VectorXd project(Eigen::VectorXd x, const SolverOptions& o) {
  return x.cwiseMax(o.lower).cwiseMin(o.upper);
}

// Residual evaluations may throw on singular points; treat them as +inf.
bool evaluate(const ResidualFn& f, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  try {
    out = f(x);
  } catch (const std::exception&) {
    return false;
  }
  return out.allFinite();
}

bool jacobian(const ResidualFn& f, const Eigen::VectorXd& x, Eigen::Index rows, double h,
              Eigen::MatrixXd& jac) {
  jac.resize(rows, x.size());
  Eigen::VectorXd plus;
  Eigen::VectorXd minus;
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    if (!evaluate(f, probe, plus)) return false;
    probe[k] = x[k] - h;
    if (!evaluate(f, probe, minus)) return false;
    probe[k] = x[k];
    jac.col(k) = (plus - minus) / (2.0 * h);
  }
  return true;
}

}  // namespace

SolverResult solve_box_constrained(const ResidualFn& residual, Eigen::VectorXd start,
                                   const SolverOptions& options) {
  SolverResult result;
  result.x = project(std::move(start), options);
  Eigen::VectorXd fx;
  if (!evaluate(residual, result.x, fx)) {
    result.residual_inf = result.residual_norm = std::numeric_limits<double>::infinity();
    return result;
  }
  double norm = fx.norm();
  double mu = 0.0;
  Eigen::MatrixXd jac;

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (fx.lpNorm<Eigen::Infinity>() < options.tolerance) break;
    if (!jacobian(residual, result.x, fx.size(), options.jacobian_step, jac)) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Eigen::VectorXd step;
      if (mu == 0.0) {
        step = jac.colPivHouseholderQr().solve(-fx);
      } else {
        const Eigen::MatrixXd normal =
            jac.transpose() * jac + mu * Eigen::MatrixXd::Identity(jac.cols(), jac.cols());
        step = normal.ldlt().solve(-jac.transpose() * fx);
      }
      if (!step.allFinite()) {
        mu = mu == 0.0 ? 1e-6 : mu * 10.0;
        continue;
      }
      double scale = 1.0;
      for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
        const Eigen::VectorXd trial = project(result.x + scale * step, options);
        Eigen::VectorXd ft;
        if (evaluate(residual, trial, ft) && ft.norm() < norm) {
          result.x = trial;
          fx = ft;
          norm = ft.norm();
          accepted = true;
          break;
        }
      }
      if (accepted) {
        mu = mu * 0.1 < 1e-12 ? 0.0 : mu * 0.1;
      } else {
        mu = mu == 0.0 ? 1e-6 : mu * 10.0;
      }
    }
    if (!accepted) break;  // stationary point of ||F||
  }
  result.iterations = it;
  result.residual_inf = fx.lpNorm<Eigen::Infinity>();
  result.residual_norm = norm;
  result.converged = result.residual_inf < options.tolerance;
  return result;
}

}  // namespace eprb
