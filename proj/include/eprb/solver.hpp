#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace eprb {

/// Damped Gauss-Newton on box-constrained nonlinear systems F(x) = 0.
///
/// Square systems reduce to Newton's method; overdetermined systems converge
/// to a local least-squares minimum. The Jacobian is built by central
/// differences. Each step is projected onto the box and accepted only if it
/// lowers ||F||_2; otherwise the step is halved, and after repeated failure
/// a Levenberg-Marquardt shift is added to the normal equations.
struct SolverOptions {
  double tolerance = 1e-10;       // on ||F||_inf
  int max_iterations = 200;
  double jacobian_step = 1e-6;
  double lower = -1.0;
  double upper = 1.0;
};

struct SolverResult {
  Eigen::VectorXd x;
  double residual_inf = 0.0;
  double residual_norm = 0.0;  // ||F||_2
  int iterations = 0;
  bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

SolverResult solve_box_constrained(const ResidualFn& residual, Eigen::VectorXd start,
                                   const SolverOptions& options = {});

}  // namespace eprb
