#ifndef SAFETE_SOLVER_H_
#define SAFETE_SOLVER_H_

// In-repo convex solvers over StandardProblem:
//  - a bounded-variable primal simplex returning vertex solutions (the LP
//    baseline whose degeneracy exposes divergence), and
//  - an ADMM operator-splitting QP solver with active-set polishing for the
//    regularized formulations.

#include <optional>

#include "safete/problem.h"

namespace safete {

struct SimplexOptions {
  double primal_tolerance = 1e-9;
  double dual_tolerance = 1e-9;
  double pivot_tolerance = 1e-9;
  // Recompute the basis inverse from scratch every this many pivots.
  int refactor_interval = 100;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_limit = 200;
  // 0 selects 50 * (rows + cols).
  int max_iterations = 0;
};

// Dantzig pricing (ties to the lowest index), minimum-ratio leaving variable
// with ties to the lowest variable index. Requires P == 0. Deterministic for
// a fixed problem.
SolveResult SolveLpSimplex(const StandardProblem& problem,
                           const SimplexOptions& options = {});

struct QpOptions {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_prim_inf = 1e-6;
  double eps_dual_inf = 1e-6;
  int max_iterations = 200000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 50;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iterations = 10;
  int check_interval = 10;
  bool polish = true;
  // Attempt a polish every this many iterations (0 = only at convergence).
  int polish_interval = 100;
  double polish_delta = 1e-7;
  int polish_refine_iterations = 10;
  // Active-set repairs tried before a polish attempt is abandoned.
  int polish_rounds = 25;
  // Optional starting iterate (unscaled primal x and row/bound duals stacked
  // as [row_duals; bound_duals]).
  std::optional<Vector> initial_x;
  std::optional<Vector> initial_y;
};

SolveResult SolveQp(const StandardProblem& problem,
                    const QpOptions& options = {});

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
};

// Infinity norms of bound violation, stationarity P x + q + G'y + nu, and the
// largest multiplier-times-slack product (infinite when a multiplier pushes
// against an infinite bound).
KktResiduals ComputeKktResiduals(const StandardProblem& problem,
                                 const Vector& x, const Vector& row_duals,
                                 const Vector& bound_duals);

// 2 lambda A'A, the Hessian of g(x) = lambda ||A x||^2.
SparseMatrix HessianOfRegularizer(const SparseMatrix& a, double lambda);

}  // namespace safete

#endif  // SAFETE_SOLVER_H_
