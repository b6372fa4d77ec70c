#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "safete/solver.h"

namespace safete {
namespace {

// Contribution of one multiplier against the box [lo, hi] at value v.
double Complementarity(double multiplier, double v, double lo, double hi) {
  if (multiplier > 0.0) {
    if (std::isinf(hi)) return kInf;
    return multiplier * std::abs(hi - v);
  }
  if (multiplier < 0.0) {
    if (std::isinf(lo)) return kInf;
    return -multiplier * std::abs(v - lo);
  }
  return 0.0;
}

double BoxViolation(double v, double lo, double hi) {
  return std::max({0.0, lo - v, v - hi});
}

}  // namespace

KktResiduals ComputeKktResiduals(const StandardProblem& problem,
                                 const Vector& x, const Vector& row_duals,
                                 const Vector& bound_duals) {
  if (x.size() != problem.num_vars() ||
      row_duals.size() != problem.num_rows() ||
      bound_duals.size() != problem.num_vars()) {
    throw std::invalid_argument("kkt residuals: dimension mismatch");
  }
  KktResiduals r;
  Vector gx = problem.G * x;
  for (Eigen::Index i = 0; i < gx.size(); ++i) {
    r.primal = std::max(r.primal, BoxViolation(gx(i), problem.row_lower(i),
                                               problem.row_upper(i)));
    r.complementarity =
        std::max(r.complementarity,
                 Complementarity(row_duals(i), gx(i), problem.row_lower(i),
                                 problem.row_upper(i)));
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    r.primal = std::max(r.primal, BoxViolation(x(j), problem.var_lower(j),
                                               problem.var_upper(j)));
    r.complementarity =
        std::max(r.complementarity,
                 Complementarity(bound_duals(j), x(j), problem.var_lower(j),
                                 problem.var_upper(j)));
  }
  Vector stat = problem.P * x + problem.q +
                problem.G.transpose() * row_duals + bound_duals;
  r.dual = stat.size() ? stat.lpNorm<Eigen::Infinity>() : 0.0;
  return r;
}

SparseMatrix HessianOfRegularizer(const SparseMatrix& a, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  SparseMatrix h = (2.0 * lambda) * SparseMatrix(a.transpose() * a);
  h.makeCompressed();
  return h;
}

}  // namespace safete
