// ADMM operator-splitting QP solver (the OSQP iteration) with Ruiz
// equilibration, adaptive rho, infeasibility certificates and active-set
// polishing.
//
// Variable bounds are folded into the constraint matrix as identity rows, so
// internally the problem is  min 0.5 x'Px + q'x  s.t.  l <= C x <= u  with
// C = [G; I].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCholesky>

#include "safete/solver.h"

namespace safete {
namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityScale = 1e3;
constexpr double kEqualityTolerance = 1e-4;

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower,
                                   Eigen::AMDOrdering<int>>;

double InfNorm(const Vector& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

double ClampScale(double norm) {
  if (norm < kMinScaling) return 1.0;
  return std::min(norm, kMaxScaling);
}

// Column infinity norms of a sparse matrix.
Vector ColumnNorms(const SparseMatrix& m) {
  Vector out = Vector::Zero(m.cols());
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out(it.col()) = std::max(out(it.col()), std::abs(it.value()));
    }
  }
  return out;
}

Vector RowNorms(const SparseMatrix& m) {
  Vector out = Vector::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    }
  }
  return out;
}

class AdmmSolver {
 public:
  AdmmSolver(const StandardProblem& problem, const QpOptions& options)
      : problem_(problem), opt_(options) {
    n_ = problem.num_vars();
    rows_ = problem.num_rows();
    m_ = rows_ + n_;
    BuildStacked();
    Scale();
    InitRho();
  }

  SolveResult Solve() {
    SolveResult result;
    if (!FactorizeKkt()) {
      result.status = SolveStatus::kIterationLimit;
      return result;
    }
    InitIterates();
    Vector rhs(n_ + m_), x_tilde(n_), z_tilde(m_), x_prev(n_), y_prev(m_);
    std::vector<char> last_active;
    int iter = 0;
    for (iter = 1; iter <= opt_.max_iterations; ++iter) {
      x_prev = x_;
      y_prev = y_;
      rhs.head(n_) = opt_.sigma * x_ - q_;
      rhs.tail(m_) = z_ - y_.cwiseQuotient(rho_);
      Vector sol = kkt_.solve(rhs);
      x_tilde = sol.head(n_);
      z_tilde = z_ + (sol.tail(m_) - y_).cwiseQuotient(rho_);
      x_ = opt_.alpha * x_tilde + (1.0 - opt_.alpha) * x_prev;
      Vector z_relaxed = opt_.alpha * z_tilde + (1.0 - opt_.alpha) * z_;
      Vector z_new = Project(z_relaxed + y_.cwiseQuotient(rho_));
      y_ += rho_.cwiseProduct(z_relaxed - z_new);
      z_ = z_new;

      const bool check = iter % opt_.check_interval == 0 ||
                         iter == opt_.max_iterations;
      if (!check) continue;
      Residuals res = ComputeResiduals();
      if (res.primal <= res.eps_primal && res.dual <= res.eps_dual) {
        result.status = SolveStatus::kOptimal;
        break;
      }
      if (IsPrimalInfeasible(y_ - y_prev)) {
        result.status = SolveStatus::kInfeasible;
        break;
      }
      if (IsDualInfeasible(x_ - x_prev)) {
        result.status = SolveStatus::kUnbounded;
        break;
      }
      if (opt_.polish && opt_.polish_interval > 0 &&
          iter % opt_.polish_interval == 0) {
        std::vector<char> active = ActiveSet();
        if (active != last_active) {
          last_active = active;
          if (TryPolish(active, &result)) {
            result.iterations = iter;
            return result;
          }
        }
      }
      if (opt_.adaptive_rho && iter % opt_.adaptive_rho_interval == 0) {
        if (!UpdateRho(res)) break;
      }
    }
    result.iterations = std::min(iter, opt_.max_iterations);
    if (result.status == SolveStatus::kOptimal && opt_.polish) {
      if (TryPolish(ActiveSet(), &result)) return result;
    }
    FillResult(x_, y_, &result);
    return result;
  }

 private:
  struct Residuals {
    double primal, dual, eps_primal, eps_dual;
    double primal_scaled, dual_scaled, primal_norm_scaled, dual_norm_scaled;
  };

  void BuildStacked() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(problem_.G.nonZeros() + n_);
    for (int k = 0; k < problem_.G.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(problem_.G, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
      }
    }
    for (Eigen::Index j = 0; j < n_; ++j) {
      trip.emplace_back(static_cast<int>(rows_ + j), static_cast<int>(j), 1.0);
    }
    c_.resize(m_, n_);
    c_.setFromTriplets(trip.begin(), trip.end());
    c_.makeCompressed();
    p_ = problem_.P;
    q_ = problem_.q;
    l_.resize(m_);
    u_.resize(m_);
    l_ << problem_.row_lower, problem_.var_lower;
    u_ << problem_.row_upper, problem_.var_upper;
  }

  // Ruiz equilibration of [P C'; C 0] followed by cost scaling.
  void Scale() {
    d_ = Vector::Ones(n_);
    e_ = Vector::Ones(m_);
    cost_scale_ = 1.0;
    for (int it = 0; it < opt_.scaling_iterations; ++it) {
      Vector pcol = ColumnNorms(p_);
      Vector ccol = ColumnNorms(c_);
      Vector crow = RowNorms(c_);
      Vector dd(n_), ee(m_);
      for (Eigen::Index j = 0; j < n_; ++j) {
        dd(j) = 1.0 / std::sqrt(ClampScale(std::max(pcol(j), ccol(j))));
      }
      for (Eigen::Index i = 0; i < m_; ++i) {
        ee(i) = 1.0 / std::sqrt(ClampScale(crow(i)));
      }
      p_ = dd.asDiagonal() * p_ * dd.asDiagonal();
      c_ = ee.asDiagonal() * c_ * dd.asDiagonal();
      q_ = dd.cwiseProduct(q_);
      d_ = d_.cwiseProduct(dd);
      e_ = e_.cwiseProduct(ee);
      // Cost scaling.
      Vector pcol2 = ColumnNorms(p_);
      double mean_p = n_ ? pcol2.mean() : 0.0;
      double gamma = 1.0 / ClampScale(std::max(mean_p, InfNorm(q_)));
      p_ *= gamma;
      q_ *= gamma;
      cost_scale_ *= gamma;
    }
    p_.makeCompressed();
    c_.makeCompressed();
    ct_ = c_.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (std::isfinite(l_(i))) l_(i) *= e_(i);
      if (std::isfinite(u_(i))) u_(i) *= e_(i);
    }
  }

  void InitRho() {
    rho_scalar_ = opt_.rho;
    rho_.resize(m_);
    SetRhoVector();
  }

  void SetRhoVector() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (std::isinf(l_(i)) && std::isinf(u_(i))) {
        rho_(i) = kRhoMin;
      } else if (u_(i) - l_(i) < kEqualityTolerance) {
        rho_(i) = kRhoEqualityScale * rho_scalar_;
      } else {
        rho_(i) = rho_scalar_;
      }
    }
  }

  // KKT matrix over all rows. With `active`, inactive rows keep their
  // pattern but carry zero coefficients and a unit diagonal, which pins their
  // multiplier to zero; every polish system then shares one ordering.
  SparseMatrix BuildKkt(const std::vector<char>* active, double delta,
                        bool regularize) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(p_.nonZeros() + c_.nonZeros() + n_ + m_);
    for (int k = 0; k < p_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(p_, k); it; ++it) {
        if (it.row() >= it.col()) {
          trip.emplace_back(static_cast<int>(it.row()),
                            static_cast<int>(it.col()), it.value());
        }
      }
    }
    const double diag = active ? delta : opt_.sigma;
    for (Eigen::Index j = 0; j < n_; ++j) {
      trip.emplace_back(static_cast<int>(j), static_cast<int>(j),
                        regularize ? diag : 0.0);
    }
    for (int k = 0; k < c_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(c_, k); it; ++it) {
        const bool on = !active || (*active)[it.row()];
        trip.emplace_back(static_cast<int>(n_ + it.row()),
                          static_cast<int>(it.col()), on ? it.value() : 0.0);
      }
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      double v;
      if (active && !(*active)[i]) {
        v = -1.0;
      } else if (!regularize) {
        v = 0.0;
      } else {
        v = active ? -delta : -1.0 / rho_(i);
      }
      trip.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), v);
    }
    SparseMatrix k(n_ + m_, n_ + m_);
    k.setFromTriplets(trip.begin(), trip.end());
    k.makeCompressed();
    return k;
  }

  bool FactorizeKkt() {
    SparseMatrix k = BuildKkt(nullptr, 0.0, true);
    if (!analyzed_) {
      kkt_.analyzePattern(k);
      analyzed_ = true;
    }
    kkt_.factorize(k);
    return kkt_.info() == Eigen::Success;
  }

  void InitIterates() {
    x_ = Vector::Zero(n_);
    y_ = Vector::Zero(m_);
    if (opt_.initial_x) {
      if (opt_.initial_x->size() != n_) {
        throw std::invalid_argument("initial_x has wrong dimension");
      }
      x_ = opt_.initial_x->cwiseQuotient(d_);
    }
    if (opt_.initial_y) {
      if (opt_.initial_y->size() != m_) {
        throw std::invalid_argument("initial_y has wrong dimension");
      }
      y_ = cost_scale_ * opt_.initial_y->cwiseQuotient(e_);
    }
    z_ = Project(c_ * x_);
  }

  Vector Project(const Vector& v) const {
    return v.cwiseMax(l_).cwiseMin(u_);
  }

  Residuals ComputeResiduals() const {
    Residuals r{};
    Vector cx = c_ * x_;
    Vector px = p_ * x_;
    Vector cty = ct_ * y_;
    Vector einv = e_.cwiseInverse();
    Vector dinv = d_.cwiseInverse();
    r.primal = InfNorm(einv.cwiseProduct(cx - z_));
    r.eps_primal = opt_.eps_abs +
                   opt_.eps_rel * std::max(InfNorm(einv.cwiseProduct(cx)),
                                           InfNorm(einv.cwiseProduct(z_)));
    const double cinv = 1.0 / cost_scale_;
    r.dual = cinv * InfNorm(dinv.cwiseProduct(px + q_ + cty));
    r.eps_dual = opt_.eps_abs +
                 opt_.eps_rel * cinv *
                     std::max({InfNorm(dinv.cwiseProduct(px)),
                               InfNorm(dinv.cwiseProduct(cty)),
                               InfNorm(dinv.cwiseProduct(q_))});
    r.primal_scaled = InfNorm(cx - z_);
    r.primal_norm_scaled = std::max(InfNorm(cx), InfNorm(z_));
    r.dual_scaled = InfNorm(px + q_ + cty);
    r.dual_norm_scaled = std::max({InfNorm(px), InfNorm(cty), InfNorm(q_)});
    return r;
  }

  bool UpdateRho(const Residuals& r) {
    const double prim = r.primal_scaled / (r.primal_norm_scaled + 1e-30);
    const double dual = r.dual_scaled / (r.dual_norm_scaled + 1e-30);
    double rho_new = rho_scalar_ * std::sqrt(prim / (dual + 1e-30));
    rho_new = std::clamp(rho_new, kRhoMin, kRhoMax);
    if (rho_new > rho_scalar_ * opt_.adaptive_rho_tolerance ||
        rho_new < rho_scalar_ / opt_.adaptive_rho_tolerance) {
      rho_scalar_ = rho_new;
      SetRhoVector();
      return FactorizeKkt();
    }
    return true;
  }

  bool IsPrimalInfeasible(const Vector& dy_scaled) const {
    Vector dy = e_.cwiseProduct(dy_scaled);
    const double norm = InfNorm(dy);
    if (norm <= 1e-30) return false;
    Vector cty = d_.cwiseInverse().cwiseProduct(ct_ * dy_scaled);
    if (InfNorm(cty) > opt_.eps_prim_inf * norm) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double v = dy(i);
      const double ub = problem_bound_upper(i);
      const double lb = problem_bound_lower(i);
      if (v > 0.0) {
        if (std::isinf(ub)) return false;
        support += ub * v;
      } else if (v < 0.0) {
        if (std::isinf(lb)) return false;
        support += lb * v;
      }
    }
    return support < -opt_.eps_prim_inf * norm;
  }

  bool IsDualInfeasible(const Vector& dx_scaled) const {
    Vector dx = d_.cwiseProduct(dx_scaled);
    const double norm = InfNorm(dx);
    if (norm <= 1e-30) return false;
    const double cinv = 1.0 / cost_scale_;
    Vector pdx = cinv * d_.cwiseInverse().cwiseProduct(p_ * dx_scaled);
    if (InfNorm(pdx) > opt_.eps_dual_inf * norm) return false;
    const double qdx = cinv * q_.dot(dx_scaled);
    if (qdx >= -opt_.eps_dual_inf * norm) return false;
    Vector cdx = e_.cwiseInverse().cwiseProduct(c_ * dx_scaled);
    const double tol = opt_.eps_dual_inf * norm;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool lo_inf = std::isinf(problem_bound_lower(i));
      const bool hi_inf = std::isinf(problem_bound_upper(i));
      if (!hi_inf && cdx(i) > tol) return false;
      if (!lo_inf && cdx(i) < -tol) return false;
    }
    return true;
  }

  double problem_bound_lower(Eigen::Index i) const {
    return i < rows_ ? problem_.row_lower(i) : problem_.var_lower(i - rows_);
  }
  double problem_bound_upper(Eigen::Index i) const {
    return i < rows_ ? problem_.row_upper(i) : problem_.var_upper(i - rows_);
  }

  // 0 inactive, 1 lower, 2 upper, 3 equality.
  std::vector<char> ActiveSet() const {
    std::vector<char> active(m_, 0);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (std::isfinite(l_(i)) && l_(i) == u_(i)) {
        active[i] = 3;
      } else if (z_(i) - l_(i) < -y_(i)) {
        active[i] = 1;
      } else if (u_(i) - z_(i) < y_(i)) {
        active[i] = 2;
      }
    }
    return active;
  }

  // Equality-constrained QP on the rows flagged in `active`, regularized by
  // delta and refined against the exact reduced KKT matrix. Scaled space.
  bool SolveReduced(const std::vector<char>& active, Vector* xs,
                    Vector* ys) const {
    SparseMatrix kreg = BuildKkt(&active, opt_.polish_delta, true);
    SparseMatrix kexact = BuildKkt(&active, 0.0, false);
    SparseMatrix kfull = kexact.selfadjointView<Eigen::Lower>();
    if (!polish_analyzed_) {
      polish_kkt_.analyzePattern(kreg);
      polish_analyzed_ = true;
    }
    polish_kkt_.factorize(kreg);
    if (polish_kkt_.info() != Eigen::Success) return false;
    Vector rhs = Vector::Zero(n_ + m_);
    rhs.head(n_) = -q_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active[i]) rhs(n_ + i) = active[i] == 2 ? u_(i) : l_(i);
    }
    // Proximal refinement started from the current iterate: directions the
    // reduced system leaves undetermined keep their ADMM values.
    Vector sol(n_ + m_);
    sol.head(n_) = x_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      sol(n_ + i) = active[i] ? y_(i) : 0.0;
    }
    for (int it = 0; it < opt_.polish_refine_iterations; ++it) {
      Vector resid = rhs - kfull * sol;
      if (InfNorm(resid) < 1e-14 * (1.0 + InfNorm(rhs))) break;
      sol += polish_kkt_.solve(resid);
    }
    if (!sol.allFinite()) return false;
    *xs = sol.head(n_);
    *ys = sol.tail(m_);
    return true;
  }

  // Polishes from an active-set guess. Wrong-sign multipliers are released
  // and violated rows are added for up to polish_rounds repairs; the result
  // is accepted only if it meets the termination tolerances unscaled.
  bool TryPolish(std::vector<char> active, SolveResult* result) const {
    Vector x, y;
    int last_changes = 0;
    for (int round = 0;; ++round) {
      Vector xs, ys;
      if (!SolveReduced(active, &xs, &ys)) return false;
      x = d_.cwiseProduct(xs);
      y = e_.cwiseProduct(ys) / cost_scale_;
      Vector cx = e_.cwiseInverse().cwiseProduct(c_ * xs);
      const double ptol = opt_.eps_abs + opt_.eps_rel * InfNorm(cx);
      const double stol = opt_.eps_abs + opt_.eps_rel * InfNorm(y);
      bool changed = false;
      int changes = 0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double lo = problem_bound_lower(i);
        const double hi = problem_bound_upper(i);
        if (active[i] == 1 && y(i) > stol) {
          active[i] = 0;
          changed = true;
          ++changes;
        } else if (active[i] == 2 && y(i) < -stol) {
          active[i] = 0;
          changed = true;
          ++changes;
        } else if (active[i] == 0 && cx(i) < lo - ptol) {
          active[i] = 1;
          changed = true;
          ++changes;
        } else if (active[i] == 0 && cx(i) > hi + ptol) {
          active[i] = 2;
          changed = true;
          ++changes;
        }
      }
      if (!changed) break;
      if (round >= opt_.polish_rounds) return false;
      // Repairs that stop shrinking mean the guess is cycling; give up early.
      if (round > 0 && changes >= last_changes) return false;
      last_changes = changes;
    }
    Vector row_duals = y.head(rows_);
    Vector bound_duals = y.tail(n_);
    KktResiduals kkt =
        ComputeKktResiduals(problem_, x, row_duals, bound_duals);
    Vector gx = problem_.G * x;
    Vector px = problem_.P * x;
    Vector gty = problem_.G.transpose() * row_duals;
    const double eps_primal =
        opt_.eps_abs + opt_.eps_rel * std::max(InfNorm(gx), InfNorm(x));
    const double eps_dual =
        opt_.eps_abs +
        opt_.eps_rel * std::max({InfNorm(px), InfNorm(gty + bound_duals),
                                 InfNorm(problem_.q)});
    if (kkt.primal > eps_primal || kkt.dual > eps_dual) return false;
    result->status = SolveStatus::kOptimal;
    result->polished = true;
    result->x = x;
    result->row_duals = row_duals;
    result->bound_duals = bound_duals;
    result->primal_residual = kkt.primal;
    result->dual_residual = kkt.dual;
    result->objective_value = problem_.Objective(x);
    return true;
  }

  void FillResult(const Vector& xs, const Vector& ys,
                  SolveResult* result) const {
    result->x = d_.cwiseProduct(xs);
    Vector y = e_.cwiseProduct(ys) / cost_scale_;
    result->row_duals = y.head(rows_);
    result->bound_duals = y.tail(n_);
    Residuals r = ComputeResiduals();
    result->primal_residual = r.primal;
    result->dual_residual = r.dual;
    result->objective_value = problem_.Objective(result->x);
  }

  const StandardProblem& problem_;
  QpOptions opt_;
  Eigen::Index n_ = 0, rows_ = 0, m_ = 0;
  SparseMatrix p_, c_, ct_;
  Vector q_, l_, u_;
  Vector d_, e_;
  double cost_scale_ = 1.0;
  double rho_scalar_ = 0.1;
  Vector rho_;
  Ldlt kkt_;
  bool analyzed_ = false;
  mutable Ldlt polish_kkt_;
  mutable bool polish_analyzed_ = false;
  Vector x_, z_, y_;
};

}  // namespace

SolveResult SolveQp(const StandardProblem& problem, const QpOptions& options) {
  problem.Validate();
  auto start = std::chrono::steady_clock::now();
  AdmmSolver solver(problem, options);
  SolveResult result = solver.Solve();
  result.solve_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  return result;
}

}  // namespace safete
