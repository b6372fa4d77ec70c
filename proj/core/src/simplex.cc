// Bounded-variable primal simplex with an explicit dense basis inverse.
//
// Every row i gets a logical variable r_i = (G x)_i with bounds
// [row_lower_i, row_upper_i], so the working system is [G -I][x; r] = 0 and
// every variable is boxed. The initial basis is all logicals. Phase 1
// minimizes the sum of bound violations of basic variables; infeasible basics
// block the ratio test at the bound they violate, so they leave as soon as
// they become feasible and the violation never grows.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "safete/solver.h"

namespace safete {
namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const StandardProblem& p, const SimplexOptions& o)
      : problem_(p), opt_(o), n_(p.num_vars()), m_(p.num_rows()) {
    g_ = p.G;
    g_.makeCompressed();
    const Eigen::Index total = n_ + m_;
    lower_.resize(total);
    upper_.resize(total);
    cost_.setZero(total);
    lower_.head(n_) = p.var_lower;
    upper_.head(n_) = p.var_upper;
    lower_.tail(m_) = p.row_lower;
    upper_.tail(m_) = p.row_upper;
    cost_.head(n_) = p.q;
    value_.setZero(total);
    position_.assign(total, -1);
    head_.resize(m_);
    for (Eigen::Index j = 0; j < n_; ++j) value_(j) = InitialValue(j);
    for (Eigen::Index i = 0; i < m_; ++i) {
      head_[i] = static_cast<int>(n_ + i);
      position_[n_ + i] = static_cast<int>(i);
    }
    max_iterations_ = o.max_iterations > 0
                          ? o.max_iterations
                          : static_cast<int>(50 * (n_ + m_) + 1000);
  }

  SolveResult Run() {
    SolveResult result;
    if (!Refactor()) {
      result.status = SolveStatus::kIterationLimit;
      return result;
    }
    bool phase_one = HasInfeasibleBasic();
    ComputeDuals(phase_one);
    int since_refactor = 0;
    int degenerate_run = 0;
    int iter = 0;
    SolveStatus status = SolveStatus::kIterationLimit;
    for (; iter < max_iterations_; ++iter) {
      if (since_refactor >= opt_.refactor_interval) {
        if (!Refactor()) break;
        since_refactor = 0;
        phase_one = HasInfeasibleBasic();
        ComputeDuals(phase_one);
      }
      if (phase_one && !HasInfeasibleBasic()) {
        phase_one = false;
        ComputeDuals(false);
      }
      const bool bland = degenerate_run >= opt_.degenerate_limit;
      int direction = 0;
      const int entering = Price(bland, &direction);
      if (entering < 0) {
        if (phase_one) {
          status = SolveStatus::kInfeasible;
        } else {
          status = SolveStatus::kOptimal;
        }
        break;
      }
      ComputeColumn(entering, &alpha_);
      double step = 0.0;
      int leaving_pos = -1;
      bool flip = false;
      if (!RatioTest(entering, direction, phase_one, &step, &leaving_pos,
                     &flip)) {
        status = phase_one ? SolveStatus::kInfeasible : SolveStatus::kUnbounded;
        break;
      }
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      // Primal update.
      const double delta = step * direction;
      if (delta != 0.0) {
        for (Eigen::Index i = 0; i < m_; ++i) {
          if (alpha_(i) != 0.0) value_(head_[i]) -= delta * alpha_(i);
        }
        value_(entering) += delta;
      }
      if (flip) {
        value_(entering) = direction > 0 ? upper_(entering) : lower_(entering);
        if (phase_one) ComputeDuals(true);
        continue;
      }
      const int leaving = head_[leaving_pos];
      value_(leaving) = leaving_bound_;
      const double dq = reduced_cost_entering_;
      Pivot(entering, leaving_pos);
      ++since_refactor;
      if (phase_one) {
        ComputeDuals(true);
      } else {
        // y <- y + (d_q / alpha_r) rho_r, rho_r taken from the updated row.
        y_.noalias() += dq * binv_.row(leaving_pos).transpose();
      }
    }
    result.status = status;
    result.iterations = iter;
    Finish(&result);
    return result;
  }

 private:
  double InitialValue(Eigen::Index j) const {
    if (std::isfinite(lower_(j))) return lower_(j);
    if (std::isfinite(upper_(j))) return upper_(j);
    return 0.0;
  }

  bool IsInfeasible(int var) const {
    double v = value_(var);
    return v < lower_(var) - opt_.primal_tolerance ||
           v > upper_(var) + opt_.primal_tolerance;
  }

  bool HasInfeasibleBasic() const {
    for (int var : head_) {
      if (IsInfeasible(var)) return true;
    }
    return false;
  }

  // B^{-1} and basic values from scratch.
  bool Refactor() {
    if (m_ == 0) {
      binv_.resize(0, 0);
      return true;
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index r = 0; r < m_; ++r) {
      const int var = head_[r];
      if (var < n_) {
        for (SparseMatrix::InnerIterator it(g_, var); it; ++it) {
          trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(r),
                            it.value());
        }
      } else {
        trip.emplace_back(var - static_cast<int>(n_), static_cast<int>(r), -1.0);
      }
    }
    SparseMatrix basis(m_, m_);
    basis.setFromTriplets(trip.begin(), trip.end());
    basis.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(basis);
    lu.factorize(basis);
    if (lu.info() != Eigen::Success) return false;
    Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m_, m_);
    Eigen::MatrixXd inverse = lu.solve(identity);
    if (lu.info() != Eigen::Success) return false;
    binv_ = inverse;
    // x_B = -B^{-1} N x_N
    Vector rhs = Vector::Zero(m_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (position_[j] >= 0 || value_(j) == 0.0) continue;
      for (SparseMatrix::InnerIterator it(g_, j); it; ++it) {
        rhs(it.row()) -= it.value() * value_(j);
      }
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto var = n_ + i;
      if (position_[var] >= 0) continue;
      rhs(i) += value_(var);
    }
    Vector xb = binv_ * rhs;
    for (Eigen::Index r = 0; r < m_; ++r) value_(head_[r]) = xb(r);
    return true;
  }

  double PhaseOneCost(int var) const {
    if (value_(var) < lower_(var) - opt_.primal_tolerance) return -1.0;
    if (value_(var) > upper_(var) + opt_.primal_tolerance) return 1.0;
    return 0.0;
  }

  void ComputeDuals(bool phase_one) {
    y_.setZero(m_);
    for (Eigen::Index r = 0; r < m_; ++r) {
      const int var = head_[r];
      const double c = phase_one ? PhaseOneCost(var) : cost_(var);
      if (c != 0.0) y_.noalias() += c * binv_.row(r).transpose();
    }
  }

  double ReducedCost(Eigen::Index var, bool phase_one_cost_zero) const {
    if (var < n_) {
      double d = phase_one_cost_zero ? 0.0 : cost_(var);
      for (SparseMatrix::InnerIterator it(g_, var); it; ++it) {
        d -= y_(it.row()) * it.value();
      }
      return d;
    }
    // Logical column is -e_i.
    return (phase_one_cost_zero ? 0.0 : cost_(var)) + y_(var - n_);
  }

  // Returns the entering variable or -1 at optimality.
  int Price(bool bland, int* direction) {
    const bool phase_one = phase_one_flag();
    int best = -1;
    double best_score = 0.0;
    const Eigen::Index total = n_ + m_;
    for (Eigen::Index j = 0; j < total; ++j) {
      if (position_[j] >= 0) continue;
      if (lower_(j) == upper_(j)) continue;
      const double d = ReducedCost(j, phase_one);
      const double v = value_(j);
      int dir = 0;
      if (d < -opt_.dual_tolerance && v < upper_(j)) {
        dir = 1;
      } else if (d > opt_.dual_tolerance && v > lower_(j)) {
        dir = -1;
      }
      if (dir == 0) continue;
      const double score = std::abs(d);
      if (best < 0 || (!bland && score > best_score)) {
        best = static_cast<int>(j);
        best_score = score;
        *direction = dir;
        reduced_cost_entering_ = d;
        if (bland) break;
      }
    }
    return best;
  }

  bool phase_one_flag() const { return HasInfeasibleBasic(); }

  void ComputeColumn(int var, Vector* alpha) const {
    alpha->setZero(m_);
    if (var < n_) {
      for (SparseMatrix::InnerIterator it(g_, var); it; ++it) {
        alpha->noalias() += it.value() * binv_.col(it.row());
      }
    } else {
      alpha->noalias() = -binv_.col(var - n_);
    }
  }

  bool RatioTest(int entering, int direction, bool phase_one, double* step,
                 int* leaving_pos, bool* flip) {
    double best = kInf;
    int best_pos = -1;
    int best_var = -1;
    double best_bound = 0.0;
    const double tie = 1e-12;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double a = alpha_(i);
      if (std::abs(a) <= opt_.pivot_tolerance) continue;
      const int var = head_[i];
      const double rate = -direction * a;
      const double v = value_(var);
      const double lo = lower_(var), hi = upper_(var);
      double bound;
      if (rate > 0.0) {
        if (phase_one && v < lo - opt_.primal_tolerance) {
          bound = lo;
        } else if (v > hi + opt_.primal_tolerance) {
          continue;
        } else if (std::isfinite(hi)) {
          bound = hi;
        } else {
          continue;
        }
      } else {
        if (phase_one && v > hi + opt_.primal_tolerance) {
          bound = hi;
        } else if (v < lo - opt_.primal_tolerance) {
          continue;
        } else if (std::isfinite(lo)) {
          bound = lo;
        } else {
          continue;
        }
      }
      const double t = std::max(0.0, (bound - v) / rate);
      if (best_pos < 0) {
        best = t;
        best_pos = static_cast<int>(i);
        best_var = var;
        best_bound = bound;
        continue;
      }
      const double slack = tie * std::max(1.0, best);
      if (t < best - slack || (t <= best + slack && var < best_var)) {
        best = t;
        best_pos = static_cast<int>(i);
        best_var = var;
        best_bound = bound;
      }
    }
    const double range = upper_(entering) - lower_(entering);
    if (std::isfinite(range) && range <= best) {
      *step = range;
      *flip = true;
      return true;
    }
    if (best_pos < 0) return false;
    *step = best;
    *leaving_pos = best_pos;
    *flip = false;
    leaving_bound_ = best_bound;
    return true;
  }

  void Pivot(int entering, int r) {
    const double pivot = alpha_(r);
    binv_.row(r) /= pivot;
    // Skip zero entries of the new pivot row.
    nz_.clear();
    for (Eigen::Index k = 0; k < m_; ++k) {
      if (binv_(r, k) != 0.0) nz_.push_back(static_cast<int>(k));
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double a = alpha_(i);
      if (a == 0.0) continue;
      double* row = binv_.row(i).data();
      const double* prow = binv_.row(r).data();
      for (int k : nz_) row[k] -= a * prow[k];
    }
    const int leaving = head_[r];
    position_[leaving] = -1;
    head_[r] = entering;
    position_[entering] = r;
  }

  void Finish(SolveResult* result) const {
    result->x = value_.head(n_);
    // Row duals: logical column -e_i has reduced cost y_i, and with the
    // P x + q + G'y + nu = 0 convention the row multiplier is -y_i.
    Vector y = Vector::Zero(m_);
    for (Eigen::Index r = 0; r < m_; ++r) {
      const int var = head_[r];
      if (cost_(var) != 0.0) y.noalias() += cost_(var) * binv_.row(r).transpose();
    }
    result->row_duals = -y;
    result->bound_duals.setZero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (position_[j] >= 0) continue;
      double d = cost_(j);
      for (SparseMatrix::InnerIterator it(g_, j); it; ++it) {
        d -= y(it.row()) * it.value();
      }
      result->bound_duals(j) = -d;
    }
    result->objective_value = problem_.q.dot(result->x) + problem_.objective_offset;
    KktResiduals kkt = ComputeKktResiduals(problem_, result->x,
                                           result->row_duals,
                                           result->bound_duals);
    result->primal_residual = kkt.primal;
    result->dual_residual = kkt.dual;
  }

  const StandardProblem& problem_;
  SimplexOptions opt_;
  Eigen::Index n_;
  Eigen::Index m_;
  SparseMatrix g_;
  Vector lower_, upper_, cost_, value_;
  std::vector<int> position_;
  std::vector<int> head_;
  RowMajorMatrix binv_;
  Vector y_;
  Vector alpha_;
  std::vector<int> nz_;
  double leaving_bound_ = 0.0;
  double reduced_cost_entering_ = 0.0;
  int max_iterations_ = 0;
};

}  // namespace

SolveResult SolveLpSimplex(const StandardProblem& problem,
                           const SimplexOptions& options) {
  problem.Validate();
  if (problem.HasQuadratic()) {
    throw std::invalid_argument("simplex requires P == 0");
  }
  auto start = std::chrono::steady_clock::now();
  Simplex simplex(problem, options);
  SolveResult result = simplex.Run();
  result.solve_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  return result;
}

}  // namespace safete
