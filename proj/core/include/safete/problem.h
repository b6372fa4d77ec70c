#ifndef SAFETE_PROBLEM_H_
#define SAFETE_PROBLEM_H_

// Canonical convex problem shared by the LP and QP solvers:
//
//   minimize    0.5 x'Px + q'x + offset
//   subject to  row_lower <= G x <= row_upper
//               var_lower <=   x <= var_upper
//
// P is stored as a full symmetric matrix. Infinite bounds are +-infinity.

#include <iosfwd>
#include <limits>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace safete {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

struct StandardProblem {
  SparseMatrix P;
  Vector q;
  SparseMatrix G;
  Vector row_lower;
  Vector row_upper;
  Vector var_lower;
  Vector var_upper;
  double objective_offset = 0.0;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_rows() const { return G.rows(); }

  // Throws std::invalid_argument on inconsistent dimensions, asymmetric P or
  // crossed bounds.
  void Validate() const;
  bool HasQuadratic() const;
  double Objective(const Vector& x) const;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* ToString(SolveStatus status);

struct SolveResult {
  Vector x;
  // Row multipliers y and bound multipliers nu with the sign convention
  //   P x + q + G'y + nu = 0,  y_i > 0 at an active upper bound,
  //   y_i < 0 at an active lower bound (same for nu).
  Vector row_duals;
  Vector bound_duals;
  SolveStatus status = SolveStatus::kIterationLimit;
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double objective_value = 0.0;
  bool polished = false;
  double solve_seconds = 0.0;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

// Plain-text sparse triplet format. Doubles are written with 17 significant
// digits so that Read(Write(p)) == p bit for bit.
//
//   safete-problem 1
//   n <vars> m <rows> p_nnz <k> g_nnz <k>
//   offset <v>
//   P
//   <row> <col> <value>        (k lines)
//   q
//   <value>                    (n lines)
//   G
//   <row> <col> <value>        (k lines)
//   rows
//   <lower> <upper>            (m lines)
//   vars
//   <lower> <upper>            (n lines)
void WriteProblem(std::ostream& out, const StandardProblem& problem);
StandardProblem ReadProblem(std::istream& in);
std::string ProblemToString(const StandardProblem& problem);
StandardProblem ProblemFromString(const std::string& text);

}  // namespace safete

#endif  // SAFETE_PROBLEM_H_
