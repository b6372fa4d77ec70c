#include "safete/problem.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace safete {
namespace {

std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseDouble(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw std::invalid_argument("problem file: bad number '" + s + "'");
  }
  return v;
}

void Expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw std::invalid_argument("problem file: expected '" + token + "', got '" +
                                got + "'");
  }
}

std::string Token(std::istream& in) {
  std::string s;
  if (!(in >> s)) throw std::invalid_argument("problem file: truncated");
  return s;
}

long Integer(std::istream& in) {
  std::string s = Token(in);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("problem file: bad integer '" + s + "'");
  }
  return v;
}

void WriteTriplets(std::ostream& out, const SparseMatrix& m) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out << it.row() << " " << it.col() << " " << FormatDouble(it.value())
          << "\n";
    }
  }
}

SparseMatrix ReadTriplets(std::istream& in, long rows, long cols, long nnz) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nnz);
  for (long i = 0; i < nnz; ++i) {
    long r = Integer(in);
    long c = Integer(in);
    double v = ParseDouble(Token(in));
    if (r < 0 || r >= rows || c < 0 || c >= cols) {
      throw std::invalid_argument("problem file: triplet out of range");
    }
    trip.emplace_back(r, c, v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

void StandardProblem::Validate() const {
  const Eigen::Index n = q.size();
  const Eigen::Index m = G.rows();
  if (P.rows() != n || P.cols() != n) {
    throw std::invalid_argument("P must be n x n");
  }
  if (G.cols() != n) throw std::invalid_argument("G must have n columns");
  if (row_lower.size() != m || row_upper.size() != m) {
    throw std::invalid_argument("row bounds must have m entries");
  }
  if (var_lower.size() != n || var_upper.size() != n) {
    throw std::invalid_argument("variable bounds must have n entries");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (row_lower(i) > row_upper(i)) {
      throw std::invalid_argument("row " + std::to_string(i) +
                                  " has lower > upper");
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (var_lower(j) > var_upper(j)) {
      throw std::invalid_argument("variable " + std::to_string(j) +
                                  " has lower > upper");
    }
  }
  SparseMatrix asym = SparseMatrix(P.transpose()) - P;
  for (int k = 0; k < asym.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it) {
      if (std::abs(it.value()) > 1e-12) {
        throw std::invalid_argument("P is not symmetric");
      }
    }
  }
}

bool StandardProblem::HasQuadratic() const {
  for (int k = 0; k < P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(P, k); it; ++it) {
      if (it.value() != 0.0) return true;
    }
  }
  return false;
}

double StandardProblem::Objective(const Vector& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + objective_offset;
}

const char* ToString(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

void WriteProblem(std::ostream& out, const StandardProblem& p) {
  out << "safete-problem 1\n";
  out << "n " << p.num_vars() << " m " << p.num_rows() << " p_nnz "
      << p.P.nonZeros() << " g_nnz " << p.G.nonZeros() << "\n";
  out << "offset " << FormatDouble(p.objective_offset) << "\n";
  out << "P\n";
  WriteTriplets(out, p.P);
  out << "q\n";
  for (Eigen::Index i = 0; i < p.q.size(); ++i) out << FormatDouble(p.q(i)) << "\n";
  out << "G\n";
  WriteTriplets(out, p.G);
  out << "rows\n";
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    out << FormatDouble(p.row_lower(i)) << " " << FormatDouble(p.row_upper(i))
        << "\n";
  }
  out << "vars\n";
  for (Eigen::Index i = 0; i < p.num_vars(); ++i) {
    out << FormatDouble(p.var_lower(i)) << " " << FormatDouble(p.var_upper(i))
        << "\n";
  }
}

StandardProblem ReadProblem(std::istream& in) {
  Expect(in, "safete-problem");
  Expect(in, "1");
  Expect(in, "n");
  long n = Integer(in);
  Expect(in, "m");
  long m = Integer(in);
  Expect(in, "p_nnz");
  long p_nnz = Integer(in);
  Expect(in, "g_nnz");
  long g_nnz = Integer(in);
  if (n < 0 || m < 0 || p_nnz < 0 || g_nnz < 0) {
    throw std::invalid_argument("problem file: negative size");
  }
  StandardProblem p;
  Expect(in, "offset");
  p.objective_offset = ParseDouble(Token(in));
  Expect(in, "P");
  p.P = ReadTriplets(in, n, n, p_nnz);
  Expect(in, "q");
  p.q.resize(n);
  for (long i = 0; i < n; ++i) p.q(i) = ParseDouble(Token(in));
  Expect(in, "G");
  p.G = ReadTriplets(in, m, n, g_nnz);
  Expect(in, "rows");
  p.row_lower.resize(m);
  p.row_upper.resize(m);
  for (long i = 0; i < m; ++i) {
    p.row_lower(i) = ParseDouble(Token(in));
    p.row_upper(i) = ParseDouble(Token(in));
  }
  Expect(in, "vars");
  p.var_lower.resize(n);
  p.var_upper.resize(n);
  for (long i = 0; i < n; ++i) {
    p.var_lower(i) = ParseDouble(Token(in));
    p.var_upper(i) = ParseDouble(Token(in));
  }
  p.Validate();
  return p;
}

std::string ProblemToString(const StandardProblem& problem) {
  std::ostringstream out;
  WriteProblem(out, problem);
  return out.str();
}

StandardProblem ProblemFromString(const std::string& text) {
  std::istringstream in(text);
  return ReadProblem(in);
}

}  // namespace safete
