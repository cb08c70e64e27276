#pragma once
#include <stdexcept>

// Dense two-phase simplex solver for the polytope calculus.
//
// Solves  max c.x  s.t.  A x <= b  with x free.  Free variables are split
// into positive parts and slack columns are appended, then a standard
// tableau simplex runs phase 1 (drive artificials out) and phase 2.
// Dantzig pricing with a Bland fallback after a run of degenerate pivots
// keeps the solver deterministic and cycle-free.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ncsched::geometry {

inline constexpr double kLpEps = 1e-9;   // feasibility tolerance (eps_lp)
inline constexpr double kPivotEps = 1e-11;

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Eigen::VectorXd point;
};

namespace detail {

class SimplexTableau {
 public:
  SimplexTableau(int rows, int cols) : m_(rows), n_(cols), t_(rows + 1, cols + 1) {
    t_.setZero();
  }

  double& at(int r, int c) { return t_(r, c); }
  double& rhs(int r) { return t_(r, n_); }
  double& obj(int c) { return t_(m_, c); }
  double& objval() { return t_(m_, n_); }

  void pivot(int pr, int pc) {
    const double p = t_(pr, pc);
    t_.row(pr) /= p;
    for (int r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      const double f = t_(r, pc);
      if (std::abs(f) > 0.0) t_.row(r) -= f * t_.row(pr);
    }
  }

  // Returns false when the objective is unbounded.
  bool iterate(std::vector<int>& basis, int limit_cols) {
    int degenerate_run = 0;
    const long max_iter = 2000L * (m_ + n_) + 10000;
    for (long iter = 0;; ++iter) {
      if (iter > max_iter) throw std::runtime_error("simplex: iteration limit");
      const bool bland = degenerate_run > 2 * (m_ + n_);
      int pc = -1;
      double best = kPivotEps;
      for (int c = 0; c < limit_cols; ++c) {
        const double red = t_(m_, c);
        if (red > kPivotEps) {
          if (bland) { pc = c; break; }
          if (red > best) { best = red; pc = c; }
        }
      }
      if (pc < 0) return true;  // optimal
      int pr = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        const double a = t_(r, pc);
        if (a > kPivotEps) {
          const double ratio = t_(r, n_) / a;
          if (ratio < best_ratio - kPivotEps ||
              (ratio < best_ratio + kPivotEps && (pr < 0 || basis[r] < basis[pr]))) {
            best_ratio = ratio;
            pr = r;
          }
        }
      }
      if (pr < 0) return false;  // unbounded
      degenerate_run = best_ratio < kPivotEps ? degenerate_run + 1 : 0;
      pivot(pr, pc);
      basis[pr] = pc;
    }
  }

  int rows() const { return m_; }
  int cols() const { return n_; }

 private:
  int m_, n_;
  Eigen::MatrixXd t_;
};

}  // namespace detail

// max c.x  s.t.  A x <= b, x free.
inline LpSolution lp_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                              const Eigen::VectorXd& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  LpSolution sol;
  if (m == 0) {  // unconstrained
    if (c.size() == 0 || c.lpNorm<Eigen::Infinity>() < kPivotEps) {
      sol.status = LpStatus::Optimal;
      sol.value = 0.0;
      sol.point = Eigen::VectorXd::Zero(n);
    } else {
      sol.status = LpStatus::Unbounded;
    }
    return sol;
  }

  // columns: x+ (n), x- (n), slack (m), artificial (m, phase 1 only)
  const int nv = 2 * n + m;
  int n_art = 0;
  for (int r = 0; r < m; ++r)
    if (b(r) < 0) ++n_art;

  detail::SimplexTableau tab(m, nv + n_art);
  std::vector<int> basis(m, -1);
  int art = 0;
  for (int r = 0; r < m; ++r) {
    const double sign = b(r) < 0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      tab.at(r, j) = sign * A(r, j);
      tab.at(r, n + j) = -sign * A(r, j);
    }
    tab.at(r, 2 * n + r) = sign;  // slack
    tab.rhs(r) = sign * b(r);
    if (b(r) < 0) {
      tab.at(r, nv + art) = 1.0;
      basis[r] = nv + art;
      ++art;
    } else {
      basis[r] = 2 * n + r;
    }
  }

  if (n_art > 0) {
    // phase 1: maximize -sum(artificials); objective row = sum of artificial rows
    for (int r = 0; r < m; ++r) {
      if (basis[r] >= nv) {
        for (int cc = 0; cc < nv; ++cc) tab.obj(cc) += tab.at(r, cc);
        tab.objval() += tab.rhs(r);
      }
    }
    tab.iterate(basis, nv);  // never unbounded: objective bounded above by 0
    if (tab.objval() > kLpEps) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // drive residual artificials out of the basis
    for (int r = 0; r < m; ++r) {
      if (basis[r] >= nv) {
        int pc = -1;
        for (int cc = 0; cc < nv; ++cc) {
          if (std::abs(tab.at(r, cc)) > kPivotEps) { pc = cc; break; }
        }
        if (pc >= 0) {
          tab.pivot(r, pc);
          basis[r] = pc;
        }
        // else: redundant row, keep the artificial at zero level
      }
    }
    // reset objective row for phase 2
    for (int cc = 0; cc <= nv + n_art; ++cc) tab.obj(cc) = 0.0;
    tab.objval() = 0.0;
  }

  // phase 2 objective: c.(x+ - x-); eliminate basic columns from the objective row
  for (int j = 0; j < n; ++j) {
    tab.obj(j) = c(j);
    tab.obj(n + j) = -c(j);
  }
  for (int r = 0; r < m; ++r) {
    const int bc = basis[r];
    const double coef = tab.obj(bc);
    if (std::abs(coef) > 0.0) {
      for (int cc = 0; cc < tab.cols(); ++cc) tab.obj(cc) -= coef * tab.at(r, cc);
      tab.objval() -= coef * tab.rhs(r);
    }
  }

  const bool bounded = tab.iterate(basis, nv);
  if (!bounded) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int bc = basis[r];
    if (bc < n)
      x(bc) += tab.rhs(r);
    else if (bc < 2 * n)
      x(bc - n) -= tab.rhs(r);
  }
  sol.status = LpStatus::Optimal;
  sol.point = x;
  sol.value = c.dot(x);
  return sol;
}

// Feasibility probe: is {x: Ax <= b} non-empty?
inline bool lp_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(A.cols());
  return lp_maximize(c, A, b).status != LpStatus::Infeasible;
}

}  // namespace ncsched::geometry
