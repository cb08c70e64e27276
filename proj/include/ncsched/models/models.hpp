#pragma once

// Closed-loop ModePair builders for the three network archetypes (SC, CA,
// SCA), discrete LQR gain synthesis, and the benchmark vehicle model.
// Gain convention throughout: u = -K x.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <tuple>
#include <variant>

#include "ncsched/geometry/polytope.hpp"
#include "ncsched/invariance/invariance.hpp"

namespace ncsched::models {

using geometry::Polytope;
using invariance::AffineLaw;
using invariance::ModePair;

enum class NetworkKind { SC, CA, SCA };

struct DynamicController {
  Eigen::MatrixXd Ac, Bc, Cc;
};

struct AgentSpec {
  Eigen::MatrixXd A, B, E;
  std::variant<Eigen::MatrixXd, DynamicController> controller;  // static gain K or dynamic
  Polytope state_bounds;        // X in R^n
  Polytope input_bounds;        // U in R^r
  Polytope disturbance_bounds;  // V in R^p
  NetworkKind network_kind = NetworkKind::SC;

  int n() const { return static_cast<int>(A.rows()); }
  int r() const { return static_cast<int>(B.cols()); }

  const Eigen::MatrixXd& gain() const {
    if (!std::holds_alternative<Eigen::MatrixXd>(controller))
      throw std::invalid_argument("agent has no static gain");
    return std::get<Eigen::MatrixXd>(controller);
  }

  void check_dimensions() const {
    const int nn = n(), rr = r();
    if (A.cols() != nn) throw std::invalid_argument("A must be square");
    if (B.rows() != nn) throw std::invalid_argument("B row mismatch");
    if (E.rows() != nn) throw std::invalid_argument("E row mismatch");
    if (state_bounds.dim() != nn) throw std::invalid_argument("X dimension mismatch");
    if (input_bounds.dim() != rr) throw std::invalid_argument("U dimension mismatch");
    if (disturbance_bounds.dim() != E.cols())
      throw std::invalid_argument("V dimension mismatch");
    if (std::holds_alternative<Eigen::MatrixXd>(controller)) {
      const auto& K = std::get<Eigen::MatrixXd>(controller);
      if (K.rows() != rr || K.cols() != nn) throw std::invalid_argument("K dimension mismatch");
    }
  }
};

struct BuiltAgent {
  ModePair mode_pair;
  Polytope admissible;  // the lifted admissible set A in z-space
};

namespace detail {

inline Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

// rows of P applied to the block starting at `offset` of a z of width `total`
inline void block_rows(std::vector<Eigen::VectorXd>& rows, std::vector<double>& offs,
                       const Polytope& p, int offset, int total) {
  for (int i = 0; i < p.rows(); ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(total);
    row.segment(offset, p.dim()) = p.normals().row(i).transpose();
    rows.push_back(std::move(row));
    offs.push_back(p.offsets()(i));
  }
}

// rows of U applied to the linear image G z (input admissibility of -G z)
inline void mapped_rows(std::vector<Eigen::VectorXd>& rows, std::vector<double>& offs,
                        const Polytope& u, const Eigen::MatrixXd& G, int total) {
  for (int i = 0; i < u.rows(); ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(total);
    row = (u.normals().row(i) * G).transpose();
    rows.push_back(std::move(row));
    offs.push_back(u.offsets()(i));
  }
}

inline Polytope assemble(const std::vector<Eigen::VectorXd>& rows,
                         const std::vector<double>& offs) {
  Eigen::MatrixXd A(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  Eigen::VectorXd b(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    A.row(static_cast<int>(i)) = rows[i].transpose();
    b(static_cast<int>(i)) = offs[i];
  }
  return Polytope(std::move(A), std::move(b));
}

}  // namespace detail

// SC network, static gain, z = (x, xhat):
//   connected:    x+ = (A-BK)x + Ev,   xhat+ = (A-BK)x
//   disconnected: x+ = Ax - BK xhat + Ev,   xhat+ = (A-BK) xhat
// Admissible set: x in X, xhat in X, and the applied input in U in both modes
// (-K xhat when disconnected, -K x when connected).  Sync subspace {x = xhat}.
inline BuiltAgent build_sc(const AgentSpec& spec) {
  if (spec.network_kind != NetworkKind::SC)
    throw std::invalid_argument("build_sc: network kind is not SC");
  spec.check_dimensions();
  const int n = spec.n();
  const Eigen::MatrixXd& K = spec.gain();
  const Eigen::MatrixXd Acl = spec.A - spec.B * K;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd Ez = Eigen::MatrixXd::Zero(n, spec.E.cols());

  AffineLaw f;
  f.M = Eigen::MatrixXd(2 * n, 2 * n);
  f.M << Acl, Z, Acl, Z;
  f.E = detail::vstack(spec.E, Ez);

  AffineLaw fhat;
  fhat.M = Eigen::MatrixXd(2 * n, 2 * n);
  fhat.M << spec.A, -spec.B * K, Z, Acl;
  fhat.E = detail::vstack(spec.E, Ez);

  Eigen::MatrixXd sync(2 * n, n);
  sync << Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n);

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  detail::block_rows(rows, offs, spec.state_bounds, 0, 2 * n);
  detail::block_rows(rows, offs, spec.state_bounds, n, 2 * n);
  Eigen::MatrixXd Gxh = Eigen::MatrixXd::Zero(spec.r(), 2 * n);
  Gxh.rightCols(n) = -K;
  detail::mapped_rows(rows, offs, spec.input_bounds, Gxh, 2 * n);
  Eigen::MatrixXd Gx = Eigen::MatrixXd::Zero(spec.r(), 2 * n);
  Gx.leftCols(n) = -K;
  detail::mapped_rows(rows, offs, spec.input_bounds, Gx, 2 * n);

  return {ModePair::make(f, fhat, spec.disturbance_bounds, sync),
          geometry::canonicalize(detail::assemble(rows, offs))};
}

// CA network, static gain, z = (x, mem) with mem in R^r holding the last
// computed input:
//   connected:    x+ = (A-BK)x + Ev,   mem+ = -Kx
//   disconnected: x+ = Ax + B mem + Ev,   mem+ = mem
// Admissible: x in X, mem in U, -Kx in U.  No estimator jump (sync = I).
inline BuiltAgent build_ca(const AgentSpec& spec) {
  if (spec.network_kind != NetworkKind::CA)
    throw std::invalid_argument("build_ca: network kind is not CA");
  spec.check_dimensions();
  const int n = spec.n(), r = spec.r();
  const Eigen::MatrixXd& K = spec.gain();
  const Eigen::MatrixXd Acl = spec.A - spec.B * K;
  const Eigen::MatrixXd Ez = Eigen::MatrixXd::Zero(r, spec.E.cols());

  AffineLaw f;
  f.M = Eigen::MatrixXd(n + r, n + r);
  f.M << Acl, Eigen::MatrixXd::Zero(n, r), -K, Eigen::MatrixXd::Zero(r, r);
  f.E = detail::vstack(spec.E, Ez);

  AffineLaw fhat;
  fhat.M = Eigen::MatrixXd(n + r, n + r);
  fhat.M << spec.A, spec.B, Eigen::MatrixXd::Zero(r, n), Eigen::MatrixXd::Identity(r, r);
  fhat.E = detail::vstack(spec.E, Ez);

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  detail::block_rows(rows, offs, spec.state_bounds, 0, n + r);
  detail::block_rows(rows, offs, spec.input_bounds, n, n + r);
  Eigen::MatrixXd Gx = Eigen::MatrixXd::Zero(r, n + r);
  Gx.leftCols(n) = -K;
  detail::mapped_rows(rows, offs, spec.input_bounds, Gx, n + r);

  return {ModePair::make(f, fhat, spec.disturbance_bounds, std::nullopt),
          geometry::canonicalize(detail::assemble(rows, offs))};
}

// SCA network, dynamic controller, z = (x, mem, xhat, uc):
//   connected:    x+ = Ax + B Cc uc + Ev, mem+ = Cc uc, xhat+ = Ax + B Cc uc,
//                 uc+ = Ac uc + Bc x
//   disconnected: x+ = Ax + B mem + Ev,  mem+ = mem,   xhat+ = A xhat + B Cc uc,
//                 uc+ = Ac uc + Bc xhat
// Admissible: x in X, mem in U, xhat in X, Cc uc in U.  Sync: xhat = x.
inline BuiltAgent build_sca(const AgentSpec& spec) {
  if (spec.network_kind != NetworkKind::SCA)
    throw std::invalid_argument("build_sca: network kind is not SCA");
  if (!std::holds_alternative<DynamicController>(spec.controller))
    throw std::invalid_argument("build_sca: dynamic controller required");
  const auto& ctl = std::get<DynamicController>(spec.controller);
  const int n = spec.n(), r = spec.r();
  const int nc = static_cast<int>(ctl.Ac.rows());
  if (ctl.Ac.cols() != nc || ctl.Bc.rows() != nc || ctl.Bc.cols() != n ||
      ctl.Cc.rows() != r || ctl.Cc.cols() != nc)
    throw std::invalid_argument("build_sca: controller dimension mismatch");
  const int dz = n + r + n + nc;
  auto Z = [](int a, int b) { return Eigen::MatrixXd::Zero(a, b); };

  AffineLaw f;
  f.M = Eigen::MatrixXd(dz, dz);
  f.M << spec.A, Z(n, r), Z(n, n), spec.B * ctl.Cc,
         Z(r, n), Z(r, r), Z(r, n), ctl.Cc,
         spec.A, Z(n, r), Z(n, n), spec.B * ctl.Cc,
         ctl.Bc, Z(nc, r), Z(nc, n), ctl.Ac;
  f.E = Eigen::MatrixXd::Zero(dz, spec.E.cols());
  f.E.topRows(n) = spec.E;

  AffineLaw fhat;
  fhat.M = Eigen::MatrixXd(dz, dz);
  fhat.M << spec.A, spec.B, Z(n, n), Z(n, nc),
            Z(r, n), Eigen::MatrixXd::Identity(r, r), Z(r, n), Z(r, nc),
            Z(n, n), Z(n, r), spec.A, spec.B * ctl.Cc,
            Z(nc, n), Z(nc, r), ctl.Bc, ctl.Ac;
  fhat.E = f.E;

  Eigen::MatrixXd sync(dz, n + r + nc);
  sync.setZero();
  sync.block(0, 0, n, n).setIdentity();
  sync.block(n, n, r, r).setIdentity();
  sync.block(n + r, 0, n, n).setIdentity();  // xhat = x
  sync.block(n + r + n, n + r, nc, nc).setIdentity();

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  detail::block_rows(rows, offs, spec.state_bounds, 0, dz);
  detail::block_rows(rows, offs, spec.input_bounds, n, dz);
  detail::block_rows(rows, offs, spec.state_bounds, n + r, dz);
  Eigen::MatrixXd Guc = Eigen::MatrixXd::Zero(r, dz);
  Guc.rightCols(nc) = ctl.Cc;
  detail::mapped_rows(rows, offs, spec.input_bounds, Guc, dz);

  return {ModePair::make(f, fhat, spec.disturbance_bounds, sync),
          geometry::canonicalize(detail::assemble(rows, offs))};
}

inline BuiltAgent build_agent(const AgentSpec& spec) {
  switch (spec.network_kind) {
    case NetworkKind::SC: return build_sc(spec);
    case NetworkKind::CA: return build_ca(spec);
    case NetworkKind::SCA: return build_sca(spec);
  }
  throw std::logic_error("unreachable");
}

// Discrete LQR gain from the Riccati fixed point
//   P <- A'PA - A'PB (R + B'PB)^{-1} B'PA + Q
// iterated to 1e-10; K = (R + B'PB)^{-1} B'PA, u = -Kx.
inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols())
    throw std::invalid_argument("lqr_gain: dimension mismatch");
  Eigen::MatrixXd P = Q;
  constexpr int kMaxIter = 100000;
  constexpr double kTol = 1e-10;
  for (int k = 0; k < kMaxIter; ++k) {
    const Eigen::MatrixXd BtPB = R + B.transpose() * P * B;
    const Eigen::MatrixXd Kk = BtPB.ldlt().solve(B.transpose() * P * A);
    const Eigen::MatrixXd Pn =
        A.transpose() * P * A - A.transpose() * P * B * Kk + Q;
    const double delta = (Pn - P).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(delta)) throw std::runtime_error("lqr_gain: Riccati diverged");
    P = Pn;
    if (delta < kTol) {
      return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    }
  }
  throw std::runtime_error("lqr_gain: Riccati iteration did not converge");
}

// Benchmark vehicle longitudinal model (sampling period h, actuation lag tau):
//   A = [1 h 0; 0 1 h; 0 0 1-h/tau], B = [0; 0; h/tau], E = [0; 0; 1].
inline std::tuple<Eigen::MatrixXd, Eigen::MatrixXd, Eigen::MatrixXd> vehicle_model(
    double h, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("vehicle_model: tau must be positive");
  Eigen::MatrixXd A(3, 3), B(3, 1), E(3, 1);
  A << 1, h, 0, 0, 1, h, 0, 0, 1.0 - h / tau;
  B << 0, 0, h / tau;
  E << 0, 0, 1;
  return {A, B, E};
}

}  // namespace ncsched::models
