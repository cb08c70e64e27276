#pragma once

// Robust invariant sets, reachable sets and safe time intervals for affine
// mode pairs.
//
// Reachable sets are handled two ways: a ReachChain support calculus (exact,
// dimension-independent, used for every containment decision) and an explicit
// H-rep materialization through the geometry module for callers that need a
// Polytope.  Supports of an affine chain compose exactly:
//   supp(M X (+) sum_k P_k E_k V, d) = supp(X, (M)^T d) + sum supp(V, (P_k E_k)^T d).

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ncsched/geometry/polytope.hpp"

namespace ncsched::invariance {

using geometry::Polytope;

struct AffineLaw {
  Eigen::MatrixXd M;  // state map, dim_z x dim_z
  Eigen::MatrixXd E;  // disturbance map, dim_z x dim(V)
};

// The pair of closed-loop update laws of one agent, plus its disturbance set.
// `sync` embeds the measurement-synced subspace: right after a connected slot
// the agent's state lies in {sync * y}, e.g. (x, x) for an SC loop.  Identity
// when the connected law carries no estimator reset.
struct ModePair {
  AffineLaw connected;
  AffineLaw disconnected;
  int dim_z = 0;
  Polytope disturbance_set;
  Eigen::MatrixXd sync;  // dim_z x dim_sync

  static ModePair make(AffineLaw f, AffineLaw fhat, Polytope v,
                       std::optional<Eigen::MatrixXd> sync_embedding = std::nullopt) {
    ModePair mp;
    mp.dim_z = static_cast<int>(f.M.rows());
    if (f.M.cols() != mp.dim_z || fhat.M.rows() != mp.dim_z || fhat.M.cols() != mp.dim_z)
      throw std::invalid_argument("mode pair: M matrices must be square and matching");
    if (f.E.rows() != mp.dim_z || fhat.E.rows() != mp.dim_z)
      throw std::invalid_argument("mode pair: E row count mismatch");
    if (f.E.cols() != v.dim() || fhat.E.cols() != v.dim())
      throw std::invalid_argument("mode pair: E column count must match dim(V)");
    mp.connected = std::move(f);
    mp.disconnected = std::move(fhat);
    mp.disturbance_set = std::move(v);
    mp.sync = sync_embedding ? *sync_embedding
                             : Eigen::MatrixXd::Identity(mp.dim_z, mp.dim_z);
    return mp;
  }

  bool disturbance_contains_origin() const {
    return disturbance_set.member(Eigen::VectorXd::Zero(disturbance_set.dim()));
  }
};

// ---------------------------------------------------------------------------
// ReachChain: base polytope lifted by base_map, plus accumulated noise terms.

class ReachChain {
 public:
  ReachChain(Polytope base, Eigen::MatrixXd base_map)
      : base_(std::move(base)), base_map_(std::move(base_map)) {
    if (base_map_.cols() != base_.dim())
      throw std::invalid_argument("reach chain: base map column mismatch");
  }

  static ReachChain from_set(const Polytope& set) {
    return ReachChain(set, Eigen::MatrixXd::Identity(set.dim(), set.dim()));
  }

  int dim() const { return static_cast<int>(base_map_.rows()); }

  // z+ = M z + E v, v in V
  void step(const AffineLaw& law, const Polytope& v) {
    base_map_ = law.M * base_map_;
    for (auto& t : terms_) t.map = law.M * t.map;
    terms_.push_back({law.E, v});
  }

  // z+ = M z  (disturbance-free transition)
  void step_nominal(const Eigen::MatrixXd& m) {
    base_map_ = m * base_map_;
    for (auto& t : terms_) t.map = m * t.map;
  }

  double support(const Eigen::VectorXd& dir) const {
    double total = base_.support(base_map_.transpose() * dir).value;
    for (const auto& t : terms_)
      total += t.set.support(t.map.transpose() * dir).value;
    return total;
  }

  bool contained_in(const Polytope& p, double tol = geometry::kConEps) const {
    for (int i = 0; i < p.rows(); ++i) {
      if (support(p.normals().row(i).transpose()) > p.offsets()(i) + tol) return false;
    }
    return true;
  }

  // worst row violation against p (<= 0 means contained)
  double margin(const Polytope& p) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.rows(); ++i)
      worst = std::max(worst, support(p.normals().row(i).transpose()) - p.offsets()(i));
    return worst;
  }

  // Explicit H-rep via the geometry route (vertex enumeration + hulls).
  Polytope materialize() const {
    std::vector<Eigen::VectorXd> verts = geometry::enumerate_vertices(base_);
    std::vector<Eigen::VectorXd> mapped;
    mapped.reserve(verts.size());
    for (const auto& v : verts) mapped.push_back(base_map_ * v);
    Polytope acc = geometry::convex_hull(mapped);
    acc.set_vertex_cache(geometry::extreme_filter(mapped, acc));
    for (const auto& t : terms_) {
      const Polytope img = geometry::affine_image(t.set, t.map);
      acc = geometry::minkowski_sum(acc, img);
    }
    return acc;
  }

 private:
  struct NoiseTerm {
    Eigen::MatrixXd map;  // accumulated carry map times E
    Polytope set;
    NoiseTerm(Eigen::MatrixXd e, Polytope v) : map(std::move(e)), set(std::move(v)) {}
  };

  Polytope base_;
  Eigen::MatrixXd base_map_;
  std::vector<NoiseTerm> terms_;
};

// ---------------------------------------------------------------------------
// Pre-sets and the maximal robust invariant set.

// {z : M z + E v in S for all v in V}: rows (a, b) -> (M^T a, b - h_V(E^T a)).
inline Polytope pre_set(const Polytope& s, const AffineLaw& law, const Polytope& v) {
  Eigen::MatrixXd A = s.normals() * law.M;
  Eigen::VectorXd b = s.offsets();
  for (int i = 0; i < s.rows(); ++i) {
    const Eigen::VectorXd w = law.E.transpose() * s.normals().row(i).transpose();
    b(i) -= v.support(w).value;
  }
  return Polytope(std::move(A), std::move(b));
}

struct InvariantSetResult {
  Polytope set;
  bool converged = false;
  bool degenerate = false;  // shrunk to (numerically) a point
  int iterations = 0;
};

inline InvariantSetResult max_robust_invariant(const Polytope& admissible,
                                               const AffineLaw& law, const Polytope& v,
                                               int max_iter = 500) {
  if (admissible.empty()) throw std::invalid_argument("invariant set: empty admissible set");
  InvariantSetResult out;
  Polytope s = geometry::canonicalize(admissible);
  for (int k = 0; k < max_iter; ++k) {
    const Polytope next =
        geometry::canonicalize(geometry::intersect(s, pre_set(s, law, v)));
    if (next.empty()) {
      out.set = next;
      out.converged = true;
      out.degenerate = true;
      out.iterations = k + 1;
      return out;
    }
    if (geometry::contains(next, s)) {  // S_k subset S_{k+1}: fixed point
      out.set = next;
      out.converged = true;
      out.iterations = k;
      break;
    }
    s = next;
    out.iterations = k + 1;
  }
  if (!out.converged) out.set = s;
  if (out.converged) {
    double width = 0.0;
    for (int j = 0; j < out.set.dim(); ++j) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(out.set.dim());
      d(j) = 1.0;
      width = std::max(width, out.set.support(d).value + out.set.support(-d).value);
    }
    out.degenerate = width < 10 * geometry::kConEps;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reachable sets.

inline constexpr double kReachBlowup = 1e6;

// t-fold reach as an explicit polytope (geometry route).  Throws on blow-up.
inline Polytope reach(const Polytope& o, const AffineLaw& law, const Polytope& v, int t) {
  if (t < 1) throw std::invalid_argument("reach: t must be >= 1");
  if (o.empty()) throw std::invalid_argument("reach: empty initial set");
  ReachChain chain = ReachChain::from_set(o);
  for (int k = 0; k < t; ++k) chain.step(law, v);
  for (int j = 0; j < chain.dim(); ++j) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(chain.dim());
    d(j) = 1.0;
    if (std::abs(chain.support(d)) > kReachBlowup || std::abs(chain.support(-d)) > kReachBlowup)
      throw std::runtime_error("reach: diverged (support blow-up)");
  }
  return chain.materialize();
}

// Same composition, kept as a support chain (no materialization).
inline ReachChain reach_chain(const Polytope& o, const AffineLaw& law, const Polytope& v,
                              int t) {
  ReachChain chain = ReachChain::from_set(o);
  for (int k = 0; k < t; ++k) chain.step(law, v);
  return chain;
}

// ---------------------------------------------------------------------------
// Safe time interval.

struct SafeTimeResult {
  int alpha = 1;
  bool capped = false;
  // X_1 .. X_{alpha+1}: the first alpha elements are contained in S_inf, the
  // last violates (absent when capped).  Kept as support chains; materialize()
  // turns an element into an H-rep polytope.
  std::vector<ReachChain> witness_chain;
  std::vector<double> margins;  // containment margin per element (<=0 inside)
};

// The disconnect chain is seeded at the measurement-synced subset of S_inf
// (columns of mp.sync span the synced subspace) and takes the connected step
// nominally: the scheduler knows the exchanged data, so disturbance
// uncertainty accrues on disconnected steps only.  alpha is the largest
// number of consecutive noisy disconnected steps that provably stay inside
// S_inf; the chain and this counting reproduce the published worked examples.
inline SafeTimeResult safe_time_interval(const ModePair& mp, const Polytope& s_inf,
                                         int cap = 1000) {
  // synced slice in reduced coordinates: {y : A_S * sync * y <= b_S}
  Polytope slice = geometry::canonicalize(
      Polytope(s_inf.normals() * mp.sync, s_inf.offsets()));
  if (slice.empty()) throw std::invalid_argument("safe time: synced slice of S_inf is empty");

  ReachChain chain(slice, mp.connected.M * mp.sync);

  SafeTimeResult res;
  int tau_max = 0;
  for (int tau = 0; tau <= cap; ++tau) {
    if (tau > 0) chain.step(mp.disconnected, mp.disturbance_set);
    if (tau == 0) continue;  // X_0 subset S_inf by invariance; chain starts at X_1
    const double m = chain.margin(s_inf);
    res.witness_chain.push_back(chain);
    res.margins.push_back(m);
    if (m <= geometry::kConEps) {
      tau_max = tau;
    } else {
      break;
    }
  }
  res.alpha = std::max(1, tau_max);
  res.capped = tau_max >= cap;
  return res;
}

// gamma^x per Eq.-(41) semantics: the largest t' with Reach_Fhat^{t'}(O)
// inside S_inf; -1 when O itself already pokes out.
inline int online_deadline(const ReachChain& o, const ModePair& mp, const Polytope& s_inf,
                           int cap = 1000) {
  ReachChain chain = o;
  if (!chain.contained_in(s_inf)) return -1;
  int gamma = 0;
  for (int t = 1; t <= cap; ++t) {
    chain.step(mp.disconnected, mp.disturbance_set);
    if (!chain.contained_in(s_inf)) break;
    gamma = t;
  }
  return gamma;
}

inline int online_deadline(const Polytope& o, const ModePair& mp, const Polytope& s_inf,
                           int cap = 1000) {
  if (o.empty()) throw std::invalid_argument("online deadline: empty observation set");
  return online_deadline(ReachChain::from_set(o), mp, s_inf, cap);
}

// ---------------------------------------------------------------------------
// Observation-set providers (Eq. (39)-compatible O(t)).

enum class ObservationKind { ExactPoint, PropagateLastUpdate, NoisyMeasurement };

// Tracks the scheduler's knowledge of one agent between connected slots.
class ObservationProvider {
 public:
  ObservationProvider(ObservationKind kind, const ModePair& mp,
                      std::optional<Polytope> meas_noise = std::nullopt)
      : kind_(kind), mp_(&mp), noise_(std::move(meas_noise)) {
    if (kind_ == ObservationKind::NoisyMeasurement && !noise_)
      throw std::invalid_argument("noisy provider needs a measurement-noise set");
  }

  // Connected slot: the scheduler received the exchanged data; the synced
  // state is sync * y_meas, and the connected step is applied nominally
  // (mirrors the safe-time chain).
  void on_sync(const Eigen::VectorXd& synced_reduced_state) {
    chain_.emplace(Polytope::point(synced_reduced_state), mp_->connected.M * mp_->sync);
  }

  // Disconnected slot: knowledge propagates through the open-loop law.
  void on_disconnected() {
    if (chain_) chain_->step(mp_->disconnected, mp_->disturbance_set);
  }

  bool primed() const { return chain_.has_value(); }

  // O(t) for deadline queries; `true_state` feeds the ExactPoint and
  // NoisyMeasurement kinds.
  ReachChain observe(const Eigen::VectorXd& true_state,
                     const Eigen::VectorXd& noise_draw = Eigen::VectorXd()) const {
    switch (kind_) {
      case ObservationKind::ExactPoint:
        return ReachChain::from_set(Polytope::point(true_state));
      case ObservationKind::PropagateLastUpdate:
        if (!chain_) throw std::logic_error("observe before first sync");
        return *chain_;
      case ObservationKind::NoisyMeasurement: {
        // x_s = x + w, so x is in x_s (+) (-W); the estimator blocks are known
        // exactly through chain_ -- here we return the measured box around the
        // true state for the full vector (noise enters only measured blocks).
        Eigen::VectorXd xs = true_state;
        if (noise_draw.size() > 0) xs += noise_draw;
        const Polytope around = geometry::minkowski_sum(
            Polytope::point(xs), geometry::affine_image(*noise_, -Eigen::MatrixXd::Identity(
                                                                      noise_->dim(), noise_->dim())));
        return ReachChain::from_set(around);
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  ObservationKind kind_;
  const ModePair* mp_;
  std::optional<Polytope> noise_;
  std::optional<ReachChain> chain_;
};

}  // namespace ncsched::invariance
