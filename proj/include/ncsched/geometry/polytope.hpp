#pragma once

// H-representation polytope calculus backed by the LP oracle.
//
// A Polytope is {x : a_i.x <= b_i}.  All set operations the invariance
// computations need live here: support, containment, affine images,
// Minkowski sums, Pontryagin differences, intersection, canonicalization,
// vertex enumeration (incremental double description over a bounding box)
// and convex hull of point clouds (via polar duality).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncsched/geometry/lp.hpp"

namespace ncsched::geometry {

inline constexpr double kConEps = 1e-7;  // containment slack (eps_con)

struct SupportValue {
  double value = 0.0;
  bool bounded = true;
};

class Polytope {
 public:
  Polytope() = default;
  Polytope(Eigen::MatrixXd normals, Eigen::VectorXd offsets)
      : A_(std::move(normals)), b_(std::move(offsets)) {
    if (A_.rows() != b_.size()) throw std::invalid_argument("row/offset count mismatch");
  }

  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const int n = static_cast<int>(lo.size());
    if (hi.size() != n) throw std::invalid_argument("box bound size mismatch");
    Eigen::MatrixXd A(2 * n, n);
    Eigen::VectorXd b(2 * n);
    A.topRows(n) = Eigen::MatrixXd::Identity(n, n);
    A.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
    b.head(n) = hi;
    b.tail(n) = -lo;
    Polytope p(A, b);
    p.vertices_cache_ = box_corners(lo, hi);
    return p;
  }

  static Polytope cube(int n, double half_width) {
    return box(Eigen::VectorXd::Constant(n, -half_width),
               Eigen::VectorXd::Constant(n, half_width));
  }

  static Polytope point(const Eigen::VectorXd& p) {
    Polytope q = box(p, p);
    q.vertices_cache_ = {p};
    return q;
  }

  const Eigen::MatrixXd& normals() const { return A_; }
  const Eigen::VectorXd& offsets() const { return b_; }
  int dim() const { return static_cast<int>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }

  bool member(const Eigen::VectorXd& x, double tol = kConEps) const {
    return ((A_ * x - b_).array() <= tol).all();
  }

  SupportValue support(const Eigen::VectorXd& dir) const {
    if (!vertices_cache_.empty()) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& v : vertices_cache_) best = std::max(best, dir.dot(v));
      return {best, true};
    }
    const LpSolution s = lp_maximize(dir, A_, b_);
    if (s.status == LpStatus::Infeasible) throw std::runtime_error("support of empty set");
    if (s.status == LpStatus::Unbounded) return {0.0, false};
    return {s.value, true};
  }

  bool empty() const {
    if (!vertices_cache_.empty()) return false;
    return !lp_feasible(A_, b_);
  }

  bool bounded() const {
    for (int j = 0; j < dim(); ++j) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(dim());
      d(j) = 1.0;
      if (!support(d).bounded) return false;
      d(j) = -1.0;
      if (!support(d).bounded) return false;
    }
    return true;
  }

  // Vertex cache: set by constructions that know their vertices; consulted by
  // support() and vertex enumeration.
  const std::vector<Eigen::VectorXd>& cached_vertices() const { return vertices_cache_; }
  void set_vertex_cache(std::vector<Eigen::VectorXd> v) { vertices_cache_ = std::move(v); }

  std::string to_text() const;
  static Polytope from_text(const std::string& text);

 private:
  static std::vector<Eigen::VectorXd> box_corners(const Eigen::VectorXd& lo,
                                                  const Eigen::VectorXd& hi) {
    const int n = static_cast<int>(lo.size());
    if (n > 16) return {};
    std::vector<Eigen::VectorXd> out;
    out.reserve(std::size_t{1} << n);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      Eigen::VectorXd v(n);
      for (int j = 0; j < n; ++j) v(j) = (mask >> j) & 1u ? hi(j) : lo(j);
      out.push_back(std::move(v));
    }
    return out;
  }

  Eigen::MatrixXd A_{0, 0};
  Eigen::VectorXd b_;
  std::vector<Eigen::VectorXd> vertices_cache_;
};

inline SupportValue support(const Polytope& p, const Eigen::VectorXd& dir) {
  return p.support(dir);
}

inline bool is_empty(const Polytope& p) { return p.empty(); }

// Q subset of P (P's rows need not be canonical; emptiness of Q is the caller's
// concern -- an empty Q throws via support()).
inline bool contains(const Polytope& p, const Polytope& q, double tol = kConEps) {
  if (p.dim() != q.dim()) throw std::invalid_argument("containment dimension mismatch");
  for (int i = 0; i < p.rows(); ++i) {
    const SupportValue s = q.support(p.normals().row(i).transpose());
    if (!s.bounded || s.value > p.offsets()(i) + tol) return false;
  }
  return true;
}

inline Polytope intersect(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("intersect dimension mismatch");
  Eigen::MatrixXd A(p.rows() + q.rows(), p.dim());
  Eigen::VectorXd b(p.rows() + q.rows());
  A << p.normals(), q.normals();
  b << p.offsets(), q.offsets();
  return Polytope(std::move(A), std::move(b));
}

// Drops zero rows (an infeasible zero row marks the whole set empty), scales
// rows to unit norm, removes duplicates, then LP-tests every row for
// redundancy.  The tested row stays, relaxed by +1, which keeps the LP
// bounded in the test direction.
inline Polytope canonicalize(const Polytope& p) {
  const int n = p.dim();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  for (int i = 0; i < p.rows(); ++i) {
    Eigen::VectorXd a = p.normals().row(i).transpose();
    double bi = p.offsets()(i);
    const double norm = a.norm();
    if (norm < 1e-12) {
      if (bi < -kLpEps) {  // 0.x <= negative: empty set marker, keep it
        Eigen::MatrixXd A(1, n);
        A.setZero();
        Eigen::VectorXd b(1);
        b(0) = -1.0;
        return Polytope(std::move(A), std::move(b));
      }
      continue;
    }
    a /= norm;
    bi /= norm;
    bool dup = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if ((rows[k] - a).lpNorm<Eigen::Infinity>() < 1e-9) {
        dup = true;
        if (bi < offs[k]) offs[k] = bi;  // keep the tighter offset
        break;
      }
    }
    if (!dup) {
      rows.push_back(std::move(a));
      offs.push_back(bi);
    }
  }

  auto assemble = [n](const std::vector<Eigen::VectorXd>& r, const std::vector<double>& o) {
    Eigen::MatrixXd A(static_cast<int>(r.size()), n);
    Eigen::VectorXd b(static_cast<int>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      A.row(static_cast<int>(i)) = r[i].transpose();
      b(static_cast<int>(i)) = o[i];
    }
    return Polytope(std::move(A), std::move(b));
  };

  std::size_t i = 0;
  while (i < rows.size() && rows.size() > 1) {
    Eigen::MatrixXd A(static_cast<int>(rows.size()), n);
    Eigen::VectorXd b(static_cast<int>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      A.row(static_cast<int>(k)) = rows[k].transpose();
      b(static_cast<int>(k)) = offs[k] + (k == i ? 1.0 : 0.0);
    }
    const LpSolution s = lp_maximize(rows[i], A, b);
    if (s.status == LpStatus::Infeasible) {
      Eigen::MatrixXd Az(1, n);
      Az.setZero();
      Eigen::VectorXd bz(1);
      bz(0) = -1.0;
      return Polytope(std::move(Az), std::move(bz));
    }
    if (s.status == LpStatus::Optimal && s.value <= offs[i] + kLpEps) {
      rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(i));
      offs.erase(offs.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return assemble(rows, offs);
}

// {x : x + q in P for all q in Q}: per-row offset tightening.
inline Polytope pontryagin_diff(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("pontryagin dimension mismatch");
  Eigen::VectorXd b(p.rows());
  for (int i = 0; i < p.rows(); ++i) {
    const SupportValue s = q.support(p.normals().row(i).transpose());
    if (!s.bounded) throw std::invalid_argument("pontryagin difference with unbounded Q");
    b(i) = p.offsets()(i) - s.value;
  }
  return Polytope(p.normals(), std::move(b));
}

// ---------------------------------------------------------------------------
// Vertex enumeration: incremental cuts of a padded bounding box, with the
// double-description adjacency test on tight sets.  dim <= 10, <= 1e4 vertices.

namespace detail {

struct VertexRec {
  Eigen::VectorXd x;
  std::vector<std::uint64_t> tight;  // bitmask over constraint indices
};

inline bool tight_subset(const std::vector<std::uint64_t>& a,
                         const std::vector<std::uint64_t>& b) {
  for (std::size_t w = 0; w < a.size(); ++w)
    if ((a[w] & ~b[w]) != 0) return false;
  return true;
}

inline int tight_count(const std::vector<std::uint64_t>& a) {
  int c = 0;
  for (auto w : a) c += __builtin_popcountll(w);
  return c;
}

}  // namespace detail

inline constexpr int kMaxEnumDim = 10;
inline constexpr std::size_t kMaxEnumVertices = 10000;

inline std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& p) {
  if (!p.cached_vertices().empty()) return p.cached_vertices();
  const int n = p.dim();
  if (n > kMaxEnumDim) throw std::invalid_argument("vertex enumeration: dimension too large");
  if (p.empty()) return {};

  // padded bounding box
  Eigen::VectorXd lo(n), hi(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    d(j) = 1.0;
    const SupportValue up = p.support(d);
    d(j) = -1.0;
    const SupportValue dn = p.support(d);
    if (!up.bounded || !dn.bounded)
      throw std::invalid_argument("vertex enumeration: unbounded polytope");
    const double pad = 1.0 + 0.01 * (std::abs(up.value) + std::abs(dn.value));
    hi(j) = up.value + pad;
    lo(j) = -dn.value - pad;
  }

  const int m = p.rows();
  const int total = 2 * n + m;  // synthetic box rows first, then input rows
  const std::size_t words = (static_cast<std::size_t>(total) + 63) / 64;

  std::vector<detail::VertexRec> verts;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    detail::VertexRec r;
    r.x.resize(n);
    r.tight.assign(words, 0);
    for (int j = 0; j < n; ++j) {
      const bool up = (mask >> j) & 1u;
      r.x(j) = up ? hi(j) : lo(j);
      const int ci = up ? j : n + j;
      r.tight[ci / 64] |= (std::uint64_t{1} << (ci % 64));
    }
    verts.push_back(std::move(r));
  }

  const double scale = std::max(1.0, std::max(hi.lpNorm<Eigen::Infinity>(),
                                              lo.lpNorm<Eigen::Infinity>()));
  const double on_tol = 1e-9 * scale;

  for (int ci = 0; ci < m; ++ci) {
    const Eigen::VectorXd a = p.normals().row(ci).transpose();
    const double bb = p.offsets()(ci);
    const int cons_index = 2 * n + ci;
    std::vector<double> val(verts.size());
    std::vector<int> cls(verts.size());  // -1 in, 0 on, +1 out
    bool any_out = false;
    for (std::size_t k = 0; k < verts.size(); ++k) {
      val[k] = a.dot(verts[k].x) - bb;
      cls[k] = val[k] > on_tol ? 1 : (val[k] < -on_tol ? -1 : 0);
      if (cls[k] == 1) any_out = true;
    }
    if (!any_out) {
      for (std::size_t k = 0; k < verts.size(); ++k)
        if (cls[k] == 0)
          verts[k].tight[cons_index / 64] |= (std::uint64_t{1} << (cons_index % 64));
      continue;
    }
    std::vector<detail::VertexRec> next;
    for (std::size_t k = 0; k < verts.size(); ++k) {
      if (cls[k] == 1) continue;
      if (cls[k] == 0)
        verts[k].tight[cons_index / 64] |= (std::uint64_t{1} << (cons_index % 64));
      next.push_back(verts[k]);
    }
    // new vertices on crossing edges (in, out) adjacent pairs
    for (std::size_t ki = 0; ki < verts.size(); ++ki) {
      if (cls[ki] != -1) continue;
      for (std::size_t ko = 0; ko < verts.size(); ++ko) {
        if (cls[ko] != 1) continue;
        std::vector<std::uint64_t> common(words);
        for (std::size_t w = 0; w < words; ++w)
          common[w] = verts[ki].tight[w] & verts[ko].tight[w];
        if (detail::tight_count(common) < n - 1) continue;
        bool adjacent = true;
        for (std::size_t kk = 0; kk < verts.size() && adjacent; ++kk) {
          if (kk == ki || kk == ko) continue;
          if (detail::tight_subset(common, verts[kk].tight)) adjacent = false;
        }
        if (!adjacent) continue;
        const double t = val[ki] / (val[ki] - val[ko]);
        detail::VertexRec nv;
        nv.x = verts[ki].x + t * (verts[ko].x - verts[ki].x);
        nv.tight = common;
        nv.tight[cons_index / 64] |= (std::uint64_t{1} << (cons_index % 64));
        bool dup = false;
        for (auto& ex : next) {
          if ((ex.x - nv.x).lpNorm<Eigen::Infinity>() < 1e-7 * scale) {
            for (std::size_t w = 0; w < words; ++w) ex.tight[w] |= nv.tight[w];
            dup = true;
            break;
          }
        }
        if (!dup) next.push_back(std::move(nv));
        if (next.size() > kMaxEnumVertices)
          throw std::runtime_error("vertex enumeration: vertex budget exceeded");
      }
    }
    verts = std::move(next);
    if (verts.empty()) return {};
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(verts.size());
  for (auto& v : verts) out.push_back(std::move(v.x));
  return out;
}

// ---------------------------------------------------------------------------
// Convex hull of a point cloud -> H-representation.  Handles flat clouds by
// working inside the affine hull and pinning the orthogonal complement.

inline Polytope convex_hull(const std::vector<Eigen::VectorXd>& raw_points) {
  if (raw_points.empty()) throw std::invalid_argument("convex hull of no points");
  const int n = static_cast<int>(raw_points[0].size());
  double span = 0.0;
  for (const auto& pt : raw_points) span = std::max(span, pt.lpNorm<Eigen::Infinity>());
  std::vector<Eigen::VectorXd> points;
  points.reserve(raw_points.size());
  for (const auto& pt : raw_points) {
    bool dup = false;
    for (const auto& ex : points)
      if ((ex - pt).lpNorm<Eigen::Infinity>() < 1e-10 * std::max(1.0, span)) {
        dup = true;
        break;
      }
    if (!dup) points.push_back(pt);
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (const auto& pt : points) c += pt;
  c /= static_cast<double>(points.size());

  Eigen::MatrixXd D(static_cast<int>(points.size()), n);
  for (std::size_t i = 0; i < points.size(); ++i) D.row(static_cast<int>(i)) = (points[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinV | Eigen::ComputeThinU);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const double rank_tol = std::max(1e-9, 1e-9 * smax);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > rank_tol) ++r;

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  Eigen::MatrixXd V = svd.matrixV();

  // flat directions: pin u.x == u.c
  for (int j = r; j < n; ++j) {
    const Eigen::VectorXd u = V.col(j);
    rows.push_back(u);
    offs.push_back(u.dot(c));
    rows.push_back(-u);
    offs.push_back(-u.dot(c));
  }

  if (r == 0) {
    // single point
  } else if (r == 1) {
    const Eigen::VectorXd u = V.col(0);
    double mlo = std::numeric_limits<double>::infinity(), mhi = -mlo;
    for (const auto& pt : points) {
      const double t = u.dot(pt - c);
      mlo = std::min(mlo, t);
      mhi = std::max(mhi, t);
    }
    rows.push_back(u);
    offs.push_back(u.dot(c) + mhi);
    rows.push_back(-u);
    offs.push_back(-(u.dot(c) + mlo));
  } else {
    // full-dim hull in the r-dim affine coordinates via polar duality:
    // facets of conv(Y) = vertices of {z : y.z <= 1 for all y}
    const Eigen::MatrixXd Q = V.leftCols(r);
    Eigen::MatrixXd Y(static_cast<int>(points.size()), r);
    for (std::size_t i = 0; i < points.size(); ++i)
      Y.row(static_cast<int>(i)) = (Q.transpose() * (points[i] - c)).transpose();
    Polytope polar(Y, Eigen::VectorXd::Ones(Y.rows()));
    const auto polar_vertices = enumerate_vertices(canonicalize(polar));
    if (polar_vertices.empty()) throw std::runtime_error("convex hull: polar degenerate");
    for (const auto& z : polar_vertices) {
      const Eigen::VectorXd a = Q * z;
      rows.push_back(a);
      offs.push_back(1.0 + a.dot(c));
    }
  }

  Eigen::MatrixXd A(static_cast<int>(rows.size()), n);
  Eigen::VectorXd b(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    A.row(static_cast<int>(i)) = rows[i].transpose();
    b(static_cast<int>(i)) = offs[i];
  }
  Polytope hull = canonicalize(Polytope(std::move(A), std::move(b)));
  return hull;
}

// Keep only cloud points that sit on >= dim facets of their hull: every true
// vertex qualifies, and the filtered set still spans the hull, so it remains
// a valid support cache.
inline std::vector<Eigen::VectorXd> extreme_filter(const std::vector<Eigen::VectorXd>& cloud,
                                                   const Polytope& hull) {
  const int n = hull.dim();
  double scale = 1.0;
  for (const auto& p : cloud) scale = std::max(scale, p.lpNorm<Eigen::Infinity>());
  const double tol = 1e-7 * scale;
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : cloud) {
    int tight = 0;
    for (int i = 0; i < hull.rows(); ++i) {
      if (std::abs(hull.normals().row(i).dot(p) - hull.offsets()(i)) <= tol) ++tight;
      if (tight >= n) break;
    }
    if (tight >= n) {
      bool dup = false;
      for (const auto& q : out)
        if ((q - p).lpNorm<Eigen::Infinity>() < 1e-9 * scale) { dup = true; break; }
      if (!dup) out.push_back(p);
    }
  }
  if (out.empty()) out = cloud;  // dimension-deficient hull: keep everything
  return out;
}

// {Mx + t : x in P}.  Invertible square M: exact constraint transform.
// Otherwise vertex enumeration + hull of images.
inline Polytope affine_image(const Polytope& p, const Eigen::MatrixXd& M,
                             const Eigen::VectorXd& t) {
  if (M.cols() != p.dim()) throw std::invalid_argument("affine image dimension mismatch");
  if (p.empty()) throw std::invalid_argument("affine image of empty set");
  if (M.rows() == M.cols()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd Minv = lu.inverse();
      Eigen::MatrixXd A = p.normals() * Minv;
      Eigen::VectorXd b = p.offsets() + A * t;
      Polytope out(std::move(A), std::move(b));
      if (!p.cached_vertices().empty()) {
        std::vector<Eigen::VectorXd> vs;
        vs.reserve(p.cached_vertices().size());
        for (const auto& v : p.cached_vertices()) vs.push_back(M * v + t);
        out.set_vertex_cache(std::move(vs));
      }
      return out;
    }
  }
  if (!p.bounded()) throw std::invalid_argument("affine image of unbounded polytope");
  const auto verts = enumerate_vertices(p);
  std::vector<Eigen::VectorXd> imgs;
  imgs.reserve(verts.size());
  for (const auto& v : verts) imgs.push_back(M * v + t);
  Polytope out = convex_hull(imgs);
  out.set_vertex_cache(extreme_filter(imgs, out));
  return out;
}

inline Polytope affine_image(const Polytope& p, const Eigen::MatrixXd& M) {
  return affine_image(p, M, Eigen::VectorXd::Zero(static_cast<int>(M.rows())));
}

// Vertex-route Minkowski sum (both operands must have enumerable vertices).
inline Polytope minkowski_sum(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("minkowski dimension mismatch");
  if (p.empty() || q.empty()) {
    Eigen::MatrixXd Az(1, p.dim());
    Az.setZero();
    Eigen::VectorXd bz(1);
    bz(0) = -1.0;
    return Polytope(std::move(Az), std::move(bz));  // empty result, flagged by emptiness
  }
  const auto vp = enumerate_vertices(p);
  const auto vq = enumerate_vertices(q);
  if (vp.size() * vq.size() > kMaxEnumVertices * 4)
    throw std::runtime_error("minkowski sum: vertex budget exceeded");
  std::vector<Eigen::VectorXd> sums;
  sums.reserve(vp.size() * vq.size());
  for (const auto& a : vp)
    for (const auto& b : vq) sums.push_back(a + b);
  Polytope out = convex_hull(sums);
  out.set_vertex_cache(extreme_filter(sums, out));
  return out;
}

// ---------------------------------------------------------------------------
// Text serialization: first line "dim", then one row per line "a1 ... an | b".
// %.17g round-trips doubles bit-faithfully.

inline std::string Polytope::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << dim() << "\n";
  for (int i = 0; i < rows(); ++i) {
    for (int j = 0; j < dim(); ++j) os << A_(i, j) << (j + 1 == dim() ? "" : " ");
    os << " | " << b_(i) << "\n";
  }
  return os.str();
}

inline Polytope Polytope::from_text(const std::string& text) {
  std::istringstream is(text);
  int n = 0;
  if (!(is >> n) || n <= 0) throw std::invalid_argument("polytope text: bad dimension");
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Eigen::VectorXd a(n);
    for (int j = 0; j < n; ++j)
      if (!(ls >> a(j))) throw std::invalid_argument("polytope text: bad row");
    std::string bar;
    double bv = 0.0;
    if (!(ls >> bar) || bar != "|" || !(ls >> bv))
      throw std::invalid_argument("polytope text: missing offset");
    rows.push_back(std::move(a));
    offs.push_back(bv);
  }
  Eigen::MatrixXd A(static_cast<int>(rows.size()), n);
  Eigen::VectorXd b(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    A.row(static_cast<int>(i)) = rows[i].transpose();
    b(static_cast<int>(i)) = offs[i];
  }
  return Polytope(std::move(A), std::move(b));
}

}  // namespace ncsched::geometry
