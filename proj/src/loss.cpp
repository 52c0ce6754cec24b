#include "dg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dg {

KdTree3::KdTree3(std::vector<Vec3> points) : pts_(std::move(points)) {
  if (pts_.empty()) throw std::runtime_error("KdTree3: empty cloud");
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * pts_.size());
  root_ = build(0, static_cast<int>(pts_.size()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 8) return idx;

  int axis = depth % 3;
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
  nodes_[idx].axis = axis;
  nodes_[idx].split = pts_[order_[mid]][axis];
  int l = build(begin, mid, depth + 1);
  int r = build(mid, end, depth + 1);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

void KdTree3::query(int node, const Vec3& q, double& best, int& best_idx) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int k = n.begin; k < n.end; ++k) {
      int i = order_[k];
      double d = (pts_[i] - q).squaredNorm();
      if (d < best || (d == best && i < best_idx)) {
        best = d;
        best_idx = i;
      }
    }
    return;
  }
  double delta = q[n.axis] - n.split;
  int near = delta < 0 ? n.left : n.right;
  int far = delta < 0 ? n.right : n.left;
  query(near, q, best, best_idx);
  if (delta * delta <= best) query(far, q, best, best_idx);
}

int KdTree3::nearest(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  int idx = -1;
  query(root_, q, best, idx);
  return idx;
}

int KdTree3::nearest_brute(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  int idx = -1;
  for (size_t i = 0; i < pts_.size(); ++i) {
    double d = (pts_[i] - q).squaredNorm();
    if (d < best) {
      best = d;
      idx = static_cast<int>(i);
    }
  }
  return idx;
}

TargetGarment load_target(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open target " + path);
  TargetGarment t;
  std::string tok;
  while (in >> tok) {
    if (tok == "interior") {
      int n;
      in >> n;
      t.interior.resize(n);
      for (auto& p : t.interior) in >> p[0] >> p[1] >> p[2];
    } else if (tok == "loop") {
      int n;
      in >> n;
      std::vector<Vec3> loop(n);
      for (auto& p : loop) in >> p[0] >> p[1] >> p[2];
      t.boundaries.push_back(std::move(loop));
    } else if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
    } else {
      throw std::runtime_error("target parse error at '" + tok + "'");
    }
  }
  if (!in.eof() && in.fail()) throw std::runtime_error("target parse failure in " + path);
  return t;
}

void save_target(const TargetGarment& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write target " + path);
  out.precision(17);
  out << "interior " << t.interior.size() << "\n";
  for (const auto& p : t.interior) out << p[0] << " " << p[1] << " " << p[2] << "\n";
  for (const auto& loop : t.boundaries) {
    out << "loop " << loop.size() << "\n";
    for (const auto& p : loop) out << p[0] << " " << p[1] << " " << p[2] << "\n";
  }
}

namespace {

Vec3 vert(const VecX& x, int i) { return x.segment<3>(3 * i); }

// Closest point on segment [a, b].
Vec3 segment_foot(const Vec3& q, const Vec3& a, const Vec3& b) {
  Vec3 d = b - a;
  double len2 = d.squaredNorm();
  if (len2 < 1e-18) return a;
  double t = std::clamp((q - a).dot(d) / len2, 0.0, 1.0);
  return a + t * d;
}

Vec3 polyline_foot(const Vec3& q, const std::vector<Vec3>& loop) {
  double best = std::numeric_limits<double>::infinity();
  Vec3 foot = loop[0];
  for (size_t i = 0; i < loop.size(); ++i) {
    Vec3 f = segment_foot(q, loop[i], loop[(i + 1) % loop.size()]);
    double d = (q - f).squaredNorm();
    if (d < best) {
      best = d;
      foot = f;
    }
  }
  return foot;
}

}  // namespace

double boundary_loss(const PatternMesh& mesh, const VecX& x, const TargetGarment& target,
                     VecX* d_x) {
  auto loops = garment_boundary_loops(mesh);
  if (loops.size() != target.boundaries.size()) {
    std::ostringstream os;
    os << "boundary loss: garment has " << loops.size() << " loops, target has "
       << target.boundaries.size();
    throw std::runtime_error(os.str());
  }
  double loss = 0.0;
  int count = 0;
  for (const auto& l : loops) count += static_cast<int>(l.size());
  if (count == 0) return 0.0;

  for (size_t k = 0; k < loops.size(); ++k) {
    for (int vi : loops[k]) {
      Vec3 p = vert(x, vi);
      Vec3 foot = polyline_foot(p, target.boundaries[k]);
      Vec3 diff = p - foot;
      loss += diff.squaredNorm() / count;
      if (d_x) d_x->segment<3>(3 * vi) += 2.0 * diff / count;
    }
  }
  return loss;
}

double interior_chamfer(const VecX& x, const KdTree3& tree, VecX* d_x) {
  const int nv = static_cast<int>(x.size() / 3);
  const auto& tp = tree.points();

  // The two directions accumulate separately and are normalized once, so
  // swapping the argument clouds produces bit-identical values.
  double fwd = 0.0;
  for (int i = 0; i < nv; ++i) {
    Vec3 p = vert(x, i);
    Vec3 diff = p - tp[tree.nearest(p)];
    fwd += diff.squaredNorm();
    if (d_x) d_x->segment<3>(3 * i) += 2.0 * diff / nv;
  }

  // Reverse direction: brute nearest garment vertex per target point.
  const int nt = static_cast<int>(tp.size());
  double rev = 0.0;
  for (int t = 0; t < nt; ++t) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1;
    for (int i = 0; i < nv; ++i) {
      double d = (vert(x, i) - tp[t]).squaredNorm();
      if (d < best) {
        best = d;
        bi = i;
      }
    }
    Vec3 diff = vert(x, bi) - tp[t];
    rev += best;
    if (d_x) d_x->segment<3>(3 * bi) += 2.0 * diff / nt;
  }
  return fwd / nv + rev / nt;
}

double seam_length_loss(const PatternMesh& mesh, const std::vector<Vec2>& uv,
                        bool signed_sum, VecX* d_uv) {
  double loss = 0.0;
  for (const auto& seam : mesh.seams) {
    const int n = static_cast<int>(seam.side_a.size());
    for (int i = 0; i + 1 < n; ++i) {
      int a0 = seam.side_a[i], a1 = seam.side_a[i + 1];
      int b0 = seam.side_b[i], b1 = seam.side_b[i + 1];
      Vec2 ea = uv[a1] - uv[a0];
      Vec2 eb = uv[b1] - uv[b0];
      double diff = ea.squaredNorm() - eb.squaredNorm();
      double scale;
      if (signed_sum) {
        loss += diff;
        scale = 1.0;
      } else {
        loss += diff * diff;
        scale = 2.0 * diff;
      }
      if (d_uv) {
        d_uv->segment<2>(2 * a1) += scale * 2.0 * ea;
        d_uv->segment<2>(2 * a0) -= scale * 2.0 * ea;
        d_uv->segment<2>(2 * b1) -= scale * 2.0 * eb;
        d_uv->segment<2>(2 * b0) += scale * 2.0 * eb;
      }
    }
  }
  return loss;
}

double curvature_loss(const PatternMesh& mesh, const std::vector<Vec2>& uv,
                      const std::vector<Vec2>& uv_template, VecX* d_uv) {
  auto perp = [](const Vec2& v) { return Vec2(-v[1], v[0]); };
  double loss = 0.0;
  for (const auto& loop : mesh.boundary_loops) {
    const int n = static_cast<int>(loop.vertices.size());
    if (n < 3) continue;
    for (int k = 0; k < n; ++k) {
      int im = loop.vertices[(k + n - 1) % n];
      int i0 = loop.vertices[k];
      int ip = loop.vertices[(k + 1) % n];
      Vec2 e1 = uv[ip] - uv[i0];
      Vec2 e2 = uv[im] - uv[i0];
      Vec2 t1 = uv_template[ip] - uv_template[i0];
      Vec2 t2 = uv_template[im] - uv_template[i0];
      double S = t1.squaredNorm() + t2.squaredNorm();
      if (S < 1e-18) continue;
      // T v = a v + b perp(v), least squares over the edge pair.
      double a = (e1.dot(t1) + e2.dot(t2)) / S;
      double b = (e1.dot(perp(t1)) + e2.dot(perp(t2))) / S;
      Vec2 c = t1 + t2;
      Vec2 d = perp(t1) + perp(t2);
      Vec2 r = (e1 + e2) - a * c - b * d;
      loss += r.squaredNorm();
      if (d_uv) {
        // dL/de_k = 2 [ r - (r.c/S) t_k - (r.d/S) perp(t_k) ]
        double rc = r.dot(c) / S, rd = r.dot(d) / S;
        Vec2 g1 = 2.0 * (r - rc * t1 - rd * perp(t1));
        Vec2 g2 = 2.0 * (r - rc * t2 - rd * perp(t2));
        d_uv->segment<2>(2 * ip) += g1;
        d_uv->segment<2>(2 * im) += g2;
        d_uv->segment<2>(2 * i0) -= g1 + g2;
      }
    }
  }
  return loss;
}

LossGrads total_loss(const PatternMesh& mesh, const VecX& x, const std::vector<Vec2>& uv,
                     const std::vector<Vec2>& uv_template, const TargetGarment& target,
                     const KdTree3& target_tree, const LossConfig& cfg) {
  LossGrads out;
  out.d_x = VecX::Zero(x.size());
  out.d_xbar = VecX::Zero(2 * static_cast<int>(uv.size()));

  VecX db = VecX::Zero(x.size());
  out.boundary = boundary_loss(mesh, x, target, &db);
  out.d_x += cfg.w_boundary * db;

  VecX di = VecX::Zero(x.size());
  out.interior = interior_chamfer(x, target_tree, &di);
  out.d_x += cfg.w_interior * di;

  VecX ds = VecX::Zero(out.d_xbar.size());
  out.seam = seam_length_loss(mesh, uv, cfg.seam_signed, &ds);
  out.d_xbar += cfg.alpha_seam * ds;

  VecX dc = VecX::Zero(out.d_xbar.size());
  out.curvature = curvature_loss(mesh, uv, uv_template, &dc);
  out.d_xbar += cfg.beta_curvature * dc;

  out.total = cfg.w_boundary * out.boundary + cfg.w_interior * out.interior +
              cfg.alpha_seam * out.seam + cfg.beta_curvature * out.curvature;
  return out;
}

double metric_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw std::runtime_error("metric_chamfer: empty cloud");
  KdTree3 ta(a), tb(b);
  double la = 0.0, lb = 0.0;
  for (const auto& p : a) la += (p - b[tb.nearest(p)]).squaredNorm();
  for (const auto& p : b) lb += (p - a[ta.nearest(p)]).squaredNorm();
  return la / a.size() + lb / b.size();
}

}  // namespace dg
