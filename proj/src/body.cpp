#include "dg/body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dg {

namespace {

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}
Mat3 drot_x(double a) {
  Mat3 r;
  r << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
  return r;
}
Mat3 drot_y(double a) {
  Mat3 r;
  r << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
  return r;
}
Mat3 drot_z(double a) {
  Mat3 r;
  r << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
  return r;
}

// intrinsic XYZ: R = Rx(a) Ry(b) Rz(c)
Mat3 euler_rot(const Vec3& e) { return rot_x(e[0]) * rot_y(e[1]) * rot_z(e[2]); }
Mat3 euler_rot_d(const Vec3& e, int axis) {
  switch (axis) {
    case 0: return drot_x(e[0]) * rot_y(e[1]) * rot_z(e[2]);
    case 1: return rot_x(e[0]) * drot_y(e[1]) * rot_z(e[2]);
    default: return rot_x(e[0]) * rot_y(e[1]) * drot_z(e[2]);
  }
}

// Closest point on a triangle (Ericson, Real-Time Collision Detection).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                         Vec3& bary) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    bary = Vec3(1, 0, 0);
    return a;
  }
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    bary = Vec3(0, 1, 0);
    return b;
  }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    bary = Vec3(1 - v, v, 0);
    return a + v * ab;
  }
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    bary = Vec3(0, 0, 1);
    return c;
  }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    bary = Vec3(1 - w, 0, w);
    return a + w * ac;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    bary = Vec3(0, 1 - w, w);
    return b + w * (c - b);
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  bary = Vec3(1 - v - w, v, w);
  return a + ab * v + ac * w;
}

double box_dist2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = std::max({lo[k] - q[k], 0.0, q[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}

}  // namespace

PosedBody::PosedBody(std::vector<Vec3> verts, std::vector<std::array<int, 3>> faces)
    : verts_(std::move(verts)), faces_(std::move(faces)) {
  face_normals_.resize(faces_.size());
  vertex_normals_.assign(verts_.size(), Vec3::Zero());
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& t = faces_[f];
    Vec3 n = (verts_[t[1]] - verts_[t[0]]).cross(verts_[t[2]] - verts_[t[0]]);
    double len = n.norm();
    face_normals_[f] = len > 0 ? Vec3(n / len) : Vec3(0, 0, 1);
    // angle-weighted accumulation
    for (int k = 0; k < 3; ++k) {
      Vec3 e0 = (verts_[t[(k + 1) % 3]] - verts_[t[k]]).normalized();
      Vec3 e1 = (verts_[t[(k + 2) % 3]] - verts_[t[k]]).normalized();
      double ang = std::acos(std::clamp(e0.dot(e1), -1.0, 1.0));
      vertex_normals_[t[k]] += ang * face_normals_[f];
    }
  }
  for (auto& n : vertex_normals_)
    if (n.norm() > 0) n.normalize();
  order_.resize(faces_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * faces_.size());
  root_ = build(0, static_cast<int>(faces_.size()));
}

int PosedBody::build(int begin, int end) {
  Node node;
  node.lo = Vec3::Constant(1e300);
  node.hi = Vec3::Constant(-1e300);
  for (int i = begin; i < end; ++i)
    for (int k = 0; k < 3; ++k) {
      const Vec3& v = verts_[faces_[order_[i]][k]];
      node.lo = node.lo.cwiseMin(v);
      node.hi = node.hi.cwiseMax(v);
    }
  if (end - begin <= 4) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  Vec3 ext = node.hi - node.lo;
  int axis = 0;
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     auto centroid = [&](int f) {
                       return (verts_[faces_[f][0]][axis] + verts_[faces_[f][1]][axis] +
                               verts_[faces_[f][2]][axis]);
                     };
                     return centroid(a) < centroid(b);
                   });
  int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  int l = build(begin, mid);
  int r = build(mid, end);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

void PosedBody::query(int ni, const Vec3& q, double& best, int& best_face, Vec3& best_p,
                      Vec3& best_bary) const {
  const Node& node = nodes_[ni];
  if (box_dist2(q, node.lo, node.hi) >= best) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int f = order_[i];
      const auto& t = faces_[f];
      Vec3 bary;
      Vec3 p = closest_on_triangle(q, verts_[t[0]], verts_[t[1]], verts_[t[2]], bary);
      double d2 = (q - p).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_face = f;
        best_p = p;
        best_bary = bary;
      }
    }
    return;
  }
  // visit nearer child first
  double dl = box_dist2(q, nodes_[node.left].lo, nodes_[node.left].hi);
  double dr = box_dist2(q, nodes_[node.right].lo, nodes_[node.right].hi);
  if (dl < dr) {
    query(node.left, q, best, best_face, best_p, best_bary);
    query(node.right, q, best, best_face, best_p, best_bary);
  } else {
    query(node.right, q, best, best_face, best_p, best_bary);
    query(node.left, q, best, best_face, best_p, best_bary);
  }
}

ClosestPoint PosedBody::closest_point(const Vec3& q) const {
  double best = 1e300;
  ClosestPoint cp;
  query(root_, q, best, cp.face, cp.point, cp.bary);
  Vec3 diff = q - cp.point;
  double dist = diff.norm();
  // sign from the pseudo-normal at the closest feature
  const auto& t = faces_[cp.face];
  Vec3 pn = cp.bary[0] * vertex_normals_[t[0]] + cp.bary[1] * vertex_normals_[t[1]] +
            cp.bary[2] * vertex_normals_[t[2]];
  double sign = diff.dot(pn) >= 0.0 ? 1.0 : -1.0;
  cp.signed_dist = sign * dist;
  cp.normal = dist > 1e-12 ? Vec3(sign * diff / dist) : face_normals_[cp.face];
  return cp;
}

ClosestPoint PosedBody::closest_point_brute(const Vec3& q) const {
  double best = 1e300;
  ClosestPoint cp;
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& t = faces_[f];
    Vec3 bary;
    Vec3 p = closest_on_triangle(q, verts_[t[0]], verts_[t[1]], verts_[t[2]], bary);
    double d2 = (q - p).squaredNorm();
    if (d2 < best) {
      best = d2;
      cp.face = static_cast<int>(f);
      cp.point = p;
      cp.bary = bary;
    }
  }
  Vec3 diff = q - cp.point;
  double dist = diff.norm();
  const auto& t = faces_[cp.face];
  Vec3 pn = cp.bary[0] * vertex_normals_[t[0]] + cp.bary[1] * vertex_normals_[t[1]] +
            cp.bary[2] * vertex_normals_[t[2]];
  double sign = diff.dot(pn) >= 0.0 ? 1.0 : -1.0;
  cp.signed_dist = sign * dist;
  cp.normal = dist > 1e-12 ? Vec3(sign * diff / dist) : face_normals_[cp.face];
  return cp;
}

std::vector<Vec3> body_shape(const BodyModel& body, const VecX& nu) {
  if (nu.size() != body.num_shape()) throw std::runtime_error("body_shape: |nu| != K");
  std::vector<Vec3> out = body.verts0;
  for (int k = 0; k < body.num_shape(); ++k)
    for (int i = 0; i < body.num_vertices(); ++i) out[i] += nu[k] * body.shape_basis[k][i];
  return out;
}

JointFrames pose_joints(const BodyModel& body, const VecX& psi) {
  const int J = body.num_joints();
  if (psi.size() != body.pose_dim()) throw std::runtime_error("pose_joints: |psi| mismatch");
  JointFrames fr;
  fr.R.resize(J);
  fr.p.resize(J);
  for (int j = 0; j < J; ++j) {
    Vec3 angles = psi.segment<3>(3 + 3 * j);
    double len = 1.0 + psi[3 + 3 * J + j];
    Mat3 local = euler_rot(angles);
    if (body.joints[j].parent < 0) {
      fr.R[j] = local;
      fr.p[j] = body.joints[j].rest_pos + psi.segment<3>(0);
    } else {
      int par = body.joints[j].parent;
      Vec3 off = body.joints[j].rest_pos - body.joints[par].rest_pos;
      fr.R[j] = fr.R[par] * local;
      fr.p[j] = fr.p[par] + fr.R[par] * (len * off);
    }
  }
  return fr;
}

std::vector<Vec3> body_skin(const BodyModel& body, const std::vector<Vec3>& rest_verts,
                            const VecX& psi) {
  JointFrames fr = pose_joints(body, psi);
  std::vector<Vec3> out(rest_verts.size(), Vec3::Zero());
  for (size_t i = 0; i < rest_verts.size(); ++i)
    for (const auto& [j, w] : body.weights[i])
      out[i] += w * (fr.R[j] * (rest_verts[i] - body.joints[j].rest_pos) + fr.p[j]);
  return out;
}

PosedBody pose_body(const BodyModel& body, const VecX& nu, const VecX& psi) {
  return PosedBody(body_skin(body, body_shape(body, nu), psi), body.faces);
}

void body_jacobians(const BodyModel& body, const VecX& nu, const VecX& psi, MatX* d_nu,
                    MatX* d_psi) {
  const int J = body.num_joints();
  const int Vb = body.num_vertices();
  JointFrames fr = pose_joints(body, psi);
  std::vector<Vec3> shaped = body_shape(body, nu);

  if (d_nu) {
    d_nu->setZero(3 * Vb, body.num_shape());
    for (int k = 0; k < body.num_shape(); ++k)
      for (int i = 0; i < Vb; ++i) {
        Vec3 acc = Vec3::Zero();
        for (const auto& [j, w] : body.weights[i]) acc += w * (fr.R[j] * body.shape_basis[k][i]);
        d_nu->block<3, 1>(3 * i, k) = acc;
      }
  }

  if (d_psi) {
    d_psi->setZero(3 * Vb, body.pose_dim());
    // Per parameter, propagate frame differentials down the tree.
    std::vector<Mat3> dR(J);
    std::vector<Vec3> dp(J);
    auto propagate = [&](int param_col) {
      for (int i = 0; i < Vb; ++i) {
        Vec3 acc = Vec3::Zero();
        for (const auto& [j, w] : body.weights[i])
          acc += w * (dR[j] * (shaped[i] - body.joints[j].rest_pos) + dp[j]);
        d_psi->block<3, 1>(3 * i, param_col) = acc;
      }
    };
    auto chain = [&](int seed_joint, const Mat3& dR_seed, const Vec3& dp_seed) {
      for (int j = 0; j < J; ++j) {
        dR[j].setZero();
        dp[j].setZero();
      }
      dR[seed_joint] = dR_seed;
      dp[seed_joint] = dp_seed;
      for (int j = 0; j < J; ++j) {  // parents precede children
        int par = body.joints[j].parent;
        if (par < 0 || j == seed_joint) continue;
        Vec3 angles = psi.segment<3>(3 + 3 * j);
        double len = 1.0 + psi[3 + 3 * J + j];
        Vec3 off = body.joints[j].rest_pos - body.joints[par].rest_pos;
        dR[j] = dR[par] * euler_rot(angles);
        dp[j] = dp[par] + dR[par] * (len * off);
      }
    };
    // root translation
    for (int c = 0; c < 3; ++c) {
      Vec3 seed = Vec3::Zero();
      seed[c] = 1.0;
      chain(0, Mat3::Zero(), seed);
      // translation of the root moves every frame origin equally
      propagate(c);
    }
    // joint angles
    for (int j = 0; j < J; ++j) {
      Vec3 angles = psi.segment<3>(3 + 3 * j);
      Mat3 Rpar = body.joints[j].parent < 0 ? Mat3::Identity() : fr.R[body.joints[j].parent];
      for (int a = 0; a < 3; ++a) {
        chain(j, Rpar * euler_rot_d(angles, a), Vec3::Zero());
        propagate(3 + 3 * j + a);
      }
    }
    // bone length offsets (root channel has no parent offset; derivative zero)
    for (int j = 0; j < J; ++j) {
      int par = body.joints[j].parent;
      if (par < 0) continue;
      Vec3 off = body.joints[j].rest_pos - body.joints[par].rest_pos;
      chain(j, Mat3::Zero(), fr.R[par] * off);
      propagate(3 + 3 * J + j);
    }
  }
}

namespace {

double chamfer_and_grad(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                        std::vector<Vec3>* grad_a) {
  // symmetric mean squared nearest-neighbor distance; gradient w.r.t. a
  if (a.empty() || b.empty()) throw std::runtime_error("chamfer: empty point set");
  if (grad_a) grad_a->assign(a.size(), Vec3::Zero());
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double best = 1e300;
    int bj = 0;
    for (size_t j = 0; j < b.size(); ++j) {
      double d = (a[i] - b[j]).squaredNorm();
      if (d < best) {
        best = d;
        bj = static_cast<int>(j);
      }
    }
    total += best / a.size();
    if (grad_a) (*grad_a)[i] += 2.0 * (a[i] - b[bj]) / a.size();
  }
  for (size_t j = 0; j < b.size(); ++j) {
    double best = 1e300;
    int bi = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      double d = (a[i] - b[j]).squaredNorm();
      if (d < best) {
        best = d;
        bi = static_cast<int>(i);
      }
    }
    total += best / b.size();
    if (grad_a) (*grad_a)[bi] += 2.0 * (a[bi] - b[j]) / b.size();
  }
  return total;
}

}  // namespace

FitResult init_fit(const BodyModel& body, const std::vector<Vec3>& target, VecX nu0, VecX psi0,
                   const FitOptions& opts) {
  if (target.empty()) throw std::runtime_error("init_fit: empty target");
  FitResult res;
  res.nu = nu0;
  res.psi = psi0;

  auto eval = [&](const VecX& nu, const VecX& psi, std::vector<Vec3>* grad_x) {
    std::vector<Vec3> posed = body_skin(body, body_shape(body, nu), psi);
    return chamfer_and_grad(posed, target, grad_x);
  };

  auto clamp_pose = [&](VecX& psi) {
    const int J = body.num_joints();
    for (int j = 0; j < 3 * J; ++j)
      psi[3 + j] = std::clamp(psi[3 + j], -opts.angle_limit, opts.angle_limit);
    for (int j = 0; j < J; ++j)
      psi[3 + 3 * J + j] = std::clamp(psi[3 + 3 * J + j], -opts.length_limit, opts.length_limit);
  };

  std::vector<Vec3> grad_x;
  double f = eval(res.nu, res.psi, &grad_x);
  res.chamfer = f;
  for (int it = 0; it < opts.iterations; ++it) {
    MatX d_nu, d_psi;
    body_jacobians(body, res.nu, res.psi, opts.fit_nu ? &d_nu : nullptr,
                   opts.fit_psi ? &d_psi : nullptr);
    VecX gx(3 * body.num_vertices());
    for (int i = 0; i < body.num_vertices(); ++i) gx.segment<3>(3 * i) = grad_x[i];
    VecX g_nu = opts.fit_nu ? VecX(d_nu.transpose() * gx) : VecX();
    VecX g_psi = opts.fit_psi ? VecX(d_psi.transpose() * gx) : VecX();
    double gnorm = 0.0;
    if (opts.fit_nu) gnorm += g_nu.squaredNorm();
    if (opts.fit_psi) gnorm += g_psi.squaredNorm();
    if (std::sqrt(gnorm) < 1e-10) break;

    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 20; ++bt, step *= 0.5) {
      VecX nu_try = res.nu, psi_try = res.psi;
      if (opts.fit_nu) nu_try -= step * opts.rate_nu * g_nu;
      if (opts.fit_psi) psi_try -= step * opts.rate_psi * g_psi;
      clamp_pose(psi_try);
      std::vector<Vec3> grad_try;
      double f_try = eval(nu_try, psi_try, &grad_try);
      if (f_try <= f) {
        res.nu = nu_try;
        res.psi = psi_try;
        f = f_try;
        grad_x = std::move(grad_try);
        accepted = true;
        break;
      }
    }
    res.iterations_used = it + 1;
    if (!accepted) break;
  }
  res.chamfer = f;
  res.diverged = !std::isfinite(f);
  return res;
}

void save_body(const BodyModel& body, const std::string& obj_path, const std::string& rig_path) {
  std::ofstream out(obj_path);
  if (!out) throw std::runtime_error("cannot write " + obj_path);
  out.precision(17);
  for (const auto& v : body.verts0) out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : body.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  std::ofstream rig(rig_path);
  if (!rig) throw std::runtime_error("cannot write " + rig_path);
  rig.precision(17);
  rig << "joints " << body.num_joints() << "\n";
  for (int j = 0; j < body.num_joints(); ++j) {
    const Joint& jt = body.joints[j];
    rig << "joint " << j << " " << jt.name << " " << jt.parent << " " << jt.rest_pos.x() << " "
        << jt.rest_pos.y() << " " << jt.rest_pos.z() << "\n";
  }
  for (int i = 0; i < body.num_vertices(); ++i) {
    rig << "w " << i;
    for (const auto& [j, w] : body.weights[i]) rig << " " << j << " " << w;
    rig << "\n";
  }
  rig << "basis " << body.num_shape() << "\n";
  for (int k = 0; k < body.num_shape(); ++k)
    for (int i = 0; i < body.num_vertices(); ++i) {
      const Vec3& d = body.shape_basis[k][i];
      rig << "b " << k << " " << i << " " << d.x() << " " << d.y() << " " << d.z() << "\n";
    }
}

BodyModel load_body(const std::string& obj_path, const std::string& rig_path) {
  BodyModel body;
  std::ifstream in(obj_path);
  if (!in) throw std::runtime_error("cannot open " + obj_path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      body.verts0.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        f[k] = std::stoi(tok) - 1;
      }
      body.faces.push_back(f);
    }
  }
  std::ifstream rig(rig_path);
  if (!rig) throw std::runtime_error("cannot open " + rig_path);
  body.weights.resize(body.verts0.size());
  while (std::getline(rig, line)) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "joints") {
      int n;
      ss >> n;
      body.joints.resize(n);
    } else if (tag == "joint") {
      int id;
      ss >> id;
      Joint& jt = body.joints.at(id);
      ss >> jt.name >> jt.parent >> jt.rest_pos.x() >> jt.rest_pos.y() >> jt.rest_pos.z();
    } else if (tag == "w") {
      int i;
      ss >> i;
      int j;
      double w;
      while (ss >> j >> w) body.weights.at(i).emplace_back(j, w);
    } else if (tag == "basis") {
      int k;
      ss >> k;
      body.shape_basis.assign(k, std::vector<Vec3>(body.verts0.size(), Vec3::Zero()));
    } else if (tag == "b") {
      int k, i;
      Vec3 d;
      ss >> k >> i >> d.x() >> d.y() >> d.z();
      body.shape_basis.at(k).at(i) = d;
    }
  }
  return body;
}

BodyModel make_default_humanoid() {
  BodyModel body;
  // Skeleton: pelvis root, spine chain, head, arms, legs. 12 joints.
  auto add = [&](const std::string& name, int parent, double x, double y, double z) {
    Joint j;
    j.name = name;
    j.parent = parent;
    j.rest_pos = Vec3(x, y, z);
    body.joints.push_back(j);
  };
  add("pelvis", -1, 0, 0, 0.90);
  add("spine", 0, 0, 0, 1.10);
  add("chest", 1, 0, 0, 1.30);
  add("head", 2, 0, 0, 1.55);
  add("l_shoulder", 2, 0.20, 0, 1.38);
  add("r_shoulder", 2, -0.20, 0, 1.38);
  add("l_elbow", 4, 0.46, 0, 1.30);
  add("r_elbow", 5, -0.46, 0, 1.30);
  add("l_hip", 0, 0.11, 0, 0.80);
  add("r_hip", 0, -0.11, 0, 0.80);
  add("l_knee", 8, 0.14, 0, 0.45);
  add("r_knee", 9, -0.14, 0, 0.45);

  // Star-shaped blob around the torso center: displaced UV sphere, watertight
  // by construction. Lobes push material toward head, arms and legs.
  const Vec3 center(0, 0, 1.0);
  struct Lobe {
    Vec3 dir;
    double amp, sharp;
  };
  std::vector<Lobe> lobes = {
      {{0, 0, 1}, 0.58, 24.0},          // head / upper torso
      {{0.75, 0, 0.66}, 0.34, 60.0},    // left arm, angled upward
      {{-0.75, 0, 0.66}, 0.34, 60.0},   // right arm
      {{0.40, 0, -0.92}, 0.62, 30.0},   // left leg
      {{-0.40, 0, -0.92}, 0.62, 30.0},  // right leg
      {{0.9, 0, -0.44}, 0.13, 8.0},    // left hip flare
      {{-0.9, 0, -0.44}, 0.13, 8.0},   // right hip flare
  };
  auto radius = [&](const Vec3& u) {
    double r = 0.16;
    for (const auto& l : lobes)
      r += l.amp * std::exp(l.sharp * (u.dot(l.dir.normalized()) - 1.0));
    return r;
  };

  const int n_lat = 30, n_lon = 36;
  // poles + interior rings
  body.verts0.push_back(center + Vec3(0, 0, radius(Vec3(0, 0, 1))));
  for (int i = 1; i < n_lat; ++i) {
    double theta = M_PI * i / n_lat;
    for (int j = 0; j < n_lon; ++j) {
      double phi = 2 * M_PI * j / n_lon;
      Vec3 u(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      // squash front-back so the blob is not rotationally symmetric
      Vec3 p = center + radius(u) * u;
      p.y() = center.y() + 0.72 * (p.y() - center.y());
      body.verts0.push_back(p);
    }
  }
  body.verts0.push_back(center + Vec3(0, 0, -radius(Vec3(0, 0, -1))));
  const int south = static_cast<int>(body.verts0.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * n_lon + (j % n_lon); };
  for (int j = 0; j < n_lon; ++j) body.faces.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i < n_lat - 1; ++i)
    for (int j = 0; j < n_lon; ++j) {
      body.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      body.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  for (int j = 0; j < n_lon; ++j)
    body.faces.push_back({south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)});

  // Skinning: gaussian falloff to per-joint bone segments, top-3, normalized.
  struct Seg {
    Vec3 a, b;
  };
  std::vector<Seg> segs(body.num_joints());
  for (int j = 0; j < body.num_joints(); ++j) {
    const Joint& jt = body.joints[j];
    Vec3 a = jt.rest_pos;
    Vec3 b = a;
    // segment toward the first child, or a short leaf extension
    bool has_child = false;
    for (int c = 0; c < body.num_joints(); ++c)
      if (body.joints[c].parent == j) {
        b = body.joints[c].rest_pos;
        has_child = true;
        break;
      }
    if (!has_child) {
      if (jt.name == "head") b = a + Vec3(0, 0, 0.22);
      else if (jt.name == "l_elbow") b = a + Vec3(0.22, 0, -0.04);
      else if (jt.name == "r_elbow") b = a + Vec3(-0.22, 0, -0.04);
      else if (jt.name == "l_knee") b = a + Vec3(0.02, 0, -0.35);
      else if (jt.name == "r_knee") b = a + Vec3(-0.02, 0, -0.35);
    }
    segs[j] = {a, b};
  }
  auto seg_dist = [](const Vec3& p, const Seg& s) {
    Vec3 ab = s.b - s.a;
    double t = ab.squaredNorm() > 0 ? std::clamp((p - s.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0)
                                    : 0.0;
    return (p - (s.a + t * ab)).norm();
  };
  body.weights.resize(body.num_vertices());
  const double sigma = 0.09;
  for (int i = 0; i < body.num_vertices(); ++i) {
    std::vector<std::pair<double, int>> cand;
    for (int j = 0; j < body.num_joints(); ++j) {
      double d = seg_dist(body.verts0[i], segs[j]);
      cand.emplace_back(std::exp(-0.5 * d * d / (sigma * sigma)), j);
    }
    std::sort(cand.rbegin(), cand.rend());
    double sum = cand[0].first + cand[1].first + cand[2].first;
    if (sum < 1e-12) {
      body.weights[i] = {{cand[0].second, 1.0}};
      continue;
    }
    for (int k = 0; k < 3; ++k)
      if (cand[k].first / sum > 1e-4)
        body.weights[i].emplace_back(cand[k].second, cand[k].first / sum);
    double renorm = 0.0;
    for (auto& [j, w] : body.weights[i]) renorm += w;
    for (auto& [j, w] : body.weights[i]) w /= renorm;
    std::sort(body.weights[i].begin(), body.weights[i].end());
  }

  // K = 4 shape basis fields.
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : body.verts0) centroid += v;
  centroid /= body.num_vertices();
  double zmin = 1e300, zmax = -1e300;
  for (const auto& v : body.verts0) {
    zmin = std::min(zmin, v.z());
    zmax = std::max(zmax, v.z());
  }
  std::vector<Vec3> scale(body.num_vertices()), girth(body.num_vertices()),
      height(body.num_vertices()), shoulders(body.num_vertices());
  for (int i = 0; i < body.num_vertices(); ++i) {
    const Vec3& v = body.verts0[i];
    scale[i] = v - centroid;
    double torso = std::exp(-std::pow((v.z() - 1.0) / 0.28, 2));
    girth[i] = torso * Vec3(v.x() - centroid.x(), v.y() - centroid.y(), 0);
    height[i] = Vec3(0, 0, v.z() - zmin);
    double band = std::exp(-std::pow((v.z() - 1.38) / 0.12, 2));
    shoulders[i] = band * Vec3(v.x(), 0, 0);
  }
  body.shape_basis = {scale, girth, height, shoulders};
  return body;
}

}  // namespace dg
