#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Dense>

#include "covem/error.hpp"
#include "covem/vem.hpp"

namespace covem {

/// Reference data of one element's co-rotating frame. Vectors are stacked
/// per node as [x1 y1 x2 y2 ...].
struct CorotReference {
  int frame_node = 0;
  Eigen::VectorXd X_rel;   // X^i - X^L
  Eigen::VectorXd X_loc;   // reference local coordinates (equal to X_rel at theta = 0)
  Eigen::VectorXd spin;    // a_ell: (dphi_i/dY, -dphi_i/dX) per node
  Eigen::VectorXd spin_c;  // c: 90 degree pairing of a_ell, (dphi_i/dX, dphi_i/dY) per node

  int vertex_count() const { return static_cast<int>(X_rel.size() / 2); }
};

/// Spin vector built from the shape function derivatives carried by B.
inline Eigen::VectorXd spin_vector(const ElementProjection& p) {
  const int nv = p.vertex_count();
  Eigen::VectorXd a(2 * nv);
  for (int i = 0; i < nv; ++i) {
    a(2 * i) = p.B(1, 2 * i + 1);
    a(2 * i + 1) = -p.B(0, 2 * i);
  }
  return a;
}

inline Eigen::VectorXd pair_rotate(const Eigen::VectorXd& a) {
  Eigen::VectorXd c(a.size());
  for (Eigen::Index i = 0; i < a.size() / 2; ++i) {
    c(2 * i) = -a(2 * i + 1);
    c(2 * i + 1) = a(2 * i);
  }
  return c;
}

inline CorotReference make_reference(const ElementProjection& p, std::span<const Vec2> coords, int frame_node = 0) {
  const int nv = static_cast<int>(coords.size());
  if (frame_node < 0 || frame_node >= nv) throw ValidationError("frame node out of range");
  CorotReference r;
  r.frame_node = frame_node;
  r.X_rel.resize(2 * nv);
  for (int i = 0; i < nv; ++i) r.X_rel.segment<2>(2 * i) = coords[i] - coords[frame_node];
  r.X_loc = r.X_rel;
  r.spin = spin_vector(p);
  r.spin_c = pair_rotate(r.spin);
  return r;
}

/// Current offsets x^i - x^L from current nodal coordinates.
inline Eigen::VectorXd current_offsets(const CorotReference& ref, std::span<const Vec2> current) {
  const int nv = ref.vertex_count();
  Eigen::VectorXd x(2 * nv);
  for (int i = 0; i < nv; ++i) x.segment<2>(2 * i) = current[i] - current[ref.frame_node];
  return x;
}

struct CorotFrame {
  double theta = 0.0;
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();  // [e1' e2']
  double a = 0.0;
  double b = 0.0;
};

inline Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d Q;
  Q << std::cos(theta), -std::sin(theta),
       std::sin(theta), std::cos(theta);
  return Q;
}

/// Frame angle from zero spin at the centroid: a sin(theta) + b cos(theta) = 0,
/// taken on the branch nearest the last committed angle.
inline CorotFrame corot_angle(const CorotReference& ref, const Eigen::VectorXd& x_rel, double theta_prev) {
  CorotFrame f;
  f.a = ref.spin_c.dot(x_rel);
  f.b = ref.spin.dot(x_rel);
  const double scale = ref.spin.norm() * x_rel.norm();
  if (!(std::hypot(f.a, f.b) > 1e-14 * scale))
    throw KinematicError("co-rotational frame undefined: element collapsed onto its frame node");
  const double base = std::atan2(-f.b, f.a);
  const double k = std::round((theta_prev - base) / std::numbers::pi);
  f.theta = base + k * std::numbers::pi;
  f.Q = rotation(f.theta);
  return f;
}

/// d^i_l = Q^T x^{iL} - X^i_l.
inline Eigen::VectorXd local_displacements(const CorotFrame& f, const CorotReference& ref,
                                           const Eigen::VectorXd& x_rel) {
  const int nv = ref.vertex_count();
  Eigen::VectorXd d(2 * nv);
  const Eigen::Matrix2d Qt = f.Q.transpose();
  for (int i = 0; i < nv; ++i) d.segment<2>(2 * i) = Qt * x_rel.segment<2>(2 * i) - ref.X_loc.segment<2>(2 * i);
  return d;
}

struct Transformation {
  Eigen::MatrixXd T;        // delta d_l = T delta d
  Eigen::VectorXd v;        // delta theta = v^T delta d
  Eigen::MatrixXd V;        // delta v = V delta d (symmetric)
  Eigen::VectorXd x_local;  // current local coordinates Q^T x^{iL}
  Eigen::VectorXd x_hat;    // [y1 -x1 y2 -x2 ...] of x_local
};

inline Transformation transformation(const CorotFrame& f, const CorotReference& ref, const Eigen::VectorXd& x_rel) {
  const int nv = ref.vertex_count();
  const int nd = 2 * nv;
  const double a = f.a, b = f.b;
  const double s = a * a + b * b;
  if (!(s > 0.0)) throw KinematicError("co-rotational transformation undefined (a = b = 0)");
  const Eigen::VectorXd& al = ref.spin;
  const Eigen::VectorXd& c = ref.spin_c;

  Transformation t;
  t.v = (b * c - a * al) / s;
  t.V = (2.0 * a * b * (al * al.transpose() - c * c.transpose()) +
         (a * a - b * b) * (c * al.transpose() + al * c.transpose())) / (s * s);

  t.x_local.resize(nd);
  t.x_hat.resize(nd);
  const Eigen::Matrix2d Qt = f.Q.transpose();
  for (int i = 0; i < nv; ++i) {
    const Vec2 xl = Qt * x_rel.segment<2>(2 * i);
    t.x_local.segment<2>(2 * i) = xl;
    t.x_hat(2 * i) = xl.y();
    t.x_hat(2 * i + 1) = -xl.x();
  }

  t.T = t.x_hat * t.v.transpose();
  for (int i = 0; i < nv; ++i) t.T.block<2, 2>(2 * i, 2 * i) += Qt;
  return t;
}

/// k_tsigma = sum_j q_l^j G^j, summed in closed form:
///   r v^T + v r^T - (sum_i q_x^i x_i + q_y^i y_i) v v^T + (x_hat^T q_l) V
/// with r = sum_i (q_x^i e2'_i - q_y^i e1'_i). The V term is the G^{.,b} part.
inline Eigen::MatrixXd initial_stiffness(const CorotFrame& f, const Transformation& t, const Eigen::VectorXd& q_local,
                                         bool include_g1b) {
  const Eigen::Index nd = q_local.size();
  const Vec2 e1 = f.Q.col(0), e2 = f.Q.col(1);
  Eigen::VectorXd r(nd);
  double w = 0.0;
  for (Eigen::Index i = 0; i < nd / 2; ++i) {
    const double qx = q_local(2 * i), qy = q_local(2 * i + 1);
    r.segment<2>(2 * i) = qx * e2 - qy * e1;
    w += qx * t.x_local(2 * i) + qy * t.x_local(2 * i + 1);
  }
  Eigen::MatrixXd k = r * t.v.transpose() + t.v * r.transpose() - w * (t.v * t.v.transpose());
  if (include_g1b) k += t.x_hat.dot(q_local) * t.V;
  return k;
}

/// k_T = T^T k_tl T + k_tsigma.
inline Eigen::MatrixXd element_tangent(const Eigen::MatrixXd& k_local, const Eigen::VectorXd& q_local,
                                       const CorotFrame& f, const Transformation& t, bool include_g1b) {
  if (k_local.rows() != t.T.rows() || k_local.cols() != t.T.cols() || q_local.size() != t.T.rows())
    throw ValidationError("element_tangent: dimension mismatch with element dofs");
  return t.T.transpose() * k_local * t.T + initial_stiffness(f, t, q_local, include_g1b);
}

enum class ForceVariant { Elastic, Plastic };

struct InternalForce {
  Eigen::VectorXd local;
  Eigen::VectorXd global;
};

/// Elastic: q_l = k_E d_l. Plastic: q_l = A t B^T sigma + k_s d_l. q = T^T q_l.
inline InternalForce internal_force(const ElementProjection& p, double thickness, const Eigen::MatrixXd& k_element,
                                    const Eigen::VectorXd& d_local, const Voigt& stress,
                                    const Eigen::MatrixXd& k_stability, const Eigen::MatrixXd& T,
                                    ForceVariant variant) {
  InternalForce f;
  if (variant == ForceVariant::Elastic) {
    f.local = k_element * d_local;
  } else {
    f.local = p.geometry.area * thickness * p.B.transpose() * stress + k_stability * d_local;
  }
  f.global = T.transpose() * f.local;
  return f;
}

}  // namespace covem
