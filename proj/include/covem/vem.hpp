#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "covem/error.hpp"
#include "covem/mesh.hpp"

namespace covem {

using Voigt = Eigen::Vector3d;  // (xx, yy, xy) with engineering shear strain

enum class Plane { Stress, Strain };

/// Isotropic elastic modular matrix in Voigt form.
struct ModularMatrix {
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  Plane plane = Plane::Stress;
  double youngs = 0.0;
  double poisson = 0.0;
};

inline ModularMatrix elastic_moduli(double youngs, double poisson, Plane plane) {
  if (!(youngs > 0.0)) throw ValidationError("Young's modulus must be positive");
  ModularMatrix m{Eigen::Matrix3d::Zero(), plane, youngs, poisson};
  if (plane == Plane::Stress) {
    if (!(poisson > -1.0 && poisson < 1.0))
      throw ValidationError("plane stress requires -1 < nu < 1, got " + std::to_string(poisson));
    const double f = youngs / (1.0 - poisson * poisson);
    m.C << f, f * poisson, 0.0,
           f * poisson, f, 0.0,
           0.0, 0.0, f * (1.0 - poisson) / 2.0;
  } else {
    if (!(poisson > -1.0 && poisson < 0.5))
      throw ValidationError("plane strain requires -1 < nu < 0.5, got " + std::to_string(poisson));
    const double f = youngs / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    m.C << f * (1.0 - poisson), f * poisson, 0.0,
           f * poisson, f * (1.0 - poisson), 0.0,
           0.0, 0.0, f * (1.0 - 2.0 * poisson) / 2.0;
  }
  return m;
}

/// First-order vector basis in scaled coordinates xi = (x - xc)/h, eta = (y - yc)/h:
/// (1,0), (0,1), (-eta,xi), (eta,xi), (xi,0), (0,eta).
struct MonomialBasis {
  static constexpr int size = 6;

  Vec2 centroid = Vec2::Zero();
  double diameter = 1.0;

  /// Column a holds p_a evaluated at x.
  Eigen::Matrix<double, 2, 6> evaluate(const Vec2& x) const {
    const double xi = (x.x() - centroid.x()) / diameter;
    const double eta = (x.y() - centroid.y()) / diameter;
    Eigen::Matrix<double, 2, 6> p;
    p << 1.0, 0.0, -eta, eta, xi, 0.0,
         0.0, 1.0, xi, xi, 0.0, eta;
    return p;
  }

  /// Voigt strains of the six basis vectors (they are constant).
  Eigen::Matrix<double, 3, 6> strains() const {
    const double s = 1.0 / diameter;
    Eigen::Matrix<double, 3, 6> e = Eigen::Matrix<double, 3, 6>::Zero();
    e(2, 3) = 2.0 * s;
    e(0, 4) = s;
    e(1, 5) = s;
    return e;
  }
};

/// Projection operators of one polygon. Element dofs are ordered
/// [u1x u1y u2x u2y ...].
struct ElementProjection {
  ElementGeometry geometry;
  MonomialBasis basis;
  Eigen::MatrixXd D;        // 2n x 6
  Eigen::MatrixXd Btilde;   // 6 x 2n
  Eigen::MatrixXd Bbreve;   // 3 x 2n
  Eigen::MatrixXd Bbar;     // 6 x 2n
  Eigen::MatrixXd G;        // 6 x 6
  Eigen::MatrixXd PiTilde;  // 6 x 2n
  Eigen::MatrixXd Pi;       // 2n x 2n
  Eigen::MatrixXd B;        // 3 x 2n
  double g_condition = 1.0;

  int vertex_count() const { return static_cast<int>(geometry.edges.size()); }
  int dof_count() const { return 2 * vertex_count(); }
};

inline constexpr double kConditionWarning = 1e12;

/// Builds D, B-tilde, B-breve, B-bar, G and the projectors for one polygon.
/// C only enters through the boundary tractions of B-tilde; the resulting
/// projectors do not depend on it for invertible C.
inline ElementProjection build_projection(const ElementGeometry& geom, std::span<const Vec2> coords,
                                          const Eigen::Matrix3d& C, int elem = -1) {
  const int nv = static_cast<int>(coords.size());
  if (nv != static_cast<int>(geom.edges.size()))
    throw ElementError(elem, "coordinate count does not match geometry");
  const int nd = 2 * nv;

  ElementProjection p;
  p.geometry = geom;
  p.basis = MonomialBasis{geom.centroid, geom.diameter};

  p.D.resize(nd, 6);
  for (int j = 0; j < nv; ++j) p.D.middleRows(2 * j, 2) = p.basis.evaluate(coords[j]);

  const Eigen::Matrix<double, 3, 6> eps = p.basis.strains();
  const Eigen::Matrix<double, 3, 6> sig = C * eps;

  p.Btilde = Eigen::MatrixXd::Zero(6, nd);
  for (int j = 0; j < nv; ++j) {
    const Edge& prev = geom.edges[(j + nv - 1) % nv];
    const Edge& next = geom.edges[j];
    const Vec2 m = 0.5 * prev.length * prev.normal + 0.5 * next.length * next.normal;
    for (int a = 0; a < 6; ++a) {
      Eigen::Matrix2d s;
      s << sig(0, a), sig(2, a), sig(2, a), sig(1, a);
      const Vec2 t = s * m;
      p.Btilde(a, 2 * j) = t.x();
      p.Btilde(a, 2 * j + 1) = t.y();
    }
  }

  p.Bbreve = p.D.leftCols(3).transpose() / static_cast<double>(nv);
  p.Bbar = p.Btilde;
  p.Bbar.topRows(3) = p.Bbreve;

  p.G = p.Bbar * p.D;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.G);
  const auto& sv = svd.singularValues();
  if (!(sv(5) > 0.0) || !std::isfinite(sv(0)))
    throw ElementError(elem, "singular G matrix (degenerate geometry)");
  p.g_condition = sv(0) / sv(5);
  if (p.g_condition > 1e15)
    throw ElementError(elem, "G matrix numerically singular, condition estimate " + std::to_string(p.g_condition));

  p.PiTilde = p.G.partialPivLu().solve(p.Bbar);
  p.Pi = p.D * p.PiTilde;
  p.B = eps * p.PiTilde;
  return p;
}

inline ElementProjection build_projection(const PolyMesh& mesh, int elem, const Eigen::Matrix3d& C) {
  const auto pts = mesh.polygon_coords(elem);
  return build_projection(polygon_geometry(mesh, elem), pts, C, elem);
}

/// t A B^T C B.
inline Eigen::MatrixXd consistency_stiffness(const ElementProjection& p, const Eigen::Matrix3d& C,
                                             double thickness) {
  return thickness * p.geometry.area * p.B.transpose() * C * p.B;
}

/// k_s = tau tr(k_c) (I - Pi)^T (I - Pi).
struct MengoliniStability {
  double tau = 0.5;
};

/// k_s = (I - Pi)^T S (I - Pi) with S_ii = max(alpha0 tr(C) / 3, (k_c)_ii).
struct SukumarStability {
  double alpha0 = 1.0;
};

using Stabilization = std::variant<MengoliniStability, SukumarStability>;

inline Eigen::MatrixXd stability_stiffness(const ElementProjection& p, const Eigen::Matrix3d& C,
                                           const Eigen::MatrixXd& kc, const Stabilization& variant) {
  const int nd = p.dof_count();
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(nd, nd) - p.Pi;
  if (const auto* m = std::get_if<MengoliniStability>(&variant)) {
    return m->tau * kc.trace() * R.transpose() * R;
  }
  const auto& s = std::get<SukumarStability>(variant);
  const double floor = s.alpha0 * C.trace() / 3.0;
  Eigen::VectorXd diag(nd);
  for (int i = 0; i < nd; ++i) diag(i) = std::max(floor, kc(i, i));
  return R.transpose() * diag.asDiagonal() * R;
}

inline Eigen::MatrixXd element_stiffness(const ElementProjection& p, const Eigen::Matrix3d& C, double thickness,
                                         const Stabilization& variant) {
  const Eigen::MatrixXd kc = consistency_stiffness(p, C, thickness);
  return kc + stability_stiffness(p, C, kc, variant);
}

/// Constant element strain B u_E.
inline Voigt recover_strain(const ElementProjection& p, const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != p.dof_count())
    throw ValidationError("recover_strain: expected " + std::to_string(p.dof_count()) + " dofs, got " +
                          std::to_string(u.size()));
  return p.B * u;
}

}  // namespace covem
