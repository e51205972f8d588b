#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covem/error.hpp"
#include "covem/vem.hpp"

namespace covem {

/// Plane stress J2 plasticity with linear isotropic hardening
/// (yield radius sigma_yield + hardening * alpha).
struct J2Params {
  double youngs = 0.0;
  double poisson = 0.0;
  double sigma_yield = 0.0;
  double hardening = 0.0;

  void validate() const {
    if (!(youngs > 0.0)) throw ValidationError("J2: Young's modulus must be positive");
    if (!(poisson > -1.0 && poisson < 1.0)) throw ValidationError("J2: plane stress requires -1 < nu < 1");
    if (!(sigma_yield > 0.0)) throw ValidationError("J2: sigma_yield must be positive");
    if (!(hardening >= 0.0)) throw ValidationError("J2: hardening modulus must be >= 0");
  }
};

struct MaterialState {
  Voigt stress = Voigt::Zero();
  Voigt plastic_strain = Voigt::Zero();
  double alpha = 0.0;  // equivalent plastic strain

  friend bool operator==(const MaterialState&, const MaterialState&) = default;
};

struct ReturnMapResult {
  Voigt stress;
  Eigen::Matrix3d tangent;
  MaterialState state;
  double delta_gamma = 0.0;
  bool plastic = false;
};

namespace j2 {

/// Deviatoric projector in Voigt form: s^T P s = (2/3) sigma_vm^2.
inline Eigen::Matrix3d projector() {
  Eigen::Matrix3d P;
  P << 2.0, -1.0, 0.0,
       -1.0, 2.0, 0.0,
       0.0, 0.0, 6.0;
  return P / 3.0;
}

inline double von_mises(const Voigt& s) {
  return std::sqrt(std::max(0.0, s(0) * s(0) - s(0) * s(1) + s(1) * s(1) + 3.0 * s(2) * s(2)));
}

}  // namespace j2

/// Von Mises effective stress minus the current yield stress.
inline double yield_function(const J2Params& params, const Voigt& stress, double alpha) {
  return j2::von_mises(stress) - (params.sigma_yield + params.hardening * alpha);
}

namespace detail {

// Trial stress split on the common eigenbasis of C and P:
// (1,1,0)/sqrt2 with moduli E/(1-nu), P-eigenvalue 1/3; (1,-1,0)/sqrt2 and
// (0,0,1) share 1/(1 + 2 G dgamma).
struct PlaneStressSplit {
  double a1 = 0.0;  // (s_xx + s_yy)^2 / 6
  double a2 = 0.0;  // (s_xx - s_yy)^2 / 2 + 2 s_xy^2
  double c1 = 0.0;  // E / (3 (1 - nu))
  double c2 = 0.0;  // 2 G

  // phi(dg) = sqrt(s^T P s)
  double fbar(double dg) const {
    const double d1 = 1.0 + c1 * dg, d2 = 1.0 + c2 * dg;
    return std::sqrt(a1 / (d1 * d1) + a2 / (d2 * d2));
  }
  double fbar2_derivative(double dg) const {
    const double d1 = 1.0 + c1 * dg, d2 = 1.0 + c2 * dg;
    return -2.0 * a1 * c1 / (d1 * d1 * d1) - 2.0 * a2 * c2 / (d2 * d2 * d2);
  }
};

}  // namespace detail

/// Plane stress radial return (projected onto sigma_zz = 0) with the
/// algorithmically consistent tangent. `committed` is never modified.
inline ReturnMapResult radial_return_plane_stress(const J2Params& params, const MaterialState& committed,
                                                  const Voigt& total_strain) {
  const Eigen::Matrix3d C = elastic_moduli(params.youngs, params.poisson, Plane::Stress).C;
  const Voigt trial = C * (total_strain - committed.plastic_strain);
  const double radius_n = params.sigma_yield + params.hardening * committed.alpha;
  const double f_trial = j2::von_mises(trial) - radius_n;

  ReturnMapResult out;
  if (f_trial <= 1e-12 * params.sigma_yield) {
    out.stress = trial;
    out.tangent = C;
    out.state = committed;
    out.state.stress = trial;
    return out;
  }

  const double E = params.youngs, nu = params.poisson, H = params.hardening;
  const double shear = E / (2.0 * (1.0 + nu));
  detail::PlaneStressSplit split;
  split.a1 = (trial(0) + trial(1)) * (trial(0) + trial(1)) / 6.0;
  split.a2 = 0.5 * (trial(0) - trial(1)) * (trial(0) - trial(1)) + 2.0 * trial(2) * trial(2);
  split.c1 = E / (3.0 * (1.0 - nu));
  split.c2 = 2.0 * shear;

  const double k23 = std::sqrt(2.0 / 3.0);
  const double k32 = std::sqrt(1.5);
  // Consistency in stress units: sigma_vm(dg) - R(alpha_n + sqrt(2/3) dg fbar(dg)) = 0.
  auto residual = [&](double dg, double& slope) {
    const double fb = split.fbar(dg);
    const double dfb = split.fbar2_derivative(dg) / (2.0 * fb);
    const double r = k32 * fb - (radius_n + H * k23 * dg * fb);
    slope = k32 * dfb - H * k23 * (fb + dg * dfb);
    return r;
  };

  const double tol = 1e-13 * radius_n;
  double lo = 0.0, hi = 0.0;
  {
    double s;
    hi = f_trial / (3.0 * shear);
    while (residual(hi, s) > 0.0) hi *= 2.0;
  }
  double dg = 0.0;
  std::vector<double> history;
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    double slope = 0.0;
    const double r = residual(dg, slope);
    history.push_back(r);
    if (std::abs(r) <= tol) {
      converged = true;
      break;
    }
    if (r > 0.0) lo = dg; else hi = dg;
    double next = (slope < 0.0) ? dg - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    dg = next;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "plane stress return map did not converge; residual history:";
    for (double r : history) msg << ' ' << r;
    throw ConstitutiveError(msg.str());
  }

  const Eigen::Matrix3d P = j2::projector();
  const Eigen::Matrix3d Xi = (C.inverse() + dg * P).inverse();
  const Voigt stress = Xi * C.inverse() * trial;
  const double fb = std::sqrt(std::max(0.0, stress.dot(P * stress)));

  out.plastic = true;
  out.delta_gamma = dg;
  out.stress = stress;
  out.state.stress = stress;
  out.state.plastic_strain = committed.plastic_strain + dg * P * stress;
  out.state.alpha = committed.alpha + k23 * dg * fb;

  // C_ep = Xi - (Xi n)(Xi n)^T / (n^T Xi n + beta), n = P sigma.
  const double radius = params.sigma_yield + H * out.state.alpha;
  const double h = (2.0 / 3.0) * radius * H;
  const double theta = 1.0 - h * k23 * dg / fb;
  const double beta = h * k23 * fb / theta;
  const Voigt n = P * stress;
  const Voigt xn = Xi * n;
  out.tangent = Xi - (xn * xn.transpose()) / (n.dot(xn) + beta);
  out.tangent = 0.5 * (out.tangent + out.tangent.transpose()).eval();
  return out;
}

}  // namespace covem
