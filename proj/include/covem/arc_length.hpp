#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "covem/error.hpp"

namespace covem {

/// Tangent and internal force of a discrete system at a trial state.
struct Linearization {
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd f_int;
};

/// A system the path follower can drive. `linearize` evaluates a trial state
/// without touching committed history; `commit` accepts the trial state of
/// the most recent `linearize` call.
template <class S>
concept PathSystem = requires(S& s, const Eigen::VectorXd& u) {
  { s.size() } -> std::convertible_to<Eigen::Index>;
  { s.reference_load() } -> std::convertible_to<const Eigen::VectorXd&>;
  { s.linearize(u) } -> std::same_as<Linearization>;
  s.commit();
};

struct ArcLengthConfig {
  double radius = 1.0;           // arc-length radius
  double psi = 0.0;              // load term weight (0: cylindrical)
  double tol = 1e-6;             // residual tolerance relative to |lambda F|
  double tol_floor = 1e-12;      // absolute floor of the residual reference
  int max_iter = 25;
  double cut_factor = 0.5;
  double grow_factor = 1.2;
  int desired_iter = 5;          // grow the radius when a step needs no more than this
  int max_cuts = 5;
  double radius_max = 0.0;       // 0: the initial radius
  double constraint_tol = 1e-8;  // relative to radius^2
};

/// Committed path position and the data the next predictor needs.
struct ArcLengthPath {
  double lambda = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd du_prev;  // increment of the last accepted step
  double dlambda_prev = 0.0;
  double radius = 0.0;
  int step = 0;
  std::optional<Linearization> tangent;  // tangent at the committed state
};

struct StepResult {
  int step = 0;
  double lambda = 0.0;
  double dlambda = 0.0;
  double radius = 0.0;  // radius the accepted step satisfied
  int iterations = 0;
  int cuts = 0;
  double residual = 0.0;
  double constraint_error = 0.0;  // |du.du + psi^2 dl^2 F.F - r^2|
};

namespace detail {

class SymmetricSolver {
 public:
  explicit SymmetricSolver(const Eigen::SparseMatrix<double>& K) {
    ldlt_.compute(K);
    if (ldlt_.info() == Eigen::Success) {
      use_lu_ = false;
      return;
    }
    lu_.analyzePattern(K);
    lu_.factorize(K);
    if (lu_.info() != Eigen::Success) throw PathError("tangent stiffness factorization failed (singular)");
    use_lu_ = true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = use_lu_ ? Eigen::VectorXd(lu_.solve(b)) : Eigen::VectorXd(ldlt_.solve(b));
    if (!x.allFinite()) throw PathError("linear solve produced non-finite values");
    return x;
  }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool use_lu_ = false;
};

}  // namespace detail

template <PathSystem S>
ArcLengthPath start_path(S& system, const ArcLengthConfig& cfg) {
  ArcLengthPath p;
  p.u = Eigen::VectorXd::Zero(system.size());
  p.du_prev = Eigen::VectorXd::Zero(system.size());
  p.radius = cfg.radius;
  return p;
}

namespace detail {

struct Attempt {
  bool converged = false;
  Eigen::VectorXd du;
  double dlambda = 0.0;
  int iterations = 0;
  double residual = 0.0;
  double constraint_error = 0.0;
  std::optional<Linearization> tangent;
};

template <PathSystem S>
Attempt attempt_step(const ArcLengthPath& path, S& system, const ArcLengthConfig& cfg, double radius) {
  const Eigen::VectorXd& F = system.reference_load();
  const double FF = F.squaredNorm();
  const double psi2 = cfg.psi * cfg.psi;
  const double r2 = radius * radius;

  Attempt at;
  Eigen::VectorXd du_t;
  {
    SymmetricSolver solver(path.tangent->K);
    du_t = solver.solve(F);
  }
  const double denom = std::sqrt(du_t.squaredNorm() + psi2 * FF);
  if (!(denom > 0.0)) throw PathError("predictor undefined: zero tangent load response");
  double sign = 1.0;
  if (path.step > 0 && du_t.dot(path.du_prev) < 0.0) sign = -1.0;
  double dlambda = sign * radius / denom;
  Eigen::VectorXd du = dlambda * du_t;

  for (int it = 0;; ++it) {
    const Eigen::VectorXd u = path.u + du;
    const double lambda = path.lambda + dlambda;
    Linearization lin = system.linearize(u);
    const Eigen::VectorXd g = lin.f_int - lambda * F;
    if (!g.allFinite()) throw PathError("non-finite residual");
    const double gnorm = g.norm();
    const double ref = std::max(std::abs(lambda) * std::sqrt(FF), cfg.tol_floor);
    const double cerr = std::abs(du.squaredNorm() + psi2 * dlambda * dlambda * FF - r2);
    if (gnorm <= cfg.tol * ref && cerr <= cfg.constraint_tol * r2) {
      at.converged = true;
      at.du = du;
      at.dlambda = dlambda;
      at.iterations = it;
      at.residual = gnorm;
      at.constraint_error = cerr;
      at.tangent = std::move(lin);
      return at;
    }
    if (it >= cfg.max_iter) return at;

    SymmetricSolver solver(lin.K);
    const Eigen::VectorXd dut = solver.solve(F);
    const Eigen::VectorXd dug = solver.solve(-g);

    const Eigen::VectorXd base = du + dug;
    const double a1 = dut.squaredNorm() + psi2 * FF;
    const double a2 = 2.0 * dut.dot(base) + 2.0 * psi2 * dlambda * FF;
    const double a3 = base.squaredNorm() + psi2 * dlambda * dlambda * FF - r2;
    const double disc = a2 * a2 - 4.0 * a1 * a3;
    double dl;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      // Stable root pair.
      const double qq = -0.5 * (a2 + std::copysign(sq, a2));
      double roots[2];
      if (qq != 0.0) {
        roots[0] = qq / a1;
        roots[1] = a3 / qq;
      } else {
        roots[0] = roots[1] = 0.0;
      }
      auto cosine = [&](double x) {
        return (du.dot(base + x * dut) + psi2 * dlambda * (dlambda + x) * FF);
      };
      dl = cosine(roots[0]) >= cosine(roots[1]) ? roots[0] : roots[1];
    } else {
      const double lin_den = du.dot(dut) + psi2 * dlambda * FF;
      if (lin_den == 0.0) return at;
      dl = -(du.dot(dug)) / lin_den;
    }
    du = base + dl * dut;
    dlambda += dl;
    if (!du.allFinite() || !std::isfinite(dlambda)) return at;
  }
}

}  // namespace detail

/// One Crisfield arc-length step with Newton correction on the constraint
/// surface |du|^2 + psi^2 dlambda^2 |F|^2 = r^2. Failed attempts halve the
/// radius (up to max_cuts times) and restart from the committed state.
template <PathSystem S>
StepResult arc_length_step(ArcLengthPath& path, S& system, const ArcLengthConfig& cfg) {
  if (!(cfg.radius > 0.0) || !(cfg.tol > 0.0)) throw ConfigError("arc length needs radius > 0 and tol > 0");
  if (system.reference_load().squaredNorm() == 0.0) throw ConfigError("arc length needs a non-zero reference load");
  if (!path.tangent) path.tangent = system.linearize(path.u);
  if (path.radius <= 0.0) path.radius = cfg.radius;

  double radius = path.radius;
  std::string last_error = "no convergence";
  for (int cuts = 0; cuts <= cfg.max_cuts; ++cuts) {
    detail::Attempt at;
    try {
      at = detail::attempt_step(path, system, cfg, radius);
    } catch (const Error& e) {
      last_error = e.what();
      at.converged = false;
    }
    if (at.converged) {
      system.commit();
      path.u += at.du;
      path.lambda += at.dlambda;
      path.du_prev = at.du;
      path.dlambda_prev = at.dlambda;
      path.tangent = std::move(at.tangent);
      ++path.step;

      StepResult res;
      res.step = path.step;
      res.lambda = path.lambda;
      res.dlambda = at.dlambda;
      res.radius = radius;
      res.iterations = at.iterations;
      res.cuts = cuts;
      res.residual = at.residual;
      res.constraint_error = at.constraint_error;

      const double cap = cfg.radius_max > 0.0 ? cfg.radius_max : cfg.radius;
      path.radius = (at.iterations <= cfg.desired_iter) ? std::max(radius, std::min(radius * cfg.grow_factor, cap)) : radius;
      return res;
    }
    radius *= cfg.cut_factor;
  }
  std::ostringstream msg;
  msg << "arc length step " << path.step + 1 << " failed after " << cfg.max_cuts << " cuts (lambda "
      << path.lambda << ", last radius " << radius / cfg.cut_factor << "): " << last_error;
  throw PathError(msg.str());
}

}  // namespace covem
