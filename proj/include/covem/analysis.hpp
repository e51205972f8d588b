#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covem/arc_length.hpp"
#include "covem/structure.hpp"

namespace covem {

/// Adapts a Structure with its dof partition to the path follower. Holds
/// committed element states; trial states from the last linearize() become
/// committed only through commit().
class FeSystem {
 public:
  explicit FeSystem(const Structure& s)
      : structure_(&s),
        committed_(s.initial_states()),
        trial_(committed_),
        f_ref_(s.dof_map().restrict(s.reference_load())) {}

  Eigen::Index size() const { return structure_->dof_map().free_size(); }
  const Eigen::VectorXd& reference_load() const { return f_ref_; }

  Linearization linearize(const Eigen::VectorXd& u_free) {
    const DofMap& map = structure_->dof_map();
    const Eigen::VectorXd u = map.expand(u_free);
    Assembly a = structure_->assemble(u, 0.0, committed_);
    ReducedSystem r = apply_constraints(a.K, a.f_int, map);
    trial_ = std::move(a.trial);
    last_f_int_ = std::move(a.f_int);
    return {std::move(r.K), std::move(r.g)};
  }

  void commit() {
    committed_ = trial_;
    committed_f_int_ = last_f_int_;
  }

  const Structure& structure() const { return *structure_; }
  const std::vector<ElementState>& committed() const { return committed_; }
  /// Full internal force at the committed state (reactions at fixed dofs).
  const Eigen::VectorXd& committed_internal_force() const { return committed_f_int_; }

 private:
  const Structure* structure_;
  std::vector<ElementState> committed_;
  std::vector<ElementState> trial_;
  Eigen::VectorXd f_ref_;
  Eigen::VectorXd last_f_int_;
  Eigen::VectorXd committed_f_int_;
};

static_assert(PathSystem<FeSystem>);

struct SolverConfig {
  ArcLengthConfig arc;
  int steps = 10;
  ElementOptions element;
  double stop_displacement = 0.0;  // stop once |monitored displacement| exceeds this (0: off)
};

struct HistoryEntry {
  int step = 0;
  double lambda = 0.0;
  Vec2 u_monitor = Vec2::Zero();
  double radius = 0.0;
  int iterations = 0;
  int cuts = 0;
  double residual = 0.0;
  double constraint_error = 0.0;
};

struct AnalysisResult {
  std::vector<HistoryEntry> history;  // entry 0 is the unloaded state
  Eigen::VectorXd u;                  // full displacement at the last accepted step
  std::vector<ElementState> states;
  Eigen::VectorXd f_int;
  bool completed = false;
  std::string termination;
};

/// Snapshot passed to the per-step observer.
struct StepView {
  int step = 0;
  double lambda = 0.0;
  const Eigen::VectorXd& u;
  const std::vector<ElementState>& states;
  const Structure& structure;
};

/// Runs the configured number of arc-length steps. Cut exhaustion ends the
/// run early with `completed == false` and the reason in `termination`.
inline AnalysisResult run_analysis(const Structure& structure, const SolverConfig& cfg,
                                   const std::function<void(const StepView&)>& observer = {}) {
  if (structure.dof_map().free_size() == 0) throw ConfigError("all dofs are constrained");
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
  FeSystem system(structure);
  ArcLengthPath path = start_path(system, cfg.arc);

  AnalysisResult out;
  out.u = Eigen::VectorXd::Zero(structure.dof_count());
  out.states = system.committed();
  out.f_int = Eigen::VectorXd::Zero(structure.dof_count());
  out.history.push_back({0, 0.0, Vec2::Zero(), 0.0, 0, 0, 0.0, 0.0});
  if (observer) observer({0, 0.0, out.u, out.states, structure});

  const int mdof = static_cast<int>(structure.problem().monitor.dof);
  for (int s = 0; s < cfg.steps; ++s) {
    StepResult r;
    try {
      r = arc_length_step(path, system, cfg.arc);
    } catch (const PathError& e) {
      out.termination = e.what();
      return out;
    }
    out.u = structure.dof_map().expand(path.u);
    out.states = system.committed();
    out.f_int = system.committed_internal_force();
    HistoryEntry h;
    h.step = r.step;
    h.lambda = r.lambda;
    h.u_monitor = structure.monitor_displacement(out.u);
    h.radius = r.radius;
    h.iterations = r.iterations;
    h.cuts = r.cuts;
    h.residual = r.residual;
    h.constraint_error = r.constraint_error;
    out.history.push_back(h);
    if (observer) observer({r.step, r.lambda, out.u, out.states, structure});
    if (cfg.stop_displacement > 0.0 && std::abs(h.u_monitor(mdof)) >= cfg.stop_displacement) break;
  }
  out.completed = true;
  out.termination = "ok";
  return out;
}

/// Per-element output quantities.
struct ElementFields {
  std::vector<Voigt> stress_local;
  std::vector<Voigt> stress_global;
  std::vector<double> eq_plastic_strain;
  std::vector<double> theta;
};

/// Stress rotated from the element frame to global axes: Q s Q^T.
inline Voigt rotate_stress(const Voigt& s, double theta) {
  const Eigen::Matrix2d Q = rotation(theta);
  Eigen::Matrix2d m;
  m << s(0), s(2), s(2), s(1);
  const Eigen::Matrix2d g = Q * m * Q.transpose();
  return Voigt(g(0, 0), g(1, 1), g(0, 1));
}

inline ElementFields element_fields(const Structure& structure, const std::vector<ElementState>& states) {
  ElementFields f;
  for (const auto& s : states) {
    f.stress_local.push_back(s.material.stress);
    f.stress_global.push_back(rotate_stress(s.material.stress, s.theta));
    f.eq_plastic_strain.push_back(s.material.alpha);
    f.theta.push_back(s.theta);
  }
  (void)structure;
  return f;
}

struct TangentCheck {
  Eigen::MatrixXd K;     // assembled tangent (full dofs)
  Eigen::MatrixXd K_fd;  // central differences of F_int
  double max_rel_error = 0.0;  // max |K - K_fd| / max |K|
};

/// Compares the assembled tangent at u with central differences of the
/// internal force, perturbing each dof by +-h from the same committed states.
inline TangentCheck tangent_check(const Structure& s, const Eigen::VectorXd& u,
                                  const std::vector<ElementState>& committed, double h) {
  if (!(h > 0.0)) throw ConfigError("tangent_check: step must be positive");
  TangentCheck c;
  c.K = Eigen::MatrixXd(s.assemble(u, 0.0, committed).K);
  const int n = s.dof_count();
  c.K_fd.resize(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd up = u, um = u;
    up(j) += h;
    um(j) -= h;
    c.K_fd.col(j) = (s.assemble(up, 0.0, committed, false).f_int - s.assemble(um, 0.0, committed, false).f_int) /
                    (2.0 * h);
  }
  const double scale = c.K.cwiseAbs().maxCoeff();
  c.max_rel_error = scale > 0.0 ? (c.K - c.K_fd).cwiseAbs().maxCoeff() / scale : 0.0;
  return c;
}

}  // namespace covem
