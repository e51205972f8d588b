#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "covem/corotation.hpp"
#include "covem/materials.hpp"
#include "covem/mesh.hpp"
#include "covem/vem.hpp"

namespace covem {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Axis { X = 0, Y = 1 };

enum class MaterialModel { Elastic, J2 };

struct Material {
  MaterialModel model = MaterialModel::Elastic;
  Plane plane = Plane::Stress;
  double youngs = 0.0;
  double poisson = 0.0;
  double sigma_yield = 0.0;  // J2 only
  double hardening = 0.0;    // J2 only

  J2Params j2() const { return {youngs, poisson, sigma_yield, hardening}; }
};

struct Constraint {
  std::string set;
  Axis dof = Axis::X;
};

/// Point load whose total magnitude is divided equally over the set.
struct PointLoad {
  std::string set;
  Axis dof = Axis::X;
  double total = 0.0;
};

/// Monitored displacement: average over `nodes`.
struct Monitor {
  std::vector<int> nodes;
  Axis dof = Axis::Y;
};

struct Problem {
  PolyMesh mesh;
  Material material;
  double thickness = 1.0;
  std::vector<Constraint> constraints;
  std::vector<PointLoad> loads;
  Monitor monitor;
};

/// How the stability force of a J2 element follows plastic flow.
///   Total:       q_s = k_s(C_ep) d_l with C_ep of the current iterate.
///   Incremental: q_s = q_s,n + k_s(C_ep) (d_l - d_l,n).
///   Lagged:      q_s = q_s,n + k_s(C_ep,n) (d_l - d_l,n), C_ep,n from the
///                last committed state; smooth within a step.
enum class StabilityUpdate { Total, Incremental, Lagged };

struct ElementOptions {
  Stabilization stability = MengoliniStability{0.5};
  bool include_g1b = true;
  StabilityUpdate stability_update = StabilityUpdate::Lagged;
};

/// Committed (or trial) per-element history: material state in the local
/// co-rotated frame, the frame angle used for branch tracking, and the
/// stability force history of J2 elements.
struct ElementState {
  MaterialState material;
  double theta = 0.0;
  Eigen::Matrix3d C_stab = Eigen::Matrix3d::Zero();  // modulus behind k_s (J2)
  Eigen::VectorXd q_stab;                             // local stability force (J2)
  Eigen::VectorXd d_local;                            // local displacements (J2)

  friend bool operator==(const ElementState& a, const ElementState& b) {
    return a.material == b.material && a.theta == b.theta && a.C_stab == b.C_stab &&
           a.q_stab.size() == b.q_stab.size() && a.q_stab == b.q_stab && a.d_local.size() == b.d_local.size() &&
           a.d_local == b.d_local;
  }
};

inline int dof_index(int node, Axis a) { return 2 * node + static_cast<int>(a); }

/// Free/fixed dof partition. Constrained dofs carry the fixed value 0.
struct DofMap {
  std::vector<int> full_to_free;  // -1 for constrained dofs
  std::vector<int> free_to_full;
  std::vector<int> fixed;

  int full_size() const { return static_cast<int>(full_to_free.size()); }
  int free_size() const { return static_cast<int>(free_to_full.size()); }

  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r(free_size());
    for (int i = 0; i < free_size(); ++i) r(i) = full(free_to_full[i]);
    return r;
  }
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(full_size());
    for (int i = 0; i < free_size(); ++i) f(free_to_full[i]) = free(i);
    return f;
  }
};

struct ReducedSystem {
  SparseMatrix K;
  Eigen::VectorXd g;
};

/// Eliminates the constrained rows and columns.
inline ReducedSystem apply_constraints(const SparseMatrix& K, const Eigen::VectorXd& g, const DofMap& map) {
  ReducedSystem r;
  r.g = map.restrict(g);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(K.nonZeros()));
  for (int col = 0; col < K.outerSize(); ++col) {
    const int fc = map.full_to_free[col];
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      const int fr = map.full_to_free[it.row()];
      if (fr >= 0) trip.emplace_back(fr, fc, it.value());
    }
  }
  r.K.resize(map.free_size(), map.free_size());
  r.K.setFromTriplets(trip.begin(), trip.end());
  return r;
}

/// Cached reference-configuration data of one polygon.
struct ElementKernel {
  std::vector<int> nodes;
  std::vector<int> dofs;
  ElementProjection projection;
  CorotReference reference;
  Eigen::MatrixXd k_elastic;
  Eigen::MatrixXd k_stability_elastic;
};

/// Everything one element contributes at a given global displacement.
struct ElementResponse {
  CorotFrame frame;
  Transformation transform;
  Eigen::VectorXd d_local;
  Voigt strain;
  Voigt stress;
  Eigen::MatrixXd k_local;
  Eigen::VectorXd q_local;
  Eigen::VectorXd q_global;
  Eigen::MatrixXd k_global;
  ElementState trial;
  bool plastic = false;
};

struct Assembly {
  SparseMatrix K;
  Eigen::VectorXd f_int;
  Eigen::VectorXd f_ext;  // lambda * reference load
  std::vector<ElementState> trial;
};

/// Discretized problem: validated input, per-element cached projections and
/// the global load and dof bookkeeping.
class Structure {
 public:
  explicit Structure(Problem problem, ElementOptions options = {})
      : problem_(std::move(problem)), options_(options) {
    validate();
    build();
  }

  const Problem& problem() const { return problem_; }
  const ElementOptions& options() const { return options_; }
  const ModularMatrix& moduli() const { return moduli_; }
  const std::vector<ElementKernel>& kernels() const { return kernels_; }
  const DofMap& dof_map() const { return dofs_; }
  int dof_count() const { return 2 * problem_.mesh.vertex_count(); }
  int element_count() const { return static_cast<int>(kernels_.size()); }
  const Eigen::VectorXd& reference_load() const { return f_ref_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  std::vector<ElementState> initial_states() const {
    std::vector<ElementState> st(kernels_.size());
    if (problem_.material.model == MaterialModel::J2)
      for (std::size_t e = 0; e < st.size(); ++e) {
        const Eigen::Index nd = static_cast<Eigen::Index>(kernels_[e].dofs.size());
        st[e].C_stab = moduli_.C;
        st[e].q_stab = Eigen::VectorXd::Zero(nd);
        st[e].d_local = Eigen::VectorXd::Zero(nd);
      }
    return st;
  }

  /// Total reference load along the monitored direction.
  double monitor_load() const {
    double s = 0.0;
    for (const auto& l : problem_.loads)
      if (l.dof == problem_.monitor.dof) s += l.total;
    return s;
  }

  Vec2 monitor_displacement(const Eigen::VectorXd& u) const {
    Vec2 m = Vec2::Zero();
    for (int n : problem_.monitor.nodes) m += u.segment<2>(2 * n);
    return m / static_cast<double>(problem_.monitor.nodes.size());
  }

  ElementResponse element_response(int e, const Eigen::VectorXd& u, const ElementState& committed,
                                   bool want_tangent = true) const {
    const ElementKernel& k = kernels_[e];
    const int nv = static_cast<int>(k.nodes.size());
    std::vector<Vec2> current(nv);
    for (int i = 0; i < nv; ++i) current[i] = problem_.mesh.vertices[k.nodes[i]] + u.segment<2>(2 * k.nodes[i]);
    const Eigen::VectorXd x_rel = current_offsets(k.reference, current);

    ElementResponse r;
    r.frame = corot_angle(k.reference, x_rel, committed.theta);
    r.d_local = local_displacements(r.frame, k.reference, x_rel);
    r.transform = transformation(r.frame, k.reference, x_rel);
    r.strain = k.projection.B * r.d_local;
    r.trial.theta = r.frame.theta;

    const double t = problem_.thickness;
    if (problem_.material.model == MaterialModel::Elastic) {
      r.stress = moduli_.C * r.strain;
      r.k_local = k.k_elastic;
      r.q_local = internal_force(k.projection, t, k.k_elastic, r.d_local, r.stress, k.k_stability_elastic,
                                 r.transform.T, ForceVariant::Elastic).local;
      r.trial.material.stress = r.stress;
    } else {
      const ReturnMapResult rm = radial_return_plane_stress(j2_, committed.material, r.strain);
      r.stress = rm.stress;
      r.plastic = rm.plastic;
      r.trial.material = rm.state;
      const Eigen::MatrixXd kc = consistency_stiffness(k.projection, rm.tangent, t);
      const bool lagged = options_.stability_update == StabilityUpdate::Lagged;
      const Eigen::MatrixXd ks =
          lagged ? stability_stiffness(k.projection, committed.C_stab,
                                       consistency_stiffness(k.projection, committed.C_stab, t), options_.stability)
                 : stability_stiffness(k.projection, rm.tangent, kc, options_.stability);
      r.k_local = kc + ks;
      if (options_.stability_update == StabilityUpdate::Total) {
        r.q_local = internal_force(k.projection, t, r.k_local, r.d_local, r.stress, ks, r.transform.T,
                                   ForceVariant::Plastic).local;
        r.trial.q_stab = ks * r.d_local;
      } else {
        r.trial.q_stab = committed.q_stab + ks * (r.d_local - committed.d_local);
        r.q_local = k.projection.geometry.area * t * k.projection.B.transpose() * r.stress + r.trial.q_stab;
      }
      r.trial.C_stab = rm.tangent;
      r.trial.d_local = r.d_local;
    }
    r.q_global = r.transform.T.transpose() * r.q_local;
    if (want_tangent) r.k_global = element_tangent(r.k_local, r.q_local, r.frame, r.transform, options_.include_g1b);
    return r;
  }

  /// Scatter of all element contributions in element order.
  Assembly assemble(const Eigen::VectorXd& u, double lambda, std::span<const ElementState> committed,
                    bool want_tangent = true) const {
    if (u.size() != dof_count()) throw ValidationError("assemble: displacement vector has wrong length");
    if (committed.size() != kernels_.size()) throw ValidationError("assemble: state count mismatch");
    Assembly a;
    a.f_int = Eigen::VectorXd::Zero(dof_count());
    a.f_ext = lambda * f_ref_;
    a.trial.resize(kernels_.size());
    std::vector<Eigen::Triplet<double>> trip;
    if (want_tangent) trip.reserve(triplet_count_);
    for (int e = 0; e < element_count(); ++e) {
      ElementResponse r;
      try {
        r = element_response(e, u, committed[e], want_tangent);
      } catch (const ConstitutiveError& err) {
        throw ConstitutiveError("element " + std::to_string(e) + ": " + err.what());
      } catch (const KinematicError& err) {
        throw KinematicError("element " + std::to_string(e) + ": " + err.what());
      }
      const auto& dofs = kernels_[e].dofs;
      const int nd = static_cast<int>(dofs.size());
      for (int i = 0; i < nd; ++i) a.f_int(dofs[i]) += r.q_global(i);
      if (want_tangent)
        for (int j = 0; j < nd; ++j)
          for (int i = 0; i < nd; ++i) trip.emplace_back(dofs[i], dofs[j], r.k_global(i, j));
      a.trial[e] = r.trial;
    }
    if (want_tangent) {
      a.K.resize(dof_count(), dof_count());
      a.K.setFromTriplets(trip.begin(), trip.end());
    }
    return a;
  }

  /// Sum of 1/2 d_l^T k_E d_l over elements (elastic model).
  double strain_energy(const Eigen::VectorXd& u, std::span<const ElementState> committed) const {
    double w = 0.0;
    for (int e = 0; e < element_count(); ++e) {
      const ElementResponse r = element_response(e, u, committed[e], false);
      w += 0.5 * r.d_local.dot(kernels_[e].k_elastic * r.d_local);
    }
    return w;
  }

 private:
  void validate() {
    const PolyMesh& m = problem_.mesh;
    require_valid(m);
    if (!(problem_.thickness > 0.0)) throw ValidationError("thickness must be positive");
    const Material& mat = problem_.material;
    if (mat.model == MaterialModel::J2) {
      if (mat.plane != Plane::Stress) throw ValidationError("J2 plasticity is available for plane stress only");
      mat.j2().validate();
    }

    std::vector<int> used(m.vertex_count(), 0);
    for (const auto& p : m.polygons)
      for (int v : p) used[v] = 1;
    for (int v = 0; v < m.vertex_count(); ++v)
      if (!used[v]) throw ValidationError("vertex " + std::to_string(v) + " is not part of any polygon");

    std::set<int> fixed;
    for (const auto& c : problem_.constraints)
      for (int n : m.node_set(c.set)) fixed.insert(dof_index(n, c.dof));
    if (fixed.size() < 3) throw ValidationError("at least 3 constrained dofs are required");
    for (const auto& l : problem_.loads) {
      if (!std::isfinite(l.total)) throw ValidationError("load on set '" + l.set + "' is not finite");
      for (int n : m.node_set(l.set))
        if (fixed.count(dof_index(n, l.dof)))
          throw ValidationError("load on set '" + l.set + "' acts on a constrained dof");
    }
    if (problem_.monitor.nodes.empty()) throw ValidationError("monitor needs at least one node");
    for (int n : problem_.monitor.nodes)
      if (n < 0 || n >= m.vertex_count()) throw ValidationError("monitor node out of range");
  }

  void build() {
    const PolyMesh& m = problem_.mesh;
    const Material& mat = problem_.material;
    moduli_ = elastic_moduli(mat.youngs, mat.poisson, mat.plane);
    if (mat.model == MaterialModel::J2) j2_ = mat.j2();

    kernels_.resize(m.polygons.size());
    triplet_count_ = 0;
    for (int e = 0; e < m.polygon_count(); ++e) {
      ElementKernel& k = kernels_[e];
      k.nodes = m.polygons[e];
      for (int n : k.nodes) {
        k.dofs.push_back(dof_index(n, Axis::X));
        k.dofs.push_back(dof_index(n, Axis::Y));
      }
      const auto pts = m.polygon_coords(e);
      k.projection = build_projection(polygon_geometry(m, e), pts, moduli_.C, e);
      if (k.projection.g_condition > kConditionWarning)
        diagnostics_.push_back("element " + std::to_string(e) + ": ill-conditioned G (condition " +
                               std::to_string(k.projection.g_condition) + ")");
      k.reference = make_reference(k.projection, pts, 0);
      const Eigen::MatrixXd kc = consistency_stiffness(k.projection, moduli_.C, problem_.thickness);
      k.k_stability_elastic = stability_stiffness(k.projection, moduli_.C, kc, options_.stability);
      k.k_elastic = kc + k.k_stability_elastic;
      triplet_count_ += k.dofs.size() * k.dofs.size();
    }

    f_ref_ = Eigen::VectorXd::Zero(dof_count());
    for (const auto& l : problem_.loads) {
      const auto& ids = m.node_set(l.set);
      const double share = l.total / static_cast<double>(ids.size());
      for (int n : ids) f_ref_(dof_index(n, l.dof)) += share;
    }

    std::set<int> fixed;
    for (const auto& c : problem_.constraints)
      for (int n : m.node_set(c.set)) fixed.insert(dof_index(n, c.dof));
    dofs_.full_to_free.assign(dof_count(), -1);
    for (int i = 0; i < dof_count(); ++i) {
      if (fixed.count(i)) {
        dofs_.fixed.push_back(i);
      } else {
        dofs_.full_to_free[i] = dofs_.free_size();
        dofs_.free_to_full.push_back(i);
      }
    }
  }

  Problem problem_;
  ElementOptions options_;
  ModularMatrix moduli_;
  J2Params j2_;
  std::vector<ElementKernel> kernels_;
  Eigen::VectorXd f_ref_;
  DofMap dofs_;
  std::size_t triplet_count_ = 0;
  std::vector<std::string> diagnostics_;
};

}  // namespace covem
