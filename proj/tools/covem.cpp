// Command line driver: run, mesh-gen, check-tangent.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "covem/analysis.hpp"
#include "covem/io.hpp"
#include "covem/mesh_io.hpp"

namespace fs = std::filesystem;

namespace {

double mesh_scale(const covem::PolyMesh& m) {
  Eigen::Vector2d lo = m.vertices.front(), hi = lo;
  for (const auto& v : m.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

std::string field_file(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fields_%05d.vtk", step);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
  const covem::RunConfig cfg = covem::parse_config(config_path);
  const fs::path out = !out_override.empty() ? fs::path(out_override)
                       : !cfg.out_dir.empty() ? fs::path(config_path).parent_path() / cfg.out_dir
                                              : fs::path(".");
  fs::create_directories(out);

  const covem::Structure structure(cfg.problem, cfg.solver.element);
  for (const auto& d : structure.diagnostics()) std::cerr << "warning: " << d << '\n';

  const std::string title = "covem " + fs::path(config_path).filename().string() +
                            (cfg.units.empty() ? std::string() : " units: " + cfg.units);
  int last_written = -1;
  auto observer = [&](const covem::StepView& v) {
    if (cfg.out_stride > 0 && v.step % cfg.out_stride == 0) {
      covem::write_vtk_fields(v.structure.problem().mesh, v.u, covem::element_fields(v.structure, v.states),
                              (out / field_file(v.step)).string(), title + " step " + std::to_string(v.step));
      last_written = v.step;
    }
  };
  const covem::AnalysisResult res = covem::run_analysis(structure, cfg.solver, observer);
  const int last_step = res.history.back().step;
  if (cfg.out_stride > 0 && last_written != last_step)
    covem::write_vtk_fields(structure.problem().mesh, res.u, covem::element_fields(structure, res.states),
                            (out / field_file(last_step)).string(), title + " step " + std::to_string(last_step));
  covem::write_history_csv(covem::history_rows(res.history, structure.monitor_load()),
                           (out / "steps.csv").string());

  const auto& h = res.history.back();
  std::cout << "steps " << last_step << "  lambda " << h.lambda << "  u_monitor (" << h.u_monitor.x() << ", "
            << h.u_monitor.y() << ")\n";
  if (!res.completed) {
    std::cerr << "error: path terminated: " << res.termination << '\n';
    return 1;
  }
  return 0;
}

int cmd_check_tangent(const std::string& config_path, int steps, double rel_step) {
  covem::RunConfig cfg = covem::parse_config(config_path);
  const covem::Structure structure(cfg.problem, cfg.solver.element);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(structure.dof_count());
  std::vector<covem::ElementState> states = structure.initial_states();
  if (steps > 0) {
    cfg.solver.steps = steps;
    cfg.solver.stop_displacement = 0.0;
    Eigen::VectorXd u_prev = u;
    auto keep_previous = [&](const covem::StepView& v) {
      if (v.step < steps) u_prev = v.u;
    };
    const covem::AnalysisResult res = covem::run_analysis(structure, cfg.solver, keep_previous);
    if (!res.completed) throw covem::PathError(res.termination);
    // Half a step beyond the committed state: at the committed state itself
    // every yielded point sits on its yield surface, where F_int has a kink.
    u = res.u + 0.5 * (res.u - u_prev);
    states = res.states;
  }
  const double h = rel_step * mesh_scale(structure.problem().mesh);
  const covem::TangentCheck c = covem::tangent_check(structure, u, states, h);
  std::cout << "state half a step past step " << steps << ", fd step " << h << '\n';
  std::cout << "max relative tangent error " << c.max_rel_error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-rotational virtual element solver"};
  app.require_subcommand(1);

  std::string config, out;
  auto* run = app.add_subcommand("run", "run an arc-length analysis");
  run->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory");

  std::string shape, mesh_out;
  covem::RectSpec rect;
  covem::AnnulusSpec ring;
  covem::ArchSpec arch;
  int nx = -1, ny = -1;
  auto* gen = app.add_subcommand("mesh-gen", "write a generated mesh");
  gen->add_option("--shape", shape, "rect, annulus or arch")
      ->required()
      ->check(CLI::IsMember({"rect", "annulus", "arch"}));
  gen->add_option("--lx", rect.lx, "rect width");
  gen->add_option("--ly", rect.ly, "rect height");
  gen->add_option("--nx", nx, "subdivisions along x (rect, arch)");
  gen->add_option("--ny", ny, "subdivisions along y (rect, arch)");
  gen->add_option("--grading", rect.grading, "rect last/first column width ratio");
  gen->add_option("--r-inner", ring.r_inner, "annulus inner radius");
  gen->add_option("--r-outer", ring.r_outer, "annulus outer radius");
  gen->add_option("--n-circ", ring.n_circ, "annulus circumferential divisions");
  gen->add_option("--n-rad", ring.n_rad, "annulus radial divisions");
  double support_width = 0.0;
  gen->add_option("--support-width", support_width, "width of the annulus bottom set or the arch end supports");
  double load_width = 0.0;
  gen->add_option("--load-width", load_width, "width of the annulus top set or the arch load patch");
  gen->add_option("--span", arch.span, "arch span");
  gen->add_option("--depth", arch.depth, "arch depth");
  gen->add_option("--out", mesh_out, "mesh file to write")->required();

  int tangent_steps = 1;
  double rel_step = 1e-7;
  auto* chk = app.add_subcommand("check-tangent", "compare the tangent with finite differences");
  chk->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  chk->add_option("--steps", tangent_steps, "arc-length steps taken before the check")->check(CLI::NonNegativeNumber);
  chk->add_option("--rel-step", rel_step, "FD step relative to the mesh extent")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*chk) return cmd_check_tangent(config, tangent_steps, rel_step);
    if (*gen) {
      covem::GeneratorSpec spec;
      if (shape == "rect") {
        if (nx > 0) rect.nx = nx;
        if (ny > 0) rect.ny = ny;
        spec = rect;
      } else if (shape == "annulus") {
        ring.load_width = load_width;
        ring.support_width = support_width;
        spec = ring;
      } else {
        if (nx > 0) arch.nx = nx;
        if (ny > 0) arch.ny = ny;
        arch.load_width = load_width;
        arch.support_width = support_width;
        spec = arch;
      }
      const covem::PolyMesh m = covem::generate_mesh(spec);
      covem::save_mesh(m, mesh_out);
      std::cout << "wrote " << m.polygon_count() << " polygons, " << m.vertex_count() << " vertices to "
                << mesh_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
