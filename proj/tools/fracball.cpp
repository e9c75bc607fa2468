// fracball command line: constants, kernels, operator probes, assembly,
// single solves and the experiment harness.

#include <CLI11.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fracball/experiments.hpp"

namespace fs = std::filesystem;
using namespace fracball;

namespace {

Point parse_point(const std::string& text, int N) {
  std::vector<double> c;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) c.push_back(std::stod(part));
  if (static_cast<int>(c.size()) != N)
    throw DomainError("point '" + text + "' needs " + std::to_string(N) + " coordinates");
  Point x(N);
  for (int i = 0; i < N; ++i) x[i] = c[i];
  return x;
}

// --matrix-cache beats FRACBALL_CACHE_DIR beats the working-directory default
fs::path cache_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("FRACBALL_CACHE_DIR"); env && *env) return env;
  return ".fracball-cache";
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DomainError("cannot write " + p.string());
  out << s;
}

// stdout when no path was given
void emit(const std::string& path, const std::string& s) {
  if (path.empty() || path == "-")
    std::cout << s;
  else
    write_text(path, s);
}

std::string point_csv(const Point& x) {
  std::string s;
  for (int i = 0; i < x.dim; ++i) s += (i ? "," : "") + format_g17(x[i]);
  return s;
}

std::string coord_header(int N) { return N == 2 ? "x1,x2" : "x1,x2,x3"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fracball: fractional Laplacian with a boundary Dirac source on the ball"};
  app.require_subcommand(1);

  // constants
  auto* cst = app.add_subcommand("constants", "normalization constant and radial-power symbol");
  std::vector<int> c_dims{2, 3};
  std::vector<double> c_alphas{0.25, 0.5, 0.75}, c_sigmas;
  std::string c_out;
  cst->add_option("--dim", c_dims, "dimensions");
  cst->add_option("--alpha", c_alphas, "orders");
  cst->add_option("--sigma", c_sigmas, "symbol exponents (none: normalization only)");
  cst->add_option("--out", c_out, "CSV file (default stdout)");

  // kernel probe
  auto* ker = app.add_subcommand("kernel", "Green and Poisson kernels of the ball B_1(e_N)");
  auto* kprobe = ker->add_subcommand("probe", "kernel values on point pairs");
  ker->require_subcommand(1);
  int k_dim = 2;
  double k_alpha = 0.5;
  std::vector<std::string> k_pairs;
  std::string k_out;
  kprobe->add_option("--dim", k_dim);
  kprobe->add_option("--alpha", k_alpha);
  kprobe->add_option("--pair", k_pairs, "x;y with x inside; y inside gives G(x,y), outside the Poisson kernel")
      ->required();
  kprobe->add_option("--out", k_out, "CSV file (default stdout)");

  // fracop probe
  auto* fop = app.add_subcommand("fracop", "pointwise fractional Laplacian");
  auto* fprobe = fop->add_subcommand("probe", "(-Delta)^alpha f at listed points");
  fop->require_subcommand(1);
  int f_dim = 2;
  double f_alpha = 0.5, f_sigma = 0.5;
  std::string f_function = "power", f_points, f_config, f_out;
  fprobe->add_option("--function", f_function, "power, torsion or field:<solution.csv>");
  fprobe->add_option("--dim", f_dim);
  fprobe->add_option("--alpha", f_alpha);
  fprobe->add_option("--sigma", f_sigma, "exponent of |x|^-sigma");
  fprobe->add_option("--points", f_points, "CSV of points, one per line")->required()->check(CLI::ExistingFile);
  fprobe->add_option("--config", f_config, "problem config of the mesh (field only)");
  fprobe->add_option("--out", f_out, "CSV file (default stdout)");

  // greenop assemble
  auto* grn = app.add_subcommand("greenop", "discrete Green operator");
  auto* gasm = grn->add_subcommand("assemble", "assemble and store the matrix");
  grn->require_subcommand(1);
  std::string g_config, g_out, g_mesh;
  gasm->add_option("--params,--config", g_config, "problem config")->required()->check(CLI::ExistingFile);
  gasm->add_option("--out", g_out, "matrix file")->required();
  gasm->add_option("--mesh-out", g_mesh, "mesh CSV (coordinates and weight)");

  // solve
  auto* slv = app.add_subcommand("solve", "solve once; params.s = 0 asks for the limit solution");
  std::string s_config, s_out, s_cache;
  slv->add_option("--config", s_config, "problem config")->required()->check(CLI::ExistingFile);
  slv->add_option("--out", s_out, "output directory")->required();
  slv->add_option("--matrix-cache", s_cache, "matrix cache directory");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run E1..E7");
  std::string e_id, e_config, e_out, e_cache;
  exp->add_option("id", e_id, "E1_exponent ... E7_cone_bound, or E1 ... E7")->required();
  exp->add_option("--config", e_config, "experiment config (default: the built-in one)")
      ->check(CLI::ExistingFile);
  exp->add_option("--out", e_out, "output directory (default: output_dir of the config)");
  exp->add_option("--matrix-cache", e_cache, "matrix cache directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cst) {
      std::string csv = "N,alpha,sigma,kind,value,est_error\n";
      for (int N : c_dims)
        for (double a : c_alphas) {
          const ConstantValue c = normalization_constant_with_error(N, a);
          csv += std::to_string(N) + "," + format_g17(a) + ",,cNalpha," + format_g17(c.value) + "," +
                 format_g17(c.est_error) + "\n";
          for (double s : c_sigmas) {
            const SymbolValue v = symbol_constant(s, N, a);
            csv += std::to_string(N) + "," + format_g17(a) + "," + format_g17(s) + ",symbol," + format_g17(v.value) +
                   "," + format_g17(v.est_error) + "\n";
          }
        }
      emit(c_out, csv);
      return 0;
    }
    if (*kprobe) {
      const BallDomain ball = BallDomain::unit_shifted(k_dim);
      std::string csv = coord_header(k_dim) + "," + (k_dim == 2 ? "y1,y2" : "y1,y2,y3") + ",kind,value\n";
      for (const std::string& pr : k_pairs) {
        const auto semi = pr.find(';');
        if (semi == std::string::npos) throw DomainError("pair '" + pr + "' must read x;y");
        const Point x = parse_point(pr.substr(0, semi), k_dim), y = parse_point(pr.substr(semi + 1), k_dim);
        const bool inside = boundary_distance(ball, y) > 0.0;
        const double v = inside ? green_kernel(x, y, ball, k_alpha) : poisson_kernel(x, y, ball, k_alpha);
        csv += point_csv(x) + "," + point_csv(y) + (inside ? ",green," : ",poisson,") + format_g17(v) + "\n";
      }
      emit(k_out, csv);
      return 0;
    }
    if (*fprobe) {
      const double cN = normalization_constant(f_dim, f_alpha);
      EvaluableFunction fn;
      std::function<double(const Point&)> reference;
      std::optional<Mesh> mesh;
      std::optional<FieldInterpolant> interp;
      if (f_function == "power") {
        fn = phi_power_function(f_dim, f_sigma);
        const double c = symbol_constant(f_sigma, f_dim, f_alpha).value;
        reference = [=](const Point& x) { return c * std::pow(x.norm(), -f_sigma - 2.0 * f_alpha); };
      } else if (f_function == "torsion") {
        const BallDomain b = BallDomain::unit_centered(f_dim);
        fn = torsion_function(b, f_alpha);
        reference = [b](const Point& x) { return boundary_distance(b, x) > 0.0 ? 1.0 : std::nan(""); };
      } else if (f_function.rfind("field:", 0) == 0) {
        if (f_config.empty()) throw DomainError("fracop probe: field input needs --config for its mesh");
        const ProblemConfig pc = parse_problem_config(read_text(f_config));
        mesh.emplace(build_graded_mesh(BallDomain::unit_shifted(pc.params.dim), pc.params.resolution, pc.grading));
        std::ifstream in(f_function.substr(6));
        if (!in) throw DomainError("cannot read " + f_function.substr(6));
        Field u{mesh->mesh_hash, {}};
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line))
          if (!line.empty()) u.values.push_back(std::stod(line.substr(line.rfind(',') + 1)));
        if (static_cast<int>(u.values.size()) != mesh->size())
          throw MeshMismatchError("field has " + std::to_string(u.values.size()) + " values, mesh has " +
                                  std::to_string(mesh->size()) + " nodes");
        interp.emplace(*mesh, std::move(u));
        const FieldInterpolant* I = &*interp;
        const BallDomain b = mesh->domain;
        fn.f = [I, b](const Point& y) { return boundary_distance(b, y) > 0.0 ? (*I)(y) : 0.0; };
        fn.smoothness_radius = [I](const Point& x) { return I->smoothness_radius(x); };
        fn.center = b.center;
        fn.support_radius = b.radius;
        reference = [](const Point&) { return std::nan(""); };
      } else {
        throw DomainError("fracop probe: unknown function '" + f_function + "'");
      }
      std::ifstream in(f_points);
      std::string csv = coord_header(f_dim) + ",value,reference,rel_error\n", line;
      while (std::getline(in, line)) {
        if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '.'))
          continue;  // header or blank
        const Point x = parse_point(line, f_dim);
        const double v = frac_laplacian_point(fn, x, f_alpha, cN), r = reference(x);
        csv += point_csv(x) + "," + format_g17(v) + "," + format_g17(r) + "," + format_g17(std::abs(v / r - 1.0)) + "\n";
      }
      emit(f_out, csv);
      return 0;
    }
    if (*gasm) {
      const ProblemConfig pc = parse_problem_config(read_text(g_config));
      const Mesh mesh = build_graded_mesh(BallDomain::unit_shifted(pc.params.dim), pc.params.resolution, pc.grading);
      save_matrix(assemble(mesh, pc.params.alpha), g_out);
      if (!g_mesh.empty()) write_text(g_mesh, mesh.to_csv());
      std::cout << "mesh_hash = " << hash_hex(mesh.mesh_hash) << "\nnodes = " << mesh.size() << "\n";
      return 0;
    }
    if (*slv) {
      const ProblemConfig pc = parse_problem_config(read_text(s_config));
      const ProblemParams& P = pc.params;
      const Mesh mesh = build_graded_mesh(BallDomain::unit_shifted(P.dim), P.resolution, pc.grading);
      const RunContext ctx{cache_dir(s_cache)};
      const KernelMatrix K = detail::obtain_matrix(mesh, P.alpha, ctx);
      const double cN = normalization_constant(P.dim, P.alpha);
      SolveOptions opt;
      opt.tol_residual = pc.tol;
      opt.tol_sandwich = thresholds::agreement_factor * pc.tol;
      Field u;
      SolveReport rep;
      std::ostringstream kv;
      if (P.s > 0.0) {
        SolveResult r = solve_semilinear(mesh, K, gamma_field(mesh, P, P.s, cN), P.p, opt);
        u = std::move(r.field);
        rep = r.report;
      } else {
        LimitResult L = limit_solution(mesh, K, P, cN, opt);
        u = std::move(L.field);
        rep = L.report;
        kv << "s_effective = " << format_g17(L.s_effective) << "\n"
           << "certificate_found = " << (L.certificate.found ? "true" : "false") << "\n"
           << "max_barrier_ratio = " << format_g17(L.max_barrier_ratio) << "\n";
      }
      const fs::path dir = s_out;
      std::string sol = coord_header(P.dim) + ",u\n";
      for (int k = 0; k < mesh.size(); ++k) sol += point_csv(mesh.nodes[k]) + "," + format_g17(u[k]) + "\n";
      write_text(dir / "solution.csv", sol);
      std::string tr = "t,u,resolved\n";
      for (const TracePoint& t : axis_trace(mesh, u, pc.trace_t))
        tr += format_g17(t.t) + "," + format_g17(t.value) + "," + (t.resolved ? "true" : "false") + "\n";
      write_text(dir / "trace.csv", tr);
      std::ostringstream head;
      head << "pass = " << (rep.converged ? "true" : "false") << "\n"
           << "mesh_hash = " << hash_hex(mesh.mesh_hash) << "\n"
           << "scheme = " << rep.scheme << "\n"
           << "iterations = " << rep.iterations << "\n"
           << "final_residual = " << format_g17(rep.final_residual) << "\n"
           << "sandwich_gap = " << format_g17(rep.sandwich_gap) << "\n"
           << "clipped_nodes = " << rep.clipped_nodes << "\n"
           << kv.str() << "note = " << rep.note << "\n";
      write_text(dir / "report.txt", head.str());
      std::cout << head.str();
      return rep.converged ? 0 : 1;
    }
    if (*exp) {
      const ExperimentId id = parse_experiment_id(e_id);
      ExperimentConfig cfg = e_config.empty() ? default_config(id) : load_config(e_config);
      if (cfg.id != id)
        throw DomainError("config is for " + to_string(cfg.id) + ", not " + to_string(id));
      if (!e_out.empty()) cfg.output_dir = e_out;
      ExperimentReport r = run_experiment(cfg, RunContext{cache_dir(e_cache)});
      write_report(r, cfg.output_dir);
      for (const Check& c : r.checks)
        std::printf("%s %-32s %.6g %s %.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(),
                    c.threshold);
      std::printf("%s %s\n", to_string(id).c_str(), r.pass ? "pass" : "FAIL");
      return r.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "fracball: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
