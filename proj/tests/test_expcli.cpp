#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracball/experiments.hpp"
#include "support.hpp"

using namespace fracball;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fracball-expcli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && '" + FRACBALL_CLI + "' " + args + " > '" + o.string() +
                          "' 2> '" + e.string() + "'";
  const int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(o), slurp(e)};
}

std::vector<Sample> power_samples(double C, double k, int n, double lo = 0.05, double hi = 0.4) {
  std::vector<Sample> s;
  for (int i = 0; i < n; ++i) {
    const double t = lo * std::pow(hi / lo, double(i) / (n - 1));
    s.emplace_back(t, C * std::pow(t, k));
  }
  return s;
}

}  // namespace

TEST(PowerLawFit, RecoversExactPowers) {
  const PowerLawFit f = fit_power_law(power_samples(3.0, -1.0, 10), 0.05, 0.4);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_NEAR(f.prefactor(), 3.0, 1e-11);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.count, 10);
  for (int i = 0; i < 20; ++i) {
    const double C = fbtest::uniform(0.1, 10.0), k = fbtest::uniform(-3.0, 2.0);
    const PowerLawFit g = fit_power_law(power_samples(C, k, 7), 0.0, 1.0);
    EXPECT_NEAR(g.slope, k, 1e-10);
    EXPECT_NEAR(g.prefactor() / C, 1.0, 1e-10);
  }
}

TEST(PowerLawFit, ConstantDataIsFlat) {
  const PowerLawFit f = fit_power_law(power_samples(2.5, 0.0, 6), 0.05, 0.4);
  EXPECT_NEAR(f.slope, 0.0, 1e-13);
  EXPECT_DOUBLE_EQ(f.r_squared, 1.0);
}

TEST(PowerLawFit, PerturbedInverseStaysClose) {
  auto s = power_samples(1.0, -1.0, 13);
  for (std::size_t i = 0; i < s.size(); ++i) s[i].second *= 1.0 + 0.01 * std::sin(7.0 * i);
  const PowerLawFit f = fit_power_law(s, 0.05, 0.4);
  EXPECT_NEAR(f.slope, -1.0, 0.02);
  EXPECT_GT(f.r_squared, 0.99);
}

TEST(PowerLawFit, WindowAndValidation) {
  auto s = power_samples(1.0, -2.0, 13, 0.01, 1.0);
  s.emplace_back(5.0, -1.0);  // outside the window: ignored
  EXPECT_NEAR(fit_power_law(s, 0.05, 0.4).slope, -2.0, 1e-12);
  EXPECT_THROW(fit_power_law(s, 0.05, 6.0), DomainError);
  EXPECT_THROW(fit_power_law(s, 0.4, 0.05), DomainError);
  EXPECT_THROW(fit_power_law(power_samples(1.0, 1.0, 3), 0.0, 1.0), DomainError);
  EXPECT_THROW(fit_power_law({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}, {0.1, 4.0}}, 0.0, 1.0), DomainError);
}

TEST(EnvelopeFit, SmallestScaledValue) {
  auto s = power_samples(2.0, -2.0, 9);
  s[4].second *= 0.5;
  const EnvelopeFit e = lower_envelope_fit(s, 0.05, 0.4, -2.0);
  EXPECT_NEAR(e.constant, 1.0, 1e-12);
  for (const auto& [t, v] : s) EXPECT_GE(v, e.constant * std::pow(t, -2.0) * (1 - 1e-12));
  EXPECT_EQ(e.free.count, 9);
}

TEST(Config, RoundTripsForEveryExperiment) {
  for (ExperimentId id : kAllExperiments) {
    ExperimentConfig c = default_config(id);
    c.seed = 12345;
    c.tol = 1.0 / 3.0 * 1e-8;
    EXPECT_NO_THROW(c.validate()) << to_string(id);
    const ExperimentConfig back = parse_config(emit_config(c));
    EXPECT_TRUE(back == c) << emit_config(c);
    EXPECT_EQ(emit_config(back), emit_config(c));
  }
  EXPECT_EQ(parse_experiment_id("E3"), ExperimentId::E3_alpha_vanishing);
  EXPECT_EQ(parse_experiment_id("E6_mollifier"), ExperimentId::E6_mollifier);
  EXPECT_THROW(parse_experiment_id("E8"), DomainError);
}

TEST(Config, RejectsBadInput) {
  const std::string base = emit_config(default_config(ExperimentId::E1_exponent));
  auto with = [&](const std::string& key, const std::string& value) {
    std::string t = base;
    const auto k = t.find(key + " = ");
    t.replace(k, t.find('\n', k) - k, key + " = " + value);
    return t;
  };
  EXPECT_THROW(parse_config(with("sweep.s", "0.1,0.2")), DomainError);
  EXPECT_THROW(parse_config(with("sweep.s", "")), DomainError);
  EXPECT_THROW(parse_config(with("params.alpha", "1.5")), DomainError);
  EXPECT_THROW(parse_config(with("params.p", "abc")), DomainError);
  EXPECT_THROW(parse_config(with("mesh.grading", "0.5")), DomainError);
  EXPECT_THROW(parse_config(with("probes", "0,0.5,1")), DomainError);
  EXPECT_THROW(parse_config(with("probes", "0,3")), DomainError);
  EXPECT_THROW(parse_config(base + "bogus = 1\n"), DomainError);
  EXPECT_THROW(parse_config(base + "seed = 2\n"), DomainError);
  EXPECT_THROW(parse_config("params.dim = 2\n"), DomainError);
  EXPECT_NO_THROW(parse_config("# comment\nexperiment = E1\n\nsweep.s = 0.4, 0.2\n"));
}

TEST(ProblemConfig, ParsesAndValidates) {
  const ProblemConfig c = parse_problem_config("params.alpha = 0.3\nparams.s = 0.2\ntrace.t = 0.1,0.2\n");
  EXPECT_DOUBLE_EQ(c.params.alpha, 0.3);
  EXPECT_EQ(c.trace_t.size(), 2u);
  EXPECT_THROW(parse_problem_config("trace.t = 3\n"), DomainError);
  EXPECT_THROW(parse_problem_config("sweep.s = 0.1\n"), DomainError);
}

TEST(Report, ChecksAndOutputFiles) {
  ExperimentReport r;
  r.id = ExperimentId::E5_kernel_identities;
  r.metric("a", 1.5);
  r.at_most("small", 0.01, 0.02);
  r.at_least("big", 1.0, 2.0);
  r.series.push_back({"curve", "t", "u", true, false, {{0.1, 2.0}, {0.2, 1.0}}});
  r.finish();
  EXPECT_FALSE(r.pass);
  EXPECT_TRUE(r.check("small").pass);
  EXPECT_FALSE(r.check("big").pass);
  EXPECT_DOUBLE_EQ(r.metric("a"), 1.5);
  EXPECT_THROW(r.metric("b"), DomainError);

  const fs::path d = scratch("report");
  const auto paths = write_report(r, d);
  EXPECT_EQ(paths.size(), 5u);
  EXPECT_EQ(slurp(d / "metrics.csv"), "name,value\na,1.5\n");
  EXPECT_NE(slurp(d / "checks.csv").find("big,false,1,>=,2"), std::string::npos);
  EXPECT_EQ(slurp(d / "curve.csv"), "t,u\n0.10000000000000001,2\n0.20000000000000001,1\n");
  EXPECT_NE(slurp(d / "curve.plot.txt").find("x_scale = log"), std::string::npos);
  EXPECT_NE(slurp(d / "report.txt").find("pass = false"), std::string::npos);
  EXPECT_THROW(emit_plot_data(r, "nope", d), DomainError);

  ExperimentReport empty;
  empty.finish();
  EXPECT_FALSE(empty.pass);
}

TEST(Experiment, ConstantsRunIsQuickAndDeterministic) {
  const auto cfg = default_config(ExperimentId::E4_constants);
  ExperimentReport a = run_experiment(cfg), b = run_experiment(cfg);
  const fs::path da = scratch("e4a"), db = scratch("e4b");
  write_report(a, da);
  write_report(b, db);
  for (const char* f : {"metrics.csv", "checks.csv", "report.txt"}) EXPECT_EQ(slurp(da / f), slurp(db / f)) << f;
  EXPECT_TRUE(a.check("cN_matches_closed_form").pass);
}

TEST(Experiment, SubcriticalExponentIsRefused) {
  auto cfg = default_config(ExperimentId::E1_exponent);
  cfg.params.p = 1.4;
  try {
    run_experiment(cfg);
    FAIL() << "E1 accepted p = 1.4";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("existence threshold"), std::string::npos) << e.what();
  }
}

TEST(Cli, ConstantsToStdout) {
  const fs::path d = scratch("cli-constants");
  const CliRun r = cli("constants --dim 2 --alpha 0.5 --sigma 0.5", d);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_EQ(header, "N,alpha,sigma,kind,value,est_error");
  EXPECT_EQ(row1.rfind("2,0.5,,cNalpha,", 0), 0u);
  const double v = std::stod(row1.substr(15, row1.rfind(',') - 15));
  EXPECT_NEAR(v, fbtest::cN_closed(2, 0.5), 1e-7);
  EXPECT_EQ(row2.rfind("2,0.5,0.5,symbol,", 0), 0u);
}

TEST(Cli, KernelProbeAndErrors) {
  const fs::path d = scratch("cli-kernel");
  const CliRun r = cli("kernel probe --pair '0,1;0.2,1.1' --pair '0,1;0,-0.5' --out k.csv", d);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(d / "k.csv");
  EXPECT_NE(csv.find(",green,"), std::string::npos);
  EXPECT_NE(csv.find(",poisson,"), std::string::npos);
  EXPECT_EQ(cli("kernel probe --pair '0,1'", d).code, 2);
  EXPECT_NE(cli("experiment E9", d).code, 0);
}

TEST(Cli, SolveAssembleAndCache) {
  const fs::path d = scratch("cli-solve");
  {
    std::ofstream c(d / "p.cfg");
    c << "params.resolution = 8\nparams.s = 0.2\ntrace.t = 0.1,0.2\n";
  }
  CliRun r = cli("solve --config p.cfg --out sol --matrix-cache cache", d);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("pass = true"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "sol" / "solution.csv"));
  EXPECT_TRUE(fs::exists(d / "sol" / "trace.csv"));
  int cached = 0;
  for (const auto& e : fs::directory_iterator(d / "cache")) cached += e.path().extension() == ".bin";
  EXPECT_EQ(cached, 1);
  const std::string first = slurp(d / "sol" / "solution.csv");
  ASSERT_EQ(cli("solve --config p.cfg --out sol2 --matrix-cache cache", d).code, 0);
  EXPECT_EQ(slurp(d / "sol2" / "solution.csv"), first);

  r = cli("greenop assemble --config p.cfg --out K.bin --mesh-out mesh.csv", d);
  ASSERT_EQ(r.code, 0) << r.err;
  const Mesh m = build_graded_mesh(BallDomain::unit_shifted(2), 8);
  EXPECT_NO_THROW(load_matrix(d / "K.bin", m, 0.5));
  EXPECT_EQ(slurp(d / "mesh.csv").rfind("x1,x2,weight\n", 0), 0u);
}
