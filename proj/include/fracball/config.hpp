#pragma once

// Experiment configs: flat "dotted.key = value" text, one entry per line,
// '#' starts a comment. Lists are comma separated; probe points are
// comma-separated coordinates separated by ';'.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fracball/errors.hpp"
#include "fracball/geometry.hpp"

namespace fracball {

enum class ExperimentId {
  E1_exponent,
  E2_blowup,
  E3_alpha_vanishing,
  E4_constants,
  E5_kernel_identities,
  E6_mollifier,
  E7_cone_bound,
};

inline constexpr ExperimentId kAllExperiments[] = {
    ExperimentId::E1_exponent,  ExperimentId::E2_blowup,           ExperimentId::E3_alpha_vanishing,
    ExperimentId::E4_constants, ExperimentId::E5_kernel_identities, ExperimentId::E6_mollifier,
    ExperimentId::E7_cone_bound};

inline std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::E1_exponent: return "E1_exponent";
    case ExperimentId::E2_blowup: return "E2_blowup";
    case ExperimentId::E3_alpha_vanishing: return "E3_alpha_vanishing";
    case ExperimentId::E4_constants: return "E4_constants";
    case ExperimentId::E5_kernel_identities: return "E5_kernel_identities";
    case ExperimentId::E6_mollifier: return "E6_mollifier";
    case ExperimentId::E7_cone_bound: return "E7_cone_bound";
  }
  return "?";
}

/// Accepts the full name or the short form "E1".."E7".
inline ExperimentId parse_experiment_id(std::string_view s) {
  for (ExperimentId id : kAllExperiments) {
    const std::string full = to_string(id);
    if (s == full || s == std::string_view(full).substr(0, 2)) return id;
  }
  throw DomainError("unknown experiment id '" + std::string(s) + "'");
}

struct ExperimentConfig {
  ExperimentId id = ExperimentId::E1_exponent;
  ProblemParams params;
  double grading = 2.0;
  double tol = 1e-9;
  std::vector<double> s_list;
  std::vector<double> alpha_list;
  std::vector<int> n_list;
  std::vector<double> sigma_list;
  std::vector<Point> probes;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

template <class T>
bool strictly(const std::vector<T>& v, bool increasing) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (increasing ? !(v[i - 1] < v[i]) : !(v[i - 1] > v[i])) return false;
  return true;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto k = s.find(sep, start);
    out.push_back(trim(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start)));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw DomainError("config: bad value '" + v + "' for " + key);
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (v.empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_g17(v[i]);
  return s;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  params.validate();
  if (!(grading >= 1.0)) throw DomainError("config: mesh.grading must be >= 1");
  if (!(tol > 0.0)) throw DomainError("config: solver.tol must be positive");
  auto need = [&](bool empty, const char* what) {
    if (empty) throw DomainError(to_string(id) + ": " + what + " must be nonempty");
  };
  switch (id) {
    case ExperimentId::E1_exponent:
    case ExperimentId::E2_blowup:
    case ExperimentId::E5_kernel_identities:
    case ExperimentId::E7_cone_bound: need(s_list.empty(), "sweep.s"); break;
    case ExperimentId::E3_alpha_vanishing: need(alpha_list.empty(), "sweep.alpha"); break;
    case ExperimentId::E4_constants:
      need(alpha_list.empty(), "sweep.alpha");
      need(sigma_list.empty(), "sweep.sigma");
      break;
    case ExperimentId::E6_mollifier: need(n_list.empty(), "sweep.n"); break;
  }
  if (!detail::strictly(s_list, false)) throw DomainError("config: sweep.s must be strictly decreasing");
  for (double s : s_list)
    if (!(s > 0.0)) throw DomainError("config: sweep.s entries must be positive");
  if (!detail::strictly(alpha_list, true)) throw DomainError("config: sweep.alpha must be strictly increasing");
  for (double a : alpha_list)
    if (!(a > 0.0 && a < 1.0)) throw DomainError("config: sweep.alpha entries must lie in (0,1)");
  if (!detail::strictly(n_list, true)) throw DomainError("config: sweep.n must be strictly increasing");
  for (int n : n_list)
    if (n < 1) throw DomainError("config: sweep.n entries must be >= 1");
  if (!detail::strictly(sigma_list, true)) throw DomainError("config: sweep.sigma must be strictly increasing");
  const BallDomain ball = BallDomain::unit_shifted(params.dim);
  for (const Point& x : probes)
    if (x.dim != params.dim || !ball.contains(x)) throw DomainError("config: probes must lie inside the ball");
}

inline std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment = " << to_string(c.id) << "\n";
  os << "params.dim = " << c.params.dim << "\n";
  os << "params.alpha = " << format_g17(c.params.alpha) << "\n";
  os << "params.p = " << format_g17(c.params.p) << "\n";
  os << "params.s = " << format_g17(c.params.s) << "\n";
  os << "params.resolution = " << c.params.resolution << "\n";
  os << "mesh.grading = " << format_g17(c.grading) << "\n";
  os << "solver.tol = " << format_g17(c.tol) << "\n";
  os << "sweep.s = " << detail::join(c.s_list) << "\n";
  os << "sweep.alpha = " << detail::join(c.alpha_list) << "\n";
  os << "sweep.n = " << detail::join(c.n_list) << "\n";
  os << "sweep.sigma = " << detail::join(c.sigma_list) << "\n";
  os << "probes = ";
  for (std::size_t k = 0; k < c.probes.size(); ++k) {
    if (k) os << ";";
    for (int i = 0; i < c.probes[k].dim; ++i) os << (i ? "," : "") << format_g17(c.probes[k][i]);
  }
  os << "\n";
  os << "output_dir = " << c.output_dir << "\n";
  os << "seed = " << c.seed << "\n";
  return os.str();
}

/// Key/value pairs of a config text; duplicate keys are an error.
inline std::map<std::string, std::string> read_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  int line_no = 0;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DomainError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (!kv.emplace(key, detail::trim(std::string_view(t).substr(eq + 1))).second)
      throw DomainError("config: duplicate key " + key);
  }
  return kv;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  const auto kv = read_key_values(text);
  std::string probes;
  bool have_id = false;
  for (const auto& [k, v] : kv) {
    using detail::parse_number;
    if (k == "experiment") c.id = parse_experiment_id(v), have_id = true;
    else if (k == "params.dim") c.params.dim = parse_number<int>(k, v);
    else if (k == "params.alpha") c.params.alpha = parse_number<double>(k, v);
    else if (k == "params.p") c.params.p = parse_number<double>(k, v);
    else if (k == "params.s") c.params.s = parse_number<double>(k, v);
    else if (k == "params.resolution") c.params.resolution = parse_number<int>(k, v);
    else if (k == "mesh.grading") c.grading = parse_number<double>(k, v);
    else if (k == "solver.tol") c.tol = parse_number<double>(k, v);
    else if (k == "sweep.s") c.s_list = detail::parse_list<double>(k, v);
    else if (k == "sweep.alpha") c.alpha_list = detail::parse_list<double>(k, v);
    else if (k == "sweep.n") c.n_list = detail::parse_list<int>(k, v);
    else if (k == "sweep.sigma") c.sigma_list = detail::parse_list<double>(k, v);
    else if (k == "probes") probes = v;
    else if (k == "output_dir") c.output_dir = v;
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
    else throw DomainError("config: unknown key " + k);
  }
  if (!have_id) throw DomainError("config: missing key experiment");
  if (!probes.empty()) {
    for (const auto& item : detail::split(probes, ';')) {
      const auto xs = detail::parse_list<double>("probes", item);
      if (xs.size() != static_cast<std::size_t>(c.params.dim))
        throw DomainError("config: probe '" + item + "' does not have params.dim coordinates");
      Point x(c.params.dim);
      for (int i = 0; i < c.params.dim; ++i) x[i] = xs[i];
      c.probes.push_back(x);
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

/// Settings for a single solve or assembly: the params.*, mesh.* and solver.*
/// keys plus trace.t, the axis distances to report.
struct ProblemConfig {
  ProblemParams params;
  double grading = 2.0;
  double tol = 1e-9;
  std::vector<double> trace_t;
};

inline ProblemConfig parse_problem_config(std::string_view text) {
  ProblemConfig c;
  for (const auto& [k, v] : read_key_values(text)) {
    using detail::parse_number;
    if (k == "params.dim") c.params.dim = parse_number<int>(k, v);
    else if (k == "params.alpha") c.params.alpha = parse_number<double>(k, v);
    else if (k == "params.p") c.params.p = parse_number<double>(k, v);
    else if (k == "params.s") c.params.s = parse_number<double>(k, v);
    else if (k == "params.resolution") c.params.resolution = parse_number<int>(k, v);
    else if (k == "mesh.grading") c.grading = parse_number<double>(k, v);
    else if (k == "solver.tol") c.tol = parse_number<double>(k, v);
    else if (k == "trace.t") c.trace_t = detail::parse_list<double>(k, v);
    else throw DomainError("config: unknown key " + k);
  }
  c.params.validate();
  if (!(c.grading >= 1.0)) throw DomainError("config: mesh.grading must be >= 1");
  if (!(c.tol > 0.0)) throw DomainError("config: solver.tol must be positive");
  for (double t : c.trace_t)
    if (!(t > 0.0 && t < 2.0)) throw DomainError("config: trace.t entries must lie in (0, 2)");
  return c;
}

/// The configurations the acceptance criteria are stated for.
inline ExperimentConfig default_config(ExperimentId id) {
  ExperimentConfig c;
  c.id = id;
  c.output_dir = "out/" + to_string(id);
  auto& P = c.params;
  switch (id) {
    case ExperimentId::E1_exponent:
    case ExperimentId::E7_cone_bound:
      P = {2, 0.5, 3.0, 0.0, 32};
      c.s_list = {0.4, 0.2, 0.1, 0.05};
      break;
    case ExperimentId::E2_blowup:
      P = {2, 0.5, 1.2, 0.0, 32};
      c.s_list = {0.4, 0.2, 0.1, 0.05};
      c.probes = {Point::axis(2, 0.5)};
      break;
    case ExperimentId::E3_alpha_vanishing:
      P = {3, 0.6, 5.0, 0.0, 32};
      c.alpha_list = {0.6, 0.8, 0.9};
      break;
    case ExperimentId::E4_constants:
      P = {2, 0.5, 3.0, 0.0, 32};
      c.alpha_list = {0.9, 0.99, 0.995};
      c.sigma_list = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8};
      break;
    case ExperimentId::E5_kernel_identities:
      P = {2, 0.5, 3.0, 0.0, 64};
      c.s_list = {1.0, 0.5, 0.1};
      break;
    case ExperimentId::E6_mollifier:
      P = {2, 0.5, 3.0, 0.5, 32};
      c.n_list = {8, 16, 32};
      break;
  }
  return c;
}

}  // namespace fracball
