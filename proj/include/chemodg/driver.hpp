#ifndef CHEMODG_DRIVER_HPP
#define CHEMODG_DRIVER_HPP

// Run configuration and the command bodies behind the command-line tool:
// spatial and temporal convergence studies, single runs with snapshots, and
// the mass check. Outputs are written to a temporary name and renamed.

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "chemodg/analysis.hpp"
#include "chemodg/stepper.hpp"
#include "chemodg/vtk.hpp"

namespace chemodg {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitSolver = 3, kExitPicard = 4 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DtPolicy { fixed, coupled };

/// Everything a command needs. Mesh levels count cells per unit length, so
/// level n has nominal size h = 1/n on any rectangle.
struct RunConfig {
  std::string case_name = "mm2d";
  int degree = 1;
  std::vector<int> levels{4, 8, 16, 32};
  DtPolicy dt_policy = DtPolicy::coupled;
  double dt = 0.25;                    // fixed: the step; coupled: scale in dt = scale * h^exponent
  std::optional<double> dt_exponent;   // coupled exponent, default k + 1
  std::vector<double> dts{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};  // temporal study
  double h_scale = 0.25;               // temporal coupling h = scale * dt^h_exponent
  std::optional<double> h_exponent;    // default 1 / (k + 1)
  double t_final = 1.0;
  std::optional<double> sigma;         // all three penalties
  std::optional<double> sigma_rho, sigma_c, sigma_u;
  std::string out = "out";
  int snap_every = 0;                  // 0: first and last step only
  std::vector<double> snap_times;
  SolverKind solver = SolverKind::gmres;
  double picard_tol = 1e-10;
  int picard_max_iter = 50;
  double mass_tol = 1e-9;              // relative, for mass-check

  double coupled_exponent() const { return dt_exponent.value_or(degree + 1.0); }
  double temporal_exponent() const { return h_exponent.value_or(1.0 / (degree + 1.0)); }

  PenaltyConfig penalty() const {
    PenaltyConfig p = sigma ? PenaltyConfig::uniform(*sigma) : PenaltyConfig::standard(degree);
    if (sigma_rho) p.sigma_rho = *sigma_rho;
    if (sigma_c) p.sigma_c = *sigma_c;
    if (sigma_u) p.sigma_u = *sigma_u;
    return p;
  }

  /// Requested step size on a level, before fitting to the final time.
  double step_for(int level) const {
    if (dt_policy == DtPolicy::fixed) return dt;
    return dt * std::pow(1.0 / level, coupled_exponent());
  }

  void validate() const {
    if (degree < 1 || degree > 3) throw ConfigError("degree must be 1, 2 or 3");
    if (levels.empty()) throw ConfigError("levels must not be empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] < 1) throw ConfigError("levels must be positive");
      if (i > 0 && levels[i] <= levels[i - 1]) throw ConfigError("levels must be strictly increasing");
    }
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ConfigError("tfinal must be non-negative");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (dt_exponent && !(*dt_exponent > 0.0)) throw ConfigError("dt_exponent must be positive");
    if (!(h_scale > 0.0)) throw ConfigError("h_scale must be positive");
    if (h_exponent && !(*h_exponent > 0.0)) throw ConfigError("h_exponent must be positive");
    for (std::size_t i = 0; i < dts.size(); ++i) {
      if (!(dts[i] > 0.0)) throw ConfigError("dts must be positive");
      if (i > 0 && dts[i] >= dts[i - 1]) throw ConfigError("dts must be strictly decreasing");
    }
    if (snap_every < 0) throw ConfigError("snap_every must be non-negative");
    if (!(picard_tol > 0.0)) throw ConfigError("picard_tol must be positive");
    if (picard_max_iter < 1) throw ConfigError("picard_max_iter must be at least 1");
    if (!(mass_tol > 0.0)) throw ConfigError("mass_tol must be positive");
    try {
      penalty().validate();
      make_case(case_name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// key=value configuration

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(x))
    throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(key + ": not an integer: '" + v + "'");
  return static_cast<int>(x);
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, F&& one) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(one(item));
  }
  return out;
}

}  // namespace detail

/// Applies one setting. Keys match the command-line flag names with '_' for '-'.
inline void set_option(RunConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  using namespace detail;
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  auto number = [&] { return parse_double(key, v); };
  auto integer = [&] { return parse_int(key, v); };
  if (key == "case") {
    cfg.case_name = v;
  } else if (key == "degree") {
    cfg.degree = integer();
  } else if (key == "levels") {
    cfg.levels = parse_list<int>(v, [&](const std::string& s) { return parse_int(key, s); });
  } else if (key == "dt") {
    cfg.dt = number();
  } else if (key == "dt_policy") {
    // "fixed", "coupled" or "coupled:<exponent>"
    if (v == "fixed") {
      cfg.dt_policy = DtPolicy::fixed;
    } else if (v.rfind("coupled", 0) == 0) {
      cfg.dt_policy = DtPolicy::coupled;
      if (v.size() > 7) {
        if (v[7] != ':') throw ConfigError("dt_policy: expected fixed, coupled or coupled:<exponent>");
        cfg.dt_exponent = parse_double(key, v.substr(8));
      }
    } else {
      throw ConfigError("dt_policy: expected fixed, coupled or coupled:<exponent>");
    }
  } else if (key == "dt_exponent") {
    cfg.dt_exponent = number();
  } else if (key == "dts") {
    cfg.dts = parse_list<double>(v, [&](const std::string& s) { return parse_double(key, s); });
  } else if (key == "h_scale") {
    cfg.h_scale = number();
  } else if (key == "h_exponent") {
    cfg.h_exponent = number();
  } else if (key == "tfinal") {
    cfg.t_final = number();
  } else if (key == "sigma") {
    cfg.sigma = number();
  } else if (key == "sigma_rho") {
    cfg.sigma_rho = number();
  } else if (key == "sigma_c") {
    cfg.sigma_c = number();
  } else if (key == "sigma_u") {
    cfg.sigma_u = number();
  } else if (key == "out") {
    if (v.empty()) throw ConfigError("out: empty path");
    cfg.out = v;
  } else if (key == "snap_every") {
    cfg.snap_every = integer();
  } else if (key == "snap_times") {
    cfg.snap_times = parse_list<double>(v, [&](const std::string& s) { return parse_double(key, s); });
  } else if (key == "solver") {
    if (v == "direct")
      cfg.solver = SolverKind::direct;
    else if (v == "gmres")
      cfg.solver = SolverKind::gmres;
    else
      throw ConfigError("solver: expected direct or gmres");
  } else if (key == "picard_tol") {
    cfg.picard_tol = number();
  } else if (key == "picard_max_iter") {
    cfg.picard_max_iter = integer();
  } else if (key == "mass_tol") {
    cfg.mass_tol = number();
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

/// Reads key=value lines; '#' starts a comment, blank lines are ignored.
inline void apply_config(RunConfig& cfg, std::istream& is) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    try {
      set_option(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  apply_config(cfg, is);
}

// ---------------------------------------------------------------------------
// helpers

/// Writes through a temporary file in the same directory, then renames.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    body(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Worker count from CHEMODG_WORKERS, default 1.
inline int worker_count() {
  const char* env = std::getenv("CHEMODG_WORKERS");
  if (!env || !*env) return 1;
  try {
    const int n = detail::parse_int("CHEMODG_WORKERS", env);
    if (n < 1) throw ConfigError("CHEMODG_WORKERS must be at least 1");
    return n;
  } catch (const ConfigError&) {
    throw ConfigError(std::string("CHEMODG_WORKERS must be a positive integer, got '") + env + "'");
  }
}

/// Uniform grid on [0, T]: the smallest step count whose step does not exceed the request.
struct TimeGrid {
  int steps;
  double dt;
};

inline TimeGrid fit_time_grid(double t_final, double requested) {
  if (!(requested > 0.0)) throw ConfigError("time step must be positive");
  if (t_final == 0.0) return {0, requested};
  const double n = std::ceil(t_final / requested * (1.0 - 1e-12));
  if (n > 1e8) throw ConfigError("too many time steps");
  const int steps = std::max(1, static_cast<int>(n));
  return {steps, t_final / steps};
}

inline std::shared_ptr<const Mesh2D> level_mesh(const ProblemCase& pc, int level) {
  const int nx = static_cast<int>(std::lround(level * pc.domain.width()));
  const int ny = static_cast<int>(std::lround(level * pc.domain.height()));
  if (nx < 1 || ny < 1) throw ConfigError("level " + std::to_string(level) + " gives an empty mesh");
  return std::make_shared<const Mesh2D>(build_rect_mesh(nx, ny, pc.domain));
}

inline SchemeConfig scheme_for(const RunConfig& cfg, double dt) {
  SchemeConfig s;
  s.dt = dt;
  s.penalty = cfg.penalty();
  s.picard_tol = cfg.picard_tol;
  s.picard_max_iter = cfg.picard_max_iter;
  s.solver = cfg.solver;
  return s;
}

/// Maps an exception from a command to its exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const PicardError*>(&e)) return kExitPicard;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return kExitConfig;
  return kExitSolver;
}

/// Runs one (mesh level, step size) pair of an exact-solution case to T.
inline ErrorReport run_to_final_time(const ProblemCase& pc, const RunConfig& cfg, int level, double dt_request,
                                     std::ostream* log = nullptr) {
  const auto mesh = level_mesh(pc, level);
  const auto disc = std::make_shared<const Discretization>(mesh, cfg.degree);
  const TimeGrid grid = fit_time_grid(cfg.t_final, dt_request);
  Stepper stepper(pc, disc, scheme_for(cfg, grid.dt));
  State s = stepper.initialize();
  for (int n = 0; n < grid.steps; ++n) s = stepper.advance(s);
  ErrorReport r = compute_errors(stepper, s);
  if (log) {
    std::ostringstream line;
    line << std::setprecision(6) << "level " << level << " dt " << grid.dt << " steps " << grid.steps << " L2_u "
         << r.l2_u << " L2_rho " << r.l2_rho << " L2_c " << r.l2_c << " L2_p " << r.l2_p << '\n';
    *log << line.str() << std::flush;
  }
  return r;
}

/// Runs jobs 0..n-1 on up to `workers` threads. Results land in their own slot,
/// so the output does not depend on scheduling.
inline void run_jobs(int n, int workers, const std::function<void(int)>& job) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// studies

struct StudyResult {
  EocTable table;
  std::vector<std::string> failures;  // one message per failed run
  std::optional<int> exit_code;       // set when a run failed
};

namespace detail {

/// Common body of both studies: job i yields row i or a failure.
inline StudyResult run_study(const RunConfig& cfg, RateAxis axis, int n, const std::function<ErrorReport(int)>& job,
                             std::ostream* log) {
  std::vector<std::optional<ErrorReport>> rows(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  std::vector<int> codes(static_cast<std::size_t>(n), kExitOk);
  std::mutex log_mutex;
  run_jobs(n, worker_count(), [&](int i) {
    try {
      rows[i] = job(i);
      write_file_atomic(std::filesystem::path(cfg.out) / ("run_" + std::to_string(i) + ".csv"), [&](std::ostream& os) {
        EocTable one;
        one.axis = axis;
        one.rows.push_back(*rows[i]);
        write_errors_csv(os, one);
      });
    } catch (const std::exception& e) {
      errors[i] = e.what();
      codes[i] = exit_code_for(e);
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << "run " << i << " failed: " << e.what() << '\n';
      }
    }
  });
  StudyResult res;
  res.table.axis = axis;
  for (int i = 0; i < n; ++i) {
    if (rows[i]) {
      res.table.rows.push_back(*rows[i]);
    } else {
      res.failures.push_back("run " + std::to_string(i) + ": " + errors[i]);
      if (!res.exit_code) res.exit_code = codes[i];
    }
  }
  const std::filesystem::path dir(cfg.out);
  write_file_atomic(dir / "errors.csv", [&](std::ostream& os) { write_errors_csv(os, res.table); });
  write_file_atomic(dir / "rates.csv", [&](std::ostream& os) { write_rates_csv(os, res.table); });
  return res;
}

inline ProblemCase exact_case(const RunConfig& cfg) {
  cfg.validate();
  ProblemCase pc = make_case(cfg.case_name);
  if (!pc.exact) throw ConfigError("case '" + pc.name + "' has no exact solution; studies need one");
  return pc;
}

}  // namespace detail

/// Spatial study: one run per level with the configured step policy.
/// Writes errors.csv, rates.csv and run_<i>.csv into cfg.out.
inline StudyResult cmd_convergence(const RunConfig& cfg, std::ostream* log = nullptr) {
  const ProblemCase pc = detail::exact_case(cfg);
  const int n = static_cast<int>(cfg.levels.size());
  return detail::run_study(cfg, RateAxis::h, n,
                           [&](int i) { return run_to_final_time(pc, cfg, cfg.levels[i], cfg.step_for(cfg.levels[i]), log); },
                           log);
}

/// Mesh level used by the temporal study for one step size: h = h_scale * dt^h_exponent.
inline int temporal_level(const RunConfig& cfg, double dt) {
  const double h = cfg.h_scale * std::pow(dt, cfg.temporal_exponent());
  return std::max(1, static_cast<int>(std::lround(1.0 / h)));
}

/// Temporal study over cfg.dts with the mesh coupled to each step size.
inline StudyResult cmd_temporal(const RunConfig& cfg, std::ostream* log = nullptr) {
  const ProblemCase pc = detail::exact_case(cfg);
  if (cfg.dts.size() < 2) throw ConfigError("temporal study needs at least two step sizes");
  const double expected = 1.0 / (cfg.degree + 1.0);
  if (log && std::abs(cfg.temporal_exponent() - expected) > 1e-12)
    *log << "warning: h_exponent " << cfg.temporal_exponent() << " differs from 1/(k+1) = " << expected
         << "; spatial error may dominate the temporal rate\n";
  const int n = static_cast<int>(cfg.dts.size());
  return detail::run_study(cfg, RateAxis::dt, n,
                           [&](int i) { return run_to_final_time(pc, cfg, temporal_level(cfg, cfg.dts[i]), cfg.dts[i], log); },
                           log);
}

// ---------------------------------------------------------------------------
// single runs

struct MassRow {
  int step;
  double time;
  double total;
  double deviation;
  double relative;
};

struct SnapshotInfo {
  int step;
  double time;
  std::string file;
  double rho_center_y;
  double max_c;
};

struct RunResult {
  std::vector<MassRow> mass;
  std::vector<SnapshotInfo> snapshots;
  double max_relative_deviation = 0.0;
  std::optional<int> exit_code;  // set when a step failed
  std::string failure;
};

inline void write_mass_csv(std::ostream& os, std::span<const MassRow> rows) {
  os << "step,time,total_mass,deviation,relative_deviation\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.step << ',' << r.time << ',' << r.total << ',' << r.deviation << ',' << r.relative << '\n';
}

inline void write_snapshots_csv(std::ostream& os, std::span<const SnapshotInfo> rows) {
  os << "step,time,file,rho_center_y,max_c\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.step << ',' << r.time << ',' << r.file << ',' << r.rho_center_y << ',' << r.max_c << '\n';
}

namespace detail {

inline bool wants_snapshot(const RunConfig& cfg, const TimeGrid& grid, int step) {
  if (step == 0 || step == grid.steps) return true;
  if (cfg.snap_every > 0 && step % cfg.snap_every == 0) return true;
  const double t = step * grid.dt;
  for (double ts : cfg.snap_times)
    if (std::abs(t - ts) < 0.5 * grid.dt) return true;
  return false;
}

/// Steps a case on the finest configured level, recording mass every step.
inline RunResult run_case(const RunConfig& cfg, bool snapshots, std::ostream* log) {
  cfg.validate();
  const ProblemCase pc = make_case(cfg.case_name);
  const int level = cfg.levels.back();
  const auto disc = std::make_shared<const Discretization>(level_mesh(pc, level), cfg.degree);
  const TimeGrid grid = fit_time_grid(cfg.t_final, cfg.step_for(level));
  Stepper stepper(pc, disc, scheme_for(cfg, grid.dt));
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  if (log)
    *log << "case " << pc.name << " level " << level << " k " << cfg.degree << " dt " << grid.dt << " steps "
         << grid.steps << '\n';

  RunResult res;
  State s = stepper.initialize();
  const double m_first = stepper.total_mass(s);
  const double scale = std::abs(m_first) > 0.0 ? std::abs(m_first) : 1.0;
  auto record = [&](const State& st) {
    const double total = stepper.total_mass(st);
    const double dev = total - m_first;
    res.mass.push_back({st.step, st.time, total, dev, std::abs(dev) / scale});
    res.max_relative_deviation = std::max(res.max_relative_deviation, std::abs(dev) / scale);
    if (snapshots && wants_snapshot(cfg, grid, st.step)) {
      std::ostringstream name;
      name << "snap_" << std::setw(6) << std::setfill('0') << st.step << ".vtk";
      write_file_atomic(dir / name.str(), [&](std::ostream& os) { write_snapshot_vtk(os, stepper, st); });
      res.snapshots.push_back(
          {st.step, st.time, name.str(), vertical_center_of_mass(stepper, st), field_max(disc->scalar, st.c)});
    }
  };
  auto flush = [&] {
    write_file_atomic(dir / "mass.csv", [&](std::ostream& os) { write_mass_csv(os, res.mass); });
    if (snapshots)
      write_file_atomic(dir / "snapshots.csv", [&](std::ostream& os) { write_snapshots_csv(os, res.snapshots); });
  };

  record(s);
  try {
    for (int n = 0; n < grid.steps; ++n) {
      s = stepper.advance(s);
      record(s);
    }
  } catch (const std::exception& e) {
    res.exit_code = exit_code_for(e);
    res.failure = "step " + std::to_string(s.step + 1) + ": " + e.what();
    if (log) *log << res.failure << '\n';
  }
  flush();
  return res;
}

}  // namespace detail

/// Single run on the finest level: VTK snapshots, snapshots.csv and mass.csv.
inline RunResult cmd_run(const RunConfig& cfg, std::ostream* log = nullptr) { return detail::run_case(cfg, true, log); }

/// Like cmd_run without snapshots; the caller compares the maximum relative
/// mass deviation with cfg.mass_tol.
inline RunResult cmd_mass_check(const RunConfig& cfg, std::ostream* log = nullptr) {
  return detail::run_case(cfg, false, log);
}

}  // namespace chemodg

#endif  // CHEMODG_DRIVER_HPP
