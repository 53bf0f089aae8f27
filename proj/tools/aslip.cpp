// Command-line front end: single optimizations, simulation, batch grids,
// disturbance sweeps, gradient checks, and report conversion.
//
// Exit codes: 0 success, 1 harness error (I/O, bad config or input),
// 2 a requested optimization did not converge or a gradient check failed.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "aslip/error.hpp"
#include "aslip/experiments.hpp"

namespace fs = std::filesystem;
using namespace aslip;

namespace {

constexpr int kOk = 0;
constexpr int kHarnessError = 1;
constexpr int kNotConverged = 2;

struct Globals {
  std::string config;
  std::string out = ".";
  int jobs = 0;
  bool seedless = false;
  std::string format = "csv";
  std::string backend;
};

struct TaskArgs {
  double y0 = 1.1, xd0 = 0.8, yf = 1.1, xdf = 0.8;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--y0", y0, "initial apex height")->capture_default_str();
    cmd->add_option("--xd0", xd0, "initial forward speed")->capture_default_str();
    cmd->add_option("--yf", yf, "final apex height")->capture_default_str();
    cmd->add_option("--xdf", xdf, "final forward speed")->capture_default_str();
  }
  BoundaryConditions bc() const { return {y0, xd0, yf, xdf}; }
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.jobs > 0) c.jobs = g.jobs;
  if (!g.backend.empty()) {
    const auto b = parse_backend(g.backend);
    if (!b) throw Error(ErrorCode::InvalidParameters, "unknown backend '" + g.backend + "'");
    c.solver.backend = *b;
  }
  c.validate();
  return c;
}

Format format_of(const Globals& g) {
  const auto f = parse_format(g.format);
  if (!f) throw Error(ErrorCode::InvalidParameters, "unknown format '" + g.format + "'");
  return *f;
}

void print_record(const TaskRecord& r, Format format) {
  if (format == Format::Json) {
    const nlohmann::json doc{{"method", to_string(r.method)},
                             {"task", {{"y0", r.task.y0}, {"xd0", r.task.xd0}, {"yf", r.task.yf}, {"xdf", r.task.xdf}}},
                             {"status", to_string(r.status)},
                             {"iterations", r.iterations},
                             {"seconds", r.seconds},
                             {"cpu_seconds", r.cpu_seconds},
                             {"objective", r.objective},
                             {"plan", r.plan_file},
                             {"message", r.message}};
    std::cout << doc.dump(2) << '\n';
    return;
  }
  GridRun run;
  run.method = r.method;
  run.records = {r};
  write_log(run, std::cout);
}

int optimize(const Globals& g, const TaskArgs& t, Method method, const std::vector<double>& disturbances,
             const std::string& name) {
  ExperimentConfig c = load(g);
  if (!disturbances.empty()) c.disturbances.offsets = disturbances;
  c.validate();
  PlannedTask p = plan_task(t.bc(), method, c);
  if (p.plan) {
    fs::create_directories(g.out);
    const fs::path path = fs::path(g.out) / name;
    save_plan(*p.plan, path);
    p.record.plan_file = path.string();
  }
  print_record(p.record, format_of(g));
  return p.plan ? kOk : kNotConverged;
}

int simulate(const Globals& g, const std::string& plan_file, double disturbance, std::optional<double> y0,
             std::optional<double> xd0, const std::string& series, double dt) {
  const ExperimentConfig c = load(g);
  MotionPlan plan = load_plan(plan_file);
  if (!plan.task && !(y0 && xd0)) throw Error(ErrorCode::InvalidPlan, "plan has no task; give --y0 and --xd0");
  ApexTask task = plan.task.value_or(ApexTask{});
  if (y0) task.y0 = *y0;
  if (xd0) task.xd0 = *xd0;
  plan.task = task;

  SimTrace trace;
  const SimOutcome o = simulate_step(plan, apex_state(plan, task.y0, task.xd0), disturbance, c.sim, &trace);
  if (!series.empty()) {
    std::ofstream out(series);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + series);
    write_time_series(trace.sample(dt), out);
  }

  nlohmann::json doc{{"status", to_string(o.status)}, {"disturbance", disturbance}};
  if (o.apex) {
    doc["apex"] = {{"y", o.apex->y}, {"xdot", o.apex->xdot}};
    doc["height_error"] = std::abs(o.apex->y - task.yf);
    doc["speed_error"] = std::abs(o.apex->xdot - task.xdf);
  }
  if (o.touchdown_angle) doc["touchdown_angle"] = *o.touchdown_angle;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : o.events) events.push_back({{"time", e.time}, {"kind", to_string(e.kind)}});
  doc["events"] = events;
  doc["diagnostics"] = o.diagnostics;

  if (format_of(g) == Format::Json) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << "status,disturbance,apex_height,apex_speed,height_error,speed_error\n"
              << to_string(o.status) << ',' << format_number(disturbance);
    if (o.apex)
      std::cout << ',' << format_number(o.apex->y) << ',' << format_number(o.apex->xdot) << ','
                << format_number(doc["height_error"].get<double>()) << ','
                << format_number(doc["speed_error"].get<double>());
    else
      std::cout << ",,,,";
    std::cout << '\n';
  }
  return kOk;
}

int grid(const Globals& g, const std::string& method) {
  const ExperimentConfig c = load(g);
  std::vector<Method> methods;
  if (method == "both") {
    methods = {Method::MinEffort, Method::Robust};
  } else if (const auto m = parse_method(method)) {
    methods = {*m};
  } else {
    throw Error(ErrorCode::InvalidParameters, "unknown method '" + method + "'");
  }
  std::cout << "method,tasks,converged,log\n";
  for (Method m : methods) {
    const GridRun run = run_grid(c, m, g.out);
    std::cout << to_string(m) << ',' << run.records.size() << ',' << run.converged() << ','
              << (fs::path(g.out) / std::string(to_string(m)) / "log.csv").string() << '\n';
  }
  return kOk;
}

int sweep(const Globals& g, const std::string& archive, std::vector<double> disturbances, bool series, double dt) {
  const ExperimentConfig c = load(g);
  if (disturbances.empty()) disturbances = c.sweep;
  const fs::path root = archive.empty() ? fs::path(g.out) : fs::path(archive);
  std::vector<PlanRef> refs;
  for (Method m : {Method::MinEffort, Method::Robust}) {
    if (!fs::is_directory(root / std::string(to_string(m)))) continue;
    const auto found = list_archive(root, m);
    refs.insert(refs.end(), found.begin(), found.end());
  }
  if (refs.empty()) throw Error(ErrorCode::Io, "no plans under " + root.string());
  const SweepReport report = run_sweep(refs, disturbances, c);
  for (const auto& s : report.skipped)
    std::cerr << "skipped " << to_string(s.method) << " task " << s.task << ": " << s.diagnostic << '\n';
  const auto files = emit_report(report, format_of(g), g.out);

  if (series) {
    const fs::path dir = fs::path(g.out) / "series";
    fs::create_directories(dir);
    for (const auto& ref : refs) {
      MotionPlan plan;
      try {
        plan = load_plan(ref.path);
      } catch (const Error&) {
        continue;
      }
      for (std::size_t i = 0; i < disturbances.size(); ++i) {
        char name[96];
        std::snprintf(name, sizeof name, "%s_task_%04d_d%02zu.csv", std::string(to_string(ref.method)).c_str(),
                      ref.task, i);
        std::ofstream out(dir / name);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
        write_time_series(time_series(plan, disturbances[i], c.sim, dt), out);
      }
    }
  }
  write_summary_csv(report, std::cout);
  for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
  return kOk;
}

int check_gradients(const Globals& g, const TaskArgs& t, const std::string& which, std::vector<int> nodes, int points,
                    std::optional<std::uint64_t> seed, double tol) {
  const ExperimentConfig c = load(g);
  if (nodes.size() != 3) throw Error(ErrorCode::InvalidParameters, "--nodes needs three counts");
  const PhaseSet phases = make_phases(nodes[0], nodes[1], nodes[2]);
  const std::uint64_t base = seed ? *seed : g.seedless ? 1 : std::random_device{}();

  std::vector<std::pair<std::string, CollocationProblem>> problems;
  const CollocationProblem nominal = build_min_effort(t.bc(), c.params, phases);
  if (which == "min-effort" || which == "both") problems.emplace_back("min-effort", nominal);
  if (which == "robust" || which == "both") {
    RobustTask rt;
    rt.bc = t.bc();
    rt.disturbances = c.disturbances;
    rt.phases = phases;
    rt.grid_points = c.grid_points;
    rt.regularization = c.regularization;
    CollocationProblem robust = build_robust(rt, c.params);
    const SolveResult seedsol = solve(nominal, c.solver);
    if (seedsol.success()) robust.set_initial_point(robust_warm_start(robust, nominal, seedsol.x));
    problems.emplace_back("robust", std::move(robust));
  }
  if (problems.empty()) throw Error(ErrorCode::InvalidParameters, "unknown problem '" + which + "'");

  bool ok = true;
  std::cout << "problem,seed,max_error,constraint_error,gradient_error,worst_row,worst_col,outside_pattern,passed\n";
  for (const auto& [name, problem] : problems) {
    for (int i = 0; i < points; ++i) {
      const std::uint64_t s = base + i;
      const JacobianCheck jc = check_jacobian(problem, random_interior_point(problem, s));
      const bool passed = jc.passed(tol);
      ok = ok && passed;
      std::cout << name << ',' << s << ',' << format_number(jc.max_error) << ','
                << format_number(jc.max_constraint_error) << ',' << format_number(jc.max_gradient_error) << ','
                << jc.worst_row << ',' << jc.worst_col << ',' << jc.outside_pattern.size() << ','
                << (passed ? "yes" : "no") << '\n';
    }
  }
  return ok ? kOk : kNotConverged;
}

int report(const Globals& g, const std::string& input) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + input);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParameters, input + ": " + e.what());
  }
  const SweepReport r = report_from_json(doc);
  emit_report(r, format_of(g), g.out);
  write_summary_csv(r, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ASLIP hopping planner: min-effort and ground-robust trajectory optimization"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads (overrides config)")->check(CLI::PositiveNumber);
  app.add_flag("--seedless", g.seedless, "deterministic seeds only");
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--backend", g.backend, "NLP backend")->check(CLI::IsMember({"ipopt", "builtin"}));

  TaskArgs min_task, robust_task, grad_task;
  std::vector<double> robust_offsets;
  std::string min_name = "plan.json", robust_name = "plan.json";
  auto* opt_min = app.add_subcommand("optimize-min", "plan one task by minimum set-point effort");
  min_task.add_to(opt_min);
  opt_min->add_option("--name", min_name, "plan file name inside --out")->capture_default_str();
  auto* opt_rob = app.add_subcommand("optimize-robust", "plan one task robust to ground height offsets");
  robust_task.add_to(opt_rob);
  opt_rob->add_option("--disturbances", robust_offsets, "optimized ground offsets (must include 0)")->delimiter(',');
  opt_rob->add_option("--name", robust_name, "plan file name inside --out")->capture_default_str();

  std::string plan_file, series_file;
  double sim_d = 0.0, sim_dt = 0.01;
  std::optional<double> sim_y0, sim_xd0;
  auto* sim = app.add_subcommand("simulate", "simulate a plan over one ground offset");
  sim->add_option("--plan", plan_file, "plan file")->required()->check(CLI::ExistingFile);
  sim->add_option("--disturbance", sim_d, "ground offset")->capture_default_str();
  sim->add_option("--y0", sim_y0, "initial apex height (default: plan task)");
  sim->add_option("--xd0", sim_xd0, "initial forward speed (default: plan task)");
  sim->add_option("--series", series_file, "write a time series CSV");
  sim->add_option("--dt", sim_dt, "time series sample step")->check(CLI::PositiveNumber)->capture_default_str();

  std::string grid_method = "both";
  auto* grd = app.add_subcommand("grid", "plan every task of the config grid");
  grd->add_option("--method", grid_method, "min-effort, robust or both")
      ->check(CLI::IsMember({"min-effort", "robust", "both"}))
      ->capture_default_str();

  std::string archive;
  std::vector<double> sweep_offsets;
  bool sweep_series = false;
  double sweep_dt = 0.01;
  auto* swp = app.add_subcommand("sweep", "simulate archived plans over ground offsets and report");
  swp->add_option("--archive", archive, "plan archive root (default: --out)");
  swp->add_option("--disturbances", sweep_offsets, "ground offsets (default: config sweep)")->delimiter(',');
  swp->add_flag("--series", sweep_series, "also write a time series per plan and offset");
  swp->add_option("--dt", sweep_dt, "time series sample step")->check(CLI::PositiveNumber)->capture_default_str();

  std::string grad_problem = "both";
  std::vector<int> grad_nodes{15, 25, 15};
  int grad_points = 10;
  std::optional<std::uint64_t> grad_seed;
  double grad_tol = 1e-6;
  auto* grad = app.add_subcommand("check-gradients", "compare analytic and finite-difference derivatives");
  grad_task.add_to(grad);
  grad->add_option("--problem", grad_problem, "min-effort, robust or both")
      ->check(CLI::IsMember({"min-effort", "robust", "both"}))
      ->capture_default_str();
  grad->add_option("--nodes", grad_nodes, "descent,stance,ascent node counts")->delimiter(',')->expected(3);
  grad->add_option("--points", grad_points, "random points per problem")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--seed", grad_seed, "first seed (default: random unless --seedless)");
  grad->add_option("--tol", grad_tol, "relative tolerance")->capture_default_str();

  std::string report_input;
  auto* rep = app.add_subcommand("report", "convert a JSON sweep report and print its summary");
  rep->add_option("--input", report_input, "report.json")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*opt_min) return optimize(g, min_task, Method::MinEffort, {}, min_name);
    if (*opt_rob) return optimize(g, robust_task, Method::Robust, robust_offsets, robust_name);
    if (*sim) return simulate(g, plan_file, sim_d, sim_y0, sim_xd0, series_file, sim_dt);
    if (*grd) return grid(g, grid_method);
    if (*swp) return sweep(g, archive, sweep_offsets, sweep_series, sweep_dt);
    if (*grad) return check_gradients(g, grad_task, grad_problem, grad_nodes, grad_points, grad_seed, grad_tol);
    if (*rep) return report(g, report_input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kHarnessError;
  }
  return kHarnessError;
}
