#include "aslip/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "aslip/error.hpp"

namespace aslip {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::InvalidParameters, what); }

void require_finite(const std::vector<double>& values, const std::string& name) {
  if (values.empty()) bad_config(name + " is empty");
  for (double v : values)
    if (!std::isfinite(v)) bad_config(name + " has a non-finite value");
}

void check_keys(const json& doc, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!doc.is_object()) bad_config(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : doc.items())
    if (!ok.count(item.key())) bad_config("unknown key '" + item.key() + "' in " + where);
}

std::optional<SimStatus> parse_sim_status(std::string_view name) {
  for (SimStatus s : {SimStatus::ApexReached, SimStatus::FellInStance, SimStatus::FellInFlight,
                      SimStatus::NegativeLiftoff, SimStatus::Timeout})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

Method method_of(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) bad_config("unknown method '" + name + "'");
  return *m;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json task_json(const BoundaryConditions& t) { return {{"y0", t.y0}, {"xd0", t.xd0}, {"yf", t.yf}, {"xdf", t.xdf}}; }

BoundaryConditions task_from(const json& doc) {
  return {doc.at("y0").get<double>(), doc.at("xd0").get<double>(), doc.at("yf").get<double>(),
          doc.at("xdf").get<double>()};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return ts.tv_sec + 1e-9 * ts.tv_nsec;
}

}  // namespace

// --- task grid ---------------------------------------------------------------

void TaskGrid::validate() const {
  require_finite(y0, "grid.y0");
  require_finite(xd0, "grid.xd0");
  require_finite(yf, "grid.yf");
  require_finite(xdf, "grid.xdf");
}

int TaskGrid::size() const { return static_cast<int>(y0.size() * xd0.size() * yf.size() * xdf.size()); }

BoundaryConditions TaskGrid::task(int index) const {
  if (index < 0 || index >= size()) bad_config("task index " + std::to_string(index) + " outside the grid");
  const auto n = static_cast<std::size_t>(index);
  const std::size_t a = xdf.size(), b = yf.size() * a, c = xd0.size() * b;
  return {y0[n / c], xd0[n % c / b], yf[n % b / a], xdf[n % a]};
}

std::string_view to_string(Method method) { return method == Method::MinEffort ? "min-effort" : "robust"; }

std::optional<Method> parse_method(std::string_view name) {
  if (name == "min-effort") return Method::MinEffort;
  if (name == "robust") return Method::Robust;
  return std::nullopt;
}

std::vector<double> default_sweep() {
  std::vector<double> d;
  for (int i = -5; i <= 5; ++i) d.push_back(i / 50.0);
  return d;
}

// --- config ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  grid.validate();
  params.validate();
  solver.validate();
  sim.validate();
  validate_phases(phases);
  disturbances.validate();
  if (grid_points < 2) bad_config("grid_points must be >= 2");
  if (!(regularization >= 0.0)) bad_config("regularization must be >= 0");
  require_finite(sweep, "sweep");
  if (jobs < 1) bad_config("jobs must be >= 1");
}

json to_json(const ExperimentConfig& c) {
  json doc;
  doc["grid"] = {{"y0", c.grid.y0}, {"xd0", c.grid.xd0}, {"yf", c.grid.yf}, {"xdf", c.grid.xdf}};
  doc["params"] = to_json(c.params);
  doc["solver"] = {{"constraint_tol", c.solver.constraint_tol},
                   {"optimality_tol", c.solver.optimality_tol},
                   {"max_iterations", c.solver.max_iterations},
                   {"verbosity", c.solver.verbosity},
                   {"backend", to_string(c.solver.backend)}};
  doc["sim"] = {{"abs_tol", c.sim.abs_tol},
                {"rel_tol", c.sim.rel_tol},
                {"event_tol", c.sim.event_tol},
                {"max_time", c.sim.max_time},
                {"max_step", c.sim.max_step}};
  doc["phases"] = {c.phases[0].nodes, c.phases[1].nodes, c.phases[2].nodes};
  doc["disturbances"] = c.disturbances.offsets;
  doc["grid_points"] = c.grid_points;
  doc["regularization"] = c.regularization;
  doc["sweep"] = c.sweep;
  doc["jobs"] = c.jobs;
  return doc;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  try {
    check_keys(
        doc,
        {"grid", "params", "solver", "sim", "phases", "disturbances", "grid_points", "regularization", "sweep", "jobs"},
        "config");
    if (doc.contains("grid")) {
      const auto& g = doc.at("grid");
      check_keys(g, {"y0", "xd0", "yf", "xdf"}, "grid");
      c.grid.y0 = g.value("y0", c.grid.y0);
      c.grid.xd0 = g.value("xd0", c.grid.xd0);
      c.grid.yf = g.value("yf", c.grid.yf);
      c.grid.xdf = g.value("xdf", c.grid.xdf);
    }
    if (doc.contains("params")) {
      check_keys(doc.at("params"), {"mass", "leg_length", "gravity", "stiffness", "damping", "max_accel"}, "params");
      c.params = params_from_json(doc.at("params"));
    }
    if (doc.contains("solver")) {
      const auto& s = doc.at("solver");
      check_keys(s, {"constraint_tol", "optimality_tol", "max_iterations", "verbosity", "backend"}, "solver");
      c.solver.constraint_tol = s.value("constraint_tol", c.solver.constraint_tol);
      c.solver.optimality_tol = s.value("optimality_tol", c.solver.optimality_tol);
      c.solver.max_iterations = s.value("max_iterations", c.solver.max_iterations);
      c.solver.verbosity = s.value("verbosity", c.solver.verbosity);
      const std::string backend = s.value("backend", std::string("default"));
      if (backend == "default") {
        c.solver.backend = Backend::Default;
      } else if (const auto b = parse_backend(backend)) {
        c.solver.backend = *b;
      } else {
        bad_config("unknown backend '" + backend + "'");
      }
    }
    if (doc.contains("sim")) {
      const auto& s = doc.at("sim");
      check_keys(s, {"abs_tol", "rel_tol", "event_tol", "max_time", "max_step"}, "sim");
      c.sim.abs_tol = s.value("abs_tol", c.sim.abs_tol);
      c.sim.rel_tol = s.value("rel_tol", c.sim.rel_tol);
      c.sim.event_tol = s.value("event_tol", c.sim.event_tol);
      c.sim.max_time = s.value("max_time", c.sim.max_time);
      c.sim.max_step = s.value("max_step", c.sim.max_step);
    }
    if (doc.contains("phases")) {
      const auto n = doc.at("phases").get<std::vector<int>>();
      if (n.size() != 3) bad_config("phases needs three node counts");
      c.phases = make_phases(n[0], n[1], n[2]);
    }
    if (doc.contains("disturbances")) c.disturbances.offsets = doc.at("disturbances").get<std::vector<double>>();
    c.grid_points = doc.value("grid_points", c.grid_points);
    c.regularization = doc.value("regularization", c.regularization);
    if (doc.contains("sweep")) c.sweep = doc.at("sweep").get<std::vector<double>>();
    c.jobs = doc.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    bad_config(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    bad_config(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

// --- planning ----------------------------------------------------------------

PlannedTask plan_task(const BoundaryConditions& task, Method method, const ExperimentConfig& config) {
  PlannedTask out;
  TaskRecord& r = out.record;
  r.task = task;
  r.method = method;
  const auto start = std::chrono::steady_clock::now();
  const double cpu_start = thread_cpu_seconds();
  auto take = [&](const SolveResult& res) {
    r.status = res.status;
    r.iterations = res.iterations;
    r.objective = res.objective;
    r.message = res.message;
  };
  try {
    if (method == Method::MinEffort) {
      PlanSolve s = plan_min_effort(task, config.params, config.phases, config.solver);
      take(s.result);
      out.plan = std::move(s.plan);
    } else {
      RobustTask rt;
      rt.bc = task;
      rt.disturbances = config.disturbances;
      rt.phases = config.phases;
      rt.grid_points = config.grid_points;
      rt.regularization = config.regularization;
      RobustPlanSolve s = plan_robust(rt, config.params, config.solver);
      take(s.result);
      out.plan = std::move(s.plan);
    }
  } catch (const Error& e) {
    r.status = SolveStatus::Error;
    r.message = e.what();
    out.plan.reset();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.cpu_seconds = thread_cpu_seconds() - cpu_start;
  return out;
}

int GridRun::converged() const {
  return static_cast<int>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.plan_file.empty(); }));
}

fs::path plan_path(const fs::path& root, Method method, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "task_%04d.json", index);
  return root / std::string(to_string(method)) / name;
}

GridRun run_grid(const ExperimentConfig& config, Method method, const fs::path& root) {
  config.validate();
  make_dir(root / std::string(to_string(method)));
  GridRun run;
  run.method = method;
  run.records.resize(config.grid.size());
  parallel_for(config.grid.size(), config.jobs, [&](int i) {
    PlannedTask t = plan_task(config.grid.task(i), method, config);
    t.record.index = i;
    if (t.plan) {
      const fs::path path = plan_path(root, method, i);
      save_plan(*t.plan, path);
      t.record.plan_file = path.lexically_relative(root).generic_string();
    }
    run.records[i] = std::move(t.record);
  });
  std::ostringstream log;
  write_log(run, log);
  write_file(root / std::string(to_string(method)) / "log.csv", log.str());
  return run;
}

void write_log(const GridRun& run, std::ostream& out) {
  out << "index,method,y0,xd0,yf,xdf,status,iterations,seconds,cpu_seconds,objective,plan,message\n";
  for (const auto& r : run.records) {
    out << r.index << ',' << to_string(r.method) << ',' << format_number(r.task.y0) << ',' << format_number(r.task.xd0)
        << ',' << format_number(r.task.yf) << ',' << format_number(r.task.xdf) << ',' << to_string(r.status) << ','
        << r.iterations << ',' << format_number(r.seconds) << ',' << format_number(r.cpu_seconds) << ','
        << format_number(r.objective) << ',' << csv_field(r.plan_file) << ',' << csv_field(r.message) << '\n';
  }
}

// --- sweeps ------------------------------------------------------------------

std::vector<PlanRef> list_archive(const fs::path& root, Method method) {
  const fs::path dir = root / std::string(to_string(method));
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, "no plan archive at " + dir.string());
  static const std::regex name(R"(task_(\d+)\.json)");
  std::vector<PlanRef> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(file, m, name))
      out.push_back({std::stoi(m[1].str()), method, entry.path()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.task < b.task; });
  return out;
}

SweepReport sweep_plans(const std::vector<TaskPlan>& plans, const std::vector<double>& disturbances,
                        const SimConfig& sim, int jobs) {
  sim.validate();
  SweepReport report;
  report.disturbances = disturbances;

  std::vector<const TaskPlan*> order;
  for (const auto& p : plans) {
    if (!p.plan.task) {
      report.skipped.push_back({p.task, p.method, "plan has no task"});
      continue;
    }
    order.push_back(&p);
  }
  std::stable_sort(order.begin(), order.end(), [](const TaskPlan* a, const TaskPlan* b) {
    return std::make_pair(a->task, a->method) < std::make_pair(b->task, b->method);
  });

  const int D = static_cast<int>(disturbances.size());
  report.entries.resize(order.size() * D);
  parallel_for(static_cast<int>(report.entries.size()), jobs, [&](int i) {
    const TaskPlan& p = *order[i / D];
    SweepEntry& e = report.entries[i];
    e.task = p.task;
    e.method = p.method;
    e.target = *p.plan.task;
    e.disturbance = disturbances[i % D];
    try {
      const SimOutcome o = simulate_step(p.plan, apex_state(p.plan, e.target.y0, e.target.xd0), e.disturbance, sim);
      e.status = o.status;
      if (o.apex) {
        e.apex_height = o.apex->y;
        e.apex_speed = o.apex->xdot;
        e.height_error = std::abs(o.apex->y - e.target.yf);
        e.speed_error = std::abs(o.apex->xdot - e.target.xdf);
      }
      for (const auto& d : o.diagnostics) e.diagnostic += (e.diagnostic.empty() ? "" : "; ") + d;
    } catch (const Error& ex) {
      e.status.reset();
      e.diagnostic = ex.what();
    }
  });
  summarize(report);
  return report;
}

SweepReport run_sweep(const std::vector<PlanRef>& plans, const std::vector<double>& disturbances,
                      const ExperimentConfig& config) {
  std::vector<TaskPlan> loaded;
  std::vector<SkippedPlan> skipped;
  for (const auto& ref : plans) {
    try {
      loaded.push_back({ref.task, ref.method, load_plan(ref.path)});
    } catch (const Error& e) {
      skipped.push_back({ref.task, ref.method, e.what()});
    }
  }
  SweepReport report = sweep_plans(loaded, disturbances, config.sim, config.jobs);
  report.skipped.insert(report.skipped.begin(), skipped.begin(), skipped.end());
  return report;
}

void summarize(SweepReport& report) {
  report.methods.clear();
  report.paired_cases = 0;
  report.height_ratio.reset();
  report.speed_ratio.reset();

  std::map<Method, MethodSummary> by_method;
  std::map<std::pair<int, double>, std::array<const SweepEntry*, 2>> pairs;
  for (const auto& e : report.entries) {
    auto& s = by_method[e.method];
    s.method = e.method;
    ++s.cases;
    if (e.failed()) ++s.failures;
    pairs[{e.task, e.disturbance}][static_cast<int>(e.method)] = &e;
  }

  std::array<double, 2> height{}, speed{};
  for (const auto& [key, both] : pairs) {
    if (!both[0] || !both[1] || both[0]->failed() || both[1]->failed()) continue;
    ++report.paired_cases;
    for (int m = 0; m < 2; ++m) {
      height[m] += both[m]->height_error.value_or(0.0);
      speed[m] += both[m]->speed_error.value_or(0.0);
    }
  }

  for (auto& [method, s] : by_method) {
    if (s.cases > 0) s.failure_fraction = static_cast<double>(s.failures) / s.cases;
    if (report.paired_cases > 0) {
      s.mean_height_error = height[static_cast<int>(method)] / report.paired_cases;
      s.mean_speed_error = speed[static_cast<int>(method)] / report.paired_cases;
    }
    report.methods.push_back(s);
  }
  if (report.paired_cases > 0) {
    if (height[1] > 0.0) report.height_ratio = height[0] / height[1];
    if (speed[1] > 0.0) report.speed_ratio = speed[0] / speed[1];
  }
}

// --- output ------------------------------------------------------------------

std::optional<Format> parse_format(std::string_view name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  return std::nullopt;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_csv(const SweepReport& report, std::ostream& out) {
  out << "task,method,y0,xd0,yf,xdf,disturbance,status,apex_height,apex_speed,height_error,speed_error,"
         "diagnostic\n";
  for (const auto& e : report.entries) {
    out << e.task << ',' << to_string(e.method) << ',' << format_number(e.target.y0) << ','
        << format_number(e.target.xd0) << ',' << format_number(e.target.yf) << ',' << format_number(e.target.xdf) << ','
        << format_number(e.disturbance) << ',' << (e.status ? to_string(*e.status) : "sim-error") << ','
        << optional_number(e.apex_height) << ',' << optional_number(e.apex_speed) << ','
        << optional_number(e.height_error) << ',' << optional_number(e.speed_error) << ',' << csv_field(e.diagnostic)
        << '\n';
  }
}

void write_summary_csv(const SweepReport& report, std::ostream& out) {
  out << "method,cases,failures,failure_fraction,paired_cases,mean_height_error,mean_speed_error\n";
  for (const auto& s : report.methods)
    out << to_string(s.method) << ',' << s.cases << ',' << s.failures << ',' << optional_number(s.failure_fraction)
        << ',' << report.paired_cases << ',' << optional_number(s.mean_height_error) << ','
        << optional_number(s.mean_speed_error) << '\n';
  out << "height_ratio," << (report.height_ratio ? format_number(*report.height_ratio) : "n/a") << '\n';
  out << "speed_ratio," << (report.speed_ratio ? format_number(*report.speed_ratio) : "n/a") << '\n';
}

json to_json(const SweepReport& report) {
  json doc;
  doc["format"] = "aslip-sweep-report";
  doc["version"] = 1;
  doc["disturbances"] = report.disturbances;
  json entries = json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"task", e.task},
                       {"method", to_string(e.method)},
                       {"target", task_json(e.target)},
                       {"disturbance", e.disturbance},
                       {"status", e.status ? json(to_string(*e.status)) : json(nullptr)},
                       {"apex_height", optional_json(e.apex_height)},
                       {"apex_speed", optional_json(e.apex_speed)},
                       {"height_error", optional_json(e.height_error)},
                       {"speed_error", optional_json(e.speed_error)},
                       {"diagnostic", e.diagnostic}});
  doc["entries"] = std::move(entries);
  json skipped = json::array();
  for (const auto& s : report.skipped)
    skipped.push_back({{"task", s.task}, {"method", to_string(s.method)}, {"diagnostic", s.diagnostic}});
  doc["skipped"] = std::move(skipped);
  json methods = json::array();
  for (const auto& s : report.methods)
    methods.push_back({{"method", to_string(s.method)},
                       {"cases", s.cases},
                       {"failures", s.failures},
                       {"failure_fraction", optional_json(s.failure_fraction)},
                       {"mean_height_error", optional_json(s.mean_height_error)},
                       {"mean_speed_error", optional_json(s.mean_speed_error)}});
  doc["methods"] = std::move(methods);
  doc["paired_cases"] = report.paired_cases;
  doc["height_ratio"] = optional_json(report.height_ratio);
  doc["speed_ratio"] = optional_json(report.speed_ratio);
  return doc;
}

SweepReport report_from_json(const json& doc) {
  SweepReport r;
  try {
    if (doc.value("format", std::string{}) != "aslip-sweep-report") bad_config("not a sweep report");
    if (doc.at("version").get<int>() != 1) bad_config("unsupported report version");
    r.disturbances = doc.at("disturbances").get<std::vector<double>>();
    for (const auto& j : doc.at("entries")) {
      SweepEntry e;
      e.task = j.at("task").get<int>();
      e.method = method_of(j.at("method").get<std::string>());
      e.target = task_from(j.at("target"));
      e.disturbance = j.at("disturbance").get<double>();
      if (!j.at("status").is_null()) {
        e.status = parse_sim_status(j.at("status").get<std::string>());
        if (!e.status) bad_config("unknown simulation status");
      }
      e.apex_height = optional_from(j, "apex_height");
      e.apex_speed = optional_from(j, "apex_speed");
      e.height_error = optional_from(j, "height_error");
      e.speed_error = optional_from(j, "speed_error");
      e.diagnostic = j.at("diagnostic").get<std::string>();
      r.entries.push_back(std::move(e));
    }
    for (const auto& j : doc.at("skipped"))
      r.skipped.push_back({j.at("task").get<int>(), method_of(j.at("method").get<std::string>()),
                           j.at("diagnostic").get<std::string>()});
    for (const auto& j : doc.at("methods")) {
      MethodSummary s;
      s.method = method_of(j.at("method").get<std::string>());
      s.cases = j.at("cases").get<int>();
      s.failures = j.at("failures").get<int>();
      s.failure_fraction = optional_from(j, "failure_fraction");
      s.mean_height_error = optional_from(j, "mean_height_error");
      s.mean_speed_error = optional_from(j, "mean_speed_error");
      r.methods.push_back(s);
    }
    r.paired_cases = doc.at("paired_cases").get<int>();
    r.height_ratio = optional_from(doc, "height_ratio");
    r.speed_ratio = optional_from(doc, "speed_ratio");
  } catch (const json::exception& e) {
    bad_config(std::string("report: ") + e.what());
  }
  return r;
}

std::vector<fs::path> emit_report(const SweepReport& report, Format format, const fs::path& dir) {
  make_dir(dir);
  std::vector<fs::path> written;
  if (format == Format::Csv) {
    std::ostringstream rows, summary;
    write_csv(report, rows);
    write_summary_csv(report, summary);
    written = {dir / "report.csv", dir / "summary.csv"};
    write_file(written[0], rows.str());
    write_file(written[1], summary.str());
  } else {
    written = {dir / "report.json"};
    write_file(written[0], to_json(report).dump(2) + "\n");
  }
  return written;
}

std::vector<SimTrace::Sample> time_series(const MotionPlan& plan, double disturbance, const SimConfig& sim, double dt) {
  if (!plan.task) throw Error(ErrorCode::InvalidPlan, "plan has no task");
  SimTrace trace;
  simulate_step(plan, apex_state(plan, plan.task->y0, plan.task->xd0), disturbance, sim, &trace);
  return trace.sample(dt);
}

void write_time_series(const std::vector<SimTrace::Sample>& samples, std::ostream& out) {
  out << "t,mode,x,y,xdot,ydot,r0,r0dot,rp,force\n";
  for (const auto& s : samples) {
    const State& w = s.world;
    out << format_number(s.t) << ',' << to_string(s.mode) << ',' << format_number(w.x) << ',' << format_number(w.y)
        << ',' << format_number(w.xdot) << ',' << format_number(w.ydot) << ',' << format_number(w.r0) << ','
        << format_number(w.r0dot) << ',' << format_number(w.rp) << ',' << format_number(s.force) << '\n';
  }
}

}  // namespace aslip
