#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "qml/eikonal.hpp"
#include "qml/flow.hpp"
#include "qml/geometry.hpp"
#include "qml/oscillatory.hpp"
#include "qml/quasimode.hpp"

namespace qml::cli {

namespace {

namespace fs = std::filesystem;

// Outcome of a subcommand before it is wrapped into the report.
struct Outcome {
  bool pass = true;
  std::string reason = "ok";
  std::string message;
  json result = json::object();
  std::vector<std::string> artifacts;
};

struct Context {
  json config;
  Obj root;
  Common common;
  fs::path out;
  int jobs;
};

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json point_json(const PhasePoint& p) { return {{"x", vec_json(p.x)}, {"xi", vec_json(p.xi)}}; }

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

json fit_json(const ScalingFit& f) {
  json samples = json::array();
  for (const auto& s : f.samples)
    samples.push_back({{"parameter", num(s.parameter)}, {"value", num(s.value)}, {"rows", s.rows}, {"cols", s.cols}});
  return {{"slope", num(f.slope)}, {"intercept", num(f.intercept)}, {"r2", num(f.r2)}, {"target", num(f.target)},
          {"margin", num(f.margin)}, {"pass", f.pass}, {"samples", samples}};
}

std::string p_label(double p) {
  if (std::isinf(p)) return "inf";
  std::ostringstream s;
  s.precision(17);
  s << p;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const SymbolFn& need_symbol(const Context& c) {
  if (!c.common.symbol) throw ConfigError("this command needs a symbol");
  return *c.common.symbol;
}

const PhasePoint& need_base(const Context& c, bool characteristic) {
  if (!c.common.base) throw ConfigError("this command needs base_point");
  if (characteristic) {
    const double pv = need_symbol(c)(*c.common.base);
    if (!(std::abs(pv) < 1e-8))
      throw ConfigError("base_point is not characteristic: |p| = " + std::to_string(std::abs(pv)) + " >= 1e-8");
  }
  return *c.common.base;
}

// ---- check ----

Outcome cmd_check(Context& c) {
  const SymbolFn& p = need_symbol(c);
  if (!c.common.hypersurface) throw ConfigError("check needs hypersurface");
  if (c.common.base) need_base(c, true);
  Region region = read_region(c.root, c.common);
  Thresholds th;
  if (auto t = c.root.optional_child("thresholds")) {
    th.a1 = t->number("a1", th.a1);
    th.a2 = t->number("a2", th.a2);
    th.a3 = t->number("a3", th.a3);
    t->finish();
  }
  std::size_t max_points = 200;
  if (auto o = c.root.optional_child("check")) {
    const long long m = o->integer("max_points", 200);
    if (m < 1) throw ConfigError("check.max_points must be >= 1");
    max_points = static_cast<std::size_t>(m);
    o->finish();
  }
  c.root.finish();

  const GeometryReport g = check_geometry(p, *c.common.hypersurface, region, max_points, th, c.jobs);
  Outcome out;
  json tang = json::array();
  for (const auto& t : g.a3.tangencies)
    tang.push_back({{"point", point_json(t.point)},
                    {"rdot", num(t.rdot)},
                    {"rddot", num(t.rddot)},
                    {"grad_r", num(t.grad_r)},
                    {"rddot_normalized", num(t.rddot_normalized())}});
  out.result = {
      {"sample", {{"attempted", g.sample.attempted}, {"succeeded", g.sample.succeeded}, {"points", g.sample.points.size()}}},
      {"A1",
       {{"verdict", to_string(g.a1.verdict)},
        {"threshold", num(g.a1.threshold)},
        {"min_grad", num(g.a1.min_grad)},
        {"witness", point_json(g.a1.witness)}}},
      {"A2",
       {{"verdict", to_string(g.a2.verdict)},
        {"threshold", num(g.a2.threshold)},
        {"sign", g.a2.sign},
        {"min_abs_eig", num(g.a2.min_abs_eig)},
        {"witness", point_json(g.a2.witness)},
        {"witness_form", matrix_json(g.a2.witness_form)},
        {"reason", g.a2.reason}}},
      {"A3",
       {{"verdict", to_string(g.a3.verdict)},
        {"threshold", num(g.a3.threshold)},
        {"base_points", g.a3.base_points},
        {"curves", g.a3.curves},
        {"min_abs_rddot", num(g.a3.min_abs_rddot)},
        {"witness", point_json(g.a3.witness)},
        {"tangencies", tang},
        {"reason", g.a3.reason}}}};
  if (!g.passed()) {
    out.pass = false;
    out.message = g.failure_reason();
    out.reason = g.a1.verdict == Verdict::Fail ? "a1_fail" : g.a2.verdict == Verdict::Fail ? "a2_fail" : "a3_fail";
  }
  return out;
}

// ---- flow ----

Outcome cmd_flow(Context& c) {
  const SymbolFn& p = need_symbol(c);
  const PhasePoint& init = need_base(c, false);
  Obj o = c.root.child("flow");
  const auto span = o.numbers("span");
  if (span.size() != 2 || span[0] == span[1]) throw ConfigError("flow.span must be [s0, s1] with s0 != s1");
  FlowOptions fo;
  fo.tol = o.number("tol", 1e-10);
  const long long ns = o.integer("samples", 101);
  if (ns < 2) throw ConfigError("flow.samples must be >= 2");
  fo.samples = static_cast<int>(ns);
  const double max_drift = o.number("max_drift", 1e-9);
  o.finish();
  c.root.finish();
  if (!(fo.tol > 0.0)) throw ConfigError("flow.tol must be positive");

  const Trajectory tr = integrate_flow(p, init, {span[0], span[1]}, fo);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr, p);
  write_text(c.out / "trajectory.csv", csv.str());

  Outcome out;
  out.artifacts.push_back("trajectory.csv");
  out.result = {{"samples", tr.samples.size()},
                {"tolerance", num(tr.tolerance)},
                {"max_drift", num(tr.max_drift)},
                {"max_drift_allowed", num(max_drift)},
                {"accepted_steps", tr.accepted_steps},
                {"rejected_steps", tr.rejected_steps},
                {"initial", point_json(tr.samples.front().state)},
                {"final", point_json(tr.samples.back().state)}};
  if (c.common.hypersurface) {
    const RDerivatives d = r_derivatives(p, *c.common.hypersurface, init);
    out.result["rdot"] = num(d.rdot);
    out.result["rddot"] = num(d.rddot);
  }
  if (!(tr.max_drift <= max_drift)) {
    out.pass = false;
    out.reason = "hamiltonian_drift";
    out.message = "max |p - p(init)| = " + std::to_string(tr.max_drift) + " exceeds " + std::to_string(max_drift);
  }
  return out;
}

// ---- fold ----

json quantities_json(const FoldQuantities& q) { return {{"d3_tnn", num(q.d3_tnn)}, {"d3_ttn", num(q.d3_ttn)}}; }

json map_json(const MapClassification& m) {
  return {{"class", to_string(m.cls)}, {"det", num(m.det)}, {"d_det", num(m.d_det)}, {"rank", m.rank}, {"reason", m.reason}};
}

Outcome cmd_fold(Context& c) {
  const SymbolFn& p = need_symbol(c);
  const PhasePoint& base = need_base(c, true);
  FoldOptions fo;
  double agreement = 1e-3;
  if (auto o = c.root.optional_child("fold")) {
    fo.threshold = o->number("threshold", fo.threshold);
    fo.numeric = o->boolean("numeric", fo.numeric);
    fo.step = o->number("step", fo.step);
    agreement = o->number("agreement", agreement);
    o->finish();
  }
  c.root.finish();
  if (!(fo.step > 0.0) || !(fo.threshold > 0.0) || !(agreement > 0.0))
    throw ConfigError("fold.step, fold.threshold and fold.agreement must be positive");
  fo.phase.jobs = c.jobs;

  const FoldReport rep = analyze_fold(p, c.common.hypersurface, base, fo);
  Outcome out;
  out.result = {{"base", point_json(rep.base)},
                {"threshold", num(rep.threshold)},
                {"e0", num(rep.e0)},
                {"closed", quantities_json(rep.closed)},
                {"rddot_from_phase", num(rep.rddot_from_phase)},
                {"pi_left", to_string(rep.pi_left)},
                {"pi_right", to_string(rep.pi_right)},
                {"hj_residual", num(rep.hj_residual)},
                {"min_jacobian", num(rep.min_jacobian)}};
  if (rep.numeric) out.result["numeric"] = quantities_json(*rep.numeric);
  if (rep.rddot_flow) out.result["rddot_flow"] = num(*rep.rddot_flow);
  if (rep.pi_left_map) out.result["pi_left_map"] = map_json(*rep.pi_left_map);
  if (rep.pi_right_map) out.result["pi_right_map"] = map_json(*rep.pi_right_map);

  if (fo.numeric) {
    const int n = p.dimension();
    const ReducedSymbol a(p, base.xi[0]);
    std::vector<double> w(static_cast<std::size_t>(2 * n - 1));
    for (int i = 0; i < n; ++i) w[i] = base.x[i];
    for (int k = 0; k < n - 1; ++k) w[static_cast<std::size_t>(n + k)] = base.xi[k + 1];
    std::ostringstream csv;
    write_phase_csv(csv, fold_stencil_table(a, w, fo.step, fo.phase));
    write_text(c.out / "fold_phase.csv", csv.str());
    out.artifacts.push_back("fold_phase.csv");
  }

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  std::string reason, message;
  if (rep.pi_left != FoldClass::Fold) {
    reason = "pi_left_not_fold";
    message = std::string("pi_L is ") + to_string(rep.pi_left);
  } else if (rep.pi_right != FoldClass::Fold) {
    reason = "pi_right_not_fold";
    message = std::string("pi_R is ") + to_string(rep.pi_right);
  } else if (rep.numeric && (rel(rep.numeric->d3_tnn, rep.closed.d3_tnn) > agreement ||
                             rel(rep.numeric->d3_ttn, rep.closed.d3_ttn) > agreement)) {
    reason = "numeric_mismatch";
    message = "numeric fold quantities differ from the closed forms by more than the agreement tolerance";
  } else if (rep.rddot_flow && rel(rep.rddot_from_phase, *rep.rddot_flow) > agreement) {
    reason = "rddot_mismatch";
    message = "-e0 d3_ttn phi does not match rddot from the flow";
  }
  if (!reason.empty()) {
    out.pass = false;
    out.reason = reason;
    out.message = message;
  }
  return out;
}

// ---- opnorm ----

Outcome cmd_opnorm(Context& c) {
  Obj o = c.root.child("opnorm");
  const std::string mode = o.string("mode", "lambda");
  const auto ladder = o.ladder("ladder");
  if (ladder.size() < 4) throw ConfigError("opnorm.ladder needs >= 4 values");
  NormOptions norm;
  norm.tol = o.number("tol", 1e-9);
  norm.max_iterations = static_cast<int>(o.integer("max_iterations", 20000));
  const double ppp = o.number("points_per_period", 6.0);
  const double min_r2 = o.number("min_r2", 0.99);
  if (!(norm.tol > 0.0) || norm.max_iterations < 1 || !(ppp >= 2.0))
    throw ConfigError("opnorm.tol > 0, max_iterations >= 1 and points_per_period >= 2 are required");

  Outcome out;
  std::vector<ScalingSample> samples;
  double target = 0.0, margin = 0.0;
  if (mode == "lambda") {
    const std::string phase = o.string("phase");
    BenchmarkPhase bp;
    if (phase == "bilinear") {
      bp = BenchmarkPhase::Bilinear;
      target = -0.5;
    } else if (phase == "cubic") {
      bp = BenchmarkPhase::Cubic;
      target = -1.0 / 3.0;
    } else {
      throw ConfigError("opnorm.phase must be \"bilinear\" or \"cubic\"");
    }
    LambdaSweepOptions lo;
    lo.support = o.number("support", bp == BenchmarkPhase::Bilinear ? 0.5 : 0.75);
    lo.points_per_period = ppp;
    lo.norm = norm;
    lo.jobs = c.jobs;
    target = o.number("target", target);
    margin = o.number("margin", 0.03);
    o.finish();
    c.root.finish();
    if (!(lo.support > 0.0)) throw ConfigError("opnorm.support must be positive");
    samples = lambda_sweep(bp, ladder, lo);
    out.result["phase"] = phase;
    out.result["support"] = num(lo.support);
  } else if (mode == "h") {
    const SymbolFn& p = need_symbol(c);
    if (p.dimension() != 2) throw ConfigError("opnorm mode \"h\" needs dimension 2");
    ZOptions zo;
    zo.support = o.number("support", 0.75);
    zo.points_per_period = ppp;
    zo.norm = norm;
    zo.jobs = c.jobs;
    const double step = o.number("step", 0.1);
    const double tau_seed = o.number("tau_seed", 0.0);
    target = o.number("target", -1.0 / 6.0);
    margin = o.number("margin", 0.04);
    o.finish();
    c.root.finish();
    if (!(zo.support > 0.0) || !(step > 0.0)) throw ConfigError("opnorm.support and opnorm.step must be positive");
    for (double h : ladder)
      if (!(h < 1.0)) throw ConfigError("opnorm.ladder values must be < 1 in mode \"h\"");
    const ReducedSymbol a(p, tau_seed);
    const ZPhase zp(a, 4.0 * zo.support, step, c.jobs);
    samples = z_sweep(zp, ladder, zo);
    out.result["support"] = num(zo.support);
    out.result["split_error"] = num(zp.split_error());
    out.result["hj_residual"] = num(zp.hj_residual());
  } else {
    throw ConfigError("opnorm.mode must be \"lambda\" or \"h\"");
  }

  std::ostringstream csv;
  write_sweep_csv(csv, samples);
  write_text(c.out / "opnorm_sweep.csv", csv.str());
  out.artifacts.push_back("opnorm_sweep.csv");
  const ScalingFit fit = scaling_fit(samples, target, margin);
  out.result["mode"] = mode;
  out.result["fit"] = fit_json(fit);
  out.result["min_r2"] = num(min_r2);
  if (!fit.pass) {
    out.pass = false;
    out.reason = "fit_out_of_margin";
    out.message = "slope " + std::to_string(fit.slope) + " outside " + std::to_string(target) + " +- " +
                  std::to_string(margin);
  } else if (fit.r2 < min_r2) {
    out.pass = false;
    out.reason = "r2_below_minimum";
    out.message = "R^2 = " + std::to_string(fit.r2) + " below " + std::to_string(min_r2);
  }
  return out;
}

// ---- quasimode ----

Outcome cmd_quasimode(Context& c) {
  if (c.common.symbol && c.common.symbol->builtin() != "model-fold")
    throw ConfigError("quasimode is built for the model-fold symbol only");
  Obj o = c.root.child("quasimode");
  const auto ladder = o.ladder("ladder");
  if (ladder.size() < 4) throw ConfigError("quasimode.ladder needs >= 4 values");
  for (double h : ladder)
    if (!(h < 1.0)) throw ConfigError("quasimode.ladder values must lie in (0, 1)");
  const auto ps = o.exponents_list("p");
  for (double p : ps)
    if (!(p >= 2.0)) throw ConfigError("quasimode.p values must be >= 2");
  QuasimodeOptions qo;
  qo.epsilon = o.number("epsilon", qo.epsilon);
  qo.points_per_period = o.number("points_per_period", qo.points_per_period);
  const long long budget = o.integer("memory_budget", static_cast<long long>(qo.memory_budget));
  if (budget < 1) throw ConfigError("quasimode.memory_budget must be positive");
  qo.memory_budget = static_cast<std::size_t>(budget);
  const std::string method = o.string("residual", "spectral");
  if (method == "spectral")
    qo.residual = ResidualMethod::Spectral;
  else if (method == "fourth-order")
    qo.residual = ResidualMethod::FourthOrder;
  else
    throw ConfigError("quasimode.residual must be \"spectral\" or \"fourth-order\"");
  const double margin = o.number("margin", 0.05);
  o.finish();
  c.root.finish();
  if (!(qo.epsilon > 0.0) || !(qo.points_per_period > 0.0)) throw ConfigError("quasimode.epsilon and points_per_period must be positive");

  const QuasimodeExperiment ex = h_scaling_experiment(c.common.dimension, ps, ladder, qo, margin, c.jobs);
  std::ostringstream csv, py;
  write_quasimode_csv(csv, ex);
  write_plot_script(py, "quasimode_sweep.csv", ex);
  write_text(c.out / "quasimode_sweep.csv", csv.str());
  write_text(c.out / "quasimode_plot.py", py.str());

  Outcome out;
  out.artifacts = {"quasimode_sweep.csv", "quasimode_plot.py"};
  json fits = json::array();
  for (std::size_t j = 0; j < ps.size(); ++j) {
    json f = fit_json(ex.fits[j]);
    f["p"] = p_label(ps[j]);
    f["sharp"] = static_cast<bool>(ex.sharp[j]);
    fits.push_back(f);
  }
  json samples = json::array();
  for (const auto& s : ex.samples)
    samples.push_back({{"h", num(s.h)},
                       {"f_l2", num(s.f_l2)},
                       {"u_l2", num(s.u_l2)},
                       {"residual", num(s.residual)},
                       {"l2_restricted", num(s.l2_restricted)},
                       {"ceiling_ratio", num(s.ceiling_ratio)},
                       {"fourier_nodes", s.fourier_nodes}});
  out.result = {{"dimension", ex.n},
                {"epsilon", num(ex.epsilon)},
                {"fits", fits},
                {"residual_fit", fit_json(ex.residual_fit)},
                {"residual_ok", ex.residual_ok},
                {"ceiling_constant", num(ex.ceiling_constant)},
                {"ceiling_slope", num(ex.ceiling_slope)},
                {"ceiling_ok", ex.ceiling_ok},
                {"f_bounded", ex.f_bounded},
                {"u_stable", ex.u_stable},
                {"samples", samples}};
  if (!ex.passed()) {
    out.pass = false;
    out.reason = "quasimode_check_failed";
    out.message = ex.failure_reason();
  }
  return out;
}

// ---- table ----

Outcome cmd_table(Context& c) {
  Obj o = c.root.child("table");
  const auto ns = o.numbers("n");
  const auto ps = o.exponents_list("p");
  o.finish();
  c.root.finish();
  for (double n : ns)
    if (n != std::floor(n) || n < 2) throw ConfigError("table.n entries must be integers >= 2");
  for (double p : ps)
    if (!(p >= 2.0)) throw ConfigError("table.p entries must be >= 2");

  std::ostringstream csv;
  csv << "n,p,delta,delta_tilde\n";
  json rows = json::array();
  char buf[64];
  for (double nd : ns)
    for (double p : ps) {
      const int n = static_cast<int>(nd);
      const Exponents e = exponents(n, p);
      std::snprintf(buf, sizeof buf, "%.17g", e.delta);
      csv << n << "," << p_label(p) << "," << buf << ",";
      if (e.delta_tilde) {
        std::snprintf(buf, sizeof buf, "%.17g", *e.delta_tilde);
        csv << buf;
      }
      csv << "\n";
      rows.push_back({{"n", n},
                      {"p", p_label(p)},
                      {"delta", num(e.delta)},
                      {"delta_tilde", e.delta_tilde ? num(*e.delta_tilde) : json(nullptr)},
                      {"critical_p", num(critical_exponent(n))}});
    }
  write_text(c.out / "exponents.csv", csv.str());
  Outcome out;
  out.artifacts.push_back("exponents.csv");
  out.result = {{"rows", rows}};
  return out;
}

const std::map<std::string, std::function<Outcome(Context&)>>& table() {
  static const std::map<std::string, std::function<Outcome(Context&)>> t{
      {"check", cmd_check}, {"flow", cmd_flow},         {"fold", cmd_fold},
      {"opnorm", cmd_opnorm}, {"quasimode", cmd_quasimode}, {"table", cmd_table}};
  return t;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"check", "flow", "fold", "opnorm", "quasimode", "table"};
  return c;
}

int run(const RunOptions& opt, std::ostream& log) {
  const fs::path out_dir = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    log << "error: cannot create output directory '" << out_dir.string() << "'\n";
    return kConfigError;
  }

  json report;
  report["command"] = opt.command;
  report["timestamp"] = timestamp_utc();
  report["config_path"] = fs::path(opt.config_path).filename().string();
  report["artifacts"] = json::array();
  report["config"] = nullptr;
  report["result"] = nullptr;

  int code = kPass;
  try {
    if (!table().count(opt.command)) throw ConfigError("unknown command '" + opt.command + "'");
    if (opt.jobs < 1) throw ConfigError("--jobs must be >= 1");
    json cfg = load_config(opt.config_path);
    report["config"] = cfg;
    Obj root(cfg, "config");
    root.string("description", "");
    Common common = read_common(root, opt.seed);
    report["seed"] = common.seed;
    Context ctx{cfg, root, common, out_dir, opt.jobs};
    Outcome o;
    try {
      o = table().at(opt.command)(ctx);
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    } catch (const DimensionError& e) {
      throw ConfigError(e.what());
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    } catch (const ResolutionError& e) {
      throw ConfigError(std::string("resolution: ") + e.what());
    } catch (const ResourceError& e) {
      throw ConfigError(std::string("memory budget: ") + e.what());
    }
    report["status"] = o.pass ? "pass" : "fail";
    report["reason"] = o.reason;
    report["message"] = o.message;
    report["result"] = o.result;
    report["artifacts"] = o.artifacts;
    code = o.pass ? kPass : kCheckFailed;
  } catch (const ConfigError& e) {
    report["status"] = "error";
    report["reason"] = "config_error";
    report["message"] = e.what();
    code = kConfigError;
  } catch (const qml::Error& e) {
    // Numerical failure during a well-formed run.
    report["status"] = "fail";
    report["reason"] = "numerical_failure";
    report["message"] = e.what();
    code = kCheckFailed;
  }
  report["exit_code"] = code;
  if (!report.contains("seed")) report["seed"] = opt.seed ? json(*opt.seed) : json(nullptr);

  const std::string name = (opt.command.empty() ? std::string("qml") : opt.command) + "_report.json";
  try {
    write_text(out_dir / name, report.dump(2) + "\n");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
  log << opt.command << ": " << report["status"].get<std::string>();
  if (code != kPass) log << " (" << report["reason"].get<std::string>() << ": " << report["message"].get<std::string>() << ")";
  log << "\n";
  return code;
}

}  // namespace qml::cli
