#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "artifacts.hpp"
#include "curve_expr.hpp"
#include "ovma/affine_flow.hpp"
#include "ovma/domain.hpp"
#include "ovma/errors.hpp"
#include "ovma/exact_solutions.hpp"
#include "ovma/ma_solver.hpp"
#include "ovma/overdetermined.hpp"
#include "ovma/spectral.hpp"
#include "ovma/tensor_core.hpp"

namespace ovma::cli {
namespace {

using json = nlohmann::ordered_json;

// Raised when a run finishes but misses its contract; maps to exit 1.
class ContractBreach : public Error {
 public:
  ContractBreach(const std::string& what, json detail) : Error(what), detail_(std::move(detail)) {}
  const json& detail() const { return detail_; }

 private:
  json detail_;
};

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ContractBreach*>(&e)) return "ContractBreach";
  if (dynamic_cast<const FlowConvexityError*>(&e)) return "FlowConvexityError";
  if (dynamic_cast<const ArgumentError*>(&e)) return "ArgumentError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
  if (dynamic_cast<const ConvexityError*>(&e)) return "ConvexityError";
  if (dynamic_cast<const ConstructionError*>(&e)) return "ConstructionError";
  if (dynamic_cast<const InconsistencyError*>(&e)) return "InconsistencyError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const IntegratorError*>(&e)) return "IntegratorError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

json num(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

std::string curve_csv(const SupportCurve& c) {
  std::string s = "theta,h\n";
  for (int j = 0; j < c.size(); ++j) s += fmt(c.theta(j)) + "," + fmt(c.h()[j]) + "\n";
  return s;
}

std::vector<Vec2> curve_points(const SupportCurve& c) {
  const std::vector<double> dh = spectral::derivative(c.h(), 1);
  std::vector<Vec2> p(c.size());
  for (int j = 0; j < c.size(); ++j) {
    const double t = c.theta(j), h = c.h()[j];
    p[j] = {h * std::cos(t) - dh[j] * std::sin(t), h * std::sin(t) + dh[j] * std::cos(t)};
  }
  return p;
}

std::string flow_svg(const std::vector<FlowState>& series) {
  double r = 0.0;
  for (const Vec2& p : curve_points(series.front().curve)) r = std::max(r, norm(p));
  r = std::ceil(11.0 * r) / 10.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << fmt(-r) << " " << fmt(-r) << " " << fmt(2 * r)
    << " " << fmt(2 * r) << "\" width=\"600\" height=\"600\">\n";
  s << "<g fill=\"none\" stroke=\"black\" stroke-width=\"" << fmt(r / 300.0) << "\" transform=\"scale(1,-1)\">\n";
  for (const FlowState& st : series) {
    const std::vector<Vec2> pts = curve_points(st.curve);
    s << "<path d=\"M";
    for (std::size_t i = 0; i < pts.size(); ++i) s << (i ? " L" : "") << fmt(pts[i].x) << "," << fmt(pts[i].y);
    s << " Z\"/>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

// ---- domain options shared by solve and shape-derivative

struct DomainOpts {
  std::string kind = "ellipse";
  double a = 1.0, c = 1.0, cx = 0.0, cy = 0.0, p = 4.0;
  std::string support;

  void bind(CLI::App* app) {
    app->add_option("--domain", kind, "ellipse | superellipse | support")
        ->check(CLI::IsMember({"ellipse", "superellipse", "support"}))
        ->capture_default_str();
    app->add_option("--a", a, "ellipse: domain a^2 x^2 + y^2/a^2 <= c")->capture_default_str();
    app->add_option("--c", c, "ellipse: level c")->capture_default_str();
    app->add_option("--cx", cx, "ellipse centre x")->capture_default_str();
    app->add_option("--cy", cy, "ellipse centre y")->capture_default_str();
    app->add_option("--p", p, "superellipse exponent (>= 2)")->capture_default_str();
    app->add_option("--support", support, "support function expression in t, e.g. 1+0.05*cos(3t)");
  }
  void to_json(json& j) const {
    j["domain"] = kind;
    if (kind == "ellipse") {
      j["a"] = a;
      j["c"] = c;
      j["cx"] = cx;
      j["cy"] = cy;
    } else if (kind == "superellipse") {
      j["p"] = p;
    } else {
      j["support"] = support;
    }
  }
  DomainPtr build() const {
    if (kind == "ellipse") return make_ellipse_domain(EllipsoidSpec::ellipse(a, c, cx, cy));
    if (kind == "superellipse") return make_superellipse_domain(p);
    if (support.empty()) throw ArgumentError("--domain support needs --support");
    return make_support_domain(CurveExpr::parse(support).series());
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  ArtifactDir dir;
};

// ---- identities

struct IdentitiesCmd {
  int n = 3;
  int trials = 1000;
  std::uint64_t seed = 42;

  void bind(CLI::App* app) {
    app->add_option("--n", n, "dimension")->check(CLI::Range(2, 6))->capture_default_str();
    app->add_option("--trials", trials, "sampled points")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--seed", seed, "base seed")->capture_default_str();
  }
  json config() const { return {{"n", n}, {"trials", trials}, {"seed", seed}}; }

  int run(Context& ctx) const {
    const IdentitySweep s = identity_sweep(n, trials, seed);
    struct Check {
      const char* name;
      double value, tol;
      bool upper;
    };
    std::vector<Check> checks = {
        {"lphi_rel", s.max_lphi_rel, 1e-8, true},     {"claim2_min", s.min_claim2, -1e-10, false},
        {"cofactor", s.max_cofactor, 1e-10, true},    {"euler", s.max_euler, 1e-8, true},
        {"constraint", s.max_constraint, 1e-10, true},
    };
    if (n == 2) {
      checks.push_back({"planar_det", s.max_planar_det, 1e-10, true});
      checks.push_back({"eq2_rel", s.max_eq2_rel, 1e-8, true});
    }
    json report;
    report["n"] = n;
    report["trials"] = trials;
    report["seed"] = seed;
    bool ok = true;
    json items = json::array();
    for (const Check& c : checks) {
      const bool pass = c.upper ? c.value <= c.tol : c.value >= c.tol;
      ok = ok && pass;
      items.push_back({{"identity", c.name}, {"value", num(c.value)}, {"tolerance", c.tol}, {"passed", pass}});
    }
    report["identities"] = items;
    report["worst_seed"] = s.worst_seed;
    report["passed"] = ok;
    if (!ok) {
      const PointData pd = sample_constrained_point(n, s.worst_seed);
      report["offending"] = {{"seed", s.worst_seed},
                             {"hessian", pd.hessian.dense()},
                             {"third", pd.third.dense()},
                             {"grad", pd.grad}};
    }
    ctx.dir.write_json("identities.json", report);
    ctx.out << report.dump(2) << "\n";
    if (!ok) throw ContractBreach("identity tolerance breached", report);
    return 0;
  }
};

// ---- solve

struct SolveCmd {
  DomainOpts dom;
  int grid = 128;
  double tol = 1e-10;
  int trace_samples = 512;
  bool serial = false;

  void bind(CLI::App* app) {
    dom.bind(app);
    app->add_option("--grid", grid, "lattice size N")->check(CLI::Range(16, 4096))->capture_default_str();
    app->add_option("--tol", tol, "residual tolerance (>= 1e-12)")->capture_default_str();
    app->add_option("--trace-samples", trace_samples, "boundary samples")->capture_default_str();
    app->add_flag("--serial", serial, "serial kernels");
  }
  json config() const {
    json j;
    dom.to_json(j);
    j["grid"] = grid;
    j["tol"] = tol;
    j["trace_samples"] = trace_samples;
    j["serial"] = serial;
    return j;
  }

  int run(Context& ctx) const {
    const DomainPtr d = dom.build();
    SolveOptions so;
    so.tol = tol;
    so.parallel = !serial;
    const ScalarField f = solve(discretize(d, grid), so);
    const GridDomain& g = *f.grid;

    std::string csv = "i,j,x,y,u\n";
    for (int k = 0; k < g.size(); ++k) {
      const Vec2 p = g.point(k);
      csv += std::to_string(g.node_i[k]) + "," + std::to_string(g.node_j[k]) + "," + fmt(p.x) + "," + fmt(p.y) +
             "," + fmt(f.u[k]) + "\n";
    }
    ctx.dir.write("u.csv", csv);
    const json cert = {{"resid_inf", f.certificate.resid_inf},
                       {"newton_iters", f.certificate.newton_iters},
                       {"N", f.certificate.N},
                       {"tol", f.certificate.tol}};
    ctx.dir.write_json("certificate.json", cert);

    const BoundaryTrace tr = boundary_trace(f, trace_samples);
    std::string tcsv = "x,y,nx,ny,curvature,grad_norm,w,degenerate\n";
    for (const TraceSample& s : tr.samples)
      tcsv += fmt(s.point.x) + "," + fmt(s.point.y) + "," + fmt(s.normal.x) + "," + fmt(s.normal.y) + "," +
              fmt(s.curvature) + "," + fmt(s.grad_norm) + "," + fmt(s.w) + "," + (s.degenerate ? "1" : "0") + "\n";
    ctx.dir.write("trace.csv", tcsv);

    const TraceStats ts = trace_stats(tr);
    json rep;
    rep["certificate"] = cert;
    rep["history"] = f.history;
    rep["min_frame_product"] = f.min_frame_product;
    rep["interior_nodes"] = g.size();
    rep["mean_w"] = ts.mean_w;
    rep["min_w"] = ts.min_w;
    rep["max_w"] = ts.max_w;
    rep["rel_spread"] = ts.relative_spread;
    rep["degenerate"] = tr.degenerate_count;
    rep["reliable"] = tr.reliable;
    rep["pohozaev_resid"] = pohozaev_residual(f, tr).residual;
    rep["sobolev_s"] = sobolev_s(f);
    rep["max_phi"] = num(phi_field(f).max_phi);
    if (dom.kind == "ellipse") {
      double e = 0.0;
      for (int k = 0; k < g.size(); ++k) {
        const Vec2 p = g.point(k);
        const double x = dom.a * (p.x - dom.cx), y = (p.y - dom.cy) / dom.a;
        e = std::max(e, std::abs(f.u[k] - 0.5 * (x * x + y * y - dom.c)));
      }
      rep["sup_error_exact"] = e;
    }
    ctx.dir.write_json("report.json", rep);
    ctx.out << rep.dump(2) << "\n";
    return 0;
  }
};

// ---- scan

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" ", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ArgumentError("bad number '" + tok + "' in list '" + s + "'");
    }
  }
  if (v.empty()) throw ArgumentError("empty list '" + s + "'");
  return v;
}

std::string short_num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

struct ScanCmd {
  std::vector<std::string> family{"ellipses:1,1.5,2"};
  int grid = 128;
  int trace_samples = 512;
  int jobs = 1;
  double tol = 1e-10;
  double max_spread = -1.0;
  mutable std::map<std::string, std::string> build_errors_;

  void bind(CLI::App* app) {
    app->add_option("--family", family,
                    "ellipses:<aspects> | superellipse:<p list> | perturbed:<eps list> (1+eps cos 3t) | "
                    "support:<expr>; repeatable")
        ->capture_default_str();
    app->add_option("--grid", grid, "lattice size N")->check(CLI::Range(16, 4096))->capture_default_str();
    app->add_option("--trace-samples", trace_samples, "boundary samples")->capture_default_str();
    app->add_option("--jobs", jobs, "concurrent members")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--tol", tol, "solver tolerance")->capture_default_str();
    app->add_option("--max-spread", max_spread, "fail when any rel_spread exceeds this (off if < 0)")
        ->capture_default_str();
  }
  json config() const {
    return {{"family", family}, {"grid", grid},   {"trace_samples", trace_samples},
            {"jobs", jobs},     {"tol", tol},     {"max_spread", max_spread}};
  }

  // members plus a flag marking ellipses (spread contract 3%)
  std::vector<std::pair<ScanMember, bool>> members() const {
    std::vector<std::pair<ScanMember, bool>> out;
    for (const std::string& f : family) {
      const auto colon = f.find(':');
      if (colon == std::string::npos) throw ArgumentError("family '" + f + "' lacks ':'");
      const std::string kind = f.substr(0, colon), arg = f.substr(colon + 1);
      if (kind == "ellipses") {
        for (double r : parse_list(arg)) {
          if (!(r >= 1.0)) throw ArgumentError("aspect ratios must be >= 1");
          out.push_back({{"ellipse_" + short_num(r), make_ellipse_domain(EllipsoidSpec::ellipse(std::sqrt(r), 1.0))},
                         true});
        }
      } else if (kind == "superellipse") {
        for (double p : parse_list(arg))
          out.push_back({{"superellipse_" + short_num(p), make_superellipse_domain(p)}, false});
      } else if (kind == "perturbed") {
        for (double e : parse_list(arg)) {
          const std::string id = "perturbed_" + short_num(e);
          DomainPtr d;
          try {
            d = make_support_domain(spectral::TrigSeries(1.0, {0.0, 0.0, e}, {0.0, 0.0, 0.0}));
          } catch (const Error& err) {
            build_errors_[id] = err.what();  // reported as a failed member
          }
          out.push_back({{id, d}, false});
        }
      } else if (kind == "support") {
        out.push_back({{"support_" + std::to_string(out.size()), make_support_domain(CurveExpr::parse(arg).series())},
                       false});
      } else {
        throw ArgumentError("unknown family kind '" + kind + "'");
      }
    }
    return out;
  }

  int run(Context& ctx) const {
    const auto tagged = members();
    std::vector<ScanMember> fam;
    for (const auto& m : tagged) fam.push_back(m.first);
    ScanOptions so;
    so.N = grid;
    so.trace_samples = trace_samples;
    so.jobs = jobs;
    so.solve.tol = tol;
    std::vector<StationarityReport> reps = stationarity_scan(fam, so);
    for (StationarityReport& r : reps)
      if (auto it = build_errors_.find(r.domain_id); it != build_errors_.end()) r.error = it->second;

    std::string csv = "domain_id,mean_w,min_w,max_w,rel_spread,pohozaev_resid,sobolev_s,sobolev_S\n";
    json arr = json::array();
    json breaches = json::array();
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const StationarityReport& r = reps[i];
      const bool failed = !r.error.empty();
      auto val = [&](double v) { return failed ? std::nan("") : v; };
      csv += r.domain_id + "," + fmt(val(r.mean_w)) + "," + fmt(val(r.min_w)) + "," + fmt(val(r.max_w)) + "," +
             fmt(val(r.relative_spread)) + "," + fmt(val(r.pohozaev_residual)) + "," + fmt(val(r.sobolev_s)) + "," +
             fmt(val(r.sobolev_S)) + "\n";
      json j = {{"domain_id", r.domain_id},
                {"mean_w", num(val(r.mean_w))},
                {"min_w", num(val(r.min_w))},
                {"max_w", num(val(r.max_w))},
                {"rel_spread", num(val(r.relative_spread))},
                {"pohozaev_resid", num(val(r.pohozaev_residual))},
                {"sobolev_s", num(val(r.sobolev_s))},
                {"sobolev_S", num(val(r.sobolev_S))},
                {"degenerate", r.degenerate},
                {"reliable", r.reliable}};
      if (failed) {
        j["error"] = r.error;
        breaches.push_back({{"domain_id", r.domain_id}, {"reason", r.error}});
      } else {
        const double limit = tagged[i].second ? 0.03 : max_spread;
        const double lim = max_spread >= 0.0 ? (limit >= 0.0 ? std::min(limit, max_spread) : max_spread) : limit;
        if (lim >= 0.0 && r.relative_spread > lim)
          breaches.push_back({{"domain_id", r.domain_id}, {"reason", "rel_spread " + fmt(r.relative_spread) + " > " + fmt(lim)}});
      }
      arr.push_back(j);
    }
    ctx.dir.write("scan.csv", csv);
    json rep = {{"reports", arr}, {"breaches", breaches}, {"passed", breaches.empty()}};
    ctx.dir.write_json("scan.json", rep);
    ctx.out << rep.dump(2) << "\n";
    if (!breaches.empty()) throw ContractBreach("scan contract breached", breaches);
    return 0;
  }
};

// ---- flow

struct FlowCmd {
  std::string init;
  std::vector<double> ellipse;
  long long random_seed = -1;
  int nodes = 256;
  double dt = 1e-4;
  double stop_area_frac = 0.0;
  double t_end = 0.0;
  long max_steps = 0;
  int cadence = 100;
  std::string scheme = "semi-implicit";
  double entropy_slack = 1e-6;
  bool svg = false;
  bool snapshots = false;

  void bind(CLI::App* app) {
    app->add_option("--init", init, "initial support function, e.g. 1+0.1*cos(3t)");
    app->add_option("--ellipse", ellipse, "initial ellipse semi-axes a,b")->expected(2)->delimiter(',');
    app->add_option("--random", random_seed, "initial random convex curve from this seed");
    app->add_option("--nodes", nodes, "support samples (power of two)")->capture_default_str();
    app->add_option("--dt", dt, "time step (shrunk to dt_max when needed)")->capture_default_str();
    app->add_option("--stop-area-frac", stop_area_frac, "stop at this fraction of the initial area")
        ->capture_default_str();
    app->add_option("--t-end", t_end, "stop at this time")->capture_default_str();
    app->add_option("--max-steps", max_steps, "stop after this many steps")->capture_default_str();
    app->add_option("--cadence", cadence, "record every k steps")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--scheme", scheme, "semi-implicit | explicit")
        ->check(CLI::IsMember({"semi-implicit", "explicit"}))
        ->capture_default_str();
    app->add_option("--entropy-slack", entropy_slack, "allowed entropy drop per step")->capture_default_str();
    app->add_flag("--svg", svg, "write flow.svg");
    app->add_flag("--snapshots", snapshots, "write every recorded curve");
  }
  json config() const {
    json j;
    if (!init.empty()) j["init"] = init;
    if (!ellipse.empty()) j["ellipse"] = ellipse;
    if (random_seed >= 0) j["random"] = random_seed;
    j["nodes"] = nodes;
    j["dt"] = dt;
    j["stop_area_frac"] = stop_area_frac;
    j["t_end"] = t_end;
    j["max_steps"] = max_steps;
    j["cadence"] = cadence;
    j["scheme"] = scheme;
    j["entropy_slack"] = entropy_slack;
    j["svg"] = svg;
    j["snapshots"] = snapshots;
    return j;
  }

  SupportCurve initial() const {
    const int given = !init.empty() + !ellipse.empty() + (random_seed >= 0);
    if (given != 1) throw ArgumentError("give exactly one of --init, --ellipse, --random");
    if (!init.empty()) return SupportCurve(CurveExpr::parse(init).sample(nodes));
    if (!ellipse.empty()) return ellipse_curve(ellipse[0], ellipse[1], nodes);
    return random_convex_curve(static_cast<std::uint64_t>(random_seed), nodes);
  }

  int run(Context& ctx) const {
    const SupportCurve c0 = initial();
    {
      std::vector<double> rho = spectral::derivative(c0.h(), 2);
      for (int j = 0; j < c0.size(); ++j) rho[j] += c0.h()[j];
      const double m = *std::min_element(rho.begin(), rho.end());
      if (!(m > 0.0)) throw ConvexityError("initial curve is not convex: min(h + h'') = " + fmt(m));
    }
    ctx.dir.write("curves/initial.csv", curve_csv(c0));
    FlowOptions o;
    o.dt = dt;
    o.cadence = cadence;
    o.scheme = scheme == "explicit" ? Scheme::Explicit : Scheme::SemiImplicit;
    o.entropy_slack = entropy_slack;
    o.stop.area_fraction = stop_area_frac;
    o.stop.t_end = t_end;
    o.stop.max_steps = max_steps;
    if (stop_area_frac <= 0.0 && t_end <= 0.0 && max_steps <= 0) o.stop.area_fraction = 0.1;
    FlowRun run;
    try {
      run = run_flow(c0, o);
    } catch (const FlowConvexityError& e) {
      ctx.dir.write("curves/last_valid.csv", curve_csv(e.last_valid().curve));
      throw;
    }
    std::string csv = "t,area,affine_length,entropy,ellipse_fit_resid\n";
    for (std::size_t i = 0; i < run.series.size(); ++i) {
      const FlowState& s = run.series[i];
      csv += fmt(s.t) + "," + fmt(s.diag.area) + "," + fmt(s.diag.affine_length) + "," + fmt(s.diag.entropy) + "," +
             fmt(run.fit_residuals[i]) + "\n";
    }
    ctx.dir.write("series.csv", csv);
    ctx.dir.write("curves/final.csv", curve_csv(run.series.back().curve));
    if (snapshots)
      for (std::size_t i = 0; i < run.series.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof name, "curves/record_%05zu.csv", i);
        ctx.dir.write(name, curve_csv(run.series[i].curve));
      }
    if (svg) ctx.dir.write("flow.svg", flow_svg(run.series));
    bool monotone = true;
    for (std::size_t i = 1; i < run.series.size(); ++i)
      monotone = monotone && run.series[i].diag.entropy >= run.series[i - 1].diag.entropy - entropy_slack;
    const FlowState& last = run.series.back();
    json rep = {{"steps", run.steps},
                {"records", run.series.size()},
                {"t_final", last.t},
                {"area_fraction", last.diag.area / run.series.front().diag.area},
                {"entropy_initial", run.series.front().diag.entropy},
                {"entropy_final", last.diag.entropy},
                {"petty_bound", petty_bound()},
                {"min_entropy_increment", run.min_entropy_increment},
                {"entropy_nondecreasing", monotone},
                {"max_area_rate_error", run.max_area_rate_error},
                {"final_fit_resid", run.fit_residuals.back()}};
    ctx.dir.write_json("summary.json", rep);
    ctx.out << rep.dump(2) << "\n";
    return 0;
  }
};

// ---- correspond

struct CorrespondCmd {
  double a = 1.0, c = 1.0;
  int nodes = 256;
  double dt = 1e-4;
  double t_fraction = 0.5;
  int cadence = 100;
  double max_distance = 1e-3;

  void bind(CLI::App* app) {
    app->add_option("--a", a, "ellipse a^2 x^2 + y^2/a^2 <= c")->capture_default_str();
    app->add_option("--c", c, "level c")->capture_default_str();
    app->add_option("--nodes", nodes, "support samples")->capture_default_str();
    app->add_option("--dt", dt, "time step")->capture_default_str();
    app->add_option("--t-fraction", t_fraction, "compare up to this fraction of t_E")->capture_default_str();
    app->add_option("--cadence", cadence, "compare every k steps")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--max-distance", max_distance, "contract on the sup distance")->capture_default_str();
  }
  json config() const {
    return {{"a", a},           {"c", c},           {"nodes", nodes},
            {"dt", dt},         {"t_fraction", t_fraction}, {"cadence", cadence},
            {"max_distance", max_distance}};
  }
  int run(Context& ctx) const {
    const Correspondence r = levelset_correspondence(EllipsoidSpec::ellipse(a, c), nodes, dt, t_fraction, cadence);
    std::string csv = "t,distance\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) csv += fmt(r.times[i]) + "," + fmt(r.distances[i]) + "\n";
    ctx.dir.write("correspondence.csv", csv);
    json rep = {{"t_extinction", r.t_extinction},
                {"t_last", r.times.back()},
                {"max_distance", r.max_distance},
                {"limit", max_distance},
                {"passed", r.max_distance <= max_distance}};
    ctx.dir.write_json("correspondence.json", rep);
    ctx.out << rep.dump(2) << "\n";
    if (!(r.max_distance <= max_distance)) throw ContractBreach("flow and level sets disagree", rep);
    return 0;
  }
};

// ---- shape-derivative

struct ShapeCmd {
  DomainOpts dom;
  std::string v = "1";
  double eps = 1e-3;
  int grid = 128;
  int trace_samples = 512;
  double max_rel_err = -1.0;

  void bind(CLI::App* app) {
    dom.bind(app);
    app->add_option("--v", v, "normal perturbation V(t) as an expression")->capture_default_str();
    app->add_option("--eps", eps, "perturbation size")->capture_default_str();
    app->add_option("--grid", grid, "lattice size N")->check(CLI::Range(16, 4096))->capture_default_str();
    app->add_option("--trace-samples", trace_samples, "boundary samples")->capture_default_str();
    app->add_option("--max-rel-err", max_rel_err, "contract on rel_err (off if < 0)")->capture_default_str();
  }
  json config() const {
    json j;
    dom.to_json(j);
    j["v"] = v;
    j["eps"] = eps;
    j["grid"] = grid;
    j["trace_samples"] = trace_samples;
    j["max_rel_err"] = max_rel_err;
    return j;
  }
  int run(Context& ctx) const {
    const ShapeDerivative r =
        shape_derivative_check(dom.build(), CurveExpr::parse(v).series(), eps, grid, {}, trace_samples);
    json rep = {{"s_plus", r.s_plus},
                {"s_minus", r.s_minus},
                {"fd_derivative", r.fd_derivative},
                {"hadamard_value", r.hadamard_value},
                {"rel_err", r.rel_err}};
    ctx.dir.write_json("shape_derivative.json", rep);
    ctx.out << rep.dump(2) << "\n";
    if (max_rel_err >= 0.0 && r.rel_err > max_rel_err) throw ContractBreach("rel_err above limit", rep);
    return 0;
  }
};

// ---- exact

struct ExactCmd {
  int n = 2;
  double c = 1.0;
  std::vector<double> A;
  std::vector<double> x0;

  void bind(CLI::App* app) {
    app->add_option("--n", n, "dimension")->check(CLI::Range(2, 6))->capture_default_str();
    app->add_option("--c", c, "level c")->capture_default_str();
    app->add_option("--A", A, "row-major det-1 matrix (default identity)")->delimiter(',');
    app->add_option("--x0", x0, "centre (default origin)")->delimiter(',');
  }
  EllipsoidSpec spec() const {
    EllipsoidSpec s = EllipsoidSpec::ball(n, c);
    if (!A.empty()) s.A = A;
    if (!x0.empty()) s.x0 = x0;
    s.validate();
    return s;
  }
  json config() const {
    const EllipsoidSpec s = EllipsoidSpec::ball(n, c);
    return {{"n", n}, {"c", c}, {"A", A.empty() ? s.A : A}, {"x0", x0.empty() ? s.x0 : x0}};
  }
  int run(Context& ctx) const {
    const EllipsoidSpec s = spec();
    const EllipsoidIntegrals in = ellipsoid_integrals(s);
    json rep = {{"spec", {{"n", s.n}, {"A", s.A}, {"x0", s.x0}, {"c", s.c}}},
                {"vol", in.vol},
                {"int_minus_u", in.int_minus_u},
                {"int_boundary_functional", in.int_boundary_functional},
                {"sobolev_s", in.sobolev_s},
                {"sobolev_S", std::pow(in.sobolev_s, s.n)},
                {"boundary_functional", boundary_functional_exact(s)},
                {"pohozaev_resid", pohozaev_residual_exact(s).residual},
                {"t_extinction", (s.n + 1.0) / (2.0 * s.n) * std::pow(s.c, s.n / (s.n + 1.0))}};
    if (s.n == 2) rep["entropy"] = entropy(SupportCurve(level_set_support(s, 0.0, 256)));
    ctx.dir.write_json("exact.json", rep);
    ctx.out << rep.dump(2) << "\n";
    return 0;
  }
};

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const std::string& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ArgumentError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot read config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ArgumentError("config " + path + ": " + e.what());
  }
  if (j.contains("config") && j.contains("version")) j = j["config"];  // a run manifest
  if (!j.is_object()) throw ArgumentError("config " + path + " must be a JSON object");
  std::vector<std::string> extra;
  std::string command;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "command") {
      command = it.value().get<std::string>();
      continue;
    }
    std::string flag = "--" + it.key();
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    if (has_flag(rest, flag)) continue;
    const json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) extra.push_back(flag);
    } else if (v.is_array()) {
      for (const json& e : v) {
        extra.push_back(flag);
        extra.push_back(e.is_string() ? e.get<std::string>() : e.dump());
      }
    } else if (!v.is_null()) {
      extra.push_back(flag);
      extra.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  if (rest.empty() || rest.front().rfind("-", 0) == 0) {
    if (command.empty()) throw ArgumentError("config has no command and none was given");
    rest.insert(rest.begin(), command);
  }
  rest.insert(rest.begin() + 1, extra.begin(), extra.end());
  return rest;
}

int run_cli(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw);
  } catch (const Error& e) {
    err << json{{"error", {{"type", "ArgumentError"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }

  CLI::App app{"Monge-Ampere overdetermined-problem toolkit"};
  app.require_subcommand(1);
  std::string out_dir;

  IdentitiesCmd identities;
  SolveCmd solve_cmd;
  ScanCmd scan;
  FlowCmd flow;
  CorrespondCmd correspond;
  ShapeCmd shape;
  ExactCmd exact;

  struct Entry {
    CLI::App* app;
    std::function<json()> config;
    std::function<int(Context&)> run;
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.bind(sub);
    sub->add_option("--out", out_dir, "artifact directory (manifest.json plus outputs)");
    entries.push_back({sub, [&cmd] { return cmd.config(); }, [&cmd](Context& c) { return cmd.run(c); }});
  };
  add("identities", "pointwise tensor identities over sampled points", identities);
  add("solve", "solve det D^2u = 1, u = 0 on a convex domain", solve_cmd);
  add("scan", "boundary-functional stationarity scan over domain families", scan);
  add("flow", "affine curvature flow in support-function form", flow);
  add("correspond", "flow vs level sets of the exact solution", correspond);
  add("shape-derivative", "finite-difference s' vs the Hadamard boundary integral", shape);
  add("exact", "closed-form integrals of an ellipsoid spec", exact);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const Entry* chosen = nullptr;
  for (const Entry& e : entries)
    if (e.app->parsed()) chosen = &e;
  const std::string command = chosen->app->get_name();

  std::unique_ptr<Context> ctx;
  json config;
  try {
    config = chosen->config();
    config["command"] = command;
    ctx = std::make_unique<Context>(Context{out, err, ArtifactDir(out_dir)});
    const int code = chosen->run(*ctx);
    ctx->dir.write_manifest(config);
    return code;
  } catch (const std::exception& e) {
    const std::string type = error_type(e);
    json ej = {{"type", type}, {"message", e.what()}, {"command", command}};
    if (auto* b = dynamic_cast<const ContractBreach*>(&e)) ej["detail"] = b->detail();
    if (auto* c = dynamic_cast<const ConvergenceError*>(&e)) ej["history"] = c->history();
    if (auto* f = dynamic_cast<const FlowConvexityError*>(&e)) ej["last_valid_t"] = f->last_valid().t;
    const json doc = {{"error", ej}};
    err << doc.dump() << "\n";
    try {
      if (ctx) {
        ctx->dir.write_json("error.json", doc);
        ctx->dir.write_manifest(config);
      }
    } catch (const std::exception& w) {
      err << json{{"error", {{"type", "Error"}, {"message", w.what()}}}}.dump() << "\n";
    }
    return type == "ArgumentError" ? 2 : 1;
  }
}

}  // namespace ovma::cli
