#include "finhol/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "finhol/algebra.hpp"
#include "finhol/errors.hpp"
#include "finhol/field.hpp"
#include "finhol/geometry.hpp"
#include "finhol/model.hpp"
#include "finhol/riemann.hpp"
#include "finhol/transport.hpp"

namespace finhol {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CommandCtx {
  const RunOptions* opts = nullptr;
  std::uint64_t seed = 1;
  Json warnings = Json::array();
  Json timings = Json::object();

  void warn(const std::string& msg) {
    warnings.push_back(msg);
    if (opts->verbose) std::fprintf(stderr, "[finhol] warning: %s\n", msg.c_str());
  }
  void note(const std::string& msg) const {
    if (opts->verbose) std::fprintf(stderr, "[finhol] %s\n", msg.c_str());
  }
};

ModelConfig read_model_config(ConfigView& root) {
  ConfigView mv = root.sub_table("model");
  ModelConfig mc;
  mc.family = mv.get_string("family", mc.family);
  mc.dim = static_cast<int>(mv.get_int("dim", mc.dim));
  mc.name = mv.get_string("name", "");
  mc.chart_bound = mv.get_number("chart_bound", 0.0);
  mc.radius = mv.get_number("radius", 1.0);
  mc.metric = mv.get_strings("metric", {});
  mc.beta = mv.get_strings("beta", {});
  mc.expression = mv.get_string("expression", "");
  mv.finish();
  return mc;
}

Json echo_model(const FinslerModel& model, const ModelConfig& mc) {
  Json j;
  j["family"] = mc.family;
  j["dim"] = model.dim();
  j["name"] = model.name();
  j["chart_bound"] = model.chart_bound();
  if (model.family() == FinslerModel::Family::sphere) j["radius"] = mc.radius;
  if (!mc.metric.empty()) j["metric"] = mc.metric;
  if (!mc.beta.empty()) j["beta"] = mc.beta;
  if (!mc.expression.empty()) j["expression"] = mc.expression;
  return j;
}

void check_point_dim(const std::vector<double>& p, int dim, const std::string& where) {
  if (static_cast<int>(p.size()) != dim) {
    std::ostringstream os;
    os << "config: " << where << " has " << p.size() << " components, the model has dim "
       << dim;
    throw ConfigError(os.str());
  }
}

// `point = [...]` or `points = [[...], ...]`; both at once is ambiguous.
std::vector<std::vector<double>> read_point_list(ConfigView& v, int dim,
                                                 std::vector<std::vector<double>> fallback) {
  if (v.has("point") && v.has("points"))
    throw ConfigError("config: [" + v.path() + "] gives both 'point' and 'points'");
  std::vector<std::vector<double>> pts;
  if (v.has("points"))
    pts = v.get_points("points", {});
  else if (v.has("point"))
    pts = {v.get_vector("point", {})};
  else
    pts = std::move(fallback);
  if (pts.empty()) throw ConfigError("config: [" + v.path() + "] names no points");
  for (const auto& p : pts) check_point_dim(p, dim, v.path() + " point");
  return pts;
}

AlgebraOptions read_algebra_options(ConfigView& v, std::uint64_t seed) {
  AlgebraOptions ao;
  ao.max_fields = static_cast<int>(v.get_int("max_fields", ao.max_fields));
  ao.bracket_depth = static_cast<int>(v.get_int("bracket_depth", ao.bracket_depth));
  ao.nabla_depth = static_cast<int>(v.get_int("nabla_depth", ao.nabla_depth));
  ao.monomial_germs = v.get_bool("monomial_germs", ao.monomial_germs);
  ao.samples = static_cast<int>(v.get_int("samples", ao.samples));
  ao.tol = v.get_number("tol", ao.tol);
  ao.seed = seed;
  if (ao.max_fields < 1 || ao.bracket_depth < 1 || ao.nabla_depth < 0 || ao.samples < 0 ||
      !(ao.tol > 0.0))
    throw ConfigError("config: [" + v.path() + "] budgets must be positive");
  return ao;
}

Json echo_algebra_options(const AlgebraOptions& ao, int dim) {
  Json j;
  j["max_fields"] = ao.max_fields;
  j["bracket_depth"] = ao.bracket_depth;
  j["nabla_depth"] = ao.nabla_depth;
  j["monomial_germs"] = ao.monomial_germs;
  j["samples"] = ao.samples;
  j["samples_effective"] = ao.samples > 0 ? ao.samples : 4 * dim * dim;
  j["tol"] = ao.tol;
  return j;
}

TransportOptions read_transport_options(ConfigView& v) {
  TransportOptions t;
  t.rtol = v.get_number("rtol", t.rtol);
  t.atol = v.get_number("atol", t.atol);
  t.max_steps = static_cast<int>(v.get_int("max_steps", t.max_steps));
  t.project_corners = v.get_bool("project_corners", t.project_corners);
  if (!(t.rtol > 0.0) || !(t.atol > 0.0) || t.max_steps < 1)
    throw ConfigError("config: [" + v.path() + "] integrator tolerances must be positive");
  return t;
}

Json echo_transport_options(const TransportOptions& t) {
  Json j;
  j["rtol"] = t.rtol;
  j["atol"] = t.atol;
  j["max_steps"] = t.max_steps;
  j["project_corners"] = t.project_corners;
  return j;
}

Json basis_json(const FieldBasis& b) {
  Json j;
  j["rank"] = b.rank;
  j["closed"] = b.closed;
  j["truncated"] = b.truncated;
  j["ill_conditioned"] = b.ill_conditioned;
  j["noise_limited"] = b.noise_limited;
  j["singular_values"] = json_vector(b.sv_spectrum);
  if (b.rank > 0 && static_cast<int>(b.sv_spectrum.size()) >= b.rank)
    j["condition_number"] = b.sv_spectrum.front() / b.sv_spectrum[b.rank - 1];
  else
    j["condition_number"] = nullptr;
  Json gens = Json::array();
  if (!b.column_labels.empty())
    for (const std::string& s : b.column_labels) gens.push_back(s);
  else
    for (const IndicatrixField& f : b.fields) gens.push_back(f.describe());
  j["generators"] = std::move(gens);
  j["generation_log"] = b.generation_log;
  return j;
}

void log_basis(const CommandCtx& ctx, const FieldBasis& b) {
  if (!ctx.opts->verbose) return;
  for (const std::string& line : b.generation_log)
    std::fprintf(stderr, "[finhol]   %s\n", line.c_str());
}

// Convergence bookkeeping shared by the loops and commutator tables: the
// observed order between consecutive rows is log(e1/e2) / log(h1/h2).
Json convergence_row(double h, double abs_err, double rel_err,
                     std::optional<double> prev_h, std::optional<double> prev_abs) {
  Json row;
  row["h"] = h;
  row["max_abs_err"] = abs_err;
  row["max_rel_err"] = rel_err;
  if (prev_h && prev_abs && abs_err > 0.0 && *prev_abs > 0.0 && *prev_h != h)
    row["observed_order"] = std::log(*prev_abs / abs_err) / std::log(*prev_h / h);
  else
    row["observed_order"] = nullptr;
  return row;
}

std::vector<std::vector<double>> csv_rows_from_table(const Json& table) {
  std::vector<std::vector<double>> rows;
  for (const Json& r : table) {
    const Json& o = r["observed_order"];
    rows.push_back({r["h"].get<double>(), r["max_abs_err"].get<double>(),
                    r["max_rel_err"].get<double>(),
                    o.is_null() ? std::nan("") : o.get<double>()});
  }
  return rows;
}

const std::vector<std::string> kConvergenceHeader = {"h", "max_abs_err", "max_rel_err",
                                                     "observed_order"};

// ----------------------------------------------------------------- inspect

Json run_inspect(ConfigView& root, CommandCtx& ctx) {
  const ModelConfig mc = read_model_config(root);
  const FinslerModel model = builtin_model(mc);
  const int n = model.dim();

  ConfigView iv = root.sub_table("inspect");
  const int validation_samples = static_cast<int>(iv.get_int("validation_samples", 50));
  if (validation_samples < 1)
    throw ConfigError("config: inspect.validation_samples must be positive");
  const int direction_samples = static_cast<int>(iv.get_int("direction_samples", 2));
  if (direction_samples < 1)
    throw ConfigError("config: inspect.direction_samples must be positive");
  const std::vector<std::vector<double>> pts =
      read_point_list(iv, n, {std::vector<double>(n, 0.0)});
  std::vector<std::vector<double>> given_dirs = iv.get_points("directions", {});
  for (const auto& y : given_dirs) check_point_dim(y, n, "inspect direction");
  iv.finish();

  Json config_echo;
  config_echo["model"] = echo_model(model, mc);
  Json ie;
  ie["points"] = json_points(pts);
  if (!given_dirs.empty())
    ie["directions"] = json_points(given_dirs);
  else
    ie["direction_samples"] = direction_samples;
  ie["validation_samples"] = validation_samples;
  config_echo["inspect"] = std::move(ie);

  Json results;
  auto t0 = Clock::now();
  ctx.note("validating the model on " + std::to_string(validation_samples) + " samples");
  const ModelValidation val = validate_model(model, validation_samples, ctx.seed);
  Json vj;
  vj["samples"] = val.samples;
  vj["min_finsler"] = val.min_finsler;
  vj["max_homogeneity_error"] = val.max_homogeneity_error;
  vj["max_euler_error"] = val.max_euler_error;
  vj["min_metric_eigenvalue"] = val.min_metric_eigenvalue;
  vj["max_g_homogeneity_error"] = val.max_g_homogeneity_error;
  vj["max_metric_identity_error"] = val.max_metric_identity_error;
  results["validation"] = std::move(vj);
  ctx.timings["validation_s"] = elapsed_s(t0);

  t0 = Clock::now();
  double worst_oracle = 0.0;
  bool any_oracle = false;
  Json points = Json::array();
  for (const auto& p : pts) {
    if (!model.in_chart(p))
      throw ConfigError("config: inspect point lies outside the model chart");
    const std::vector<std::vector<double>> dirs =
        given_dirs.empty() ? indicatrix_sample(model, p, direction_samples, ctx.seed)
                           : given_dirs;
    Json pj;
    pj["x"] = json_vector(p);
    Json evals = Json::array();
    for (const auto& y : dirs) {
      const MetricEval me = fundamental_tensor(model, p, y);
      const ConnectionEval ce = connection_eval(model, p, y);
      Json ej;
      ej["y"] = json_vector(y);
      ej["F"] = model.finsler_value(p, y);
      ej["g"] = json_square(me.g, n);
      ej["g_det"] = me.det;
      ej["spray"] = json_vector(ce.G);
      ej["nonlinear_connection"] = json_square(ce.Gj, n);
      ej["berwald_coefficients"] = json_cube(ce.Gjk, n);
      ej["curvature"] = json_cube(ce.R, n);
      if (model.is_riemannian()) {
        const std::vector<double> oracle = spray_curvature_from_christoffel(model, p, y);
        double resid = 0.0;
        for (std::size_t i = 0; i < oracle.size(); ++i)
          resid = std::max(resid, std::abs(oracle[i] - ce.R[i]));
        ej["curvature_oracle_residual"] = resid;
        worst_oracle = std::max(worst_oracle, resid);
        any_oracle = true;
      }
      evals.push_back(std::move(ej));
    }
    pj["evaluations"] = std::move(evals);
    points.push_back(std::move(pj));
  }
  results["points"] = std::move(points);
  if (any_oracle) results["curvature_oracle_residual_max"] = worst_oracle;
  ctx.timings["points_s"] = elapsed_s(t0);

  Json out;
  out["config"] = std::move(config_echo);
  out["results"] = std::move(results);
  return out;
}

// ----------------------------------------------------------------- algebra

Json run_algebra(ConfigView& root, CommandCtx& ctx) {
  const ModelConfig mc = read_model_config(root);
  const FinslerModel model = builtin_model(mc);
  const int n = model.dim();

  ConfigView av = root.sub_table("algebra");
  const std::string kind = av.get_string("kind", "both");
  if (kind != "curvature" && kind != "infinitesimal" && kind != "both")
    throw ConfigError("config: algebra.kind must be curvature, infinitesimal or both");
  const bool operator_check = av.get_bool("operator_check", false);
  const AlgebraOptions ao = read_algebra_options(av, ctx.seed);
  const std::vector<std::vector<double>> pts =
      read_point_list(av, n, {std::vector<double>(n, 0.0)});
  av.finish();
  if (operator_check && !model.is_riemannian())
    throw ConfigError("config: algebra.operator_check needs a Riemannian model family");

  Json config_echo;
  config_echo["model"] = echo_model(model, mc);
  Json ae = echo_algebra_options(ao, n);
  ae["kind"] = kind;
  ae["operator_check"] = operator_check;
  ae["points"] = json_points(pts);
  config_echo["algebra"] = std::move(ae);

  Json points = Json::array();
  const auto t0 = Clock::now();
  for (const auto& p : pts) {
    Json pj;
    pj["x"] = json_vector(p);
    std::optional<FieldBasis> curv, holstar;
    if (kind != "infinitesimal" || operator_check) {
      ctx.note("curvature algebra at " + json_vector(p).dump());
      curv = generate_curvature_algebra(model, p, ao);
      log_basis(ctx, *curv);
    }
    if (kind != "infinitesimal") pj["curvature_algebra"] = basis_json(*curv);
    if (kind != "curvature") {
      holstar = generate_infinitesimal_holonomy(model, p, ao);
      log_basis(ctx, *holstar);
      pj["infinitesimal_holonomy"] = basis_json(*holstar);
    }
    if (curv && holstar && kind == "both")
      pj["curvature_in_infinitesimal_residual"] = span_inclusion_residual(*curv, *holstar);
    if (operator_check) {
      const OperatorAlgebra op = riemannian_curvature_operator_algebra(model, p, ao);
      const Eigen::MatrixXd opm = operator_eval_matrix(op.matrices, curv->sample_set);
      Json oj;
      oj["rank"] = op.rank;
      oj["closed"] = op.closed;
      oj["singular_values"] = json_vector(op.sv_spectrum);
      oj["rank_matches_curvature_algebra"] = op.rank == curv->rank;
      const double r1 = span_inclusion_residual(curv->eval_matrix, opm);
      const double r2 = span_inclusion_residual(opm, curv->eval_matrix);
      oj["matching_residual"] = std::max(r1, r2);
      pj["operator_algebra"] = std::move(oj);
    }
    for (const char* key : {"curvature_algebra", "infinitesimal_holonomy"})
      if (pj.contains(key) && pj[key]["truncated"].get<bool>())
        ctx.warn(std::string(key) + " truncated by a budget cap at this point");
    points.push_back(std::move(pj));
  }
  ctx.timings["algebra_s"] = elapsed_s(t0);

  Json out;
  out["config"] = std::move(config_echo);
  out["results"] = Json{{"points", std::move(points)}};
  return out;
}

// --------------------------------------------------------------- transport

CurveSpec read_curve(ConfigView& cv, const FinslerModel& model) {
  const std::string type = cv.require_string("type");
  std::optional<CurveSpec> c;
  if (type == "segment") {
    c = CurveSpec::segment(cv.require_vector("a"), cv.require_vector("b"));
  } else if (type == "polyline") {
    c = CurveSpec::polyline(cv.get_points("points", {}));
  } else if (type == "parallelogram") {
    c = CurveSpec::parallelogram(cv.require_vector("p"), cv.require_vector("X"),
                                 cv.require_vector("Y"), cv.require_number("s"),
                                 cv.require_number("t"));
  } else if (type == "triangle") {
    const double fallback =
        model.family() == FinslerModel::Family::sphere ? model.sphere_radius() : 1.0;
    c = CurveSpec::geodesic_triangle(cv.get_number("radius", fallback));
  } else if (type == "parametric") {
    c = CurveSpec::parametric(cv.get_strings("exprs", {}));
  } else {
    throw ConfigError("config: unknown curve type '" + type + "' in [" + cv.path() + "]");
  }
  if (cv.get_bool("reverse", false)) c = c->reversed();
  return *c;
}

Json run_transport(ConfigView& root, CommandCtx& ctx) {
  const ModelConfig mc = read_model_config(root);
  const FinslerModel model = builtin_model(mc);
  const int n = model.dim();

  ConfigView tv = root.sub_table("transport");
  const TransportOptions topts = read_transport_options(tv);
  std::vector<double> global_y0 = tv.get_vector("y0", {});
  if (!global_y0.empty()) check_point_dim(global_y0, n, "transport.y0");
  std::vector<ConfigView> curve_views = tv.table_array("curve");
  if (curve_views.empty())
    throw ConfigError("config: the transport command needs at least one [[transport.curve]]");
  tv.finish();

  Json config_echo;
  config_echo["model"] = echo_model(model, mc);
  Json te;
  te["integrator"] = echo_transport_options(topts);
  if (!global_y0.empty()) te["y0"] = json_vector(global_y0);

  Json curves_echo = Json::array();
  Json curves = Json::array();
  const auto t0 = Clock::now();
  for (ConfigView& cv : curve_views) {
    CurveSpec curve = read_curve(cv, model);
    std::vector<double> y0 = cv.get_vector("y0", global_y0);
    cv.finish();
    if (y0.empty()) y0 = indicatrix_sample(model, curve.point(0.0), 1, ctx.seed)[0];
    check_point_dim(y0, n, cv.path() + ".y0");

    Json ce;
    ce["curve"] = curve.describe();
    ce["y0"] = json_vector(y0);
    curves_echo.push_back(ce);

    ctx.note("transport along " + curve.describe());
    const TransportResult tr = parallel_transport(model, curve, y0, topts);
    Json cj;
    cj["curve"] = curve.describe();
    cj["y0"] = json_vector(y0);
    cj["F_start"] = model.finsler_value(curve.point(0.0), y0);
    cj["y_end"] = json_vector(tr.y_end);
    cj["steps"] = tr.steps;
    cj["F_drift"] = tr.F_drift;
    cj["drift_tolerance"] = tr.tolerance;
    const std::vector<double> a = curve.point(0.0), b = curve.point(1.0);
    double gap = 0.0, disp = 0.0;
    for (int i = 0; i < n; ++i) {
      gap = std::max(gap, std::abs(a[i] - b[i]));
      disp = std::max(disp, std::abs(tr.y_end[i] - y0[i]));
    }
    if (gap <= 1e-12) cj["loop_displacement"] = disp;
    curves.push_back(std::move(cj));
  }
  ctx.timings["curves_s"] = elapsed_s(t0);
  te["curves"] = std::move(curves_echo);
  config_echo["transport"] = std::move(te);

  Json out;
  out["config"] = std::move(config_echo);
  out["results"] = Json{{"curves", std::move(curves)}};
  return out;
}

// ---------------------------------------------------------------- holonomy

Json run_holonomy(ConfigView& root, CommandCtx& ctx) {
  const ModelConfig mc = read_model_config(root);
  const FinslerModel model = builtin_model(mc);
  const int n = model.dim();

  ConfigView hv = root.sub_table("holonomy");
  std::vector<double> p = hv.get_vector("point", std::vector<double>(n, 0.0));
  check_point_dim(p, n, "holonomy.point");
  const TransportOptions topts = read_transport_options(hv);
  ConfigView aov = hv.sub_table("algebra");
  const AlgebraOptions ao = read_algebra_options(aov, ctx.seed);
  aov.finish();

  const bool want_loops = hv.has_table("loops");
  const bool want_triangle = hv.has_table("triangle");
  const bool want_commutator = hv.has_table("commutator");

  Json config_echo;
  config_echo["model"] = echo_model(model, mc);
  Json he;
  he["point"] = json_vector(p);
  he["integrator"] = echo_transport_options(topts);
  he["algebra"] = echo_algebra_options(ao, n);

  Json results;

  // Loop second differences against the curvature field.
  if (want_loops) {
    ConfigView lv = hv.sub_table("loops");
    const std::vector<double> X = lv.require_vector("X");
    const std::vector<double> Y = lv.require_vector("Y");
    check_point_dim(X, n, "holonomy.loops.X");
    check_point_dim(Y, n, "holonomy.loops.Y");
    const std::vector<double> hs = lv.get_numbers("h", {2e-2, 1e-2, 5e-3});
    const int fiber = static_cast<int>(lv.get_int("fiber_samples", 4));
    const std::string csv = lv.get_string("csv", "");
    lv.finish();
    if (hs.empty() || fiber < 1)
      throw ConfigError("config: holonomy.loops needs h values and positive fiber_samples");

    Json le;
    le["X"] = json_vector(X);
    le["Y"] = json_vector(Y);
    le["h"] = json_vector(hs);
    le["fiber_samples"] = fiber;
    if (!csv.empty()) le["csv"] = csv;
    he["loops"] = std::move(le);

    const auto t0 = Clock::now();
    const std::vector<std::vector<double>> ys = indicatrix_sample(model, p, fiber, ctx.seed);
    Json table = Json::array();
    std::optional<double> prev_h, prev_abs;
    bool noisy = false;
    double rec_rtol = 0.0;
    for (double h : hs) {
      ctx.note("loop stencil at h = " + std::to_string(h));
      const LoopCurvatureResult lr = curvature_from_loops(model, p, X, Y, h, ys, topts);
      table.push_back(convergence_row(h, lr.max_abs_err, lr.max_rel_err, prev_h, prev_abs));
      prev_h = h;
      prev_abs = lr.max_abs_err;
      noisy = noisy || lr.noise_warning;
      rec_rtol = std::max(rec_rtol, lr.recommended_rtol);
    }
    Json lj;
    lj["table"] = table;
    lj["noise_warning"] = noisy;
    if (noisy) {
      lj["recommended_rtol"] = rec_rtol;
      ctx.warn("loop differencing ran with rtol too loose for the smallest h");
    }
    results["loops"] = std::move(lj);
    if (!csv.empty()) {
      write_csv(csv, kConvergenceHeader, csv_rows_from_table(table));
      results["loops"]["csv"] = csv;
    }
    ctx.timings["loops_s"] = elapsed_s(t0);
  }

  // Octant triangle rotation angles.
  if (want_triangle) {
    ConfigView tv = hv.sub_table("triangle");
    std::vector<double> radii = tv.get_numbers(
        "radius", {model.family() == FinslerModel::Family::sphere ? model.sphere_radius()
                                                                  : 1.0});
    std::vector<double> y0 = tv.get_vector("y0", {});
    tv.finish();
    if (n != 2)
      throw ConfigError("config: holonomy.triangle needs a 2-dimensional model");
    const std::vector<double> origin(n, 0.0);
    if (y0.empty()) y0 = indicatrix_sample(model, origin, 1, ctx.seed)[0];
    check_point_dim(y0, n, "holonomy.triangle.y0");

    Json te;
    te["radius"] = json_vector(radii);
    te["y0"] = json_vector(y0);
    he["triangle"] = std::move(te);

    const auto t0 = Clock::now();
    Json rows = Json::array();
    for (double r : radii) {
      ctx.note("octant triangle at radius " + std::to_string(r));
      const CurveSpec tri = CurveSpec::geodesic_triangle(r);
      const TransportResult tr = parallel_transport(model, tri, y0, topts);
      const double a0 = std::atan2(y0[1], y0[0]);
      const double a1 = std::atan2(tr.y_end[1], tr.y_end[0]);
      double angle = a1 - a0;
      const double two_pi = 6.283185307179586476925286766559;
      while (angle <= -two_pi / 2) angle += two_pi;
      while (angle > two_pi / 2) angle -= two_pi;
      Json row;
      row["radius"] = r;
      row["angle"] = angle;
      row["quarter_turn_residual"] = angle - two_pi / 4;
      row["F_drift"] = tr.F_drift;
      row["steps"] = tr.steps;
      rows.push_back(std::move(row));
    }
    results["triangle"] = Json{{"table", std::move(rows)}};
    ctx.timings["triangle_s"] = elapsed_s(t0);
  }

  // Merged holonomy algebra from remote sources.
  std::vector<ConfigView> source_views = hv.table_array("source");
  if (!source_views.empty()) {
    std::vector<HolonomySource> sources;
    Json sources_echo = Json::array();
    for (ConfigView& sv : source_views) {
      const std::vector<double> q = sv.require_vector("point");
      check_point_dim(q, n, sv.path() + ".point");
      const std::vector<std::vector<double>> via = sv.get_points("via", {});
      sv.finish();
      std::vector<std::vector<double>> verts;
      verts.push_back(q);
      for (const auto& w : via) {
        check_point_dim(w, n, sv.path() + ".via point");
        verts.push_back(w);
      }
      verts.push_back(p);
      CurveSpec curve = verts.size() == 2 ? CurveSpec::segment(verts[0], verts[1])
                                          : CurveSpec::polyline(verts);
      Json se;
      se["point"] = json_vector(q);
      se["curve"] = curve.describe();
      sources_echo.push_back(std::move(se));
      sources.push_back(HolonomySource{q, std::move(curve)});
    }
    he["sources"] = std::move(sources_echo);

    const auto t0 = Clock::now();
    ctx.note("merging holonomy generators from " + std::to_string(sources.size()) +
             " source(s)");
    const FieldBasis curv = generate_curvature_algebra(model, p, ao);
    const FieldBasis holstar = generate_infinitesimal_holonomy(model, p, ao);
    const FieldBasis merged = holonomy_algebra_at(model, p, sources, ao, topts);
    log_basis(ctx, merged);
    Json hj;
    hj["curvature_rank"] = curv.rank;
    hj["infinitesimal_rank"] = holstar.rank;
    hj["merged_rank"] = merged.rank;
    hj["rank_chain_ok"] = curv.rank <= holstar.rank && holstar.rank <= merged.rank;
    Json incl;
    incl["curvature_in_infinitesimal"] =
        span_inclusion_residual(curv.eval_matrix, holstar.eval_matrix);
    incl["infinitesimal_in_merged"] =
        span_inclusion_residual(holstar.eval_matrix, merged.eval_matrix);
    hj["inclusion_residuals"] = std::move(incl);
    hj["basis"] = basis_json(merged);
    if (merged.noise_limited)
      ctx.warn("holonomy merge dropped candidates at the transport noise floor");
    results["holonomy_algebra"] = std::move(hj);
    ctx.timings["holonomy_algebra_s"] = elapsed_s(t0);
  }

  // Commutator of two loop families against the bracket of curvature fields.
  if (want_commutator) {
    ConfigView cv = hv.sub_table("commutator");
    const std::vector<double> X1 = cv.require_vector("X1");
    const std::vector<double> Y1 = cv.require_vector("Y1");
    const std::vector<double> X2 = cv.require_vector("X2");
    const std::vector<double> Y2 = cv.require_vector("Y2");
    for (const auto* v : {&X1, &Y1, &X2, &Y2})
      check_point_dim(*v, n, "holonomy.commutator vector");
    const std::vector<double> hs = cv.get_numbers("h", {0.25, 0.125});
    const int fiber = static_cast<int>(cv.get_int("fiber_samples", 2));
    const std::string csv = cv.get_string("csv", "");
    cv.finish();
    if (hs.empty() || fiber < 1)
      throw ConfigError(
          "config: holonomy.commutator needs h values and positive fiber_samples");

    Json ce;
    ce["X1"] = json_vector(X1);
    ce["Y1"] = json_vector(Y1);
    ce["X2"] = json_vector(X2);
    ce["Y2"] = json_vector(Y2);
    ce["h"] = json_vector(hs);
    ce["fiber_samples"] = fiber;
    if (!csv.empty()) ce["csv"] = csv;
    he["commutator"] = std::move(ce);

    const auto t0 = Clock::now();
    const std::vector<std::vector<double>> ys = indicatrix_sample(model, p, fiber, ctx.seed);
    Json table = Json::array();
    std::optional<double> prev_h, prev_abs;
    bool noisy = false, trivial = false;
    for (double h : hs) {
      ctx.note("commutator stencil at h = " + std::to_string(h));
      const CommutatorFamilyResult cr =
          commutator_family_experiment(model, p, X1, Y1, X2, Y2, h, ys, topts);
      table.push_back(convergence_row(h, cr.max_abs_err, cr.max_rel_err, prev_h, prev_abs));
      prev_h = h;
      prev_abs = cr.max_abs_err;
      noisy = noisy || cr.noise_warning;
      trivial = cr.trivial_pair;
    }
    Json cj;
    cj["trivial_pair"] = trivial;
    cj["table"] = table;
    cj["noise_warning"] = noisy;
    if (noisy) ctx.warn("commutator differencing ran with rtol too loose for the smallest h");
    results["commutator"] = std::move(cj);
    if (!csv.empty()) {
      write_csv(csv, kConvergenceHeader, csv_rows_from_table(table));
      results["commutator"]["csv"] = csv;
    }
    ctx.timings["commutator_s"] = elapsed_s(t0);
  }

  hv.finish();
  config_echo["holonomy"] = std::move(he);

  Json out;
  out["config"] = std::move(config_echo);
  out["results"] = std::move(results);
  return out;
}

}  // namespace

Json run_command(const std::string& command, const RunOptions& opts) {
  const auto t_total = Clock::now();
  const ConfigValue parsed = parse_config_file(opts.config_path);
  ConfigView root(parsed.as_table("config root"), "");

  ConfigView run = root.sub_table("run");
  CommandCtx ctx;
  ctx.opts = &opts;
  ctx.seed = run.get_seed("seed", 1);
  run.finish();
  if (opts.seed) ctx.seed = *opts.seed;
  if (opts.threads < 1) throw ConfigError("--threads must be positive");

  // Any of the four command blocks may sit in one file; only the requested
  // one runs, the rest are simply not read.
  for (const char* block : {"inspect", "algebra", "holonomy", "transport"})
    if (block != command) (void)root.sub_table(block);

  Json body;
  if (command == "inspect")
    body = run_inspect(root, ctx);
  else if (command == "algebra")
    body = run_algebra(root, ctx);
  else if (command == "holonomy")
    body = run_holonomy(root, ctx);
  else if (command == "transport")
    body = run_transport(root, ctx);
  else
    throw ConfigError("unknown command '" + command + "'");
  root.finish();

  Json report = report_skeleton(command, ctx.seed);
  Json config_echo = std::move(body["config"]);
  config_echo["path"] = opts.config_path;
  config_echo["threads"] = opts.threads;
  report["config"] = std::move(config_echo);
  report["results"] = std::move(body["results"]);
  report["warnings"] = std::move(ctx.warnings);
  ctx.timings["total_s"] = elapsed_s(t_total);
  report["timings"] = std::move(ctx.timings);
  return report;
}

}  // namespace finhol
