#include "wregress/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wregress/io.hpp"
#include "wregress/wpca.hpp"

namespace wregress::cli {

namespace {

using io::json;

struct SolverFlags {
  std::string solver = "exact";
  double epsilon = 1e-2;
  double tolerance = 1e-8;
  std::size_t max_iterations = 100'000;
  std::size_t size_cap = kDefaultSizeCap;
};

struct CurveFlags {
  std::size_t grid = 11;
  std::vector<double> extrapolate;  // empty or {a, b}
  std::size_t density_grid = 0;
};

struct FitFlags {
  std::string dataset;
  std::string pairwise;
  std::string out;
  double step_size = 1e-2;
  double max_step_size = 1e3;
  bool cold_start = false;
  std::size_t sdp_max_iterations = 200'000;
  double sdp_tolerance = 1e-10;
  SolverFlags solver;
  CurveFlags curve;
};

struct PcaFlags {
  std::string dataset;
  std::string init;
  std::string out;
  bool ignore_times = false;
  double descent_tolerance = 1e-10;
  std::size_t sweeps = 100;
  SolverFlags solver;
  CurveFlags curve;
};

struct W2Flags {
  std::string a;
  std::string b;
  std::string plan;
};

struct SampleFlags {
  std::string pi;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

struct CounterexampleFlags {
  std::size_t grid = 11;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--solver", f.solver, "multimarginal solver")
      ->check(CLI::IsMember({"exact", "entropic"}))
      ->capture_default_str();
  cmd->add_option("--epsilon", f.epsilon, "entropic regularization")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tol", f.tolerance, "entropic marginal tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-iter", f.max_iterations, "entropic iteration cap")->capture_default_str();
  cmd->add_option("--size-cap", f.size_cap, "largest dense coupling tensor")->capture_default_str();
}

void add_curve_flags(CLI::App* cmd, CurveFlags& f) {
  cmd->add_option("--curve-grid", f.grid, "number of curve samples")->capture_default_str();
  cmd->add_option("--extrapolate", f.extrapolate, "curve t-range [a b] instead of the data range")
      ->expected(2);
  cmd->add_option("--density-grid", f.density_grid,
                  "x-grid size for 1D Gaussian curve densities (0 = off)")
      ->capture_default_str();
}

SolverConfig solver_config(const SolverFlags& f) {
  SolverConfig c;
  c.kind = f.solver == "entropic" ? SolverKind::kEntropic : SolverKind::kExact;
  c.exact.size_cap = f.size_cap;
  c.entropic.epsilon = f.epsilon;
  c.entropic.tolerance = f.tolerance;
  c.entropic.max_iterations = f.max_iterations;
  c.entropic.size_cap = f.size_cap;
  return c;
}

json solver_json(const SolverConfig& c, const SolverReport& r) {
  json j;
  j["size_cap"] = c.exact.size_cap;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  if (c.kind == SolverKind::kEntropic) {
    j["kind"] = "entropic";
    j["epsilon"] = c.entropic.epsilon;
    j["tolerance"] = c.entropic.tolerance;
    j["max_iterations"] = c.entropic.max_iterations;
    j["max_violation"] = r.max_violation;
  } else {
    j["kind"] = "exact";
  }
  return j;
}

std::vector<double> curve_grid(const CurveFlags& f, double lo, double hi) {
  if (!f.extrapolate.empty()) {
    lo = f.extrapolate[0];
    hi = f.extrapolate[1];
  }
  std::vector<double> ts;
  if (f.grid == 0) return ts;
  if (f.grid == 1) return {lo};
  for (std::size_t k = 0; k < f.grid; ++k) {
    // exact endpoints
    ts.push_back(k + 1 == f.grid ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(f.grid - 1));
  }
  return ts;
}

json discrete_curve(const DiscreteEndpointLaw& pi, const std::vector<double>& ts) {
  json curve = json::array();
  for (double t : ts) {
    json m = io::measure_to_json(pushforward_line(pi, t));
    m["t"] = t;
    curve.push_back(std::move(m));
  }
  return curve;
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    io::write_json(out, doc);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  io::write_json(f, doc);
}

std::pair<double, double> time_range(std::vector<double> ts) {
  const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
  return {*lo, *hi};
}

// ---------------------------------------------------------------- w2

Marginal read_single_measure(const std::string& path) {
  json doc = io::read_json_file(path);
  if (doc.is_object() && !doc.contains("entries")) {
    json wrapped;
    wrapped["d"] = doc.value("d", json());
    wrapped["kind"] = doc.value("kind", json());
    json entry = doc;
    entry.erase("d");
    entry.erase("kind");
    wrapped["entries"] = json::array({entry});
    doc = std::move(wrapped);
  }
  auto file = io::parse_dataset(doc, false);
  if (auto* dd = std::get_if<io::DiscreteDatasetFile>(&file)) {
    if (dd->dataset.size() != 1) throw io::ParseError(path + ": expected a single measure");
    return dd->dataset.entries().front().measure;
  }
  auto& gd = std::get<io::GaussianDatasetFile>(file);
  if (gd.dataset.size() != 1) throw io::ParseError(path + ": expected a single measure");
  return gd.dataset.entries().front().measure;
}

int cmd_w2(const W2Flags& f, std::ostream& out) {
  const Marginal a = read_single_measure(f.a);
  const Marginal b = read_single_measure(f.b);
  if (a.index() != b.index()) throw DimensionError("w2: measures are of different kinds");

  if (const auto* da = std::get_if<DiscreteMeasure>(&a)) {
    const auto& db = std::get<DiscreteMeasure>(b);
    if (da->dim() != db.dim()) throw DimensionError("w2: dimension mismatch");
    const TransportResult r = w2_discrete(*da, db);
    out << io::format_shortest(r.cost) << '\n';
    if (!f.plan.empty()) {
      std::ofstream csv(f.plan, std::ios::binary);
      if (!csv) throw Error("cannot write " + f.plan);
      csv << "source,target,mass\n";
      for (Eigen::Index i = 0; i < r.plan.plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.plan.plan.cols(); ++j) {
          if (r.plan.plan(i, j) > 0.0) csv << i << ',' << j << ',' << io::format_double(r.plan.plan(i, j)) << '\n';
        }
      }
    }
    return kExitOk;
  }

  const auto& ga = std::get<GaussianMeasure>(a);
  const auto& gb = std::get<GaussianMeasure>(b);
  if (ga.dim() != gb.dim()) throw DimensionError("w2: dimension mismatch");
  out << io::format_shortest(w2_gaussian(ga, gb)) << '\n';
  if (!f.plan.empty()) {
    // optimal coupling of two Gaussians: joint covariance [[S0, K], [K', S1]]
    const Eigen::Index d = ga.dim();
    const Matrix k = gaussian_cross_term(ga.covariance(), gb.covariance());
    Matrix joint(2 * d, 2 * d);
    joint << ga.covariance(), k, k.transpose(), gb.covariance();
    std::ofstream csv(f.plan, std::ios::binary);
    if (!csv) throw Error("cannot write " + f.plan);
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
      for (Eigen::Index j = 0; j < joint.cols(); ++j) csv << (j ? "," : "") << io::format_double(joint(i, j));
      csv << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fit

json gaussian_curve_json(const GaussianCurve& curve, const std::vector<double>& ts) {
  json out = json::array();
  for (double t : ts) {
    json m = io::measure_to_json(gaussian_curve(curve, t));
    m["t"] = t;
    out.push_back(std::move(m));
  }
  return out;
}

json density_json(const GaussianCurve& curve, const std::vector<double>& ts, std::size_t points) {
  json out = json::array();
  if (curve.m0.size() != 1 || ts.empty() || points == 0) return out;
  std::vector<GaussianMeasure> marginals;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double t : ts) {
    marginals.push_back(gaussian_curve(curve, t));
    const double m = marginals.back().mean()[0];
    const double sd = std::sqrt(std::max(marginals.back().covariance()(0, 0), 0.0));
    lo = std::min(lo, m - 4.0 * sd);
    hi = std::max(hi, m + 4.0 * sd);
  }
  if (hi <= lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  Vector xs = Vector::LinSpaced(static_cast<Eigen::Index>(points), lo, hi);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double m = marginals[k].mean()[0];
    const double var = marginals[k].covariance()(0, 0);
    Vector p(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      // a degenerate marginal is a point mass: density reported as 0 off-atom
      p[i] = var > 0.0 ? std::exp(-0.5 * (xs[i] - m) * (xs[i] - m) / var) / std::sqrt(2.0 * std::numbers::pi * var) : 0.0;
    }
    out.push_back(json{{"t", ts[k]}, {"x", io::vector_to_json(xs)}, {"density", io::vector_to_json(p)}});
  }
  return out;
}

json fit_discrete(const FitFlags& f, const io::DiscreteDatasetFile& file) {
  std::vector<PairwiseConstraint> pairwise;
  if (!f.pairwise.empty()) pairwise = io::parse_pairwise(io::read_json_file(f.pairwise), file);
  const SolverConfig config = solver_config(f.solver);
  const RegressionResult r = fit_regression(file.dataset, config, pairwise);

  json doc;
  doc["command"] = "fit";
  doc["kind"] = "discrete";
  doc["solver"] = solver_json(config, r.report);
  doc["cost"] = r.cost;
  doc["f_value"] = regression_objective(r.pi, file.dataset);
  doc["times"] = file.dataset.times();
  doc["pi"] = io::endpoint_law_to_json(r.pi);
  const auto [lo, hi] = time_range(file.dataset.times());
  doc["curve"] = discrete_curve(r.pi, curve_grid(f.curve, lo, hi));
  return doc;
}

json fit_gaussian(const FitFlags& f, const io::GaussianDatasetFile& file) {
  if (!f.pairwise.empty()) throw io::ParseError("--pairwise applies to discrete datasets only");
  SdpOptions opts;
  opts.step_size = f.step_size;
  opts.max_step_size = std::max(f.max_step_size, f.step_size);
  opts.warm_start = !f.cold_start;
  opts.tolerance = f.sdp_tolerance;
  opts.max_iterations = f.sdp_max_iterations;
  const GaussianRegressionResult r = fit_gaussian_regression(file.dataset, opts);

  json doc;
  doc["command"] = "fit";
  doc["kind"] = "gaussian";
  doc["solver"] = json{{"kind", "sdp"},
                       {"step_size", opts.step_size},
                       {"max_step_size", opts.max_step_size},
                       {"warm_start", opts.warm_start},
                       {"tolerance", opts.tolerance},
                       {"max_iterations", opts.max_iterations},
                       {"iterations", r.sdp.iterations},
                       {"converged", r.sdp.converged},
                       {"final_step_size", r.sdp.final_step_size},
                       {"min_eigenvalue", r.sdp.min_eigenvalue}};
  doc["cost"] = r.total_cost;
  doc["f_value"] = r.sdp.f_value;
  doc["sdp_objective"] = r.sdp.objective + r.problem.constant;
  doc["times"] = file.dataset.times();
  doc["pi"] = io::endpoint_law_to_json(r.curve.endpoint_law());
  doc["means"] = json{{"m0", io::vector_to_json(r.means.m0)}, {"m1", io::vector_to_json(r.means.m1)}};
  doc["blocks"] = json{{"c_x0", io::matrix_to_json(r.curve.c_x0)},
                       {"c_x1", io::matrix_to_json(r.curve.c_x1)},
                       {"s_x0x1", io::matrix_to_json(r.curve.s_x0x1)}};
  doc["coefficients"] = json{{"c_x0", r.problem.coef_cx0},
                             {"c_x0_as_printed", r.problem.coef_cx0_as_printed},
                             {"c_x1", r.problem.coef_cx1},
                             {"s_x0x1", r.problem.coef_sx0x1},
                             {"s_x0y", r.problem.coef_sx0y},
                             {"s_x1y", r.problem.coef_sx1y},
                             {"constant", r.problem.constant}};
  if (file.dataset.dim() == 1) {
    const GeodesicFit g = fit_geodesic_1d(file.dataset);
    doc["geodesic_baseline"] = json{{"sigma0", g.sigma0}, {"sigma1", g.sigma1}, {"cost", g.cost}};
  }
  const auto [lo, hi] = time_range(file.dataset.times());
  const std::vector<double> ts = curve_grid(f.curve, lo, hi);
  doc["curve"] = gaussian_curve_json(r.curve, ts);
  if (f.curve.density_grid > 0) doc["density"] = density_json(r.curve, ts, f.curve.density_grid);
  return doc;
}

int cmd_fit(const FitFlags& f, std::ostream& out, std::ostream& err) {
  const auto file = io::parse_dataset(io::read_json_file(f.dataset), true);
  json doc;
  if (const auto* dd = std::get_if<io::DiscreteDatasetFile>(&file)) {
    doc = fit_discrete(f, *dd);
    if (!doc["solver"]["converged"].get<bool>()) err << "warning: entropic solver hit the iteration cap\n";
  } else {
    doc = fit_gaussian(f, std::get<io::GaussianDatasetFile>(file));
    if (!doc["solver"]["converged"].get<bool>()) err << "warning: SDP solver hit the iteration cap\n";
  }
  emit(doc, f.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------- pca

std::vector<double> read_init(const std::string& path) {
  const json doc = io::read_json_file(path);
  const json& arr = doc.is_object() && doc.contains("times") ? doc["times"] : doc;
  if (!arr.is_array()) throw io::ParseError(path + ": expected an array of times or {\"times\": [...]}");
  std::vector<double> ts;
  for (const auto& v : arr) {
    if (!v.is_number()) throw io::ParseError(path + ": times must be numbers");
    ts.push_back(v.get<double>());
  }
  return ts;
}

int cmd_pca(const PcaFlags& f, std::ostream& out, std::ostream& err) {
  const auto file = io::parse_dataset(io::read_json_file(f.dataset), false);
  const auto* dd = std::get_if<io::DiscreteDatasetFile>(&file);
  if (!dd) throw io::ParseError("pca: only discrete datasets are supported");
  if (dd->dataset.size() < 2) throw io::ParseError("pca: need at least two measures");
  if (dd->has_times && !f.ignore_times) {
    err << "note: timestamps in the dataset are ignored by pca\n";
  }
  const std::vector<DiscreteMeasure> measures = dd->dataset.measures();

  PcaOptions opts;
  opts.tolerance = f.descent_tolerance;
  opts.max_iterations = f.sweeps;
  opts.solver = solver_config(f.solver);
  if (!f.init.empty()) {
    opts.init = read_init(f.init);
    if (opts.init->size() != measures.size()) {
      throw DimensionError("pca: --init has " + std::to_string(opts.init->size()) + " times for " +
                           std::to_string(measures.size()) + " measures");
    }
  }
  const PcaState s = fit_pca(measures, opts);

  json doc;
  doc["command"] = "pca";
  doc["kind"] = "discrete";
  doc["solver"] = solver_json(opts.solver, s.law.report);
  doc["descent"] = json{{"tolerance", opts.tolerance},
                        {"max_iterations", opts.max_iterations},
                        {"iterations", s.iteration},
                        {"converged", s.converged}};
  doc["cost"] = s.objective;
  doc["f_value"] = pca_objective(s, measures);
  doc["times"] = s.times;
  doc["objective_per_iter"] = s.objective_trace;
  doc["half_step_objectives"] = s.half_step_trace;
  doc["pi"] = io::endpoint_law_to_json(s.law.pi);
  const auto [lo, hi] = time_range(s.times);
  doc["curve"] = discrete_curve(s.law.pi, curve_grid(f.curve, lo, hi));
  emit(doc, f.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------- sample-paths

int cmd_sample_paths(const SampleFlags& f, std::ostream& out) {
  const EndpointLaw pi = io::parse_endpoint_law(io::read_json_file(f.pi));
  const auto samples = sample_paths(pi, f.n, f.seed);
  const Eigen::Index d = dim(pi);

  std::ostringstream csv;
  for (Eigen::Index k = 0; k < d; ++k) csv << "x0_" << k + 1 << ',';
  for (Eigen::Index k = 0; k < d; ++k) csv << "x1_" << k + 1 << ',';
  csv << "likelihood\n";
  for (const auto& s : samples) {
    for (Eigen::Index k = 0; k < d; ++k) csv << io::format_double(s.x0[k]) << ',';
    for (Eigen::Index k = 0; k < d; ++k) csv << io::format_double(s.x1[k]) << ',';
    csv << io::format_double(s.likelihood) << '\n';
  }
  if (f.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw Error("cannot write " + f.out);
    file << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- counterexample

int cmd_counterexample(const CounterexampleFlags& f, std::ostream& out) {
  const NonconvexityFixture fx = displacement_counterexample();
  const ConvexityProbe probe = nonconvexity_probe(fx.start, fx.end, fx.data, f.grid);
  out << "s,F\n";
  for (const auto& [s, v] : probe.values) out << io::format_shortest(s) << ',' << io::format_shortest(v) << '\n';
  if (!probe.first_violation) {
    out << "no midpoint violation on this grid\n";
    return kExitFailure;
  }
  const std::size_t k = *probe.first_violation;
  const double mid = 0.5 * (probe.values[k - 1].second + probe.values[k + 1].second);
  out << "nonconvex: F(" << io::format_shortest(probe.values[k].first) << ") = "
      << io::format_shortest(probe.values[k].second) << " > " << io::format_shortest(mid) << " = (F("
      << io::format_shortest(probe.values[k - 1].first) << ") + F("
      << io::format_shortest(probe.values[k + 1].first) << "))/2\n";
  return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const io::ParseError*>(&e) || dynamic_cast<const InvalidMeasureError*>(&e) ||
      dynamic_cast<const InvalidCovarianceError*>(&e) || dynamic_cast<const EmptyMeasureError*>(&e)) {
    return kExitParse;
  }
  if (dynamic_cast<const DimensionError*>(&e)) return kExitDimension;
  if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const SizeCapError*>(&e)) return kExitSizeCap;
  if (dynamic_cast<const DegenerateTimestampsError*>(&e)) return kExitDegenerate;
  return kExitFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Least-squares regression and PCA for time-indexed measures in Wasserstein space", "wregress"};
  app.set_version_flag("--version", "wregress 0.1.0");
  app.set_config("--config", "", "TOML file with default flag values (flags on the command line win)");
  app.require_subcommand(1);
  app.fallthrough();  // --config may follow the subcommand

  W2Flags w2f;
  auto* w2 = app.add_subcommand("w2", "squared 2-Wasserstein distance between two measures");
  w2->add_option("a", w2f.a, "first measure file")->required();
  w2->add_option("b", w2f.b, "second measure file")->required();
  w2->add_option("--plan", w2f.plan, "write the optimal coupling as CSV");

  FitFlags fitf;
  auto* fit = app.add_subcommand("fit", "regression of a time-indexed dataset");
  fit->add_option("dataset", fitf.dataset, "dataset file")->required();
  fit->add_option("--pairwise", fitf.pairwise, "pairwise joint constraints");
  fit->add_option("--out", fitf.out, "result file (stdout if omitted)");
  fit->add_option("--step-size", fitf.step_size, "SDP initial step")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--max-step", fitf.max_step_size, "SDP step growth cap")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_flag("--cold-start", fitf.cold_start, "start the SDP from independent endpoints instead of the reduced solution");
  fit->add_option("--sdp-tol", fitf.sdp_tolerance, "SDP stopping tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--sdp-max-iter", fitf.sdp_max_iterations, "SDP iteration cap")->capture_default_str();
  add_solver_flags(fit, fitf.solver);
  add_curve_flags(fit, fitf.curve);

  PcaFlags pcaf;
  auto* pca = app.add_subcommand("pca", "first principal line of a family of measures");
  pca->add_option("dataset", pcaf.dataset, "dataset file (timestamps optional, ignored)")->required();
  pca->add_flag("--ignore-times", pcaf.ignore_times, "accept and ignore dataset timestamps silently");
  pca->add_option("--init", pcaf.init, "initial times: JSON array or {\"times\": [...]}");
  pca->add_option("--out", pcaf.out, "result file (stdout if omitted)");
  pca->add_option("--descent-tol", pcaf.descent_tolerance, "stop when a sweep improves less than this")
      ->capture_default_str();
  pca->add_option("--sweeps", pcaf.sweeps, "maximum descent sweeps")->capture_default_str();
  add_solver_flags(pca, pcaf.solver);
  add_curve_flags(pca, pcaf.curve);

  SampleFlags samplef;
  auto* sample = app.add_subcommand("sample-paths", "draw random line segments from an endpoint law");
  sample->add_option("pi", samplef.pi, "endpoint law file (or a result file)")->required();
  sample->add_option("--n", samplef.n, "number of draws")->capture_default_str();
  sample->add_option("--seed", samplef.seed, "random seed")->capture_default_str();
  sample->add_option("--out", samplef.out, "CSV file (stdout if omitted)");

  CounterexampleFlags cef;
  auto* ce = app.add_subcommand("counterexample", "probe displacement convexity on the built-in example");
  ce->add_option("--grid", cef.grid, "number of s-grid points")->check(CLI::Range(std::size_t{3}, std::size_t{1'000'000}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    for (const auto* c : {&fitf.curve, &pcaf.curve}) {
      if (!c->extrapolate.empty() && c->extrapolate[0] > c->extrapolate[1]) {
        throw io::ParseError("--extrapolate: a must not exceed b");
      }
    }
    if (*w2) return cmd_w2(w2f, out);
    if (*fit) return cmd_fit(fitf, out, err);
    if (*pca) return cmd_pca(pcaf, out, err);
    if (*sample) return cmd_sample_paths(samplef, out);
    if (*ce) return cmd_counterexample(cef, out);
  } catch (const std::exception& e) {
    err << "wregress: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace wregress::cli
