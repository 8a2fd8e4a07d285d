// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit if any
// criterion fails.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "sarlin/dgp.hpp"
#include "sarlin/empirical.hpp"
#include "sarlin/io.hpp"
#include "sarlin/lmtest.hpp"
#include "sarlin/mc.hpp"

using namespace sarlin;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS " : "FAIL ") << id << "  " << detail << std::endl;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

const fs::path kSource = SARLIN_SOURCE_DIR;

McReport run_config(const std::string& name) {
  std::ifstream in(kSource / "configs" / "acceptance" / name);
  McConfig cfg = config_from_json(nlohmann::json::parse(in));
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return run_experiment(cfg);
}

const McCellResult& find_cell(const McReport& r, Design d, HeteroScheme s, ErrorFamily f, Link l) {
  for (const auto& c : r.cells)
    if (c.cell.design == d && c.cell.scheme == s && c.cell.family == f && c.cell.link == l) return c;
  throw std::runtime_error("cell missing from acceptance config");
}

std::string cell_note(const McCellResult& c) {
  return "n=" + std::to_string(c.n_units) + " p=" + std::to_string(c.p) + " reps=" +
         std::to_string(c.completed) + (c.failures ? " failures=" + std::to_string(c.failures) : "");
}

// -- 1 -----------------------------------------------------------------------
void critical_values() {
  const std::vector<std::pair<int, double>> published{{4, 1.9403}, {5, 1.9195}, {7, 1.8887},
                                                      {8, 1.8767}, {10, 1.8575}, {12, 1.8424}};
  double worst = 0.0;
  for (auto [p, v] : published) worst = std::max(worst, std::abs(chi2_standardized_critical(p, 0.05) - v));
  report(worst <= 1e-3, "AC1", "chi2 critical values p=4,5,7,8,10,12: max deviation " + sci(worst) +
                                   " (tolerance 1e-3)");
}

// -- 2, t5 cell ----------------------------------------------------------------
void size_lattice() {
  const McReport r = run_config("size_lattice_400.json");
  const auto& g = find_cell(r, Design::lattice, HeteroScheme::a_degree, ErrorFamily::gaussian, Link::null_linear);
  report(!g.over_budget && std::abs(g.reject_rate_chi2 - 0.051) <= 0.021, "AC2",
         "size lattice gaussian a) chi2 rule: " + fmt(g.reject_rate_chi2, 3) +
             " (target 0.051 +/- 0.021; " + cell_note(g) + ")");
  const auto& t = find_cell(r, Design::lattice, HeteroScheme::a_degree, ErrorFamily::student_t5, Link::null_linear);
  report(!t.over_budget && std::abs(t.reject_rate_chi2 - 0.050) <= 0.021, "AC2-t5",
         "size lattice t5 a) chi2 rule: " + fmt(t.reject_rate_chi2, 3) +
             " (target 0.050 +/- 0.021; " + cell_note(t) + ")");
}

// -- 3 -------------------------------------------------------------------------
void oversizing() {
  const McReport r = run_config("size_circulant_100.json");
  const auto& c = r.cells.at(0);
  const bool ok = !c.over_budget && c.reject_rate_normal >= 0.07 && c.reject_rate_normal <= 0.135 &&
                  c.reject_rate_normal > c.reject_rate_chi2;
  report(ok, "AC3", "circulant a) normal rule: " + fmt(c.reject_rate_normal, 3) +
                        " in [0.070, 0.135] and > chi2 rule " + fmt(c.reject_rate_chi2, 3) + " (" +
                        cell_note(c) + ")");
}

// -- 4, 5 ------------------------------------------------------------------------
void power() {
  const McReport r = run_config("power_lattice_992.json");
  const auto g = ErrorFamily::gaussian;
  const auto& alog = find_cell(r, Design::lattice, HeteroScheme::a_degree, g, Link::log_quadratic);
  const auto& atan = find_cell(r, Design::lattice, HeteroScheme::a_degree, g, Link::arctan);
  const auto& blog = find_cell(r, Design::lattice, HeteroScheme::b_chisq2, g, Link::log_quadratic);
  const auto& clog = find_cell(r, Design::lattice, HeteroScheme::c_conditional, g, Link::log_quadratic);
  const bool budget = !r.over_budget();
  report(budget && alog.reject_rate_chi2 >= 0.80 && atan.reject_rate_chi2 >= 0.78, "AC4",
         "power lattice a) chi2 rule: log " + fmt(alog.reject_rate_chi2, 3) + " (>= 0.80), arctan " +
             fmt(atan.reject_rate_chi2, 3) + " (>= 0.78) (" + cell_note(alog) + ")");
  const double a = alog.reject_rate_chi2, b = blog.reject_rate_chi2, c = clog.reject_rate_chi2;
  report(budget && c >= a - 0.05 && a >= b - 0.05, "AC5",
         "power ordering log link: c) " + fmt(c, 3) + " >= a) " + fmt(a, 3) + " >= b) " + fmt(b, 3) +
             " (slack 0.05)");
}

// -- 6 -------------------------------------------------------------------------
void null_distribution() {
  const McReport r = run_config("null_circulant_1000.json");
  const auto& c = r.cells.at(0);
  const bool ok = !c.over_budget && c.completed >= 2000 - failure_budget(2000) &&
                  std::abs(c.mean_t) <= 0.15 && c.var_t >= 0.8 && c.var_t <= 1.2;
  report(ok, "AC6", "null T at circulant n=1000: mean " + fmt(c.mean_t, 3) + " in [-0.15, 0.15], var " +
                        fmt(c.var_t, 3) + " in [0.8, 1.2] (" + cell_note(c) + ")");
}

// -- 7 -------------------------------------------------------------------------
struct SmallInstance {
  Vector y;
  Matrix X;
  WeightMatrix W;
  InstrumentMatrix Z;
  BasisSpec spec;
};

SmallInstance small_instance(std::uint64_t k) {
  Engine rng = make_stream(k, StreamTag::fixture, {7});
  std::uniform_int_distribution<int> pick_n(16, 40), pick_p(1, 3), pick_design(0, 2);
  const Index n = pick_n(rng);
  SmallInstance s;
  s.spec.p = pick_p(rng);
  switch (pick_design(rng)) {
    case 0: s.W = gen_circulant(n); break;
    case 1: s.W = gen_random_contiguity(n, rng); break;
    default: s.W = gen_exponential(n, rng); break;
  }
  if (s.W.is_zero()) s.W = gen_circulant(n);
  s.X = gen_X(n, rng);
  const Vector sigma = gen_sigma(HeteroScheme::c_conditional, s.W, s.X, rng);
  const Vector eps = gen_errors(ErrorFamily::gaussian, sigma, rng);
  s.y = gen_null_y(s.X, s.W, default_beta0(), 0.4, eps);
  s.Z = build_mc_instruments(s.X, s.W, s.spec);
  return s;
}

// Everything recomputed with dense matrices and explicit inverses.
double dense_quad_form(const SmallInstance& s) {
  const Index n = s.y.size();
  const Matrix Wd = s.W.dense();
  const Vector wy = Wd * s.y;
  Matrix xx(n, 4);
  xx.col(0) = wy;
  xx.rightCols(3) = s.X;
  const Vector theta = oracle::tsls(s.y, xx, s.Z.Z);
  const Vector e = s.y - xx * theta;
  Matrix U(n, s.spec.p + 4);
  for (int j = 1; j <= s.spec.p; ++j)
    for (Index i = 0; i < n; ++i) U(i, j - 1) = oracle::hermite(j + 1, wy(i));
  U.rightCols(4) = xx;
  return oracle::quad(oracle::dhat(U, s.Z.Z, e), oracle::Hhat(U, s.Z.Z, e), static_cast<double>(n));
}

void oracle_equivalence() {
  double worst = 0.0;
  Index max_m = 0;
  for (std::uint64_t k = 0; k < 25; ++k) {
    const SmallInstance s = small_instance(k);
    max_m = std::max(max_m, s.Z.m());
    const double q = analyze(s.y, s.X, s.W, s.Z, s.spec, 0.05).result.quad_form;
    worst = std::max(worst, oracle::rel(q, dense_quad_form(s)));
  }
  report(worst <= 1e-9, "AC7", "25 small instances (n <= 40, p <= 3, m <= " + std::to_string(max_m) +
                                   "): max relative gap to dense oracle " + sci(worst) + " (tolerance 1e-9)");
}

// -- 8 -------------------------------------------------------------------------
void invariance_suite() {
  double transform = 0.0, foc = 0.0, partitioned = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    DgpConfig cfg;
    cfg.dims = LatticeDims{14, 15};
    cfg.seed = 500 + k;
    cfg.link = k % 2 ? Link::arctan : Link::null_linear;
    cfg.scheme = HeteroScheme::c_conditional;
    const SarDataset ds = generate_dataset(cfg);
    BasisSpec spec;
    spec.p = 5;
    const InstrumentMatrix Z = build_mc_instruments(ds.X, ds.W, spec);
    const LinearityAnalysis a = analyze(ds.y, ds.X, ds.W, Z, spec, 0.05);

    Engine rng = make_stream(k, StreamTag::fixture, {8});
    const Index m = Z.m();
    const Matrix A = oracle::gaussian(rng, m, m) + 3.0 * Matrix::Identity(m, m);
    const LinearityAnalysis b = analyze(ds.y, ds.X, ds.W, InstrumentMatrix(Z.Z * A, {}), spec, 0.05);
    transform = std::max(transform, oracle::rel(b.result.quad_form, a.result.quad_form));

    foc = std::max(foc, a.d_hat.tail(4).cwiseAbs().maxCoeff() / a.d_hat.cwiseAbs().maxCoeff());
    const double part = quad_form_partitioned(a.d_work, a.H_work, ds.y.size(), spec.p);
    partitioned = std::max(partitioned, oracle::rel(part, a.result.quad_form));
  }

  McConfig cfg;
  cfg.reps = 40;
  McCell c1, c2;
  c1.design = Design::random_contiguity;
  c1.scheme = HeteroScheme::b_chisq2;
  c2.design = Design::lattice;
  c2.n = 400;
  c2.link = Link::arctan;
  c2.family = ErrorFamily::student_t5;
  cfg.cells = {c1, c2};
  cfg.workers = 1;
  const McReport serial = run_experiment(cfg);
  cfg.workers = 4;
  const McReport parallel = run_experiment(cfg);
  const McReport again = run_experiment(cfg);
  const bool deterministic = serial == parallel && parallel == again;

  const bool ok = transform <= 1e-8 && foc <= 1e-8 && partitioned <= 1e-8 && deterministic;
  report(ok, "AC8", "instrument transform " + sci(transform) + ", FOC " + sci(foc) +
                        ", full vs partitioned " + sci(partitioned) + " (each <= 1e-8); workers 1 vs 4 " +
                        (deterministic ? "bit-identical" : "DIFFER"));
}

// -- 9 -------------------------------------------------------------------------
bool tables_layout_ok(const std::string& md, const ApplicationReport& r) {
  if (r.entries.size() != 6) return false;
  for (int p : {4, 5, 6})
    if (md.find("|  " + std::to_string(p) + " |") == std::string::npos) return false;
  return md.find("n = 411") != std::string::npos;
}

void empirical_pipeline() {
  const fs::path d = kSource / "data" / "panel_fixture";
  const PanelSchema schema = load_schema(d / "schema.json");
  const MunicipalPanel panel = load_panel(d / "panel.csv", schema);
  const WeightMatrix W = io::read_weights(d / "W.txt");
  const ApplicationReport diff = run_application(panel, W, ModelForm::differenced);
  const ApplicationReport level = run_application(panel, W, ModelForm::level);
  bool ok = tables_layout_ok(emit_application(diff, TableFormat::markdown), diff) &&
            tables_layout_ok(emit_application(level, TableFormat::markdown), level);
  std::string detail = "synthetic fixture: differenced and level pipelines for p = 4,5,6 " +
                       std::string(ok ? "emit the table layout" : "FAILED to emit the table layout");

  const char* paper_panel = std::getenv("SARLIN_PANEL_PATH");
  const char* paper_w = std::getenv("SARLIN_PANEL_W");
  if (paper_panel && paper_w) {
    const char* paper_schema = std::getenv("SARLIN_PANEL_SCHEMA");
    const PanelSchema ps = paper_schema ? load_schema(paper_schema) : PanelSchema{};
    const ApplicationReport r =
        run_application(load_panel(paper_panel, ps), io::read_weights(paper_w), ModelForm::differenced, {4});
    const ApplicationEntry& e = r.entries.at(0);
    const bool match = std::abs(e.lambda_hat - 0.0770) <= 1e-3 && std::abs(e.t_stat - 0.6005) <= 0.05;
    ok = ok && match;
    detail += "; municipality data differenced general p=4: lambda " + fmt(e.lambda_hat) +
              " (0.0770 +/- 1e-3), T " + fmt(e.t_stat) + " (0.6005 +/- 0.05)";
  } else {
    detail += "; municipality data not supplied (set SARLIN_PANEL_PATH and SARLIN_PANEL_W), "
              "conditional reproduction not applicable";
  }
  report(ok, "AC9", detail);
}

template <class F>
void guarded(const std::string& id, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(false, id, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("AC1", critical_values);
  guarded("AC2", size_lattice);
  guarded("AC3", oversizing);
  guarded("AC4", power);
  guarded("AC6", null_distribution);
  guarded("AC7", oracle_equivalence);
  guarded("AC8", invariance_suite);
  guarded("AC9", empirical_pipeline);
  std::cout << (failures ? "FAILED: " + std::to_string(failures) + " criteria" : "ALL CRITERIA PASS")
            << std::endl;
  return failures ? 1 : 0;
}
