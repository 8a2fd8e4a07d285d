// sarlin: command-line front end for the spatial-lag linearity test.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarlin/dgp.hpp"
#include "sarlin/empirical.hpp"
#include "sarlin/io.hpp"
#include "sarlin/lmtest.hpp"
#include "sarlin/mc.hpp"
#include "sarlin/weights.hpp"

namespace fs = std::filesystem;
using namespace sarlin;

namespace {

enum Exit { ok = 0, usage = 1, computation = 2, rejects = 3 };

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct TestArgs {
  std::string y, x, w, z, out, rule = "chi2";
  std::optional<int> p;
  double alpha = 0.05;
};

int cmd_test(const TestArgs& a) {
  const Vector y = io::read_vector(a.y);
  const io::Table xt = io::read_csv(fs::path(a.x));
  const WeightMatrix W = io::read_weights(a.w);
  std::optional<InstrumentMatrix> Z;
  if (!a.z.empty()) {
    const io::Table zt = io::read_csv(fs::path(a.z));
    Z = InstrumentMatrix(zt.values, zt.names);
  }
  std::optional<BasisSpec> spec;
  if (a.p) {
    spec = BasisSpec{};
    spec->p = *a.p;
  }
  const LinearityTestResult r = run_test(y, xt.values, W, Z, spec, a.alpha);
  if (!a.out.empty()) write_text(a.out, nlohmann::json(r).dump(2) + "\n");
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << std::fixed << std::setprecision(4) << "T = " << r.t_stat << " (p = " << r.p
            << ", n = " << r.n << ", quad = " << r.quad_form << "); chi2 rule: "
            << (r.reject_chi2 ? "reject" : "do not reject") << " (crit " << r.crit_chi2_std
            << ", pval " << r.pval_chi2 << "); normal rule: "
            << (r.reject_normal ? "reject" : "do not reject") << " (crit " << r.crit_normal
            << ", pval " << r.pval_normal << ") at alpha = " << r.alpha << '\n';
  const bool reject = a.rule == "normal" ? r.reject_normal : r.reject_chi2;
  return reject ? rejects : ok;
}

// ---------------------------------------------------------------------------
// simulate-size / simulate-power
// ---------------------------------------------------------------------------

struct SimArgs {
  std::string config, out;
  std::optional<int> workers, reps;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimArgs& a, bool power) {
  std::ifstream in(a.config);
  if (!in) throw InputError("cannot open " + a.config);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(a.config + ": " + e.what());
  }
  McConfig cfg = config_from_json(doc);
  if (a.workers) cfg.workers = *a.workers;
  if (a.reps) cfg.reps = *a.reps;
  if (a.seed) cfg.master_seed = *a.seed;

  auto progress = [](const McCellResult& r, std::size_t done, std::size_t total) {
    std::cerr << '[' << done << '/' << total << "] " << detail::cell_signature(r.cell)
              << "  chi2 " << detail::fmt_rate(r.reject_rate_chi2) << "  normal "
              << detail::fmt_rate(r.reject_rate_normal) << "  failures " << r.failures << '\n';
  };
  const McReport report =
      power ? run_power_experiment(cfg, progress) : run_size_experiment(cfg, progress);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_text(dir / "report.json", emit_table(report, TableFormat::json));
  write_text(dir / "table.csv", emit_table(report, TableFormat::csv));
  write_text(dir / "table.md", emit_table(report, TableFormat::markdown));
  std::cout << emit_table(report, TableFormat::markdown);
  if (report.over_budget()) {
    std::cerr << "error: a cell exceeded the 1% failure budget\n";
    return computation;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// empirical
// ---------------------------------------------------------------------------

struct EmpiricalArgs {
  std::string panel, schema, w, mode = "both", out;
  std::vector<int> p{4, 5, 6};
  bool no_spatial_policy = false;
  bool no_basis = false;
};

int cmd_empirical(const EmpiricalArgs& a) {
  const PanelSchema schema = a.schema.empty() ? PanelSchema{} : load_schema(a.schema);
  const MunicipalPanel panel = load_panel(fs::path(a.panel), schema);
  const WeightMatrix W = io::read_weights(a.w);
  ApplicationOptions opts;
  opts.instruments.spatial_policy = !a.no_spatial_policy;
  opts.instruments.basis_on_spatial = !a.no_basis;

  std::vector<ModelForm> forms;
  if (a.mode == "both")
    forms = {ModelForm::differenced, ModelForm::level};
  else
    forms = {*parse_model_form(a.mode)};
  for (ModelForm f : forms) {
    const ApplicationReport rep = run_application(panel, W, f, a.p, opts);
    const std::string md = emit_application(rep, TableFormat::markdown);
    std::cout << "## " << to_string(f) << "\n\n" << md << '\n';
    if (!a.out.empty()) {
      const fs::path dir(a.out);
      const std::string stem = std::string(to_string(f));
      write_text(dir / (stem + ".md"), md);
      write_text(dir / (stem + ".csv"), emit_application(rep, TableFormat::csv));
      write_text(dir / (stem + ".json"), emit_application(rep, TableFormat::json));
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// gen-weights
// ---------------------------------------------------------------------------

struct WeightsArgs {
  std::string design, out;
  Index n = 100;
  std::vector<int> dims;
  std::uint64_t seed = 1;
};

int cmd_gen_weights(const WeightsArgs& a) {
  const auto design = parse_design(a.design);
  if (!design || *design == Design::custom) throw InputError("unknown design '" + a.design + "'");
  McCell cell;
  cell.design = *design;
  cell.n = a.n;
  if (!a.dims.empty()) {
    if (a.dims.size() != 2) throw InputError("--dims takes two integers");
    cell.dims = LatticeDims{a.dims[0], a.dims[1]};
  }
  const WeightMatrix W = detail::cell_weights(cell, a.seed);
  io::write_weights(a.out, W);
  std::cout << to_string(W.design()) << ": n = " << W.n() << ", nnz = " << W.nnz()
            << ", spectral norm = " << spectral_norm(W) << '\n';
  return ok;
}

// ---------------------------------------------------------------------------
// gen-fixture
// ---------------------------------------------------------------------------

struct FixtureArgs {
  std::string kind = "null", design = "lattice", scheme = "a", family = "gaussian", out;
  Index n = 400;
  std::vector<int> dims;
  std::uint64_t seed = 1;
};

int cmd_gen_fixture(const FixtureArgs& a) {
  const fs::path dir(a.out);
  fs::create_directories(dir);
  if (a.kind == "panel") {
    const SyntheticPanel fx = make_synthetic_panel(a.seed);
    std::ostringstream os;
    write_panel(os, fx.panel);
    write_text(dir / "panel.csv", os.str());
    io::write_weights(dir / "W.txt", fx.W);
    write_text(dir / "schema.json", nlohmann::json(PanelSchema{}).dump(2) + "\n");
    std::cout << "panel: " << fx.panel.ids.size() << " municipalities, "
              << fx.panel.rows.size() << " rows\n";
    return ok;
  }
  const auto link = parse_link(a.kind);
  const auto scheme = parse_scheme(a.scheme);
  const auto family = parse_family(a.family);
  const auto design = parse_design(a.design);
  if (!link) throw InputError("unknown fixture kind '" + a.kind + "'");
  if (!scheme) throw InputError("unknown scheme '" + a.scheme + "'");
  if (!family) throw InputError("unknown family '" + a.family + "'");
  if (!design || *design == Design::custom) throw InputError("unknown design '" + a.design + "'");

  McCell cell;
  cell.design = *link == Link::null_linear ? *design : Design::lattice;
  cell.n = a.n;
  if (!a.dims.empty()) {
    if (a.dims.size() != 2) throw InputError("--dims takes two integers");
    cell.dims = LatticeDims{a.dims[0], a.dims[1]};
  }
  cell.scheme = *scheme;
  cell.family = *family;
  cell.link = *link;
  McConfig cfg;
  cfg.master_seed = a.seed;
  cfg.cells = {cell};
  cfg.validate();

  const detail::CellContext ctx = detail::prepare_cell(cell, cfg);
  Engine rng = make_stream(a.seed, StreamTag::dataset);
  const Matrix X = gen_X(ctx.W.n(), rng);
  const Vector sigma = ctx.fixed_sigma ? *ctx.fixed_sigma : gen_sigma(cell.scheme, ctx.W, X, rng);
  const Vector eps = gen_errors(cell.family, sigma, rng);
  const Vector y = cell.link == Link::null_linear
                       ? ctx.solver->solve(X * default_beta0() + eps)
                       : gen_lattice_nonlinear_y(cell.link, cell_dims(cell), X, default_beta0(), eps);
  io::write_vector(dir / "y.csv", y, "y");
  io::write_matrix(dir / "X.csv", X, {"const", "x2", "x3"});
  io::write_weights(dir / "W.txt", ctx.W);
  std::cout << "fixture " << a.kind << ": n = " << ctx.W.n() << ", p = " << ctx.spec.p << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heteroskedasticity-robust test of linearity of the spatial lag in SAR models"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  TestArgs ta;
  auto* test = app.add_subcommand("test", "Run the linearity test on data files");
  test->add_option("--y", ta.y, "Outcome vector (CSV, one column)")->required()->check(CLI::ExistingFile);
  test->add_option("--x", ta.x, "Regressors (CSV); [1, x2, x3] enables default instruments")
      ->required()->check(CLI::ExistingFile);
  test->add_option("--w", ta.w, "Weight matrix (triplets, or dense .csv)")->required()->check(CLI::ExistingFile);
  test->add_option("--z", ta.z, "Instrument matrix (CSV)")->check(CLI::ExistingFile);
  test->add_option("--p", ta.p, "Number of basis functions (default floor(n^(1/3)))")
      ->check(CLI::Range(1, kMaxHermiteDegree));
  test->add_option("--alpha", ta.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  test->add_option("--out", ta.out, "Write the result as JSON");
  test->add_option("--rule", ta.rule, "Rule deciding exit code 3")
      ->check(CLI::IsMember({"chi2", "normal"}));

  SimArgs sa;
  auto* size = app.add_subcommand("simulate-size", "Monte Carlo size experiment");
  auto* power = app.add_subcommand("simulate-power", "Monte Carlo power experiment");
  for (auto* sub : {size, power}) {
    sub->add_option("--config", sa.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", sa.out, "Output directory")->required();
    sub->add_option("--workers", sa.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--reps", sa.reps, "Override replications")->check(CLI::PositiveNumber);
    sub->add_option("--seed", sa.seed, "Override the master seed");
  }

  EmpiricalArgs ea;
  auto* emp = app.add_subcommand("empirical", "Municipality tax-rate application");
  emp->add_option("--panel", ea.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  emp->add_option("--schema", ea.schema, "Column mapping (JSON)")->check(CLI::ExistingFile);
  emp->add_option("--w", ea.w, "Row-normalized contiguity W (triplets)")->required()->check(CLI::ExistingFile);
  emp->add_option("--mode", ea.mode, "differenced, level or both")
      ->check(CLI::IsMember({"differenced", "level", "both"}));
  emp->add_option("--p", ea.p, "Basis sizes")->delimiter(',');
  emp->add_option("--out", ea.out, "Output directory for tables");
  emp->add_flag("--no-spatial-policy", ea.no_spatial_policy, "Drop W P and W M from the instruments");
  emp->add_flag("--no-basis-instruments", ea.no_basis, "Drop the basis transforms of W dX");

  WeightsArgs wa;
  auto* gw = app.add_subcommand("gen-weights", "Generate a simulation weight matrix");
  gw->add_option("--design", wa.design, "exponential, cutoff, circulant, random_contiguity, lattice")->required();
  gw->add_option("--n", wa.n, "Size (nominal size for the lattice)");
  gw->add_option("--dims", wa.dims, "Lattice m1,m2")->delimiter(',');
  gw->add_option("--seed", wa.seed, "Seed");
  gw->add_option("--out", wa.out, "Output file (.csv for dense)")->required();

  FixtureArgs fa;
  auto* gf = app.add_subcommand("gen-fixture", "Write a simulated dataset bundle");
  gf->add_option("--kind", fa.kind, "null, arctan, log_quadratic or panel")
      ->check(CLI::IsMember({"null", "null_linear", "arctan", "log_quadratic", "log", "panel"}));
  gf->add_option("--design", fa.design, "Weight design for null fixtures");
  gf->add_option("--n", fa.n, "Size (nominal size for the lattice)");
  gf->add_option("--dims", fa.dims, "Lattice m1,m2")->delimiter(',');
  gf->add_option("--scheme", fa.scheme, "Heteroskedasticity scheme a, b or c");
  gf->add_option("--family", fa.family, "gaussian or student_t5");
  gf->add_option("--seed", fa.seed, "Seed");
  gf->add_option("--out", fa.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (*test) return cmd_test(ta);
    if (*size) return cmd_simulate(sa, false);
    if (*power) return cmd_simulate(sa, true);
    if (*emp) return cmd_empirical(ea);
    if (*gw) return cmd_gen_weights(wa);
    if (*gf) return cmd_gen_fixture(fa);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const NumericalError& e) {
    std::cerr << "computation error: " << e.what() << '\n';
    return computation;
  }
  return usage;
}
