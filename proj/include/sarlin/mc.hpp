#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sarlin/dgp.hpp"
#include "sarlin/error.hpp"
#include "sarlin/lmtest.hpp"
#include "sarlin/rng.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

/// One simulation cell. `n` is the nominal size used for table rows and for
/// the default p; lattice cells run on m1*m2 units.
struct McCell {
  Design design = Design::circulant;
  Index n = 100;
  std::optional<LatticeDims> dims;
  std::optional<int> p;
  HeteroScheme scheme = HeteroScheme::a_degree;
  ErrorFamily family = ErrorFamily::gaussian;
  Link link = Link::null_linear;

  friend bool operator==(const McCell&, const McCell&) = default;
};

/// Lattice shape for a nominal size: (10,10), (14,15), (20,20), (26,27),
/// (31,32), (44,45) for 100, 200, 400, 700, 1000, 2000.
inline std::optional<LatticeDims> standard_lattice(Index nominal) {
  switch (nominal) {
    case 100: return LatticeDims{10, 10};
    case 200: return LatticeDims{14, 15};
    case 400: return LatticeDims{20, 20};
    case 700: return LatticeDims{26, 27};
    case 1000: return LatticeDims{31, 32};
    case 2000: return LatticeDims{44, 45};
    default: return std::nullopt;
  }
}

inline LatticeDims cell_dims(const McCell& c) {
  if (c.dims) return *c.dims;
  if (auto d = standard_lattice(c.n)) return *d;
  throw PreconditionError("lattice cell with n = " + std::to_string(c.n) +
                          " needs explicit dims [m1, m2]");
}

inline Index cell_units(const McCell& c) {
  return c.design == Design::lattice ? cell_dims(c).n() : c.n;
}

inline int cell_p(const McCell& c) { return c.p ? *c.p : choose_p(c.n); }

struct McConfig {
  int reps = 1000;
  double alpha = 0.05;
  std::uint64_t master_seed = 1;
  int workers = 1;
  double lambda0 = 0.4;
  std::vector<McCell> cells;

  void validate() const {
    detail::require(reps >= 1, "reps must be at least 1");
    detail::require(!cells.empty(), "config has no cells");
    detail::require(workers >= 1, "workers must be at least 1");
    detail::require_level(alpha);
    for (const auto& c : cells) {
      detail::require(c.design != Design::custom, "simulation cells need a generated design");
      if (c.link != Link::null_linear)
        detail::require(c.design == Design::lattice, "nonlinear links need the lattice design");
      if (c.design == Design::lattice) (void)cell_dims(c);
      detail::require(cell_units(c) >= 8, "cell n must be at least 8");
      detail::require(cell_p(c) >= 1, "cell p must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Results.
// ---------------------------------------------------------------------------

struct McCellResult {
  McCell cell;
  Index n_units = 0;
  int p = 0;
  int reps = 0;
  int completed = 0;
  int failures = 0;
  int rejections_chi2 = 0;
  int rejections_normal = 0;
  double reject_rate_chi2 = 0.0;
  double reject_rate_normal = 0.0;
  double mc_se = 0.0;         // sqrt(rate(1-rate)/completed), chi2 rule
  double mc_se_normal = 0.0;  // same for the normal rule
  double mean_t = 0.0;
  double var_t = 0.0;
  double mean_lambda = 0.0;
  bool over_budget = false;
  std::string first_failure;

  friend bool operator==(const McCellResult&, const McCellResult&) = default;
};

struct McReport {
  int reps = 0;
  double alpha = 0.05;
  std::uint64_t master_seed = 0;
  std::vector<McCellResult> cells;

  bool over_budget() const {
    return std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.over_budget; });
  }

  friend bool operator==(const McReport&, const McReport&) = default;
};

/// Allowed failed replications per cell.
inline int failure_budget(int reps) { return reps / 100; }

// ---------------------------------------------------------------------------
// Engine.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

inline std::string cell_signature(const McCell& c) {
  std::ostringstream os;
  os << to_string(c.design) << '|' << c.n << '|';
  if (c.design == Design::lattice) {
    const auto d = cell_dims(c);
    os << d.m1 << 'x' << d.m2;
  }
  os << '|' << cell_p(c) << '|' << to_string(c.scheme) << '|' << to_string(c.family) << '|'
     << to_string(c.link);
  return os.str();
}

/// W for a cell. Stochastic designs come from a stream keyed by (design, n)
/// so every scheme and family sees the same matrix; an all-zero draw is
/// redrawn from the next attempt index.
inline WeightMatrix cell_weights(const McCell& c, std::uint64_t master) {
  const Index n = cell_units(c);
  switch (c.design) {
    case Design::lattice: {
      const auto d = cell_dims(c);
      return gen_lattice(d.m1, d.m2);
    }
    case Design::circulant: return gen_circulant(n);
    case Design::exponential:
    case Design::cutoff:
    case Design::random_contiguity:
      for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Engine rng = make_stream(master, StreamTag::weights,
                                 {static_cast<std::uint64_t>(c.design),
                                  static_cast<std::uint64_t>(n), attempt});
        WeightMatrix w = c.design == Design::exponential ? gen_exponential(n, rng)
                         : c.design == Design::cutoff    ? gen_cutoff(n, rng)
                                                         : gen_random_contiguity(n, rng);
        if (!w.is_zero()) return w;
      }
      throw NumericalError("could not draw a nonzero W for " + std::string(to_string(c.design)));
    case Design::custom: break;
  }
  throw PreconditionError("simulation cells need a generated design");
}

struct RepOutcome {
  bool ok = false;
  bool reject_chi2 = false;
  bool reject_normal = false;
  double t_stat = 0.0;
  double lambda_hat = 0.0;
  std::string error;
};

struct CellContext {
  McCell cell;
  WeightMatrix W;
  BasisSpec spec;
  std::optional<NullSolver> solver;
  std::optional<Vector> fixed_sigma;
  std::uint64_t key = 0;
};

inline CellContext prepare_cell(const McCell& c, const McConfig& cfg) {
  CellContext ctx;
  ctx.cell = c;
  ctx.W = cell_weights(c, cfg.master_seed);
  ctx.spec.p = cell_p(c);
  ctx.key = fnv1a(cell_signature(c));
  const Index n = ctx.W.n();
  if (c.link == Link::null_linear) ctx.solver.emplace(ctx.W, cfg.lambda0);
  if (c.scheme == HeteroScheme::a_degree) {
    Engine unused = make_stream(cfg.master_seed, StreamTag::sigma_chisq);
    ctx.fixed_sigma = gen_sigma(c.scheme, ctx.W, Matrix(0, 0), unused, IsolatedUnits::allow);
  } else if (c.scheme == HeteroScheme::b_chisq2) {
    // Drawn once per n and shared by every design and replication.
    Engine rng = make_stream(cfg.master_seed, StreamTag::sigma_chisq,
                             {static_cast<std::uint64_t>(n)});
    ctx.fixed_sigma = gen_sigma(c.scheme, ctx.W, Matrix(0, 0), rng);
  }
  return ctx;
}

inline RepOutcome run_replication(const CellContext& ctx, const McConfig& cfg, int r) {
  RepOutcome out;
  try {
    Engine rng = make_stream(cfg.master_seed, StreamTag::replication,
                             {ctx.key, static_cast<std::uint64_t>(r)});
    const Index n = ctx.W.n();
    const Matrix X = gen_X(n, rng);
    const Vector sigma = ctx.fixed_sigma ? *ctx.fixed_sigma
                                         : gen_sigma(ctx.cell.scheme, ctx.W, X, rng);
    const Vector eps = gen_errors(ctx.cell.family, sigma, rng);
    const Vector beta0 = default_beta0();
    Vector y;
    if (ctx.cell.link == Link::null_linear)
      y = ctx.solver->solve(X * beta0 + eps);
    else
      y = gen_lattice_nonlinear_y(ctx.cell.link, cell_dims(ctx.cell), X, beta0, eps);
    const InstrumentMatrix Z = build_mc_instruments(X, ctx.W, ctx.spec);
    TestOptions opts;
    opts.warn_on_rate = false;
    const LinearityTestResult res = analyze(y, X, ctx.W, Z, ctx.spec, cfg.alpha, opts).result;
    out.ok = std::isfinite(res.t_stat);
    if (!out.ok) out.error = "non-finite statistic";
    out.reject_chi2 = res.reject_chi2;
    out.reject_normal = res.reject_normal;
    out.t_stat = res.t_stat;
    out.lambda_hat = res.lambda_hat;
  } catch (const NumericalError& e) {
    out.error = e.what();
  } catch (const PreconditionError& e) {
    out.error = e.what();
  }
  return out;
}

inline McCellResult aggregate(const McCell& c, Index n_units, int p, const std::vector<RepOutcome>& reps) {
  McCellResult r;
  r.cell = c;
  r.n_units = n_units;
  r.p = p;
  r.reps = static_cast<int>(reps.size());
  double sum_t = 0.0, sum_l = 0.0;
  for (const auto& o : reps) {
    if (!o.ok) {
      if (r.failures++ == 0) r.first_failure = o.error;
      continue;
    }
    ++r.completed;
    r.rejections_chi2 += o.reject_chi2;
    r.rejections_normal += o.reject_normal;
    sum_t += o.t_stat;
    sum_l += o.lambda_hat;
  }
  r.over_budget = r.failures > failure_budget(r.reps);
  if (r.completed > 0) {
    const double m = r.completed;
    r.reject_rate_chi2 = r.rejections_chi2 / m;
    r.reject_rate_normal = r.rejections_normal / m;
    r.mc_se = std::sqrt(r.reject_rate_chi2 * (1.0 - r.reject_rate_chi2) / m);
    r.mc_se_normal = std::sqrt(r.reject_rate_normal * (1.0 - r.reject_rate_normal) / m);
    r.mean_t = sum_t / m;
    r.mean_lambda = sum_l / m;
    double ss = 0.0;
    for (const auto& o : reps)
      if (o.ok) ss += (o.t_stat - r.mean_t) * (o.t_stat - r.mean_t);
    r.var_t = r.completed > 1 ? ss / (m - 1.0) : 0.0;
  }
  return r;
}

}  // namespace detail

using ProgressFn = std::function<void(const McCellResult&, std::size_t done, std::size_t total)>;

/// Runs every cell. Replications are spread over `workers` threads; each
/// replication draws from its own substream and results are reduced in
/// replication order, so the report does not depend on the worker count.
inline McReport run_experiment(const McConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  McReport report;
  report.reps = cfg.reps;
  report.alpha = cfg.alpha;
  report.master_seed = cfg.master_seed;
  for (std::size_t ci = 0; ci < cfg.cells.size(); ++ci) {
    const detail::CellContext ctx = detail::prepare_cell(cfg.cells[ci], cfg);
    std::vector<detail::RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
    std::atomic<int> next{0};
    auto work = [&] {
      for (int r = next++; r < cfg.reps; r = next++)
        outcomes[static_cast<std::size_t>(r)] = detail::run_replication(ctx, cfg, r);
    };
    const int nthreads = std::min(cfg.workers, cfg.reps);
    if (nthreads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    }
    report.cells.push_back(detail::aggregate(ctx.cell, ctx.W.n(), ctx.spec.p, outcomes));
    if (progress) progress(report.cells.back(), ci + 1, cfg.cells.size());
  }
  return report;
}

inline McReport run_size_experiment(const McConfig& cfg, const ProgressFn& progress = {}) {
  for (const auto& c : cfg.cells)
    detail::require(c.link == Link::null_linear, "size experiments need link null_linear");
  return run_experiment(cfg, progress);
}

inline McReport run_power_experiment(const McConfig& cfg, const ProgressFn& progress = {}) {
  for (const auto& c : cfg.cells)
    detail::require(c.link != Link::null_linear && c.design == Design::lattice,
                    "power experiments need a nonlinear link on the lattice design");
  return run_experiment(cfg, progress);
}

// ---------------------------------------------------------------------------
// JSON.
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class Parse>
T parse_enum(const nlohmann::json& j, const std::string& key, Parse parse) {
  if (!j.is_string()) throw InputError("config key '" + key + "' must be a string");
  const auto v = parse(j.get<std::string>());
  if (!v) throw InputError("config key '" + key + "' has invalid value '" + j.get<std::string>() + "'");
  return *v;
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw InputError("unknown key '" + k + "' in " + where);
}

inline McCell cell_from_json(const nlohmann::json& j, const std::string& where) {
  check_keys(j, {"design", "n", "dims", "p", "scheme", "family", "link"}, where);
  McCell c;
  try {
    c.design = parse_enum<Design>(j.at("design"), "design", parse_design);
    c.n = j.at("n").get<Index>();
    if (j.contains("dims")) {
      const auto d = j.at("dims").get<std::vector<int>>();
      if (d.size() != 2) throw InputError("config key 'dims' must be [m1, m2]");
      c.dims = LatticeDims{d[0], d[1]};
    }
    if (j.contains("p")) c.p = j.at("p").get<int>();
    if (j.contains("scheme")) c.scheme = parse_enum<HeteroScheme>(j.at("scheme"), "scheme", parse_scheme);
    if (j.contains("family")) c.family = parse_enum<ErrorFamily>(j.at("family"), "family", parse_family);
    if (j.contains("link")) c.link = parse_enum<Link>(j.at("link"), "link", parse_link);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": " + e.what());
  }
  return c;
}

inline nlohmann::json cell_to_json(const McCell& c) {
  nlohmann::json j{{"design", to_string(c.design)},
                   {"n", c.n},
                   {"scheme", to_string(c.scheme)},
                   {"family", to_string(c.family)},
                   {"link", to_string(c.link)}};
  if (c.dims) j["dims"] = {c.dims->m1, c.dims->m2};
  if (c.p) j["p"] = *c.p;
  return j;
}

// "grid": cartesian product over lists; scalars count as one-element lists.
inline std::vector<McCell> grid_from_json(const nlohmann::json& g) {
  check_keys(g, {"design", "n", "scheme", "family", "link", "p"}, "grid");
  auto list = [&](const char* key, nlohmann::json dflt) {
    nlohmann::json v = g.contains(key) ? g.at(key) : dflt;
    if (!v.is_array()) v = nlohmann::json::array({v});
    return v;
  };
  if (!g.contains("design") || !g.contains("n"))
    throw InputError("grid needs at least 'design' and 'n'");
  std::vector<McCell> cells;
  for (const auto& fam : list("family", "gaussian"))
    for (const auto& sch : list("scheme", "a"))
      for (const auto& n : list("n", nullptr))
        for (const auto& des : list("design", nullptr))
          for (const auto& lnk : list("link", "null_linear")) {
            nlohmann::json c{{"design", des}, {"n", n}, {"scheme", sch}, {"family", fam}, {"link", lnk}};
            cells.push_back(cell_from_json(c, "grid"));
          }
  return cells;
}

}  // namespace detail

/// Config document:
///   {"reps": 1000, "alpha": 0.05, "master_seed": 7, "workers": 1,
///    "lambda0": 0.4, "cells": [{...}], "grid": {...}}
/// Cells list explicit entries; grid expands to the cartesian product
/// (family, scheme, n, design, link). Both may be present.
inline McConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"reps", "alpha", "master_seed", "workers", "lambda0", "cells", "grid",
                         "description"},
                     "config");
  McConfig cfg;
  try {
    cfg.reps = j.value("reps", cfg.reps);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.lambda0 = j.value("lambda0", cfg.lambda0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (j.contains("cells")) {
    if (!j.at("cells").is_array()) throw InputError("config key 'cells' must be an array");
    std::size_t i = 0;
    for (const auto& c : j.at("cells"))
      cfg.cells.push_back(detail::cell_from_json(c, "cells[" + std::to_string(i++) + "]"));
  }
  if (j.contains("grid"))
    for (auto& c : detail::grid_from_json(j.at("grid"))) cfg.cells.push_back(c);
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json config_to_json(const McConfig& cfg) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : cfg.cells) cells.push_back(detail::cell_to_json(c));
  return {{"reps", cfg.reps},         {"alpha", cfg.alpha},     {"master_seed", cfg.master_seed},
          {"workers", cfg.workers},   {"lambda0", cfg.lambda0}, {"cells", cells}};
}

inline void to_json(nlohmann::json& j, const McCellResult& r) {
  j = detail::cell_to_json(r.cell);
  j.update({{"n_units", r.n_units},
            {"p", r.p},
            {"reps", r.reps},
            {"completed", r.completed},
            {"failures", r.failures},
            {"rejections_chi2", r.rejections_chi2},
            {"rejections_normal", r.rejections_normal},
            {"reject_rate_chi2", r.reject_rate_chi2},
            {"reject_rate_normal", r.reject_rate_normal},
            {"mc_se", r.mc_se},
            {"mc_se_normal", r.mc_se_normal},
            {"mean_t", r.mean_t},
            {"var_t", r.var_t},
            {"mean_lambda", r.mean_lambda},
            {"over_budget", r.over_budget},
            {"first_failure", r.first_failure}});
}

inline void from_json(const nlohmann::json& j, McCellResult& r) {
  nlohmann::json cell;
  for (const char* k : {"design", "n", "dims", "scheme", "family", "link"})
    if (j.contains(k)) cell[k] = j.at(k);
  r.cell = detail::cell_from_json(cell, "report cell");
  // p is a result field; restore it as the explicit cell p only if it was
  // not the default.
  r.p = j.at("p").get<int>();
  if (r.p != cell_p(r.cell)) r.cell.p = r.p;
  j.at("n_units").get_to(r.n_units);
  j.at("reps").get_to(r.reps);
  j.at("completed").get_to(r.completed);
  j.at("failures").get_to(r.failures);
  j.at("rejections_chi2").get_to(r.rejections_chi2);
  j.at("rejections_normal").get_to(r.rejections_normal);
  j.at("reject_rate_chi2").get_to(r.reject_rate_chi2);
  j.at("reject_rate_normal").get_to(r.reject_rate_normal);
  j.at("mc_se").get_to(r.mc_se);
  j.at("mc_se_normal").get_to(r.mc_se_normal);
  j.at("mean_t").get_to(r.mean_t);
  j.at("var_t").get_to(r.var_t);
  j.at("mean_lambda").get_to(r.mean_lambda);
  j.at("over_budget").get_to(r.over_budget);
  j.at("first_failure").get_to(r.first_failure);
}

inline void to_json(nlohmann::json& j, const McReport& r) {
  j = {{"reps", r.reps}, {"alpha", r.alpha}, {"master_seed", r.master_seed}, {"cells", r.cells}};
}

inline void from_json(const nlohmann::json& j, McReport& r) {
  j.at("reps").get_to(r.reps);
  j.at("alpha").get_to(r.alpha);
  j.at("master_seed").get_to(r.master_seed);
  j.at("cells").get_to(r.cells);
}

// ---------------------------------------------------------------------------
// Tables: rows (family, scheme, n, p); columns one per design (size) or link
// (power), first under the chi2 rule then under the normal rule.
// ---------------------------------------------------------------------------

enum class TableFormat { csv, json, markdown };

inline std::optional<TableFormat> parse_table_format(std::string_view s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  if (s == "markdown" || s == "md") return TableFormat::markdown;
  return std::nullopt;
}

namespace detail {

inline std::string column_label(const McCell& c) {
  return std::string(c.link == Link::null_linear ? to_string(c.design) : to_string(c.link));
}

struct TableLayout {
  std::vector<std::string> columns;
  std::vector<std::tuple<std::string, std::string, Index, int>> rows;  // family, scheme, n, p
  std::map<std::pair<std::size_t, std::size_t>, const McCellResult*> at;
};

inline TableLayout layout(const McReport& report) {
  TableLayout t;
  auto index_of = [](auto& v, const auto& x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it == v.end()) {
      v.push_back(x);
      return v.size() - 1;
    }
    return static_cast<std::size_t>(it - v.begin());
  };
  for (const auto& r : report.cells) {
    const auto col = index_of(t.columns, column_label(r.cell));
    const auto row = index_of(
        t.rows, std::tuple{std::string(to_string(r.cell.family)),
                           std::string(to_string(r.cell.scheme)), r.cell.n, r.p});
    t.at[{row, col}] = &r;
  }
  return t;
}

inline std::string fmt_rate(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace detail

inline std::string emit_table(const McReport& report, TableFormat format) {
  detail::require(!report.cells.empty(), "emit_table: empty report");
  if (format == TableFormat::json) return nlohmann::json(report).dump(2) + "\n";

  const auto t = detail::layout(report);
  std::vector<std::string> header{"family", "scheme", "n", "p"};
  for (const char* rule : {"chi2", "normal"})
    for (const auto& c : t.columns) header.push_back(c + "_" + rule);
  std::vector<std::vector<std::string>> body;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& [fam, sch, n, p] = t.rows[i];
    std::vector<std::string> line{fam, sch, std::to_string(n), std::to_string(p)};
    for (int rule = 0; rule < 2; ++rule)
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        auto it = t.at.find({i, c});
        line.push_back(it == t.at.end() ? ""
                       : detail::fmt_rate(rule == 0 ? it->second->reject_rate_chi2
                                                    : it->second->reject_rate_normal));
      }
    body.push_back(std::move(line));
  }

  std::ostringstream os;
  if (format == TableFormat::csv) {
    auto row = [&](const std::vector<std::string>& v) {
      for (std::size_t j = 0; j < v.size(); ++j) os << (j ? "," : "") << v[j];
      os << '\n';
    };
    row(header);
    for (const auto& l : body) row(l);
    return os.str();
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) {
    width[j] = header[j].size();
    for (const auto& l : body) width[j] = std::max(width[j], l[j].size());
  }
  auto row = [&](const std::vector<std::string>& v) {
    os << '|';
    for (std::size_t j = 0; j < v.size(); ++j)
      os << ' ' << std::string(width[j] - v[j].size(), ' ') << v[j] << " |";
    os << '\n';
  };
  row(header);
  os << '|';
  for (auto w : width) os << std::string(w + 1, '-') << ":|";
  os << '\n';
  for (const auto& l : body) row(l);
  os << "\nRejection frequencies at alpha = " << report.alpha << ", " << report.reps
     << " replications per cell.\n";
  return os.str();
}

}  // namespace sarlin
