#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarlin/distributions.hpp"
#include "sarlin/error.hpp"
#include "sarlin/instruments.hpp"
#include "sarlin/io.hpp"
#include "sarlin/lmtest.hpp"
#include "sarlin/mc.hpp"
#include "sarlin/rng.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

// ---------------------------------------------------------------------------
// Panel input.
// ---------------------------------------------------------------------------

/// Column mapping for the municipality panel CSV.
struct PanelSchema {
  std::string id = "id";
  std::string year = "year";
  std::string tax_general = "tax_general";
  std::string tax_residential = "tax_residential";
  std::vector<std::string> covariates{"income",   "grants",    "unemployment",
                                      "age_0_16", "age_61_75", "age_75_plus"};
  std::string policy_dummy = "P";
  std::string policy_magnitude = "M";
};

inline void from_json(const nlohmann::json& j, PanelSchema& s) {
  for (const auto& [k, v] : j.items())
    if (k != "id" && k != "year" && k != "tax_general" && k != "tax_residential" &&
        k != "covariates" && k != "policy_dummy" && k != "policy_magnitude")
      throw InputError("unknown key '" + k + "' in panel schema");
  s.id = j.value("id", s.id);
  s.year = j.value("year", s.year);
  s.tax_general = j.value("tax_general", s.tax_general);
  s.tax_residential = j.value("tax_residential", s.tax_residential);
  s.covariates = j.value("covariates", s.covariates);
  s.policy_dummy = j.value("policy_dummy", s.policy_dummy);
  s.policy_magnitude = j.value("policy_magnitude", s.policy_magnitude);
  if (s.covariates.empty()) throw InputError("panel schema lists no covariates");
}

inline void to_json(nlohmann::json& j, const PanelSchema& s) {
  j = {{"id", s.id},
       {"year", s.year},
       {"tax_general", s.tax_general},
       {"tax_residential", s.tax_residential},
       {"covariates", s.covariates},
       {"policy_dummy", s.policy_dummy},
       {"policy_magnitude", s.policy_magnitude}};
}

inline PanelSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<PanelSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

struct PanelRow {
  std::string id;
  int year = 0;
  double tax_general = 0.0;
  double tax_residential = 0.0;
  std::vector<double> covariates;
  double P = 0.0;
  double M = 0.0;
};

struct MunicipalPanel {
  std::vector<std::string> covariate_names;
  std::vector<PanelRow> rows;
  std::vector<std::string> ids;  // order of first appearance; W rows follow it

  const PanelRow* find(const std::string& id, int year) const {
    for (const auto& r : rows)
      if (r.id == id && r.year == year) return &r;
    return nullptr;
  }
};

inline MunicipalPanel load_panel(std::istream& in, const PanelSchema& schema,
                                 const std::string& what = "panel") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(what + ": empty file");
  const auto header = io::detail::split(io::detail::trim(line), ',');
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw InputError(what + ": schema column '" + name + "' not found in header");
  };
  const std::size_t c_id = column(schema.id), c_year = column(schema.year),
                    c_tg = column(schema.tax_general), c_tr = column(schema.tax_residential),
                    c_p = column(schema.policy_dummy), c_m = column(schema.policy_magnitude);
  std::vector<std::size_t> c_x;
  for (const auto& name : schema.covariates) c_x.push_back(column(name));

  MunicipalPanel panel;
  panel.covariate_names = schema.covariates;
  std::map<std::pair<std::string, int>, long long> seen;
  long long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = io::detail::trim(line);
    if (s.empty()) continue;
    const auto f = io::detail::split(s, ',');
    if (f.size() != header.size())
      throw InputError(what + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(f.size()) + " fields, expected " +
                       std::to_string(header.size()));
    auto num = [&](std::size_t c) {
      double v = 0.0;
      if (!io::detail::parse_double(f[c], v) || !std::isfinite(v))
        throw InputError(what + ": missing or invalid value in column '" + std::string(header[c]) +
                         "' at line " + std::to_string(lineno));
      return v;
    };
    PanelRow r;
    r.id = std::string(f[c_id]);
    if (r.id.empty())
      throw InputError(what + ": missing id at line " + std::to_string(lineno));
    const double yr = num(c_year);
    r.year = static_cast<int>(yr);
    if (r.year != yr) throw InputError(what + ": non-integer year at line " + std::to_string(lineno));
    r.tax_general = num(c_tg);
    r.tax_residential = num(c_tr);
    for (auto c : c_x) r.covariates.push_back(num(c));
    r.P = num(c_p);
    r.M = num(c_m);
    const auto key = std::pair{r.id, r.year};
    if (auto it = seen.find(key); it != seen.end())
      throw InputError(what + ": duplicate row for id " + r.id + ", year " +
                       std::to_string(r.year) + " (lines " + std::to_string(it->second) + " and " +
                       std::to_string(lineno) + ")");
    seen[key] = lineno;
    if (std::find(panel.ids.begin(), panel.ids.end(), r.id) == panel.ids.end())
      panel.ids.push_back(r.id);
    panel.rows.push_back(std::move(r));
  }
  if (panel.rows.empty()) throw InputError(what + ": no data rows");
  return panel;
}

inline MunicipalPanel load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return load_panel(in, schema, path.string());
}

inline void write_panel(std::ostream& out, const MunicipalPanel& panel,
                        const PanelSchema& schema = {}) {
  out << std::setprecision(17) << schema.id << ',' << schema.year << ',' << schema.tax_general
      << ',' << schema.tax_residential;
  for (const auto& c : schema.covariates) out << ',' << c;
  out << ',' << schema.policy_dummy << ',' << schema.policy_magnitude << '\n';
  for (const auto& r : panel.rows) {
    out << r.id << ',' << r.year << ',' << r.tax_general << ',' << r.tax_residential;
    for (double v : r.covariates) out << ',' << v;
    out << ',' << r.P << ',' << r.M << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cross sections.
// ---------------------------------------------------------------------------

/// One row per id, in panel id order.
struct CrossSection {
  std::vector<std::string> ids;
  std::vector<std::string> covariate_names;
  Vector tax_general;
  Vector tax_residential;
  Matrix X;  // covariates (differences or levels)
  Vector P;
  Vector M;

  Index n() const { return static_cast<Index>(ids.size()); }
};

namespace detail {

inline CrossSection allocate(const MunicipalPanel& panel) {
  CrossSection cs;
  const auto n = static_cast<Index>(panel.ids.size());
  const auto K = static_cast<Index>(panel.covariate_names.size());
  cs.ids = panel.ids;
  cs.covariate_names = panel.covariate_names;
  cs.tax_general.resize(n);
  cs.tax_residential.resize(n);
  cs.X.resize(n, K);
  cs.P.resize(n);
  cs.M.resize(n);
  return cs;
}

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) s += ", ... (" + std::to_string(ids.size()) + " in total)";
  return s;
}

}  // namespace detail

/// Year-on-year differences (year2 - year1) of the tax rates and the
/// covariates; P and M are taken from the year2 row without differencing.
inline CrossSection difference_transform(const MunicipalPanel& panel, int year1 = 1999,
                                         int year2 = 2000) {
  CrossSection cs = detail::allocate(panel);
  std::vector<std::string> missing;
  for (Index i = 0; i < cs.n(); ++i) {
    const auto& id = cs.ids[static_cast<std::size_t>(i)];
    const PanelRow* a = panel.find(id, year1);
    const PanelRow* b = panel.find(id, year2);
    if (!a || !b) {
      missing.push_back(id + (a ? "" : " (no " + std::to_string(year1) + ")") +
                        (b ? "" : " (no " + std::to_string(year2) + ")"));
      continue;
    }
    cs.tax_general(i) = b->tax_general - a->tax_general;
    cs.tax_residential(i) = b->tax_residential - a->tax_residential;
    for (std::size_t c = 0; c < b->covariates.size(); ++c)
      cs.X(i, static_cast<Index>(c)) = b->covariates[c] - a->covariates[c];
    cs.P(i) = b->P;
    cs.M(i) = b->M;
  }
  if (!missing.empty()) throw InputError("unmatched ids: " + detail::join_ids(missing));
  return cs;
}

inline CrossSection level_cross_section(const MunicipalPanel& panel, int year = 2000) {
  CrossSection cs = detail::allocate(panel);
  std::vector<std::string> missing;
  for (Index i = 0; i < cs.n(); ++i) {
    const auto& id = cs.ids[static_cast<std::size_t>(i)];
    const PanelRow* r = panel.find(id, year);
    if (!r) {
      missing.push_back(id);
      continue;
    }
    cs.tax_general(i) = r->tax_general;
    cs.tax_residential(i) = r->tax_residential;
    for (std::size_t c = 0; c < r->covariates.size(); ++c)
      cs.X(i, static_cast<Index>(c)) = r->covariates[c];
    cs.P(i) = r->P;
    cs.M(i) = r->M;
  }
  if (!missing.empty())
    throw InputError("ids without a " + std::to_string(year) + " row: " + detail::join_ids(missing));
  return cs;
}

// ---------------------------------------------------------------------------
// Application.
// ---------------------------------------------------------------------------

enum class ModelForm { differenced, level };
enum class TaxType { general, residential };

inline std::string_view to_string(ModelForm m) {
  return m == ModelForm::differenced ? "differenced" : "level";
}
inline std::string_view to_string(TaxType t) {
  return t == TaxType::general ? "general" : "residential";
}

inline std::optional<ModelForm> parse_model_form(std::string_view s) {
  if (s == "differenced") return ModelForm::differenced;
  if (s == "level") return ModelForm::level;
  return std::nullopt;
}

/// "***" below 0.01, "**" below 0.05, "*" below 0.1.
inline std::string stars(double pval) {
  if (pval < 0.01) return "***";
  if (pval < 0.05) return "**";
  if (pval < 0.1) return "*";
  return "";
}

struct ApplicationEntry {
  ModelForm form = ModelForm::differenced;
  TaxType tax = TaxType::general;
  int p = 0;
  double lambda_hat = 0.0;
  double lambda_t = 0.0;
  double lambda_pval = 1.0;  // two-sided, robust t
  double t_stat = 0.0;
  double t_pval = 1.0;       // one-sided N(0,1)
  bool reject_chi2 = false;
  bool reject_normal = false;
  Index m = 0;               // instrument count

  std::string lambda_stars() const { return stars(lambda_pval); }
  std::string t_stars() const { return stars(t_pval); }
};

struct ApplicationReport {
  Index n = 0;
  std::vector<ApplicationEntry> entries;
};

struct ApplicationOptions {
  int year1 = 1999;
  int year2 = 2000;
  EmpiricalInstrumentOptions instruments;
  double alpha = 0.05;
};

/// Regressors [1, X, P, M] for a cross section.
inline Matrix application_regressors(const CrossSection& cs) {
  const Index n = cs.n(), K = cs.X.cols();
  Matrix x(n, K + 3);
  x.col(0).setOnes();
  x.middleCols(1, K) = cs.X;
  x.col(K + 1) = cs.P;
  x.col(K + 2) = cs.M;
  return x;
}

/// Test for one cross section, tax type and p. Both model forms go through
/// here after their cross sections are assembled.
inline ApplicationEntry run_cross_section(const CrossSection& cs, const WeightMatrix& W,
                                          TaxType tax, int p, const ApplicationOptions& opts) {
  detail::require(W.n() == cs.n(), "W has dimension " + std::to_string(W.n()) + ", data has " +
                                       std::to_string(cs.n()) + " municipalities");
  BasisSpec spec;
  spec.p = p;
  const InstrumentMatrix Z =
      build_empirical_instruments(cs.X, cs.P, cs.M, W, spec, opts.instruments, cs.covariate_names);
  const Vector& y = tax == TaxType::general ? cs.tax_general : cs.tax_residential;
  const Matrix X = application_regressors(cs);
  TestOptions topts;
  topts.warn_on_rate = false;
  const LinearityAnalysis a = analyze(y, X, W, Z, spec, opts.alpha, topts);

  ApplicationEntry e;
  e.tax = tax;
  e.p = p;
  e.lambda_hat = a.fit.lambda_hat;
  e.lambda_t = a.fit.t_stats(0);
  e.lambda_pval = 2.0 * normal_upper_tail(std::abs(e.lambda_t));
  e.t_stat = a.result.t_stat;
  e.t_pval = a.result.pval_normal;
  e.reject_chi2 = a.result.reject_chi2;
  e.reject_normal = a.result.reject_normal;
  e.m = Z.m();
  return e;
}

inline ApplicationReport run_application(const MunicipalPanel& panel, const WeightMatrix& W,
                                         ModelForm form, const std::vector<int>& p_list = {4, 5, 6},
                                         const ApplicationOptions& opts = {}) {
  detail::require(!p_list.empty(), "run_application: empty p list");
  const CrossSection cs = form == ModelForm::differenced
                              ? difference_transform(panel, opts.year1, opts.year2)
                              : level_cross_section(panel, opts.year2);
  const WeightMatrix w = with_known_norm(W);
  ApplicationReport report;
  report.n = cs.n();
  for (TaxType tax : {TaxType::general, TaxType::residential})
    for (int p : p_list) {
      ApplicationEntry e = run_cross_section(cs, w, tax, p, opts);
      e.form = form;
      report.entries.push_back(e);
    }
  return report;
}

/// Rows p; columns lambda_hat (t) and T for the general then the
/// residential tax rate.
inline std::string emit_application(const ApplicationReport& report, TableFormat format) {
  std::vector<int> ps;
  for (const auto& e : report.entries)
    if (std::find(ps.begin(), ps.end(), e.p) == ps.end()) ps.push_back(e.p);
  auto find = [&](TaxType t, int p) -> const ApplicationEntry* {
    for (const auto& e : report.entries)
      if (e.tax == t && e.p == p) return &e;
    return nullptr;
  };
  auto num = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
  };

  std::ostringstream os;
  if (format == TableFormat::json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : report.entries)
      arr.push_back({{"form", to_string(e.form)},     {"tax", to_string(e.tax)},
                     {"p", e.p},                      {"lambda_hat", e.lambda_hat},
                     {"lambda_t", e.lambda_t},        {"lambda_pval", e.lambda_pval},
                     {"lambda_stars", e.lambda_stars()}, {"T", e.t_stat},
                     {"T_pval", e.t_pval},            {"T_stars", e.t_stars()},
                     {"reject_chi2", e.reject_chi2},  {"reject_normal", e.reject_normal},
                     {"instruments", e.m}});
    os << nlohmann::json{{"n", report.n}, {"entries", arr}}.dump(2) << '\n';
    return os.str();
  }
  if (format == TableFormat::csv) {
    os << "form,tax,p,lambda_hat,lambda_t,lambda_stars,T,T_stars,reject_chi2,reject_normal\n";
    for (const auto& e : report.entries)
      os << to_string(e.form) << ',' << to_string(e.tax) << ',' << e.p << ',' << num(e.lambda_hat)
         << ',' << num(e.lambda_t) << ',' << e.lambda_stars() << ',' << num(e.t_stat) << ','
         << e.t_stars() << ',' << e.reject_chi2 << ',' << e.reject_normal << '\n';
    return os.str();
  }
  os << "|  p | general lambda_hat (t) | general T | residential lambda_hat (t) | residential T |\n"
     << "|---:|----------------------:|----------:|--------------------------:|--------------:|\n";
  for (int p : ps) {
    os << "| " << std::setw(2) << p << " |";
    for (TaxType t : {TaxType::general, TaxType::residential}) {
      const ApplicationEntry* e = find(t, p);
      if (!e) {
        os << " | |";
        continue;
      }
      os << ' ' << num(e->lambda_hat) << e->lambda_stars() << " (" << num(e->lambda_t) << ") | "
         << num(e->t_stat) << e->t_stars() << " |";
    }
    os << '\n';
  }
  os << "\nn = " << report.n
     << ". Robust t-statistics in parentheses. * p < 0.1; ** p < 0.05; *** p < 0.01 "
        "(lambda two-sided, T one-sided).\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic fixture with the shapes of the municipality data.
// ---------------------------------------------------------------------------

struct SyntheticPanel {
  MunicipalPanel panel;
  WeightMatrix W;
};

/// Symmetrized k-nearest-neighbour contiguity over random points in the
/// unit square, row-normalized.
inline WeightMatrix knn_contiguity(const std::vector<std::pair<double, double>>& pts, int k) {
  const auto n = static_cast<Index>(pts.size());
  detail::require(k >= 1 && k < n, "knn_contiguity: need 1 <= k < n");
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double dx = pts[i].first - pts[j].first, dy = pts[i].second - pts[j].second;
      dist[static_cast<std::size_t>(j)] = {i == j ? std::numeric_limits<double>::infinity() : dx * dx + dy * dy, j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int q = 0; q < k; ++q) {
      trips.emplace_back(i, dist[static_cast<std::size_t>(q)].second, 1.0);
      trips.emplace_back(dist[static_cast<std::size_t>(q)].second, i, 1.0);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end(), [](double, double) { return 1.0; });
  return row_normalize(WeightMatrix(std::move(a), Design::custom));
}

/// 411 municipalities observed in 1999 and 2000. Both tax rates follow a
/// linear SAR in each year with a municipality effect, so the differenced
/// and level models are linear.
inline SyntheticPanel make_synthetic_panel(std::uint64_t seed, Index n = 411) {
  Engine rng = make_stream(seed, StreamTag::fixture);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);

  std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(n));
  for (auto& pt : pts) pt = {unit(rng), unit(rng)};
  SyntheticPanel out;
  out.W = knn_contiguity(pts, 4);

  const PanelSchema schema;
  const auto K = static_cast<Index>(schema.covariates.size());
  const Vector base_mean = (Vector(6) << 11.0, 1.5, 12.0, 20.0, 14.0, 7.0).finished();
  const Vector base_sd = (Vector(6) << 1.5, 0.5, 4.0, 3.0, 2.0, 2.0).finished();
  const Vector drift_sd = (Vector(6) << 0.3, 0.1, 1.0, 0.4, 0.3, 0.3).finished();
  Matrix x1999(n, K), x2000(n, K);
  Vector P(n), M(n), mu_g(n), mu_r(n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < K; ++c) {
      x1999(i, c) = base_mean(c) + base_sd(c) * z(rng);
      x2000(i, c) = x1999(i, c) + 0.02 * base_mean(c) + drift_sd(c) * z(rng);
    }
    P(i) = unit(rng) < 0.25 ? 1.0 : 0.0;
    M(i) = P(i) * 0.3 * unit(rng);
    mu_g(i) = 0.1 * z(rng);
    mu_r(i) = 0.05 * z(rng);
  }
  const Vector beta_g = (Vector(6) << 0.02, -0.03, 0.004, 0.005, -0.004, 0.006).finished();
  const Vector beta_r = (Vector(6) << 0.01, -0.02, 0.002, 0.003, -0.002, 0.003).finished();

  const NullSolver solver_g(out.W, 0.1), solver_r(out.W, 0.1);
  auto year_rates = [&](const Matrix& x, bool policy, const Vector& beta, const Vector& mu,
                        double intercept, double sd, const NullSolver& s) {
    Vector rhs = Vector::Constant(n, intercept) + x * beta + mu;
    if (policy) rhs += 0.05 * P + 0.5 * M;
    for (Index i = 0; i < n; ++i) rhs(i) += sd * z(rng);
    return s.solve(rhs);
  };
  const Vector g1999 = year_rates(x1999, false, beta_g, mu_g, 0.4, 0.05, solver_g);
  const Vector g2000 = year_rates(x2000, true, beta_g, mu_g, 0.42, 0.05, solver_g);
  const Vector r1999 = year_rates(x1999, false, beta_r, mu_r, 0.15, 0.03, solver_r);
  const Vector r2000 = year_rates(x2000, true, beta_r, mu_r, 0.16, 0.03, solver_r);

  out.panel.covariate_names = schema.covariates;
  for (Index i = 0; i < n; ++i) out.panel.ids.push_back(std::to_string(1000 + i));
  for (int year : {1999, 2000})
    for (Index i = 0; i < n; ++i) {
      PanelRow r;
      r.id = out.panel.ids[static_cast<std::size_t>(i)];
      r.year = year;
      const bool late = year == 2000;
      r.tax_general = late ? g2000(i) : g1999(i);
      r.tax_residential = late ? r2000(i) : r1999(i);
      for (Index c = 0; c < K; ++c) r.covariates.push_back(late ? x2000(i, c) : x1999(i, c));
      r.P = P(i);
      r.M = M(i);
      out.panel.rows.push_back(std::move(r));
    }
  return out;
}

}  // namespace sarlin
