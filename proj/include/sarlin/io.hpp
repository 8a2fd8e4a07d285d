#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sarlin/error.hpp"
#include "sarlin/weights.hpp"

namespace sarlin::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weight matrices. Triplet format: header "n nnz", then nnz rows "i j value"
// with 1-based indices. Blank lines and lines starting with '#' are skipped.
// ---------------------------------------------------------------------------

inline void write_triplets(std::ostream& out, const WeightMatrix& w) {
  out << std::setprecision(17) << w.n() << ' ' << w.nnz() << '\n';
  const SparseMatrix& v = w.values();
  for (Index i = 0; i < v.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(v, i); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

inline WeightMatrix read_triplets(std::istream& in, Design design = Design::custom) {
  std::string line;
  long long n = -1, nnz = -1, seen = 0, lineno = 0;
  std::vector<Eigen::Triplet<double>> trips;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls{std::string(t)};
    if (n < 0) {
      if (!(ls >> n >> nnz) || n < 1 || nnz < 0)
        throw InputError("triplet header must be 'n nnz' (line " + std::to_string(lineno) + ")");
      continue;
    }
    long long i = 0, j = 0;
    std::string vs;
    double val = 0.0;
    if (!(ls >> i >> j >> vs) || !detail::parse_double(vs, val))
      throw InputError("malformed triplet at line " + std::to_string(lineno));
    if (i < 1 || j < 1 || i > n || j > n)
      throw InputError("triplet index out of range at line " + std::to_string(lineno));
    trips.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), val);
    ++seen;
  }
  if (n < 0) throw InputError("empty triplet file");
  if (seen != nnz)
    throw InputError("triplet header announces " + std::to_string(nnz) + " entries, found " +
                     std::to_string(seen));
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return WeightMatrix(std::move(m), design);
}

inline void write_dense_csv(std::ostream& out, const Matrix& m) {
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

struct Table {
  Matrix values;
  std::vector<std::string> names;  // empty when the file had no header
};

/// Numeric CSV. A first row containing any non-numeric field is a header.
inline Table read_csv(std::istream& in, const std::string& what = "csv") {
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto fields = detail::split(s, ',');
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size(); ++c)
      numeric = numeric && detail::parse_double(fields[c], row[c]);
    if (!numeric) {
      if (rows.empty() && t.names.empty()) {
        for (auto f : fields) t.names.emplace_back(f);
        continue;
      }
      throw InputError(what + ": non-numeric value at line " + std::to_string(lineno));
    }
    const std::size_t width = t.names.empty() ? (rows.empty() ? row.size() : rows[0].size())
                                              : t.names.size();
    if (row.size() != width)
      throw InputError(what + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(what + ": no data rows");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

inline Table read_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_csv(in, path.string());
}

inline Matrix read_matrix(const std::filesystem::path& path) { return read_csv(path).values; }

inline Vector read_vector(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  if (t.values.cols() != 1)
    throw InputError(path.string() + ": expected a single column, found " +
                     std::to_string(t.values.cols()));
  return t.values.col(0);
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m,
                         const std::vector<std::string>& names = {}) {
  auto out = detail::open_out(path);
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  if (!names.empty()) out << '\n';
  write_dense_csv(out, m);
}

inline void write_vector(const std::filesystem::path& path, const Vector& v,
                         const std::string& name = "") {
  write_matrix(path, v, name.empty() ? std::vector<std::string>{} : std::vector{name});
}

/// Reads W from `path`: dense CSV when the extension is .csv, triplets
/// otherwise.
inline WeightMatrix read_weights(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    const Matrix m = read_matrix(path);
    if (m.rows() != m.cols()) throw InputError(path.string() + ": W must be square");
    return WeightMatrix::from_dense(m, Design::custom);
  }
  auto in = detail::open_in(path);
  return read_triplets(in);
}

inline void write_weights(const std::filesystem::path& path, const WeightMatrix& w) {
  auto out = detail::open_out(path);
  if (path.extension() == ".csv")
    write_dense_csv(out, w.dense());
  else
    write_triplets(out, w);
}

}  // namespace sarlin::io
