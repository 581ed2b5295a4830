#pragma once

// CSV ingestion with t-statistic screening, table emission, and the
// versioned JSON format shared by models and experiment specs.

#include "sqda/copula.hpp"
#include "sqda/experiment.hpp"
#include "sqda/multigroup.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sqda {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal that reads back to the same double.
inline std::string format_shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// 17 significant digits, the model-file representation.
inline std::string format_17g(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

/// Locale-independent parse of a whole token; nullopt if anything is left over.
inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf" || s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf" || s == "-Inf") return -std::numeric_limits<double>::infinity();
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace detail

/// Raw CSV table: header plus rows of trimmed cells; blank lines skipped.
/// `line_numbers[i]` is the 1-based file line of row i.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    for (auto& c : cells) c = detail::trim(c);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(t.header.size()) + " cells, got " +
                                             std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorKind::ParseError, "missing header row");
  return t;
}

/// Dataset read from CSV. Class ids follow the sorted label strings unless
/// every label is already an integer in 1..K.
struct IngestedData {
  LabeledDataset data;
  std::vector<std::string> feature_names;
  std::vector<Index> kept_columns;  // positions among the file's feature columns
  std::vector<std::string> class_names;  // class_names[k-1] is the file label of class k
};

/// Welch two-sample t statistic per feature (class 2 minus class 1). A zero
/// standard error scores 0 for a zero difference and +inf otherwise.
inline Vector welch_t_statistics(const LabeledDataset& data) {
  const Matrix x1 = data.rows_of(1);
  const Matrix x2 = data.rows_of(2);
  detail::require(x1.rows() >= 2 && x2.rows() >= 2, ErrorKind::TooFewSamples,
                  "t statistics need two samples per class");
  const Index p = data.cols();
  Vector t(p);
  for (Index j = 0; j < p; ++j) {
    const double m1 = x1.col(j).mean();
    const double m2 = x2.col(j).mean();
    const double v1 = (x1.col(j).array() - m1).square().sum() / static_cast<double>(x1.rows() - 1);
    const double v2 = (x2.col(j).array() - m2).square().sum() / static_cast<double>(x2.rows() - 1);
    const double se = std::sqrt(v1 / static_cast<double>(x1.rows()) + v2 / static_cast<double>(x2.rows()));
    const double diff = m2 - m1;
    if (se == 0.0) {
      t[j] = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      t[j] = diff / se;
    }
  }
  return t;
}

/// Indices of the top-k features by |t|, returned in original order.
/// Equal scores keep the lower index.
inline std::vector<Index> screen_features(const LabeledDataset& data, Index k) {
  const Index p = data.cols();
  detail::require(k >= 1, ErrorKind::InvalidArgument, "screen_top must be >= 1");
  if (k >= p) {
    std::vector<Index> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  const Vector t = welch_t_statistics(data).cwiseAbs();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return t[a] > t[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

inline LabeledDataset select_columns(const LabeledDataset& data, const std::vector<Index>& cols) {
  LabeledDataset out;
  out.labels = data.labels;
  out.features.resize(data.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.features.col(static_cast<Index>(j)) = data.features.col(cols[j]);
  return out;
}

inline IngestedData ingest_csv_text(const std::string& text, const std::string& label_column, Index screen_top_k = 0) {
  const CsvTable t = parse_csv(text);
  const auto it = std::find(t.header.begin(), t.header.end(), label_column);
  if (it == t.header.end()) throw Error(ErrorKind::MissingLabelColumn, "no column named '" + label_column + "'");
  const auto label_pos = static_cast<std::size_t>(it - t.header.begin());

  IngestedData out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != label_pos) out.feature_names.push_back(t.header[c]);
  }
  const auto n = static_cast<Index>(t.rows.size());
  const auto p = static_cast<Index>(out.feature_names.size());
  out.data.features.resize(n, p);

  std::vector<std::string> raw_labels;
  for (Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    Index j = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == label_pos) continue;
      const auto v = parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorKind::NonNumericCell, "non-numeric cell at (" +
                                                   std::to_string(t.line_numbers[static_cast<std::size_t>(i)]) + "," +
                                                   std::to_string(c + 1) + "): '" + row[c] + "'");
      }
      out.data.features(i, j++) = *v;
    }
    raw_labels.push_back(row[label_pos]);
  }

  // Label mapping.
  std::vector<std::string> names(raw_labels.begin(), raw_labels.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  bool integral = !names.empty();
  int max_id = 0;
  for (const auto& s : names) {
    int v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 1) {
      integral = false;
      break;
    }
    max_id = std::max(max_id, v);
  }
  if (integral && max_id == static_cast<int>(names.size())) {
    out.class_names.resize(names.size());
    for (const auto& s : raw_labels) {
      const int v = std::stoi(s);
      out.data.labels.push_back(v);
      out.class_names[static_cast<std::size_t>(v - 1)] = s;
    }
  } else {
    out.class_names = names;
    for (const auto& s : raw_labels) {
      out.data.labels.push_back(static_cast<int>(std::lower_bound(names.begin(), names.end(), s) - names.begin()) + 1);
    }
  }

  out.kept_columns.resize(static_cast<std::size_t>(p));
  std::iota(out.kept_columns.begin(), out.kept_columns.end(), Index{0});
  if (screen_top_k > 0) {
    detail::require(out.class_names.size() == 2, ErrorKind::InvalidArgument, "screening needs exactly two classes");
    out.kept_columns = screen_features(out.data, screen_top_k);
    out.data = select_columns(out.data, out.kept_columns);
    std::vector<std::string> kept;
    for (Index c : out.kept_columns) kept.push_back(out.feature_names[static_cast<std::size_t>(c)]);
    out.feature_names = std::move(kept);
  }
  return out;
}

inline IngestedData ingest_csv(const std::string& path, const std::string& label_column, Index screen_top_k = 0) {
  return ingest_csv_text(read_file(path), label_column, screen_top_k);
}

/// Feature matrix for prediction: columns picked by name when the file has
/// a header naming every model feature, otherwise positionally. A column
/// named `label_column` is ignored.
inline Matrix read_features_csv(const std::string& text, const std::vector<std::string>& names,
                                const std::string& label_column = {}) {
  const CsvTable t = parse_csv(text);
  std::vector<std::size_t> pos;
  bool by_name = !names.empty();
  for (const auto& nm : names) {
    const auto it = std::find(t.header.begin(), t.header.end(), nm);
    if (it == t.header.end()) {
      by_name = false;
      break;
    }
    pos.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  if (!by_name) {
    pos.clear();
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (label_column.empty() || t.header[c] != label_column) pos.push_back(c);
    }
    if (!names.empty() && pos.size() != names.size()) {
      throw Error(ErrorKind::DimensionMismatch, "data has " + std::to_string(pos.size()) +
                                                    " feature columns, model expects " +
                                                    std::to_string(names.size()));
    }
  }
  Matrix x(static_cast<Index>(t.rows.size()), static_cast<Index>(pos.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < pos.size(); ++j) {
      const auto v = parse_double(t.rows[i][pos[j]]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorKind::NonNumericCell, "non-numeric cell at (" + std::to_string(t.line_numbers[i]) + "," +
                                                   std::to_string(pos[j] + 1) + "): '" + t.rows[i][pos[j]] + "'");
      }
      x(static_cast<Index>(i), static_cast<Index>(j)) = *v;
    }
  }
  return x;
}

inline std::string dataset_to_csv(const LabeledDataset& data, const std::vector<std::string>& feature_names = {},
                                  const std::string& label_column = "label") {
  std::string out;
  for (Index j = 0; j < data.cols(); ++j) {
    out += feature_names.empty() ? "x" + std::to_string(j + 1)
                                 : detail::csv_escape(feature_names[static_cast<std::size_t>(j)]);
    out += ',';
  }
  out += detail::csv_escape(label_column) + "\n";
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out += format_shortest(data.features(i, j)) + ",";
    out += std::to_string(data.labels[static_cast<std::size_t>(i)]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error tables
// ---------------------------------------------------------------------------

enum class TableFormat { Csv, Markdown };

inline TableFormat parse_table_format(const std::string& s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "markdown" || s == "md") return TableFormat::Markdown;
  throw Error(ErrorKind::InvalidArgument, "unknown table format '" + s + "'");
}

inline constexpr const char* kTableHeader = "model,p,method,mean,sd,reps,failed";

/// CSV rows in table order; markdown puts methods in rows and (model, p)
/// cells in columns, each reading "mean (sd)" to three decimals.
inline std::string emit_table(const ErrorTable& table, TableFormat format) {
  std::string out;
  if (format == TableFormat::Csv) {
    out = std::string(kTableHeader) + "\n";
    for (const auto& r : table.rows) {
      out += detail::csv_escape(r.model) + "," + std::to_string(r.p) + "," + detail::csv_escape(r.method) + "," +
             format_shortest(r.mean) + "," + format_shortest(r.sd) + "," + std::to_string(r.reps) + "," +
             std::to_string(r.failed) + "\n";
    }
    return out;
  }
  std::vector<std::pair<std::string, Index>> cols;
  std::vector<std::string> methods;
  for (const auto& r : table.rows) {
    if (std::find(cols.begin(), cols.end(), std::make_pair(r.model, r.p)) == cols.end()) cols.emplace_back(r.model, r.p);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  out = "| method |";
  for (const auto& [m, p] : cols) out += " model " + m + ", p=" + std::to_string(p) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& method : methods) {
    out += "| " + method + " |";
    for (const auto& c : cols) {
      auto it = std::find_if(table.rows.begin(), table.rows.end(), [&](const ErrorCell& r) {
        return r.method == method && r.model == c.first && r.p == c.second;
      });
      if (it == table.rows.end() || it->reps == 0) {
        out += " - |";
      } else {
        out += " " + format_fixed(it->mean, 3) + " (" + format_fixed(it->sd, 3) + ")";
        if (it->failed > 0) out += " [" + std::to_string(it->failed) + " failed]";
        out += " |";
      }
    }
    out += "\n";
  }
  return out;
}

inline ErrorTable parse_table(const std::string& csv) {
  const CsvTable t = parse_csv(csv);
  const std::vector<std::string> expected = detail::split_csv_line(kTableHeader);
  detail::require(t.header == expected, ErrorKind::ParseError, "unexpected error-table header");
  ErrorTable table;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    auto num = [&](std::size_t c) {
      const auto v = parse_double(r[c]);
      if (!v) {
        throw Error(ErrorKind::NonNumericCell,
                    "non-numeric cell at (" + std::to_string(t.line_numbers[i]) + "," + std::to_string(c + 1) + ")");
      }
      return *v;
    };
    ErrorCell cell;
    cell.model = r[0];
    cell.p = static_cast<Index>(num(1));
    cell.method = r[2];
    cell.mean = num(3);
    cell.sd = num(4);
    cell.reps = static_cast<int>(num(5));
    cell.failed = static_cast<int>(num(6));
    table.rows.push_back(cell);
  }
  return table;
}

inline bool operator==(const ErrorCell& a, const ErrorCell& b) {
  return a.model == b.model && a.p == b.p && a.method == b.method && a.mean == b.mean && a.sd == b.sd &&
         a.reps == b.reps && a.failed == b.failed;
}

inline bool operator==(const ErrorTable& a, const ErrorTable& b) { return a.rows == b.rows; }

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

namespace jsonio {

inline Json num(double v) { return format_17g(v); }

inline Json vec(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

inline Json mat(const Matrix& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) a.push_back(num(m(i, j)));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(a)}};
}

[[noreturn]] inline void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptModel, what); }

inline const Json& field(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) corrupt("missing field '" + key + "'");
  return j.at(key);
}

inline double get_num(const Json& j, const std::string& ctx) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    if (auto v = parse_double(j.get<std::string>())) return *v;
  }
  corrupt("field '" + ctx + "' is not a number");
}

inline double get_num(const Json& obj, const std::string& key, const std::string& ctx) {
  return get_num(field(obj, key), ctx.empty() ? key : ctx);
}

inline Index get_index(const Json& obj, const std::string& key) {
  const double v = get_num(obj, key, key);
  if (v < 0 || v != std::floor(v)) corrupt("field '" + key + "' is not a count");
  return static_cast<Index>(v);
}

inline Vector get_vec(const Json& obj, const std::string& key) {
  const Json& a = field(obj, key);
  if (!a.is_array()) corrupt("field '" + key + "' is not an array");
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = get_num(a[i], key);
  return v;
}

inline Matrix get_mat(const Json& obj, const std::string& key) {
  const Json& m = field(obj, key);
  const Index r = get_index(m, "rows");
  const Index c = get_index(m, "cols");
  const Json& a = field(m, "data");
  if (!a.is_array() || a.size() != static_cast<std::size_t>(r * c)) corrupt("field '" + key + "' has wrong size");
  Matrix out(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) out(i, j) = get_num(a[static_cast<std::size_t>(i * c + j)], key);
  }
  return out;
}

inline std::vector<std::string> get_strings(const Json& obj, const std::string& key) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const Json& a = obj.at(key);
  if (!a.is_array()) corrupt("field '" + key + "' is not an array");
  for (const auto& s : a) {
    if (!s.is_string()) corrupt("field '" + key + "' holds a non-string");
    out.push_back(s.get<std::string>());
  }
  return out;
}

inline Json header(const std::string& kind) { return Json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

inline Json parse_document(const std::string& text, const std::string& source) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptModel, source + ": not valid JSON (" + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("schema_version")) corrupt(source + ": missing schema_version");
  const Json& v = doc.at("schema_version");
  if (!v.is_number_integer()) corrupt(source + ": schema_version is not an integer");
  if (v.get<long long>() != kSchemaVersion) {
    throw Error(ErrorKind::SchemaVersionMismatch, source + ": schema version " + v.dump() + ", expected " +
                                                      std::to_string(kSchemaVersion));
  }
  if (!doc.contains("kind") || !doc.at("kind").is_string()) corrupt(source + ": missing kind");
  return doc;
}

inline Json sdar_body(const SdarModel& m) {
  return Json{{"mu1_hat", vec(m.mu1_hat)},         {"mu2_hat", vec(m.mu2_hat)},
              {"d_hat", mat(m.d_hat)},             {"beta_hat", vec(m.beta_hat)},
              {"logdet_term", num(m.logdet_term)}, {"log_prior_ratio", num(m.log_prior_ratio)},
              {"lambda1", num(m.lambda1)},         {"lambda2", num(m.lambda2)}};
}

inline SdarModel sdar_from(const Json& j) {
  SdarModel m;
  m.mu1_hat = get_vec(j, "mu1_hat");
  m.mu2_hat = get_vec(j, "mu2_hat");
  m.d_hat = get_mat(j, "d_hat");
  m.beta_hat = get_vec(j, "beta_hat");
  m.logdet_term = get_num(j, "logdet_term", "");
  m.log_prior_ratio = get_num(j, "log_prior_ratio", "");
  m.lambda1 = get_num(j, "lambda1", "");
  m.lambda2 = get_num(j, "lambda2", "");
  const Index p = m.mu1_hat.size();
  if (m.mu2_hat.size() != p || m.beta_hat.size() != p || m.d_hat.rows() != p || m.d_hat.cols() != p) {
    corrupt("inconsistent model dimensions");
  }
  return m;
}

inline Json ecdfs(const std::vector<WinsorizedEcdf>& es) {
  Json a = Json::array();
  for (const auto& e : es) {
    Json v = Json::array();
    for (double x : e.sorted_values) v.push_back(num(x));
    a.push_back(std::move(v));
  }
  return a;
}

inline std::vector<WinsorizedEcdf> ecdfs_from(const Json& obj, const std::string& key) {
  const Json& a = field(obj, key);
  if (!a.is_array()) corrupt("field '" + key + "' is not an array");
  std::vector<WinsorizedEcdf> out;
  for (const auto& col : a) {
    if (!col.is_array() || col.size() < 2) corrupt("field '" + key + "' holds a bad ECDF");
    WinsorizedEcdf e;
    for (const auto& x : col) e.sorted_values.push_back(get_num(x, key));
    if (!std::is_sorted(e.sorted_values.begin(), e.sorted_values.end())) corrupt("ECDF values out of order");
    e.n = static_cast<Index>(e.sorted_values.size());
    out.push_back(std::move(e));
  }
  return out;
}

inline Json solver_json(const SolverConfig& s) {
  return Json{{"max_outer_iters", s.max_outer_iters},
              {"duality_gap_tol", num(s.duality_gap_tol)},
              {"cg_tol", num(s.cg_tol)},
              {"cg_max_iters", s.cg_max_iters}};
}

inline Json grid_json(const LambdaGrid& g) {
  Json m = Json::array();
  for (double k : g.multipliers) m.push_back(num(k));
  return Json{{"multipliers", std::move(m)}, {"divisor", num(g.divisor)}};
}

}  // namespace jsonio

/// Any fitted model plus the feature names it was trained on.
using AnyModel = std::variant<SdarModel, CopulaModel, MultigroupModel>;

struct StoredModel {
  AnyModel model;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
};

inline std::string model_to_json(const StoredModel& sm) {
  Json doc;
  if (const auto* m = std::get_if<SdarModel>(&sm.model)) {
    doc = jsonio::header("sdar");
    doc["model"] = jsonio::sdar_body(*m);
  } else if (const auto* c = std::get_if<CopulaModel>(&sm.model)) {
    doc = jsonio::header("csdar");
    doc["model"] = Json{{"ecdf1", jsonio::ecdfs(c->ecdf1)},
                        {"ecdf2", jsonio::ecdfs(c->ecdf2)},
                        {"mu2_hat", jsonio::vec(c->mu2_hat)},
                        {"sigma2_jj_hat", jsonio::vec(c->sigma2_jj_hat)},
                        {"r_hat1", jsonio::mat(c->r_hat1)},
                        {"r_hat2", jsonio::mat(c->r_hat2)},
                        {"sigma_tilde1", jsonio::mat(c->sigma_tilde1)},
                        {"sigma_tilde2", jsonio::mat(c->sigma_tilde2)},
                        {"n1", c->n1},
                        {"n2", c->n2},
                        {"sdar", jsonio::sdar_body(c->sdar)}};
  } else {
    const auto& g = std::get<MultigroupModel>(sm.model);
    doc = jsonio::header("multigroup");
    Json classes = Json::array();
    for (int k = 0; k < g.K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      classes.push_back(Json{{"mu_hat", jsonio::vec(g.mu_hat[kk])},
                             {"d_hat", jsonio::mat(g.d_hat[kk])},
                             {"beta_hat", jsonio::vec(g.beta_hat[kk])},
                             {"logdet_term", jsonio::num(g.logdet_term[kk])},
                             {"log_prior", jsonio::num(g.log_prior[kk])}});
    }
    doc["model"] = Json{{"K", g.K}, {"classes", std::move(classes)}};
  }
  doc["feature_names"] = sm.feature_names;
  doc["class_names"] = sm.class_names;
  return doc.dump(1) + "\n";
}

inline StoredModel model_from_json(const std::string& text) {
  const Json doc = jsonio::parse_document(text, "model file");
  const std::string kind = doc.at("kind").get<std::string>();
  const Json& body = jsonio::field(doc, "model");
  StoredModel sm;
  sm.feature_names = jsonio::get_strings(doc, "feature_names");
  sm.class_names = jsonio::get_strings(doc, "class_names");
  try {
    if (kind == "sdar") {
      sm.model = jsonio::sdar_from(body);
    } else if (kind == "csdar") {
      CopulaModel c;
      c.ecdf1 = jsonio::ecdfs_from(body, "ecdf1");
      c.ecdf2 = jsonio::ecdfs_from(body, "ecdf2");
      c.mu2_hat = jsonio::get_vec(body, "mu2_hat");
      c.sigma2_jj_hat = jsonio::get_vec(body, "sigma2_jj_hat");
      c.r_hat1 = jsonio::get_mat(body, "r_hat1");
      c.r_hat2 = jsonio::get_mat(body, "r_hat2");
      c.sigma_tilde1 = jsonio::get_mat(body, "sigma_tilde1");
      c.sigma_tilde2 = jsonio::get_mat(body, "sigma_tilde2");
      c.n1 = jsonio::get_index(body, "n1");
      c.n2 = jsonio::get_index(body, "n2");
      c.sdar = jsonio::sdar_from(jsonio::field(body, "sdar"));
      const auto p = static_cast<std::size_t>(c.sdar.mu1_hat.size());
      if (c.ecdf1.size() != p || c.ecdf2.size() != p || static_cast<std::size_t>(c.mu2_hat.size()) != p ||
          static_cast<std::size_t>(c.sigma2_jj_hat.size()) != p) {
        jsonio::corrupt("inconsistent copula model dimensions");
      }
      sm.model = std::move(c);
    } else if (kind == "multigroup") {
      MultigroupModel g;
      g.K = static_cast<int>(jsonio::get_index(body, "K"));
      const Json& classes = jsonio::field(body, "classes");
      if (!classes.is_array() || classes.size() != static_cast<std::size_t>(g.K) || g.K < 2) {
        jsonio::corrupt("class list does not match K");
      }
      for (const auto& c : classes) {
        g.mu_hat.push_back(jsonio::get_vec(c, "mu_hat"));
        g.d_hat.push_back(jsonio::get_mat(c, "d_hat"));
        g.beta_hat.push_back(jsonio::get_vec(c, "beta_hat"));
        g.logdet_term.push_back(jsonio::get_num(c, "logdet_term", ""));
        g.log_prior.push_back(jsonio::get_num(c, "log_prior", ""));
      }
      const Index p = g.mu_hat[0].size();
      for (int k = 0; k < g.K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (g.mu_hat[kk].size() != p || g.beta_hat[kk].size() != p || g.d_hat[kk].rows() != p ||
            g.d_hat[kk].cols() != p) {
          jsonio::corrupt("inconsistent multigroup dimensions");
        }
      }
      sm.model = std::move(g);
    } else {
      jsonio::corrupt("unknown model kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    jsonio::corrupt(std::string("malformed model: ") + e.what());
  }
  return sm;
}

inline void save_model(const StoredModel& model, const std::string& path) { write_file(path, model_to_json(model)); }

inline StoredModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

/// Labels for a batch of rows under any stored model.
inline std::vector<int> predict(const AnyModel& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SdarModel>) {
          detail::require_dims(x.cols(), m.mu1_hat.size(), "data columns");
          return classify_sdar(x, m);
        } else if constexpr (std::is_same_v<T, CopulaModel>) {
          detail::require_dims(x.cols(), m.dim(), "data columns");
          return classify_csdar(x, m);
        } else {
          detail::require_dims(x.cols(), m.dim(), "data columns");
          return classify_multigroup(x, m);
        }
      },
      model);
}

// Experiment specs share the model dialect.

inline std::string spec_to_json(const ExperimentSpec& s) {
  Json doc = jsonio::header("experiment_spec");
  doc["spec"] = Json{{"model", s.model},
                     {"p", s.p},
                     {"data_path", s.data_path},
                     {"label_column", s.label_column},
                     {"screen_top", s.screen_top},
                     {"n1", s.n1},
                     {"n2", s.n2},
                     {"n_test", s.n_test},
                     {"replications", s.replications},
                     {"lambda_grid1", jsonio::grid_json(s.grid1)},
                     {"lambda_grid2", jsonio::grid_json(s.grid2)},
                     {"cv_folds", s.cv_folds},
                     {"seed", std::to_string(s.seed)},
                     {"methods", s.methods},
                     {"s_beta", s.sparsity.s_beta},
                     {"s_d", s.sparsity.s_d},
                     {"graph_solver", jsonio::solver_json(s.graph_solver)},
                     {"direction_solver", jsonio::solver_json(s.direction_solver)},
                     {"threads", s.threads}};
  return doc.dump(1) + "\n";
}

/// Missing fields take the defaults for the named model; unknown fields
/// are ignored so hand-written specs stay short.
inline ExperimentSpec spec_from_json(const std::string& text) {
  const Json doc = jsonio::parse_document(text, "spec file");
  if (doc.at("kind").get<std::string>() != "experiment_spec") jsonio::corrupt("spec file has the wrong kind");
  const Json& j = jsonio::field(doc, "spec");
  if (!j.is_object()) jsonio::corrupt("spec is not an object");
  std::string model = "2";
  if (j.contains("model")) {
    const Json& m = j.at("model");
    model = m.is_string() ? m.get<std::string>() : format_shortest(jsonio::get_num(m, "model"));
  }
  const Index p = j.contains("p") ? jsonio::get_index(j, "p") : 100;
  ExperimentSpec s = default_spec(model, p);
  auto count = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = static_cast<std::decay_t<decltype(dst)>>(jsonio::get_index(j, key));
  };
  auto str = [&](const char* key, std::string& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) jsonio::corrupt(std::string("field '") + key + "' is not a string");
    dst = j.at(key).get<std::string>();
  };
  auto grid = [&](const char* key, LambdaGrid& g) {
    if (!j.contains(key)) return;
    const Json& gj = j.at(key);
    if (gj.contains("multipliers")) {
      const Vector m = jsonio::get_vec(gj, "multipliers");
      g.multipliers.assign(m.data(), m.data() + m.size());
    }
    if (gj.contains("divisor")) g.divisor = jsonio::get_num(gj, "divisor", "divisor");
  };
  auto solver = [&](const char* key, SolverConfig& sc) {
    if (!j.contains(key)) return;
    const Json& sj = j.at(key);
    if (sj.contains("max_outer_iters")) sc.max_outer_iters = static_cast<int>(jsonio::get_index(sj, "max_outer_iters"));
    if (sj.contains("cg_max_iters")) sc.cg_max_iters = static_cast<int>(jsonio::get_index(sj, "cg_max_iters"));
    if (sj.contains("duality_gap_tol")) sc.duality_gap_tol = jsonio::get_num(sj, "duality_gap_tol", "");
    if (sj.contains("cg_tol")) sc.cg_tol = jsonio::get_num(sj, "cg_tol", "");
  };
  try {
    str("data_path", s.data_path);
    str("label_column", s.label_column);
    count("screen_top", s.screen_top);
    count("n1", s.n1);
    count("n2", s.n2);
    count("n_test", s.n_test);
    count("replications", s.replications);
    count("cv_folds", s.cv_folds);
    count("threads", s.threads);
    count("s_beta", s.sparsity.s_beta);
    count("s_d", s.sparsity.s_d);
    grid("lambda_grid1", s.grid1);
    grid("lambda_grid2", s.grid2);
    solver("graph_solver", s.graph_solver);
    solver("direction_solver", s.direction_solver);
    if (j.contains("seed")) {
      const Json& sd = j.at("seed");
      if (sd.is_number_unsigned() || sd.is_number_integer()) {
        s.seed = sd.get<std::uint64_t>();
      } else if (sd.is_string()) {
        const std::string v = sd.get<std::string>();
        auto r = std::from_chars(v.data(), v.data() + v.size(), s.seed);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size()) jsonio::corrupt("seed is not an integer");
      } else {
        jsonio::corrupt("seed is not an integer");
      }
    }
    if (j.contains("methods")) s.methods = jsonio::get_strings(j, "methods");
  } catch (const nlohmann::json::exception& e) {
    jsonio::corrupt(std::string("malformed spec: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Real-data benchmark
// ---------------------------------------------------------------------------

/// Repeated stratified K-fold CV on a labelled data set. Screening and
/// lambda tuning both happen inside each training fold. Each repetition
/// contributes its pooled misclassification rate.
inline ExperimentReport run_real_data(const LabeledDataset& data, const ExperimentSpec& spec) {
  spec.check();
  require_two_classes(data);
  for (const auto& m : spec.methods) {
    detail::require(m == "sdar" || m == "csdar" || m == "lda_plugin" || m == "qda_plugin", ErrorKind::InvalidArgument,
                    "method '" + m + "' needs known parameters and cannot run on real data");
  }
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.replications.resize(static_cast<std::size_t>(spec.replications));
  const SyntheticProblem none;
  parallel_for(spec.replications, resolve_threads(spec.threads), [&](int r) {
    const auto rr = static_cast<std::uint64_t>(r);
    const std::vector<int> fold = stratified_folds(data.labels, spec.cv_folds, derive_seed(spec.seed, 4, rr));
    ReplicationResult out;
    for (const auto& method : spec.methods) {
      long long wrong = 0;
      bool failed = false;
      for (int f = 0; f < spec.cv_folds && !failed; ++f) {
        auto [train, test] = detail::split_fold(data, fold, f);
        if (spec.screen_top > 0) {
          const auto keep = screen_features(train, spec.screen_top);
          train = select_columns(train, keep);
          test = select_columns(test, keep);
        }
        try {
          const auto seed = derive_seed(spec.seed, 3, rr * static_cast<std::uint64_t>(spec.cv_folds) +
                                                         static_cast<std::uint64_t>(f));
          const auto labels = detail::run_method(method, spec, none, train, test.features, seed, out.nonconverged);
          for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != test.labels[i];
        } catch (const Error& e) {
          if (e.category() != ErrorCategory::Numerical) throw;
          failed = true;
          out.failures.push_back(method + ": " + e.what());
        }
      }
      if (failed) {
        out.errors.emplace_back(std::nullopt);
      } else {
        out.errors.emplace_back(static_cast<double>(wrong) / static_cast<double>(data.rows()));
      }
    }
    rep.replications[static_cast<std::size_t>(r)] = std::move(out);
  });
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    std::vector<std::optional<double>> errs;
    for (const auto& rr : rep.replications) errs.push_back(rr.errors[m]);
    rep.table.rows.push_back(detail::summarize("csv", data.cols(), spec.methods[m], errs));
  }
  for (const auto& rr : rep.replications) rep.nonconverged_solves += rr.nonconverged;
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Dispatches a spec to the synthetic or the real-data harness.
inline ExperimentReport run_bench(const ExperimentSpec& spec) {
  if (!spec.is_csv()) return run_experiment_report(spec);
  return run_real_data(ingest_csv(spec.data_path, spec.label_column).data, spec);
}

}  // namespace sqda
