#include "opreg/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "opreg/error.hpp"

namespace opreg {

bool CovariateTable::has_column(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const Eigen::VectorXd& CovariateTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  throw_spec("unknown column '" + name + "'");
}

void CovariateTable::add_column(const std::string& name, Eigen::VectorXd values) {
  if (has_column(name)) throw_spec("duplicate column '" + name + "'");
  if (!columns.empty() && values.size() != n()) {
    throw_spec("column '" + name + "' has mismatched length");
  }
  names.push_back(name);
  columns.push_back(std::move(values));
}

void validate_binary(const Eigen::VectorXd& v, const std::string& what,
                     const std::string& column_name) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0 && v[i] != 1.0) {
      std::ostringstream msg;
      msg << "non-binary " << what << ", row " << (i + 1) << ", column \""
          << column_name << "\" (value " << v[i] << ")";
      throw_spec(msg.str());
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, Eigen::Index row, const std::string& col) {
  std::string s = trim(raw);
  if (s.empty()) {
    std::ostringstream msg;
    msg << "missing value, row " << (row + 1) << ", column \"" << col << "\"";
    throw_spec(msg.str());
  }
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    std::ostringstream msg;
    msg << "non-numeric value '" << s << "', row " << (row + 1) << ", column \""
        << col << "\"";
    throw_spec(msg.str());
  }
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // row-major
};

RawTable read_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open file '" + path + "'");

  RawTable t;
  std::string line;
  bool have_header = false;
  Eigen::Index data_row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      for (const std::string& name : split_csv_line(line)) {
        t.header.push_back(trim(name));
      }
      if (t.header.empty()) throw_spec("empty header in '" + path + "'");
      have_header = true;
      continue;
    }
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != t.header.size()) {
      std::ostringstream msg;
      msg << "row " << (data_row + 1) << " has " << fields.size()
          << " fields, expected " << t.header.size();
      throw_spec(msg.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      row[j] = parse_cell(fields[j], data_row, t.header[j]);
    }
    t.rows.push_back(std::move(row));
    ++data_row;
  }
  if (!have_header) throw_spec("file '" + path + "' has no header row");
  return t;
}

CovariateTable columns_from_raw(const RawTable& t,
                                const std::vector<std::size_t>& skip) {
  CovariateTable cov;
  Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (std::find(skip.begin(), skip.end(), j) != skip.end()) continue;
    Eigen::VectorXd col(n);
    for (Eigen::Index i = 0; i < n; ++i) col[i] = t.rows[i][j];
    cov.add_column(t.header[j], std::move(col));
  }
  return cov;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& y_col,
                 const std::string& a_col) {
  RawTable t = read_raw_csv(path);

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) {
      throw_spec("column '" + name + "' not found in '" + path + "'");
    }
    return static_cast<std::size_t>(it - t.header.begin());
  };
  std::size_t jy = find_col(y_col);
  std::size_t ja = find_col(a_col);
  if (jy == ja) throw_spec("outcome and exposure columns must differ");

  Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  if (n == 0) throw_spec("file '" + path + "' contains no data rows");

  Dataset data;
  data.y.resize(n);
  data.a.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.y[i] = t.rows[i][jy];
    data.a[i] = t.rows[i][ja];
  }
  validate_binary(data.y, "outcome", y_col);
  validate_binary(data.a, "exposure", a_col);
  data.covariates = columns_from_raw(t, {jy, ja});
  return data;
}

CovariateTable load_covariate_csv(const std::string& path) {
  RawTable t = read_raw_csv(path);
  if (t.rows.empty()) throw_spec("file '" + path + "' contains no data rows");
  return columns_from_raw(t, {});
}

Dataset resample(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.a.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.y[i] = data.y[rows[i]];
    out.a[i] = data.a[rows[i]];
  }
  out.covariates.names = data.covariates.names;
  out.covariates.columns.reserve(data.covariates.columns.size());
  for (const auto& col : data.covariates.columns) {
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i) c[i] = col[rows[i]];
    out.covariates.columns.push_back(std::move(c));
  }
  return out;
}

}  // namespace opreg
