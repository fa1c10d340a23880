#include "specuq/io.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace specuq {

std::string git_blob_hash(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

CsvTable::CsvTable(std::vector<std::string> columns, std::vector<std::string> volatile_columns)
    : columns_(std::move(columns)), volatile_(columns_.size(), false) {
  for (const auto& v : volatile_columns) {
    auto it = std::find(columns_.begin(), columns_.end(), v);
    require(it != columns_.end(), ErrorKind::Contract, "unknown volatile column " + v);
    volatile_[static_cast<std::size_t>(it - columns_.begin())] = true;
  }
}

std::string CsvTable::format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvTable::quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void CsvTable::add_row(const std::vector<Cell>& row) {
  std::vector<std::string> text;
  for (const auto& c : row) text.push_back(c ? format_number(*c) : std::string());
  add_text_row(text);
}

void CsvTable::add_text_row(const std::vector<std::string>& row) {
  require(row.size() == columns_.size(), ErrorKind::Contract, "CSV row has the wrong number of fields");
  rows_.push_back(row);
}

std::string CsvTable::body(bool blank_volatile) const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields, bool is_header) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out.push_back(',');
      if (!is_header && blank_volatile && volatile_[i]) continue;
      out += quote(fields[i]);
    }
    out += "\r\n";
  };
  line(columns_, true);
  for (const auto& r : rows_) line(r, false);
  return out;
}

std::string CsvTable::hashed_body() const { return body(true); }

std::string CsvTable::render(const std::string& config_hash,
                             const std::vector<std::pair<std::string, std::string>>& extra) const {
  std::string out = "# config_hash=" + config_hash + "\r\n# content_hash=" + content_hash() + "\r\n";
  for (const auto& [k, v] : extra) out += "# " + k + "=" + v + "\r\n";
  return out + body(false);
}

Index ParsedCsv::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  require(it != columns.end(), ErrorKind::Io, "CSV has no column " + name);
  return static_cast<Index>(it - columns.begin());
}

ParsedCsv parse_csv(const std::string& text) {
  ParsedCsv out;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, at_line_start = true, comment = false;
  std::string comment_text;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (comment) {
      if (c == '\n') {
        if (!comment_text.empty() && comment_text.back() == '\r') comment_text.pop_back();
        const auto eq = comment_text.find('=');
        if (eq != std::string::npos) {
          std::string key = comment_text.substr(0, eq);
          key.erase(0, key.find_first_not_of(' '));
          out.metadata.emplace_back(key, comment_text.substr(eq + 1));
        }
        comment = false;
        comment_text.clear();
        at_line_start = true;
      } else {
        comment_text.push_back(c);
      }
      continue;
    }
    if (at_line_start && c == '#') {
      comment = true;
      continue;
    }
    at_line_start = false;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      record.push_back(field);
      field.clear();
    } else if (c == '\r') {
      // part of the CRLF terminator
    } else if (c == '\n') {
      record.push_back(field);
      field.clear();
      records.push_back(record);
      record.clear();
      at_line_start = true;
    } else {
      field.push_back(c);
    }
  }
  require(!in_quotes, ErrorKind::Io, "unterminated quoted CSV field");
  if (!field.empty() || !record.empty()) {
    record.push_back(field);
    records.push_back(record);
  }
  require(!records.empty(), ErrorKind::Io, "CSV has no header");
  out.columns = records.front();
  out.rows.assign(records.begin() + 1, records.end());
  for (const auto& r : out.rows) require(r.size() == out.columns.size(), ErrorKind::Io, "ragged CSV row");
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path + " for writing");
  f << text;
  require(static_cast<bool>(f), ErrorKind::Io, "failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::Io, "cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json matrix_to_json(const Mat& x) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < x.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Index j = 0; j < x.cols(); ++j) r.push_back(x(i, j));
    rows.push_back(r);
  }
  return rows;
}

Mat matrix_from_json(const nlohmann::json& j) {
  require(j.is_array(), ErrorKind::Io, "matrix must be a JSON array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
  Mat x(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    require(static_cast<Index>(j[static_cast<std::size_t>(i)].size()) == cols, ErrorKind::Io, "ragged matrix");
    for (Index k = 0; k < cols; ++k) x(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  }
  return x;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, Index drop_small, Index drop_large) {
  require(x.size() == y.size(), ErrorKind::Contract, "slope fit needs paired data");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  const auto lo = static_cast<std::size_t>(std::max<Index>(drop_small, 0));
  const auto cut = static_cast<std::size_t>(std::max<Index>(drop_large, 0));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  SlopeFit fit;
  for (std::size_t k = lo; k + cut < order.size(); ++k) {
    const std::size_t i = order[k];
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++fit.points;
  }
  if (fit.points < 2) {
    fit.slope = std::nan("");
    fit.intercept = std::nan("");
    return fit;
  }
  const double k = static_cast<double>(fit.points);
  fit.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / k;
  return fit;
}

}  // namespace specuq
