#pragma once

#include "specuq/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace specuq {

/// SHA-1 of "blob <size>\0<content>", as printed by `git hash-object`.
std::string git_blob_hash(const std::string& content);

/// A CSV table with '#'-prefixed metadata lines before the RFC-4180 body.
///
/// Columns flagged volatile (timings) are written but blanked before the
/// content hash is taken, so reruns hash identically.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns, std::vector<std::string> volatile_columns = {});

  using Cell = std::optional<double>;  ///< nullopt writes an empty field
  void add_row(const std::vector<Cell>& row);
  void add_text_row(const std::vector<std::string>& row);

  const std::vector<std::string>& columns() const { return columns_; }
  Index rows() const { return static_cast<Index>(rows_.size()); }
  const std::string& cell(Index row, Index col) const { return rows_[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]; }

  /// Header and rows, volatile columns blanked.
  std::string hashed_body() const;
  std::string content_hash() const { return git_blob_hash(hashed_body()); }

  /// Full text: metadata lines (config hash, content hash, extras) then the body.
  std::string render(const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& extra = {}) const;

  static std::string format_number(double v);
  static std::string quote(const std::string& field);

 private:
  std::string body(bool blank_volatile) const;

  std::vector<std::string> columns_;
  std::vector<bool> volatile_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parse a CSV written by CsvTable (metadata lines skipped).
struct ParsedCsv {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;
  Index column(const std::string& name) const;
};
ParsedCsv parse_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

nlohmann::json matrix_to_json(const Mat& x);
Mat matrix_from_json(const nlohmann::json& j);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  Index points = 0;
};

/// Least-squares fit of log(y) against log(x) over positive finite pairs,
/// after dropping the drop_small smallest and drop_large largest x.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, Index drop_small = 0,
                    Index drop_large = 0);

}  // namespace specuq
