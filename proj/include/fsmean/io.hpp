#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsmean/frenet.hpp"
#include "fsmean/preprocess.hpp"

namespace fsmean {

/// Version written by every writer. Readers accept any minor version of the
/// same major and throw Format otherwise.
inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;
std::string format_version();
void check_format_version(const std::string& version);

/// Shortest decimal that round-trips the double.
std::string format_double(double x);

struct CurveRecord {
  int id = 0;
  EuclideanCurve curve;
};

/// `curve_id,t,x,y,z`. Rows of one curve are grouped in order of first
/// appearance; times must increase strictly within a curve. Lines starting
/// with '#' are comments, except `# fsmean-format X.Y` which is checked.
std::vector<CurveRecord> read_curves_csv(const std::filesystem::path& file);
void write_curves_csv(const std::filesystem::path& file, std::span<const CurveRecord> curves);

struct PathRecord {
  int id = 0;
  FrenetPath path;
};

/// Array of {curve_id, s, Q: 9 row-major reals}. Also accepts an object
/// {format_version, frames: [...]}.
std::vector<PathRecord> read_frames_json(const std::filesystem::path& file);
void write_frames_json(const std::filesystem::path& file, std::span<const PathRecord> paths);

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  /// Throws Format when the column is missing.
  const std::vector<double>& column(const std::string& name) const;
};

Table read_table_csv(const std::filesystem::path& file);
void write_table_csv(const std::filesystem::path& file, const Table& table);

nlohmann::json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const nlohmann::json& value);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fsmean
