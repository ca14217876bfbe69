#include "fsmean/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fsmean/errors.hpp"

namespace fsmean {

namespace fs = std::filesystem;

namespace {

const char* kVersionTag = "# fsmean-format ";

std::ifstream open_in(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + file.string());
  return in;
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error(ErrorKind::Format, file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

// Reads header + rows, handling comments and the version line.
struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_no;
};

RawCsv read_raw_csv(const fs::path& file) {
  std::ifstream in = open_in(file);
  RawCsv raw;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(kVersionTag, 0) == 0) check_format_version(trim(line.substr(std::string(kVersionTag).size())));
      continue;
    }
    auto cells = split(line);
    if (raw.header.empty()) {
      raw.header = std::move(cells);
      continue;
    }
    if (cells.size() != raw.header.size())
      throw Error(ErrorKind::Format, file.string() + ":" + std::to_string(n) + ": expected " +
                                         std::to_string(raw.header.size()) + " fields");
    raw.rows.push_back(std::move(cells));
    raw.line_no.push_back(n);
  }
  if (raw.header.empty()) throw Error(ErrorKind::Format, file.string() + ": missing header");
  return raw;
}

}  // namespace

std::string format_version() { return std::to_string(kFormatMajor) + "." + std::to_string(kFormatMinor); }

void check_format_version(const std::string& version) {
  int major = -1;
  const auto [end, ec] = std::from_chars(version.data(), version.data() + version.size(), major);
  if (ec != std::errc() || (end != version.data() + version.size() && *end != '.'))
    throw Error(ErrorKind::Format, "malformed format version '" + version + "'");
  if (major != kFormatMajor)
    throw Error(ErrorKind::Format, "unsupported format version " + version + " (this build reads " +
                                       std::to_string(kFormatMajor) + ".x)");
}

std::string format_double(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::vector<CurveRecord> read_curves_csv(const fs::path& file) {
  const RawCsv raw = read_raw_csv(file);
  const std::vector<std::string> expect{"curve_id", "t", "x", "y", "z"};
  if (raw.header != expect) throw Error(ErrorKind::Format, file.string() + ": header must be curve_id,t,x,y,z");
  std::vector<CurveRecord> out;
  std::map<int, std::size_t> index;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& c = raw.rows[r];
    const double id_d = parse_double(c[0], file, raw.line_no[r]);
    const int id = static_cast<int>(id_d);
    if (static_cast<double>(id) != id_d) throw Error(ErrorKind::Format, file.string() + ": curve_id must be an integer");
    auto [it, fresh] = index.emplace(id, out.size());
    if (fresh) out.push_back({id, {}});
    EuclideanCurve& curve = out[it->second].curve;
    const double t = parse_double(c[1], file, raw.line_no[r]);
    if (!curve.times.empty() && !(t > curve.times.back()))
      throw Error(ErrorKind::Format, file.string() + ":" + std::to_string(raw.line_no[r]) +
                                         ": times must increase within curve " + std::to_string(id));
    curve.times.push_back(t);
    curve.points.emplace_back(parse_double(c[2], file, raw.line_no[r]), parse_double(c[3], file, raw.line_no[r]),
                              parse_double(c[4], file, raw.line_no[r]));
  }
  return out;
}

void write_curves_csv(const fs::path& file, std::span<const CurveRecord> curves) {
  std::ofstream out = open_out(file);
  out << kVersionTag << format_version() << "\ncurve_id,t,x,y,z\n";
  for (const auto& rec : curves)
    for (std::size_t j = 0; j < rec.curve.size(); ++j) {
      const Vec3& p = rec.curve.points[j];
      out << rec.id << ',' << format_double(rec.curve.times[j]) << ',' << format_double(p.x()) << ','
          << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
    }
}

std::vector<PathRecord> read_frames_json(const fs::path& file) {
  nlohmann::json doc = read_json(file);
  if (doc.is_object()) {
    if (!doc.contains("format_version") || !doc["format_version"].is_string())
      throw Error(ErrorKind::Format, file.string() + ": missing format_version");
    check_format_version(doc["format_version"].get<std::string>());
    doc = doc.value("frames", nlohmann::json::array());
  }
  if (!doc.is_array()) throw Error(ErrorKind::Format, file.string() + ": expected an array of frames");
  std::vector<PathRecord> out;
  std::map<int, std::size_t> index;
  try {
    for (const auto& e : doc) {
      const int id = e.at("curve_id").get<int>();
      const double s = e.at("s").get<double>();
      const auto& q = e.at("Q");
      if (!q.is_array() || q.size() != 9) throw Error(ErrorKind::Format, file.string() + ": Q must have 9 entries");
      Mat3 m;
      for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = q[static_cast<std::size_t>(k)].get<double>();
      auto [it, fresh] = index.emplace(id, out.size());
      if (fresh) out.push_back({id, {}});
      FrenetPath& p = out[it->second].path;
      if (!p.grid.empty() && !(s > p.grid.back()))
        throw Error(ErrorKind::Format, file.string() + ": s must increase within curve " + std::to_string(id));
      p.grid.push_back(s);
      p.frames.push_back(project_so3(m));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Format, file.string() + ": " + ex.what());
  }
  return out;
}

void write_frames_json(const fs::path& file, std::span<const PathRecord> paths) {
  // Written by hand so every real uses the shortest round-trip form.
  std::ofstream out = open_out(file);
  out << "[\n";
  bool first = true;
  for (const auto& rec : paths)
    for (std::size_t j = 0; j < rec.path.size(); ++j) {
      if (!first) out << ",\n";
      first = false;
      out << "{\"curve_id\":" << rec.id << ",\"s\":" << format_double(rec.path.grid[j]) << ",\"Q\":[";
      const Mat3& m = rec.path.frames[j].matrix();
      for (int k = 0; k < 9; ++k) out << (k ? "," : "") << format_double(m(k / 3, k % 3));
      out << "]}";
    }
  out << "\n]\n";
}

bool Table::has(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

const std::vector<double>& Table::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return columns[k];
  throw Error(ErrorKind::Format, "missing column '" + name + "'");
}

Table read_table_csv(const fs::path& file) {
  const RawCsv raw = read_raw_csv(file);
  Table t;
  t.header = raw.header;
  t.columns.assign(raw.header.size(), {});
  for (std::size_t r = 0; r < raw.rows.size(); ++r)
    for (std::size_t k = 0; k < raw.header.size(); ++k)
      t.columns[k].push_back(parse_double(raw.rows[r][k], file, raw.line_no[r]));
  return t;
}

void write_table_csv(const fs::path& file, const Table& table) {
  require(table.columns.size() == table.header.size(), "write_table_csv: header/column count mismatch");
  for (const auto& c : table.columns) require(c.size() == table.rows(), "write_table_csv: ragged columns");
  std::ofstream out = open_out(file);
  out << kVersionTag << format_version() << '\n';
  for (std::size_t k = 0; k < table.header.size(); ++k) out << (k ? "," : "") << table.header[k];
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t k = 0; k < table.columns.size(); ++k) out << (k ? "," : "") << format_double(table.columns[k][r]);
    out << '\n';
  }
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in = open_in(file);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Format, file.string() + ": " + ex.what());
  }
}

void write_json(const fs::path& file, const nlohmann::json& value) {
  std::ofstream out = open_out(file);
  out << value.dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fsmean
