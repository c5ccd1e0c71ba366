#include "arflow/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "arflow/errors.hpp"

namespace arflow {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double parse_double(const std::string& cell, const std::string& column, std::size_t line) {
  const std::string s = trim(cell);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("column '" + column + "': '" + s + "' is not a number", line);
  if (!std::isfinite(v)) throw ParseError("column '" + column + "': non-finite value '" + s + "'", line);
  return v;
}

long parse_step(const std::string& cell, std::size_t line) {
  const std::string s = trim(cell);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("column 't': '" + s + "' is not an integer step", line);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

SequenceBatch load_csv(const std::filesystem::path& path, std::optional<std::size_t> length) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path.string() + "'", 1);
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  if (header.empty() || header[0] != "seq_id") throw ParseError("missing column 'seq_id' in header", 1);
  if (header.size() < 2 || header[1] != "t") throw ParseError("missing column 't' in header", 1);
  if (header.size() < 3) throw ParseError("header has no data columns after 'seq_id,t'", 1);
  std::set<std::string> seen_names;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError("empty column name at position " + std::to_string(c + 1), 1);
    if (!seen_names.insert(header[c]).second) throw ParseError("duplicate column '" + header[c] + "'", 1);
  }
  const std::size_t d = header.size() - 2;

  struct Row {
    long t;
    std::size_t line;
    std::vector<double> values;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       lineno);
    const std::string id = trim(cells[0]);
    if (id.empty()) throw ParseError("column 'seq_id': empty identifier", lineno);
    Row r{parse_step(cells[1], lineno), lineno, {}};
    r.values.reserve(d);
    for (std::size_t c = 0; c < d; ++c) r.values.push_back(parse_double(cells[c + 2], header[c + 2], lineno));
    auto [it, fresh] = rows.try_emplace(id);
    if (fresh) order.push_back(id);
    it->second.push_back(std::move(r));
  }
  if (order.empty()) throw ParseError("no data rows in '" + path.string() + "'", lineno);

  std::size_t min_len = SIZE_MAX;
  for (auto& id : order) {
    auto& seq = rows[id];
    std::stable_sort(seq.begin(), seq.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < seq.size(); ++i)
      if (seq[i].t == seq[i - 1].t)
        throw ParseError("sequence '" + id + "' repeats step " + std::to_string(seq[i].t), seq[i].line);
    min_len = std::min(min_len, seq.size());
  }
  const std::size_t target = length.value_or(min_len);
  require(target >= 1, "load_csv: length must be >= 1");

  std::vector<std::string> kept;
  for (auto& id : order)
    if (rows[id].size() >= target) kept.push_back(id);
  SequenceBatch out(kept.size(), target, d);
  out.dropped = order.size() - kept.size();
  out.dim_names.assign(header.begin() + 2, header.end());
  for (std::size_t n = 0; n < kept.size(); ++n) {
    out.seq_ids[n] = kept[n];
    const auto& seq = rows[kept[n]];
    for (std::size_t t = 0; t < target; ++t) std::copy(seq[t].values.begin(), seq[t].values.end(), out.step(n, t).begin());
  }
  return out;
}

void save_csv(const SequenceBatch& batch, const std::filesystem::path& path) {
  require(batch.dim_names.size() == batch.dims(), "save_csv: dim_names do not match D");
  require(batch.seq_ids.size() == batch.size(), "save_csv: seq_ids do not match N");
  for (const auto& id : batch.seq_ids)
    require(!id.empty() && id.find_first_of(",\n\r") == std::string::npos, "save_csv: invalid seq_id '" + id + "'");
  for (const auto& name : batch.dim_names)
    require(!name.empty() && name.find_first_of(",\n\r") == std::string::npos, "save_csv: invalid dim name '" + name + "'");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot write '" + path.string() + "'");
  out << "seq_id,t";
  for (const auto& name : batch.dim_names) out << ',' << name;
  out << '\n';
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t t = 0; t < batch.steps(); ++t) {
      out << batch.seq_ids[n] << ',' << t + 1;
      for (double v : batch.step(n, t)) out << ',' << format_double(v);
      out << '\n';
    }
  if (!out) throw std::runtime_error("save_csv: write failed for '" + path.string() + "'");
}

DatasetManifest make_manifest(const SequenceBatch& batch, const std::string& name, const std::string& path) {
  return {name, path, batch.dims(), batch.dim_names, batch.size(), batch.steps()};
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["path"] = m.path;
  j["D"] = m.dims;
  j["dim_names"] = m.dim_names;
  j["N"] = m.count;
  j["T"] = m.steps;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFileError("cannot open manifest '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.path = j.at("path").get<std::string>();
    m.dims = j.at("D").get<std::size_t>();
    m.dim_names = j.at("dim_names").get<std::vector<std::string>>();
    m.count = j.at("N").get<std::size_t>();
    m.steps = j.at("T").get<std::size_t>();
    if (m.dim_names.size() != m.dims) throw CorruptFileError("manifest: dim_names length differs from D");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace arflow
