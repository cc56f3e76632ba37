#pragma once

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "marlin/trajectory.hpp"

namespace marlin {

/// "2022-01-03T10:00:00Z" (or space separator, optional zone, optional
/// fractional seconds, which are truncated). Plain integers are accepted as
/// epoch seconds.
inline std::optional<int64_t> parse_timestamp(const std::string& s) {
  if (s.empty()) return std::nullopt;
  {
    int64_t epoch = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), epoch);
    if (ec == std::errc() && end == s.data() + s.size()) return epoch;
  }
  int y, mo, d, h, mi, sec;
  char sep;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h,
                  &mi, &sec) != 7 ||
      (sep != 'T' && sep != ' '))
    return std::nullopt;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  time_t t = timegm(&tm);
  if (t == static_cast<time_t>(-1)) return std::nullopt;
  return static_cast<int64_t>(t);
}

inline std::string format_timestamp(int64_t epoch) {
  time_t t = static_cast<time_t>(epoch);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

struct IngestReport {
  size_t rows_read = 0;
  size_t malformed = 0;
  size_t duplicates = 0;
};

namespace csv_detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    std::string field = line.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    size_t b = field.find_first_not_of(" \t\r");
    size_t e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_num(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace csv_detail

/// Reads `agent_id,timestamp_iso8601,lon,lat,sog,cog,heading,draught,ais_on`
/// (header required, column order free, kinematic columns optional).
/// Malformed rows and duplicate (agent, timestamp) pairs are skipped and
/// counted; points come out sorted per agent, agents sorted by id.
inline std::vector<Trajectory> read_trajectories_csv(std::istream& in,
                                                     IngestReport* report = nullptr) {
  using csv_detail::parse_num;
  using csv_detail::split_csv;
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = split_csv(line);
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  auto col_of = [&](const char* name) -> std::optional<size_t> {
    auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    return it->second;
  };
  auto c_agent = col_of("agent_id");
  auto c_time = col_of("timestamp_iso8601");
  if (!c_time) c_time = col_of("timestamp");
  auto c_lon = col_of("lon"), c_lat = col_of("lat");
  if (!c_agent || !c_time || !c_lon || !c_lat)
    throw std::runtime_error(
        "trajectory CSV needs agent_id, timestamp_iso8601, lon and lat columns");
  auto c_sog = col_of("sog"), c_cog = col_of("cog");
  auto c_heading = col_of("heading"), c_draught = col_of("draught");
  auto c_ais = col_of("ais_on");

  std::map<std::string, std::map<int64_t, TrajectoryPoint>> agents;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++rep.rows_read;
    auto f = split_csv(line);
    auto field = [&](std::optional<size_t> c) -> std::string {
      return c && *c < f.size() ? f[*c] : std::string();
    };
    std::string agent = field(c_agent);
    auto ts = parse_timestamp(field(c_time));
    auto lon = parse_num(field(c_lon));
    auto lat = parse_num(field(c_lat));
    if (agent.empty() || !ts || !lon || !lat) {
      ++rep.malformed;
      continue;
    }
    TrajectoryPoint p;
    p.timestamp = *ts;
    p.location = {*lon, *lat};
    p.sog = parse_num(field(c_sog));
    p.cog = parse_num(field(c_cog));
    p.heading = parse_num(field(c_heading));
    p.draught = parse_num(field(c_draught));
    std::string ais = field(c_ais);
    p.ais_on = !(ais == "0" || ais == "false");
    auto [_, inserted] = agents[agent].emplace(p.timestamp, p);
    if (!inserted) ++rep.duplicates;
  }

  std::vector<Trajectory> out;
  out.reserve(agents.size());
  for (auto& [id, pts] : agents) {
    Trajectory tr;
    tr.agent_id = id;
    tr.points.reserve(pts.size());
    for (auto& [_, p] : pts) tr.points.push_back(p);
    out.push_back(std::move(tr));
  }
  return out;
}

inline std::vector<Trajectory> read_trajectories_file(const std::string& path,
                                                      IngestReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  return read_trajectories_csv(in, report);
}

inline void write_trajectories_csv(std::ostream& out,
                                   std::span<const Trajectory> trajs) {
  out << "agent_id,timestamp_iso8601,lon,lat,sog,cog,heading,draught,ais_on\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& tr : trajs) {
    for (const auto& p : tr.points) {
      out << tr.agent_id << ',' << format_timestamp(p.timestamp) << ','
          << format_double(p.location.lon) << ',' << format_double(p.location.lat)
          << ',' << opt(p.sog) << ',' << opt(p.cog) << ',' << opt(p.heading)
          << ',' << opt(p.draught) << ',' << (p.ais_on ? '1' : '0') << '\n';
    }
  }
}

}  // namespace marlin
