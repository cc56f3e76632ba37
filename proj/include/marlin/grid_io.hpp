#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/geo.hpp"
#include "marlin/trajectory_csv.hpp"

namespace marlin {

/// Grid exchange format. The `#` header pins the geometry so a reload
/// rebuilds the identical grid; data rows carry only the interesting cells
/// (candidates and labeled cells).
///
///   # aoi=30,45,31,46
///   # cell_deg=0.025
///   id,min_lon,min_lat,max_lon,max_lat,labels,candidate
inline void write_grid_csv(std::ostream& out, const RegionGrid& grid) {
  const Region& aoi = grid.aoi();
  out << "# aoi=" << format_double(aoi.min_corner.lon) << ','
      << format_double(aoi.min_corner.lat) << ','
      << format_double(aoi.max_corner.lon) << ','
      << format_double(aoi.max_corner.lat) << "\n";
  out << "# cell_deg=" << format_double(grid.cell_size_deg()) << "\n";
  out << "id,min_lon,min_lat,max_lon,max_lat,labels,candidate\n";

  std::set<std::string> ids(grid.candidate_ids.begin(), grid.candidate_ids.end());
  for (const auto& [id, _] : grid.labels) ids.insert(id);
  std::set<std::string> cand(grid.candidate_ids.begin(), grid.candidate_ids.end());
  for (const auto& id : ids) {
    const Region* r = grid.find(id);
    if (!r) continue;
    out << id << ',' << format_double(r->min_corner.lon) << ','
        << format_double(r->min_corner.lat) << ','
        << format_double(r->max_corner.lon) << ','
        << format_double(r->max_corner.lat) << ',';
    const auto& labels = grid.labels_of(id);
    for (size_t i = 0; i < labels.size(); ++i) {
      if (i) out << '|';
      out << labels[i];
    }
    out << ',' << (cand.count(id) ? 1 : 0) << "\n";
  }
}

inline RegionGrid read_grid_csv(std::istream& in) {
  std::string line;
  double aoi_vals[4] = {0, 0, 0, 0};
  double cell = 0;
  bool have_aoi = false, have_cell = false;

  auto parse_header = [&](const std::string& l) {
    size_t eq = l.find('=');
    if (eq == std::string::npos) return;
    std::string key = l.substr(1, eq - 1);
    size_t b = key.find_first_not_of(" \t");
    size_t e = key.find_last_not_of(" \t");
    key = b == std::string::npos ? "" : key.substr(b, e - b + 1);
    std::string val = l.substr(eq + 1);
    if (key == "aoi") {
      auto f = csv_detail::split_csv(val);
      if (f.size() != 4) throw std::runtime_error("grid csv: bad aoi header");
      for (int i = 0; i < 4; ++i) {
        auto v = csv_detail::parse_num(f[i]);
        if (!v) throw std::runtime_error("grid csv: bad aoi header");
        aoi_vals[i] = *v;
      }
      have_aoi = true;
    } else if (key == "cell_deg") {
      size_t vb = val.find_first_not_of(" \t");
      std::optional<double> v;
      if (vb != std::string::npos) v = csv_detail::parse_num(val.substr(vb));
      if (!v) throw std::runtime_error("grid csv: bad cell_deg header");
      cell = *v;
      have_cell = true;
    }
  };

  std::string data_header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      parse_header(line);
      continue;
    }
    data_header = line;
    break;
  }
  if (!have_aoi || !have_cell)
    throw std::runtime_error("grid csv: missing # aoi or # cell_deg header");

  RegionGrid grid(Region{"aoi", {aoi_vals[0], aoi_vals[1]}, {aoi_vals[2], aoi_vals[3]}},
                  cell);

  auto header = csv_detail::split_csv(data_header);
  auto col = [&](const char* name) -> size_t {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error(std::string("grid csv: missing column ") + name);
  };
  size_t c_id = col("id"), c_labels = col("labels"), c_cand = col("candidate");

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = csv_detail::split_csv(line);
    if (f.size() <= std::max({c_id, c_labels, c_cand}))
      throw std::runtime_error("grid csv: short row: " + line);
    const std::string& id = f[c_id];
    if (!grid.find(id)) throw std::runtime_error("grid csv: unknown cell id " + id);
    if (!f[c_labels].empty()) {
      std::vector<std::string> labels;
      size_t start = 0;
      const std::string& ls = f[c_labels];
      while (true) {
        size_t bar = ls.find('|', start);
        labels.push_back(ls.substr(start, bar == std::string::npos
                                              ? std::string::npos
                                              : bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      grid.labels[id] = std::move(labels);
    }
    if (f[c_cand] == "1") grid.candidate_ids.push_back(id);
  }
  std::sort(grid.candidate_ids.begin(), grid.candidate_ids.end());
  return grid;
}

inline RegionGrid read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);
  return read_grid_csv(in);
}

inline void write_grid_file(const std::string& path, const RegionGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid file: " + path);
  write_grid_csv(out, grid);
}

}  // namespace marlin
