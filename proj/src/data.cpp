#include "lgts/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lgts/errors.hpp"

namespace lgts {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void SimSpec::validate() const {
  if (n <= 0 || n % 4 != 0)
    throw ValidationError("simulate: n must be a positive multiple of 4, got " + std::to_string(n));
  if (t_len < 1) throw ValidationError("simulate: t_len must be >= 1");
  if (!(dt > 0)) throw ValidationError("simulate: dt must be positive");
  if (noise_sigma < 0) throw ValidationError("simulate: noise sigma must be >= 0");
}

double sim_signal(const SimCell& cell, double t) {
  return cell.alpha * (cell.gamma * t + cell.a * std::sin(cell.b * t / (2.0 * std::numbers::pi)) + cell.c);
}

Dataset simulate(const SimSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  // Balanced cell assignment, shuffled.
  std::vector<std::pair<int, int>> cells;
  cells.reserve(spec.n);
  for (int g = 0; g < 2; ++g)
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < spec.n / 4; ++i) cells.emplace_back(g, l);
  std::shuffle(cells.begin(), cells.end(), rng);

  std::normal_distribution<double> noise(0.0, 1.0);
  int width = static_cast<int>(std::to_string(spec.n).size());

  Dataset ds;
  ds.d = 1;
  ds.dt = spec.dt;
  ds.seed = spec.seed;
  ds.samples.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    auto [g, l] = cells[i];
    const SimCell& cell = spec.cells[g][l];
    TimeSeriesSample s;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "s%0*d", width, i);
    s.id = idbuf;
    s.d = 1;
    s.t_len = spec.t_len;
    s.values.resize(spec.t_len);
    s.mask.assign(spec.t_len, 1.0);
    for (int t = 0; t < spec.t_len; ++t) {
      double x = sim_signal(cell, t * spec.dt);
      if (spec.noise_sigma > 0) x += spec.noise_sigma * noise(rng);
      s.values[t] = x;
    }
    s.global_class = g + 1;
    s.local_class = l + 1;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

WindowedSample window_sample(const TimeSeriesSample& s, int delta) {
  if (delta < 1) throw ValidationError("window: delta must be >= 1");
  WindowedSample w;
  w.id = s.id;
  w.d = s.d;
  w.delta = delta;
  w.t_len = s.t_len;
  w.t_w = (s.t_len + delta - 1) / delta;
  w.global_class = s.global_class;
  w.local_class = s.local_class;
  int cols = s.d * delta;
  w.xw.assign(static_cast<size_t>(w.t_w) * cols, 0.0);
  w.mw.assign(static_cast<size_t>(w.t_w) * cols, 0.0);
  for (int t = 0; t < s.t_len; ++t) {
    int win = t / delta, off = t % delta;
    for (int f = 0; f < s.d; ++f) {
      size_t idx = static_cast<size_t>(win) * cols + f * delta + off;
      w.xw[idx] = s.value(f, t);
      w.mw[idx] = s.observed(f, t);
    }
  }
  return w;
}

std::vector<WindowedSample> window(const Dataset& ds, int delta) {
  std::vector<WindowedSample> out;
  out.reserve(ds.samples.size());
  for (const auto& s : ds.samples) out.push_back(window_sample(s, delta));
  return out;
}

std::vector<double> unwindow(const WindowedSample& w, const std::vector<double>& xw) {
  if (xw.size() != w.xw.size()) throw ValidationError("unwindow: layout mismatch");
  std::vector<double> flat(static_cast<size_t>(w.d) * w.t_len);
  int cols = w.d * w.delta;
  for (int t = 0; t < w.t_len; ++t) {
    int win = t / w.delta, off = t % w.delta;
    for (int f = 0; f < w.d; ++f)
      flat[static_cast<size_t>(f) * w.t_len + t] = xw[static_cast<size_t>(win) * cols + f * w.delta + off];
  }
  return flat;
}

std::vector<double> unwindow(const WindowedSample& w) { return unwindow(w, w.xw); }

void save_csv(const Dataset& ds, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw ValidationError("save_csv: cannot write " + csv_path);
  out << "sample_id,step";
  for (int f = 0; f < ds.d; ++f) out << ",f" << f;
  out << "\n";
  for (const auto& s : ds.samples) {
    for (int t = 0; t < s.t_len; ++t) {
      out << s.id << ',' << t;
      for (int f = 0; f < s.d; ++f) {
        out << ',';
        if (s.observed(f, t) != 0.0) out << fmt_double(s.value(f, t));
      }
      out << "\n";
    }
  }
  if (!out) throw ValidationError("save_csv: write failed for " + csv_path);
}

void save_manifest(const Dataset& ds, const std::string& manifest_path) {
  nlohmann::json j;
  j["n"] = ds.samples.size();
  j["d"] = ds.d;
  j["dt"] = ds.dt;
  j["seed"] = ds.seed;
  j["label_names"] = {"global_class", "local_class"};
  nlohmann::json labels = nlohmann::json::object();
  nlohmann::json lengths = nlohmann::json::object();
  for (const auto& s : ds.samples) {
    nlohmann::json lab = nlohmann::json::object();
    if (s.global_class) lab["global_class"] = *s.global_class;
    if (s.local_class) lab["local_class"] = *s.local_class;
    labels[s.id] = lab;
    lengths[s.id] = s.t_len;
  }
  j["labels"] = labels;
  j["t_len"] = lengths;
  std::ofstream out(manifest_path);
  if (!out) throw ValidationError("save_manifest: cannot write " + manifest_path);
  out << j.dump(2) << "\n";
}

Dataset load_csv(const std::string& csv_path, const std::string& manifest_path) {
  std::ifstream in(csv_path);
  if (!in) throw ValidationError("load_csv: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("load_csv: empty file " + csv_path);
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "step")
    throw ValidationError("load_csv: expected header sample_id,step,f0,... in " + csv_path);
  int d = static_cast<int>(header.size()) - 2;

  struct Row {
    std::vector<double> values;
    std::vector<double> mask;
  };
  // id -> step -> row; ordered so output is deterministic.
  std::map<std::string, std::map<int, Row>> table;
  std::vector<std::string> id_order;

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != d + 2)
      throw ValidationError("load_csv: line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(d + 2));
    const std::string& id = cells[0];
    int step;
    try {
      size_t pos;
      step = std::stoi(cells[1], &pos);
      if (pos != cells[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ValidationError("load_csv: non-integer step '" + cells[1] + "' at line " +
                            std::to_string(lineno));
    }
    auto it = table.find(id);
    if (it == table.end()) {
      it = table.emplace(id, std::map<int, Row>{}).first;
      id_order.push_back(id);
    }
    if (it->second.count(step))
      throw ValidationError("load_csv: duplicate (sample_id, step) = (" + id + ", " +
                            std::to_string(step) + ") at line " + std::to_string(lineno));
    Row row;
    row.values.resize(d, 0.0);
    row.mask.resize(d, 0.0);
    for (int f = 0; f < d; ++f) {
      const std::string& cell = cells[f + 2];
      if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NAN") continue;
      try {
        size_t pos;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("");
        if (std::isnan(v)) continue;
        row.values[f] = v;
        row.mask[f] = 1.0;
      } catch (const std::exception&) {
        throw ValidationError("load_csv: non-numeric cell '" + cell + "' at line " +
                              std::to_string(lineno) + ", column " + header[f + 2]);
      }
    }
    it->second.emplace(step, std::move(row));
  }

  Dataset ds;
  ds.d = d;
  for (const auto& id : id_order) {
    const auto& steps = table[id];
    TimeSeriesSample s;
    s.id = id;
    s.d = d;
    s.t_len = steps.empty() ? 0 : steps.rbegin()->first + 1;
    s.values.assign(static_cast<size_t>(d) * s.t_len, 0.0);
    s.mask.assign(static_cast<size_t>(d) * s.t_len, 0.0);
    for (const auto& [step, row] : steps) {
      for (int f = 0; f < d; ++f) {
        s.values[static_cast<size_t>(f) * s.t_len + step] = row.values[f];
        s.mask[static_cast<size_t>(f) * s.t_len + step] = row.mask[f];
      }
    }
    ds.samples.push_back(std::move(s));
  }

  if (!manifest_path.empty()) {
    std::ifstream min(manifest_path);
    if (!min) throw ValidationError("load_csv: cannot open manifest " + manifest_path);
    nlohmann::json j;
    try {
      min >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("load_csv: bad manifest " + manifest_path + ": " + e.what());
    }
    if (j.contains("dt")) ds.dt = j["dt"].get<double>();
    if (j.contains("seed")) ds.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("labels")) {
      for (auto& s : ds.samples) {
        if (!j["labels"].contains(s.id)) continue;
        const auto& lab = j["labels"][s.id];
        if (lab.contains("global_class")) s.global_class = lab["global_class"].get<int>();
        if (lab.contains("local_class")) s.local_class = lab["local_class"].get<int>();
      }
    }
  }
  return ds;
}

}  // namespace lgts
