// report.hpp: CSV/JSON report export and reload.
//
// Matrix CSV schema: header "cf_hz,<level1>,<level2>,...", one row per CF,
// full-precision decimal floats (printf %.17g), which reload bit-exactly.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "audemu/errors.hpp"
#include "audemu/eval.hpp"

namespace audemu {

inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MatrixCsv {
  std::vector<double> cfs;
  std::vector<double> levels;
  std::vector<double> values;  // J x |L|
};

inline void write_matrix_csv(const std::string& path,
                             const std::vector<double>& cfs,
                             const std::vector<double>& levels,
                             const std::vector<double>& values) {
  if (values.size() != cfs.size() * levels.size()) {
    throw ShapeMismatch("matrix does not match its axes");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "cf_hz";
  for (double l : levels) out << "," << format_full(l);
  out << "\n";
  for (std::size_t j = 0; j < cfs.size(); ++j) {
    out << format_full(cfs[j]);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      out << "," << format_full(values[j * levels.size() + l]);
    }
    out << "\n";
  }
  if (!out) throw IoError("short write to CSV: " + path);
}

inline MatrixCsv read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV: " + path);
  MatrixCsv m;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      m.levels.push_back(std::stod(cell));
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        m.cfs.push_back(std::stod(cell));
        first = false;
      } else {
        m.values.push_back(std::stod(cell));
      }
    }
  }
  if (m.values.size() != m.cfs.size() * m.levels.size()) {
    throw IoError("ragged CSV: " + path);
  }
  return m;
}

// Everything one evaluation produced; optional pieces are skipped.
struct ReportArtifacts {
  std::optional<SerMatrix> ser_fmae;
  std::optional<SerMatrix> ser_mae;
  std::optional<DeltaSer> delta;
  std::optional<LogMaeCurve> log_mae_fmae;
  std::optional<LogMaeCurve> log_mae_mae;
  std::vector<ExcitationPattern> excitations;  // reference patterns
  std::vector<double> excitation_cfs;
};

// Writes one CSV per matrix, a JSON summary, and a plot-script stub that
// references the CSVs.  Refuses to write an empty report.
inline void export_report(const std::string& dir, const ReportArtifacts& a) {
  const bool has_any = a.ser_fmae || a.ser_mae || a.delta || a.log_mae_fmae ||
                       a.log_mae_mae || !a.excitations.empty();
  if (!has_any) {
    throw InvalidArgument("refusing to export an empty report: no evaluations given");
  }
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json summary;
  std::vector<std::string> csv_files;
  auto emit_matrix = [&](const char* name, const SerMatrix& m) {
    const std::string file = std::string(name) + ".csv";
    write_matrix_csv((fs::path(dir) / file).string(), m.cfs, m.levels,
                     m.values_db);
    csv_files.push_back(file);
  };
  if (a.ser_fmae) emit_matrix("ser_fmae", *a.ser_fmae);
  if (a.ser_mae) emit_matrix("ser_mae", *a.ser_mae);
  if (a.delta) {
    const std::string file = "delta_ser.csv";
    write_matrix_csv((fs::path(dir) / file).string(), a.delta->cfs,
                     a.delta->levels, a.delta->values_db);
    csv_files.push_back(file);
    summary["mean_delta_ser_db"] = a.delta->mean_db;
  }
  auto emit_curve = [&](const char* name, const LogMaeCurve& c) {
    const std::string file = std::string(name) + ".csv";
    std::ofstream out((fs::path(dir) / file).string(), std::ios::trunc);
    if (!out) throw IoError("cannot write CSV in " + dir);
    out << "level_db,log10_mae\n";
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
      out << format_full(c.levels[i]) << "," << format_full(c.log10_mae[i])
          << "\n";
    }
    csv_files.push_back(file);
  };
  if (a.log_mae_fmae) {
    emit_curve("log_mae_fmae", *a.log_mae_fmae);
    summary["ge_fmae"] = a.log_mae_fmae->ge;
  }
  if (a.log_mae_mae) {
    emit_curve("log_mae_mae", *a.log_mae_mae);
    summary["ge_mae"] = a.log_mae_mae->ge;
  }
  if (!a.excitations.empty()) {
    const std::string file = "excitation_patterns.csv";
    std::ofstream out((fs::path(dir) / file).string(), std::ios::trunc);
    if (!out) throw IoError("cannot write CSV in " + dir);
    out << "tone_freq_hz,tone_level_db";
    for (double cf : a.excitation_cfs) out << "," << format_full(cf);
    out << "\n";
    for (const auto& p : a.excitations) {
      out << format_full(p.tone_freq_hz) << "," << format_full(p.tone_level_db);
      for (double v : p.rms_per_cf) out << "," << format_full(v);
      out << "\n";
    }
    csv_files.push_back(file);
  }
  summary["csv_files"] = csv_files;
  {
    std::ofstream out((fs::path(dir) / "summary.json").string(), std::ios::trunc);
    if (!out) throw IoError("cannot write summary.json in " + dir);
    out << summary.dump(2) << "\n";
  }
  {
    std::ofstream out((fs::path(dir) / "plot_report.py").string(), std::ios::trunc);
    out << "#!/usr/bin/env python3\n"
           "# Renders the CSVs in this directory. Requires matplotlib.\n"
           "import csv, os, sys\n"
           "import matplotlib.pyplot as plt\n\n"
           "here = os.path.dirname(os.path.abspath(__file__))\n"
           "for name in " << nlohmann::json(csv_files).dump() << ":\n"
           "    path = os.path.join(here, name)\n"
           "    with open(path) as f:\n"
           "        rows = list(csv.reader(f))\n"
           "    header, body = rows[0], rows[1:]\n"
           "    xs = [float(r[0]) for r in body]\n"
           "    plt.figure()\n"
           "    for col in range(1, len(header)):\n"
           "        plt.plot(xs, [float(r[col]) for r in body], label=header[col])\n"
           "    plt.xscale('log' if name.startswith(('ser', 'delta')) else 'linear')\n"
           "    plt.title(name)\n"
           "    plt.legend(fontsize=6)\n"
           "    plt.savefig(os.path.join(here, name.replace('.csv', '.png')), dpi=120)\n"
           "    print('wrote', name.replace('.csv', '.png'))\n";
  }
}

}  // namespace audemu
