#include "qnoise/io.hpp"

#include "qnoise/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace qnoise {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) { return fmt::format("{}", value); }

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw DomainError(fmt::format("'{}' is not a number", text));
  }
  return value;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(fmt::format("failed writing {}", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(fmt::format("cannot move output into place at {}", path.string()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits a CSV document into metadata and data lines (header first).
struct CsvDocument {
  Metadata meta;
  std::vector<std::pair<std::size_t, std::string_view>> lines;  // (1-based line no, text)
};

CsvDocument split_csv(std::string_view text) {
  CsvDocument doc;
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        doc.meta[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      }
      continue;
    }
    doc.lines.emplace_back(lineno, line);
  }
  return doc;
}

std::string metadata_lines(const Metadata& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += fmt::format("# {}={}\n", k, v);
  return out;
}

double field(std::string_view text, std::size_t lineno, std::string_view what) {
  try {
    return parse_double(text);
  } catch (const DomainError&) {
    throw DomainError(fmt::format("line {}: {} '{}' is not a number", lineno, what, text));
  }
}

}  // namespace

std::string spectrum_csv(const NoiseSpectrum& spectrum, const Metadata& meta) {
  std::string out = metadata_lines(meta);
  out += "omega_rad_s,S,dB\n";
  const auto db = spectrum.db();
  for (std::size_t i = 0; i < spectrum.values.size(); ++i) {
    out += fmt::format("{},{},{}\n", spectrum.grid[i], spectrum.values[i], db[i]);
  }
  return out;
}

SpectrumFile parse_spectrum_csv(std::string_view text) {
  auto doc = split_csv(text);
  if (doc.lines.empty() || doc.lines.front().second != "omega_rad_s,S,dB") {
    throw DomainError("spectrum file must start with header omega_rad_s,S,dB");
  }
  std::vector<double> omega;
  std::vector<double> values;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto [lineno, line] = doc.lines[i];
    const auto cells = split(line, ',');
    if (cells.size() != 3) throw DomainError(fmt::format("line {}: expected 3 columns", lineno));
    omega.push_back(field(cells[0], lineno, "omega_rad_s"));
    values.push_back(field(cells[1], lineno, "S"));
  }
  const auto spacing = doc.meta.count("spacing") && doc.meta.at("spacing") == "lin"
                           ? GridSpacing::linear
                           : GridSpacing::logarithmic;
  return {doc.meta, NoiseSpectrum{FrequencyGrid::from_values(std::move(omega), spacing),
                                  std::move(values)}};
}

std::string spectrogram_csv(const Spectrogram& map, const Metadata& meta) {
  std::string out = metadata_lines(meta);
  out += "omega_rad_s";
  for (double a : map.angles) out += "," + format_double(a);
  out += '\n';
  for (std::size_t i = 0; i < map.grid.size(); ++i) {
    out += format_double(map.grid[i]);
    for (std::size_t j = 0; j < map.angles.size(); ++j) out += "," + format_double(map.at(i, j));
    out += '\n';
  }
  return out;
}

SpectrogramFile parse_spectrogram_csv(std::string_view text) {
  auto doc = split_csv(text);
  if (doc.lines.empty()) throw DomainError("spectrogram file is empty");
  const auto header = split(doc.lines.front().second, ',');
  if (header.front() != "omega_rad_s" || header.size() < 2) {
    throw DomainError("spectrogram header must be omega_rad_s followed by readout angles");
  }
  std::vector<double> angles;
  for (std::size_t j = 1; j < header.size(); ++j) {
    angles.push_back(field(header[j], doc.lines.front().first, "angle"));
  }
  std::vector<double> omega;
  std::vector<double> db;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto [lineno, line] = doc.lines[i];
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw DomainError(fmt::format("line {}: expected {} columns", lineno, header.size()));
    }
    omega.push_back(field(cells[0], lineno, "omega_rad_s"));
    for (std::size_t j = 1; j < cells.size(); ++j) db.push_back(field(cells[j], lineno, "dB"));
  }
  return {doc.meta, Spectrogram{FrequencyGrid::from_values(std::move(omega), GridSpacing::logarithmic),
                                std::move(angles), std::move(db)}};
}

std::string trace_csv(const MeasuredTrace& trace) {
  std::string out = fmt::format("# label={}\n# zeta_rad={}\n# weight={}\n", trace.label,
                                trace.zeta_rad, trace.weight);
  out += "frequency_hz,noise_db\n";
  for (std::size_t i = 0; i < trace.frequency_hz.size(); ++i) {
    out += fmt::format("{},{}\n", trace.frequency_hz[i], trace.noise_db[i]);
  }
  return out;
}

MeasuredTrace parse_trace_csv(std::string_view text, std::string_view name) {
  auto doc = split_csv(text);
  MeasuredTrace trace;
  trace.label = doc.meta.count("label") ? doc.meta.at("label") : std::string(name);
  if (doc.meta.count("zeta_rad")) {
    trace.zeta_rad = parse_double(doc.meta.at("zeta_rad"));
  } else if (doc.meta.count("label")) {
    trace.zeta_rad = zeta_for_label(doc.meta.at("label"));
  } else {
    throw DomainError(fmt::format("{}: missing '# zeta_rad=<value>' line", name));
  }
  if (doc.meta.count("weight")) trace.weight = parse_double(doc.meta.at("weight"));
  if (doc.lines.empty()) throw DomainError(fmt::format("{}: no header", name));

  const auto header = doc.lines.front().second;
  bool spectrum_layout = false;
  if (header == "omega_rad_s,S,dB") {
    spectrum_layout = true;
  } else if (header != "frequency_hz,noise_db") {
    throw DomainError(fmt::format("{}: header must be frequency_hz,noise_db (got '{}')", name, header));
  }
  const std::size_t columns = spectrum_layout ? 3 : 2;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto [lineno, line] = doc.lines[i];
    const auto cells = split(line, ',');
    if (cells.size() != columns) {
      throw DomainError(fmt::format("{} line {}: expected {} columns", name, lineno, columns));
    }
    try {
      const double x = parse_double(cells[0]);
      const double y = parse_double(cells[spectrum_layout ? 2 : 1]);
      const double f = spectrum_layout ? x / (2.0 * kPi) : x;
      if (!trace.frequency_hz.empty() && !(f > trace.frequency_hz.back())) {
        throw DomainError("frequencies are not strictly increasing");
      }
      trace.frequency_hz.push_back(f);
      trace.noise_db.push_back(y);
    } catch (const DomainError& e) {
      throw DomainError(fmt::format("{} line {}: {}", name, lineno, e.what()));
    }
  }
  try {
    trace.validate();
  } catch (const DomainError& e) {
    throw DomainError(fmt::format("{}: {}", name, e.what()));
  }
  return trace;
}

MeasuredTrace read_trace(const fs::path& path) {
  return parse_trace_csv(read_file(path), path.string());
}

LoadedTraces load_traces(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError(fmt::format("data directory {} does not exist", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (ec) throw IoError(fmt::format("cannot list data directory {}", dir.string()));
  if (files.empty()) {
    throw IoError(fmt::format("data directory {} contains no trace CSV files", dir.string()));
  }
  std::sort(files.begin(), files.end());

  LoadedTraces out;
  std::vector<std::string> failures;
  bool io_failure = false;
  for (const auto& f : files) {
    try {
      out.traces.push_back(read_trace(f));
      out.paths.push_back(f);
    } catch (const IoError& e) {
      io_failure = true;
      failures.emplace_back(e.what());
    } catch (const DomainError& e) {
      failures.emplace_back(e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = fmt::format("{} trace file(s) rejected:", failures.size());
    for (const auto& f : failures) msg += "\n  " + f;
    if (io_failure) throw IoError(msg);
    throw DomainError(msg);
  }
  return out;
}

json fit_result_json(const FitResult& result, const std::vector<fs::path>& paths,
                     const std::vector<MeasuredTrace>& traces) {
  const auto& m = result.point.model;
  json doc;
  doc["parameters"] = {
      {"r", m.squeeze_factor},
      {"eta", m.efficiency},
      {"gamma_rad_s", m.cavity.halfwidth_rad_s},
      {"delta1_rad_s", m.cavity.detuning_signal_rad_s},
      {"delta2_rad_s", m.cavity.detuning_idler_rad_s},
      {"lo_ratio", m.lo_ratio},
  };
  json estimate = json::object();
  for (std::size_t i = 0; i < result.names.size(); ++i) estimate[result.names[i]] = result.estimate[i];
  doc["free"] = estimate;
  doc["residual_db2"] = result.residual;
  doc["initial_residual_db2"] = result.initial_residual;
  doc["converged"] = result.converged;
  doc["hit_iteration_cap"] = result.hit_iteration_cap;
  doc["iterations"] = result.iterations;
  doc["at_bound"] = result.at_bound;
  doc["insensitive"] = result.insensitive;
  doc["gauge"] = {{"convention", "delta1_rad_s >= 0"}, {"flipped", result.gauge_flipped}};
  json per_trace = json::array();
  for (std::size_t t = 0; t < result.trace_residuals.size(); ++t) {
    json entry;
    entry["path"] = t < paths.size() ? paths[t].string() : std::string();
    entry["label"] = t < traces.size() ? traces[t].label : std::string();
    entry["zeta_rad"] = result.point.zeta[t];
    entry["residual_db"] = result.trace_residuals[t];
    per_trace.push_back(entry);
  }
  doc["traces"] = per_trace;
  return doc;
}

EprReport make_epr_report(double squeeze_factor, double efficiency) {
  const auto state = TwoModeCovariance::two_mode_squeezed(squeeze_factor, efficiency);
  const auto reid = reid_epr_criterion(state);
  EprReport r;
  r.squeeze_factor = squeeze_factor;
  r.efficiency = efficiency;
  r.marginal_variance = conditional_variance(state, Quadrature::amplitude, 0.0);
  r.optimal_gain_amplitude = optimal_conditioning_gain(state, Quadrature::amplitude);
  r.optimal_gain_phase = optimal_conditioning_gain(state, Quadrature::phase);
  r.conditional_amplitude = reid.amplitude;
  r.conditional_phase = reid.phase;
  r.reid_product = reid.product;
  r.entangled = reid.entangled;
  r.degenerate_squeezing_db = 10.0 * std::log10(std::exp(-2.0 * squeeze_factor));
  return r;
}

json to_json(const EprReport& r) {
  return {
      {"squeeze_factor", r.squeeze_factor},
      {"efficiency", r.efficiency},
      {"marginal_variance", r.marginal_variance},
      {"optimal_gain", {{"amplitude", r.optimal_gain_amplitude}, {"phase", r.optimal_gain_phase}}},
      {"conditional_variance",
       {{"amplitude", r.conditional_amplitude}, {"phase", r.conditional_phase}}},
      {"reid_product", r.reid_product},
      {"entangled", r.entangled},
      {"degenerate_squeezing_db", r.degenerate_squeezing_db},
  };
}

EprReport epr_report_from_json(const json& doc) {
  try {
    EprReport r;
    r.squeeze_factor = doc.at("squeeze_factor").get<double>();
    r.efficiency = doc.at("efficiency").get<double>();
    r.marginal_variance = doc.at("marginal_variance").get<double>();
    r.optimal_gain_amplitude = doc.at("optimal_gain").at("amplitude").get<double>();
    r.optimal_gain_phase = doc.at("optimal_gain").at("phase").get<double>();
    r.conditional_amplitude = doc.at("conditional_variance").at("amplitude").get<double>();
    r.conditional_phase = doc.at("conditional_variance").at("phase").get<double>();
    r.reid_product = doc.at("reid_product").get<double>();
    r.entangled = doc.at("entangled").get<bool>();
    r.degenerate_squeezing_db = doc.at("degenerate_squeezing_db").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DomainError(fmt::format("malformed EPR report: {}", e.what()));
  }
}

}  // namespace qnoise
