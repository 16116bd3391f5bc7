#include "twincher/csv.hpp"

#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace twincher {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw CsvError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  std::size_t n_steps = 6;
  for (const auto& r : records) n_steps = std::max(n_steps, r.worst_residuals.size());
  out << "entangler_seed,learner,n_calls,train_seed,C";
  for (std::size_t t = 0; t < n_steps; ++t) out << ",r" << t;
  out << ",success\n";
  for (const auto& r : records) {
    out << r.entangler_seed << ',' << to_string(r.learner) << ',' << r.n_calls << ',' << r.train_seed << ','
        << format_double(r.C);
    for (std::size_t t = 0; t < n_steps; ++t) {
      out << ',' << (t < r.worst_residuals.size() ? format_double(r.worst_residuals[t]) : std::string("nan"));
    }
    out << ',' << (r.success ? 1 : 0) << '\n';
  }
}

void write_eta_csv(std::ostream& out, const std::vector<EtaScanRecord>& records) {
  out << "amplitude,dy_rms,dp_rms,ratio\n";
  for (const auto& r : records) {
    out << format_double(r.amplitude) << ',' << format_double(r.dy_rms) << ',' << format_double(r.dp_rms) << ','
        << format_double(r.ratio) << '\n';
  }
}

void write_spiral_grid_csv(std::ostream& out, const std::vector<SpiralGridRow>& rows) {
  out << "y1,y2,u1\n";
  for (const auto& r : rows) out << format_double(r.y1) << ',' << format_double(r.y2) << ',' << format_double(r.u1) << '\n';
}

void write_spiral_path_csv(std::ostream& out, const std::vector<SpiralPathRow>& rows) {
  out << "p,u1\n";
  for (const auto& r : rows) out << format_double(r.p) << ',' << format_double(r.u1) << '\n';
}

void write_residual_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "trial_id,learner,step,residual\n";
  for (const auto& r : rows) {
    out << r.trial_id << ',' << to_string(r.learner) << ',' << r.step << ',' << format_double(r.residual) << '\n';
  }
}

void write_bands_csv(std::ostream& out, const std::vector<TransitionBand>& bands) {
  out << "learner,n_calls,C_left,C_right\n";
  for (const auto& b : bands) {
    out << to_string(b.learner) << ',' << b.n_calls << ',' << optional_cell(b.left) << ',' << optional_cell(b.right)
        << '\n';
  }
}

std::vector<TrialRecord> read_trials_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("trials.csv: missing header");
  const auto header = split_line(line);
  if (header.size() < 7 || header[0] != "entangler_seed" || header[1] != "learner" || header[2] != "n_calls" ||
      header[3] != "train_seed" || header[4] != "C" || header.back() != "success") {
    throw CsvError("trials.csv: unexpected header '" + line + "'");
  }
  const std::size_t n_steps = header.size() - 6;
  for (std::size_t t = 0; t < n_steps; ++t) {
    if (header[5 + t] != "r" + std::to_string(t)) throw CsvError("trials.csv: unexpected column " + header[5 + t]);
  }
  std::vector<TrialRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " cells");
    }
    TrialRecord r;
    r.entangler_seed = parse_u64(cells[0], line_no);
    r.learner = parse_learner_kind(cells[1]);
    r.n_calls = parse_u64(cells[2], line_no);
    r.train_seed = parse_u64(cells[3], line_no);
    r.C = parse_double(cells[4], line_no);
    for (std::size_t t = 0; t < n_steps; ++t) r.worst_residuals.push_back(parse_double(cells[5 + t], line_no));
    if (cells.back() != "0" && cells.back() != "1") throw CsvError("line " + std::to_string(line_no) + ": bad success");
    r.success = cells.back() == "1";
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace twincher
