#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twincher/bench.hpp"

namespace twincher {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest form with 17 significant digits ("%.17g").
std::string format_double(double v);

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_eta_csv(std::ostream& out, const std::vector<EtaScanRecord>& records);
void write_spiral_grid_csv(std::ostream& out, const std::vector<SpiralGridRow>& rows);
void write_spiral_path_csv(std::ostream& out, const std::vector<SpiralPathRow>& rows);
void write_residual_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);
void write_bands_csv(std::ostream& out, const std::vector<TransitionBand>& bands);

/// Parses trials.csv back into records (w_amp and error are not stored).
std::vector<TrialRecord> read_trials_csv(std::istream& in);

/// Writes `fill(stream)` to path in binary mode (LF line endings); throws
/// CsvError on I/O failure.
template <class Fill>
void write_file(const std::filesystem::path& path, Fill&& fill) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot open " + path.string() + " for writing");
  fill(out);
  out.flush();
  if (!out) throw CsvError("write failed for " + path.string());
}

}  // namespace twincher
