#pragma once

#include <string>
#include <vector>

namespace hdice::harness {

struct Curve {
  std::string label;
  std::vector<double> x;     // episodes elapsed
  std::vector<double> mean;  // eval return, mean over runs
  std::vector<double> std;   // sample std over runs (0 for one run)
  int runs = 0;
};

/// Reads metrics CSVs and groups them by method: the `method` line of the
/// sibling `.config` echo when present, else the file stem without `_seedN`.
/// Runs in a group are truncated to their common length.
std::vector<Curve> load_curves(const std::vector<std::string>& csv_paths);

std::string render_svg(const std::vector<Curve>& curves, const std::string& title = "");

/// load_curves + render_svg, written to `out_path`.
void plot_curves(const std::vector<std::string>& csv_paths, const std::string& out_path);

}  // namespace hdice::harness
