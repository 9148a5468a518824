#include "hdice/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "hdice/harness/config.hpp"
#include "hdice/harness/experiment.hpp"

namespace hdice::harness {

namespace {

struct Series {
  std::vector<double> x, y;
};

Series read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError(path + ": unexpected CSV header");
  Series s;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 14) throw FormatError(path + ": row has " + std::to_string(cells.size()) + " fields");
    try {
      s.x.push_back(std::stod(cells[1]));
      s.y.push_back(std::stod(cells[3]));
    } catch (const std::exception&) {
      throw FormatError(path + ": non-numeric episodes or return field");
    }
  }
  return s;
}

std::string group_of(const std::string& path) {
  namespace fs = std::filesystem;
  fs::path echo = fs::path(path).replace_extension(".config");
  if (std::ifstream in(echo); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(ss.str()))
      if (k == "method") return v;
  }
  return std::regex_replace(fs::path(path).stem().string(), std::regex("_seed[0-9]+$"), "");
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::vector<Curve> load_curves(const std::vector<std::string>& csv_paths) {
  if (csv_paths.empty()) throw ContractError("plot needs at least one CSV file");
  std::map<std::string, std::vector<Series>> groups;
  for (const auto& p : csv_paths) groups[group_of(p)].push_back(read_series(p));
  std::vector<Curve> out;
  for (const auto& [label, runs] : groups) {
    std::size_t len = runs.front().x.size();
    for (const auto& r : runs) len = std::min(len, r.x.size());
    Curve c;
    c.label = label;
    c.runs = static_cast<int>(runs.size());
    for (std::size_t i = 0; i < len; ++i) {
      double sx = 0.0, sy = 0.0;
      for (const auto& r : runs) {
        sx += r.x[i];
        sy += r.y[i];
      }
      const double n = static_cast<double>(runs.size());
      const double my = sy / n;
      double ss = 0.0;
      for (const auto& r : runs) ss += (r.y[i] - my) * (r.y[i] - my);
      c.x.push_back(sx / n);
      c.mean.push_back(my);
      c.std.push_back(runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string render_svg(const std::vector<Curve>& curves, const std::string& title) {
  const double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (first) {
        x0 = x1 = c.x[i];
        y0 = c.mean[i] - c.std[i];
        y1 = c.mean[i] + c.std[i];
        first = false;
      }
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      y0 = std::min(y0, c.mean[i] - c.std[i]);
      y1 = std::max(y1, c.mean[i] + c.std[i]);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 1;
    y1 += 1;
  }
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) o << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + (x1 - x0) * t / 5.0, yv = y0 + (y1 - y0) * t / 5.0;
    o << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << num(xv)
      << "</text>\n";
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
      << "</text>\n";
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(sy(yv)) << "\" y2=\"" << num(sy(yv))
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">episodes</text>\n";
  o << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">eval return</text>\n";

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* color = kPalette[ci % (sizeof kPalette / sizeof *kPalette)];
    if (!c.x.empty()) {
      std::string band, line;
      for (std::size_t i = 0; i < c.x.size(); ++i) band += num(sx(c.x[i])) + "," + num(sy(c.mean[i] + c.std[i])) + " ";
      for (std::size_t i = c.x.size(); i-- > 0;) band += num(sx(c.x[i])) + "," + num(sy(c.mean[i] - c.std[i])) + " ";
      for (std::size_t i = 0; i < c.x.size(); ++i) line += num(sx(c.x[i])) + "," + num(sy(c.mean[i])) + " ";
      o << "<polygon points=\"" << band << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(ci);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    o << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">" << escape(c.label) << " (n=" << c.runs
      << ")</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void plot_curves(const std::vector<std::string>& csv_paths, const std::string& out_path) {
  const auto curves = load_curves(csv_paths);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + out_path);
  out << render_svg(curves);
}

}  // namespace hdice::harness
