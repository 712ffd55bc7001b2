#ifndef SPHERELAB_IO_HPP
#define SPHERELAB_IO_HPP

// Locale-independent CSV / SVG emission and hashing.

#include <spherelab/error.hpp>
#include <spherelab/linalg.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace spherelab {

/// Shortest round-trip decimal form; "nan"/"inf" spelled out.
inline std::string format_number(double x)
{
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view s)
{
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const
  {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += format_number(r[i]);
      }
      out += '\n';
    }
    return out;
  }
};

/// Two-column (node, value) table for a grid function.
inline CsvTable grid_function_csv(const Vec& nodes, const Vec& values, const std::string& name = "value",
                                  const std::string& node_name = "s")
{
  if (nodes.size() != values.size()) throw Error(ErrorKind::length_mismatch, "grid function csv");
  CsvTable t;
  t.header = {node_name, name};
  for (std::size_t i = 0; i < nodes.size(); ++i) t.rows.push_back({nodes[i], values[i]});
  return t;
}

struct SvgSeries {
  std::string name;
  Vec x, y;
};

/// Minimal line plot: frame, min/max labels, one polyline per series.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<SvgSeries>& series, std::size_t max_points = 2000)
{
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]); x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]); y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto fmt = [](double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 5);
    return std::string(buf, r.ptr);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  o += "<rect x=\"70\" y=\"40\" width=\"550\" height=\"310\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  o += "<text x=\"345\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">" + xlabel + "</text>\n";
  o += "<text x=\"16\" y=\"195\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 195)\">" +
       ylabel + "</text>\n";
  o += "<text x=\"70\" y=\"366\" font-size=\"10\">" + fmt(x0) + "</text>\n";
  o += "<text x=\"620\" y=\"366\" text-anchor=\"end\" font-size=\"10\">" + fmt(x1) + "</text>\n";
  o += "<text x=\"66\" y=\"350\" text-anchor=\"end\" font-size=\"10\">" + fmt(y0) + "</text>\n";
  o += "<text x=\"66\" y=\"44\" text-anchor=\"end\" font-size=\"10\">" + fmt(y1) + "</text>\n";
  std::size_t ci = 0;
  for (const auto& s : series) {
    std::string pts;
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / max_points);
    for (std::size_t i = 0; i < s.x.size(); i += stride) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
    }
    const char* c = colors[ci % 6];
    o += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    o += "<text x=\"80\" y=\"" + fmt(58.0 + 14.0 * static_cast<double>(ci)) + "\" font-size=\"11\" fill=\"" + c +
         "\">" + s.name + "</text>\n";
    ++ci;
  }
  o += "</svg>\n";
  return o;
}

} // namespace spherelab

#endif
