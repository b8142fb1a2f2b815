#include "cannibal/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <vector>

#include "cannibal/text.hpp"

namespace cannibal {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_summary_csv(std::span<const ComparisonReport> reports,
                       std::string_view run_id, std::ostream& out) {
  out << kSummaryHeader << '\n';
  for (const ComparisonReport& r : reports) {
    out << text::csv_field(r.category) << ',' << format_date(r.cutoff) << ','
        << fixed6(r.baseline_accuracy) << ',' << fixed6(r.three_stage_accuracy)
        << ',' << r.lags << ',' << run_id << '\n';
  }
}

void write_series_csv(const ProductSeries& series, std::ostream& out) {
  out << kSeriesHeader << '\n';
  for (const SeriesPoint& p : series.points) {
    out << format_date(p.week) << ',' << text::format_real(p.actual) << ','
        << fixed6(p.baseline) << ',' << fixed6(p.three_stage) << '\n';
  }
}

void write_series_svg(const ProductSeries& series, std::string_view title,
                      std::ostream& out) {
  constexpr double kWidth = 640;
  constexpr double kHeight = 360;
  constexpr double kPad = 48;
  const auto& pts = series.points;

  double hi = 1.0;
  for (const SeriesPoint& p : pts) {
    hi = std::max({hi, p.actual, p.baseline, p.three_stage});
  }
  const auto x_at = [&](std::size_t i) {
    const double span = pts.size() > 1 ? static_cast<double>(pts.size() - 1) : 1.0;
    return kPad + (kWidth - 2 * kPad) * static_cast<double>(i) / span;
  };
  const auto y_at = [&](double v) {
    return kHeight - kPad - (kHeight - 2 * kPad) * v / hi;
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << xml_escape(title) << "</text>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kHeight - kPad << "\" x2=\""
      << kWidth - kPad << "\" y2=\"" << kHeight - kPad
      << "\" stroke=\"#444\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad
      << "\" y2=\"" << kHeight - kPad << "\" stroke=\"#444\"/>\n";

  struct Line {
    const char* name;
    const char* color;
    double SeriesPoint::*field;
  };
  const Line lines[] = {{"actual", "#222222", &SeriesPoint::actual},
                        {"baseline", "#d62728", &SeriesPoint::baseline},
                        {"three-stage", "#1f77b4", &SeriesPoint::three_stage}};
  for (std::size_t k = 0; k < std::size(lines); ++k) {
    const Line& line = lines[k];
    out << "<polyline fill=\"none\" stroke=\"" << line.color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << (i ? " " : "") << fixed2(x_at(i)) << ','
          << fixed2(y_at(pts[i].*line.field));
    }
    out << "\"/>\n";
    const double ly = kPad + 16.0 * static_cast<double>(k);
    out << "<text x=\"" << kWidth - kPad - 90 << "\" y=\"" << fixed2(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << line.color << "\">" << line.name << "</text>\n";
  }
  if (!pts.empty()) {
    out << "<text x=\"" << kPad << "\" y=\"" << kHeight - kPad + 18
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_date(pts.front().week) << "</text>\n";
    out << "<text x=\"" << kWidth - kPad - 70 << "\" y=\""
        << kHeight - kPad + 18
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_date(pts.back().week) << "</text>\n";
  }
  out << "</svg>\n";
}

std::string safe_file_stem(std::string_view token) {
  std::string out;
  for (char c : token) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace cannibal
