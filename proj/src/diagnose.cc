#include "hoigen/diagnose.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hoigen/error.h"

namespace hoigen {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMargin = 48;

std::string Hue(int i, double lightness) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "hsl(%d,70%%,%d%%)", (i * 137) % 360,
                static_cast<int>(lightness * 100));
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else if (c == '&') {
      out += "&amp;";
    } else {
      out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double X(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double Y(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

Frame Fit(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
  return {x0 - px, x1 + px, y0 - py, y1 + py};
}

void Header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << Escape(title) << "</text>\n"
      << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
      << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#888\"/>\n";
}

}  // namespace

Matrix PcaProject(const Matrix& x, int k) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0 || k < 1 || k > d) throw ShapeError("PCA needs rows and 1 <= k <= D");
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = x(r, c);
  }
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Eigen::MatrixXd cov = (m.transpose() * m) / std::max<Eigen::Index>(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Matrix out(n, k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const Eigen::VectorXd proj = m * v;
    for (Eigen::Index r = 0; r < n; ++r) out(r, j) = proj(r);
  }
  return out;
}

std::string ScatterSvg(const std::string& title, const std::vector<ScatterPoint>& points,
                       const std::vector<std::string>& legend) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const Frame f = points.empty() ? Fit(0, 1, 0, 1) : Fit(x0, x1, y0, y1);
  std::ostringstream out;
  Header(out, title);
  char buf[160];
  for (bool synth : {false, true}) {
    for (const auto& p : points) {
      if (p.synthesized != synth) continue;
      std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%d\" fill=\"%s\" fill-opacity=\"%.2f\"/>\n",
                    f.X(p.x), f.Y(p.y), synth ? 2 : 3, Hue(p.category, synth ? 0.3 : 0.75).c_str(),
                    synth ? 0.9 : 0.45);
      out << buf;
    }
  }
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const int y = kMargin + 14 + 16 * static_cast<int>(i);
    out << "<rect x=\"" << kWidth - kMargin - 150 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << Hue(static_cast<int>(i), 0.3) << "\"/>\n"
        << "<text x=\"" << kWidth - kMargin - 135 << "\" y=\"" << y << "\">" << Escape(legend[i]) << "</text>\n";
  }
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - 16
      << "\">light: realistic, dark: synthesized</text>\n</svg>\n";
  return out.str();
}

std::string CurveSvg(const std::string& title,
                     const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  double y0 = INFINITY, y1 = -INFINITY;
  std::size_t n = 1;
  for (const auto& [name, v] : series) {
    n = std::max(n, v.size());
    for (double y : v) {
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  const Frame f = std::isfinite(y0) ? Fit(1, static_cast<double>(n), y0, y1) : Fit(1, 2, 0, 1);
  std::ostringstream out;
  Header(out, title);
  char buf[64];
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, v] = series[s];
    out << "<polyline fill=\"none\" stroke=\"" << Hue(static_cast<int>(s), 0.4) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", f.X(static_cast<double>(i + 1)), f.Y(v[i]));
      out << buf;
    }
    out << "\"/>\n<text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << kMargin + 16 + 16 * s
        << "\" fill=\"" << Hue(static_cast<int>(s), 0.4) << "\">" << Escape(name) << "</text>\n";
  }
  std::snprintf(buf, sizeof(buf), "%.4g", y1);
  out << "<text x=\"4\" y=\"" << kMargin + 4 << "\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", y0);
  out << "<text x=\"4\" y=\"" << kHeight - kMargin << "\">" << buf << "</text>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">epoch</text>\n</svg>\n";
  return out.str();
}

}  // namespace hoigen
