#include "cbfsim/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cbfsim/errors.hpp"

namespace cbfsim {

namespace {

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// One panel: a data rectangle mapped into a pixel rectangle (y up in data,
/// down in pixels), with a frame, corner tick labels, and a title.
struct Pane {
  double x0_px, y0_px, w_px, h_px;   // pixel box (y0 = top)
  double x_min, x_max, y_min, y_max; // data box

  double sx(double x) const { return x0_px + (x - x_min) / (x_max - x_min) * w_px; }
  double sy(double y) const { return y0_px + (y_max - y) / (y_max - y_min) * h_px; }

  void expand_to_square() {
    // Equal scale on both axes so circles stay circles.
    const double x_span = x_max - x_min;
    const double y_span = y_max - y_min;
    const double x_per_px = x_span / w_px;
    const double y_per_px = y_span / h_px;
    if (x_per_px > y_per_px) {
      const double grow = (x_per_px * h_px - y_span) / 2.0;
      y_min -= grow;
      y_max += grow;
    } else {
      const double grow = (y_per_px * w_px - x_span) / 2.0;
      x_min -= grow;
      x_max += grow;
    }
  }

  void frame(std::ostringstream& out, const std::string& title, const std::string& x_label,
             const std::string& y_label) const {
    out << "<rect x='" << px(x0_px) << "' y='" << px(y0_px) << "' width='" << px(w_px)
        << "' height='" << px(h_px) << "' fill='white' stroke='#444'/>\n";
    out << "<text x='" << px(x0_px + w_px / 2) << "' y='" << px(y0_px - 8)
        << "' text-anchor='middle' font-size='13'>" << title << "</text>\n";
    out << "<text x='" << px(x0_px + w_px / 2) << "' y='" << px(y0_px + h_px + 28)
        << "' text-anchor='middle' font-size='11'>" << x_label << "</text>\n";
    out << "<text x='" << px(x0_px - 40) << "' y='" << px(y0_px + h_px / 2)
        << "' text-anchor='middle' font-size='11' transform='rotate(-90 " << px(x0_px - 40)
        << " " << px(y0_px + h_px / 2) << ")'>" << y_label << "</text>\n";
    // Corner tick labels are enough to read scales off a static plot.
    char lo[32], hi[32];
    std::snprintf(lo, sizeof(lo), "%.3g", x_min);
    std::snprintf(hi, sizeof(hi), "%.3g", x_max);
    out << "<text x='" << px(x0_px) << "' y='" << px(y0_px + h_px + 14)
        << "' font-size='10'>" << lo << "</text>\n";
    out << "<text x='" << px(x0_px + w_px) << "' y='" << px(y0_px + h_px + 14)
        << "' text-anchor='end' font-size='10'>" << hi << "</text>\n";
    std::snprintf(lo, sizeof(lo), "%.3g", y_min);
    std::snprintf(hi, sizeof(hi), "%.3g", y_max);
    out << "<text x='" << px(x0_px - 4) << "' y='" << px(y0_px + h_px)
        << "' text-anchor='end' font-size='10'>" << lo << "</text>\n";
    out << "<text x='" << px(x0_px - 4) << "' y='" << px(y0_px + 10)
        << "' text-anchor='end' font-size='10'>" << hi << "</text>\n";
  }

  void polyline(std::ostringstream& out, const std::vector<double>& xs,
                const std::vector<double>& ys, const char* style) const {
    out << "<polyline fill='none' " << style << " points='";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out << ' ';
      out << px(sx(xs[i])) << ',' << px(sy(ys[i]));
    }
    out << "'/>\n";
  }

  void circle(std::ostringstream& out, double cx, double cy, double r, const char* style) const {
    // Equal axis scaling makes one pixel radius valid for both directions.
    const double r_px = r / (x_max - x_min) * w_px;
    out << "<circle cx='" << px(sx(cx)) << "' cy='" << px(sy(cy)) << "' r='" << px(r_px) << "' "
        << style << "/>\n";
  }

  void hline(std::ostringstream& out, double y, const char* style) const {
    out << "<line x1='" << px(x0_px) << "' y1='" << px(sy(y)) << "' x2='" << px(x0_px + w_px)
        << "' y2='" << px(sy(y)) << "' " << style << "/>\n";
  }
};

void bounds(const std::vector<double>& v, double& lo, double& hi) {
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

void pad_range(double& lo, double& hi) {
  double span = hi - lo;
  if (span <= 0.0) span = std::max(1.0, std::abs(hi));
  lo -= 0.05 * span;
  hi += 0.05 * span;
}

constexpr const char* kActualStyle = "stroke='#1f77b4' stroke-width='1.5'";
constexpr const char* kDesiredStyle =
    "stroke='#666' stroke-width='1.2' stroke-dasharray='6,4'";
constexpr const char* kObstacleStyle = "fill='#d62728' fill-opacity='0.55' stroke='#d62728'";
constexpr const char* kMarginStyle =
    "fill='none' stroke='#d62728' stroke-dasharray='4,3' stroke-width='1'";
constexpr const char* kHStyle = "stroke='#2ca02c' stroke-width='1.5'";
constexpr const char* kZeroStyle = "stroke='#d62728' stroke-dasharray='5,4' stroke-width='1'";

}  // namespace

void write_run_plot(const RunResult& result, const Obstacle& obstacle,
                    const ClearanceSpec& clearance, const std::filesystem::path& path) {
  if (result.log.empty()) throw PreconditionError("cannot plot a run with an empty log");

  const std::size_t n = result.log.size();
  std::vector<double> ex(n), ey(n), ez(n), dx(n), dy(n), dz(n), ts(n), hs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LogRow& row = result.log[i];
    ex[i] = row.ee.x();
    ey[i] = row.ee.y();
    ez[i] = row.ee.z();
    dx[i] = row.ee_des.x();
    dy[i] = row.ee_des.y();
    dz[i] = row.ee_des.z();
    ts[i] = row.t;
    hs[i] = row.h;
  }

  const double r_m = clearance.margin(obstacle);
  const double pane_w = 300.0;
  const double pane_h = 300.0;
  const double top = 40.0;
  const double gap = 80.0;
  const double left = 60.0;
  const double width = left + 3 * pane_w + 2 * gap + 20.0;
  const double height = top + pane_h + 60.0;

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << px(width) << "' height='"
      << px(height) << "' viewBox='0 0 " << px(width) << ' ' << px(height) << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";

  struct View {
    const char* title;
    const char* xl;
    const char* yl;
    const std::vector<double>* ax;
    const std::vector<double>* ay;
    const std::vector<double>* bx;
    const std::vector<double>* by;
    double ox, oy;
  };
  const View views[2] = {
      {"end-effector path, top view", "x [m]", "y [m]", &ex, &ey, &dx, &dy,
       obstacle.center.x(), obstacle.center.y()},
      {"end-effector path, side view", "x [m]", "z [m]", &ex, &ez, &dx, &dz,
       obstacle.center.x(), obstacle.center.z()},
  };

  for (int v = 0; v < 2; ++v) {
    Pane pane;
    pane.x0_px = left + v * (pane_w + gap);
    pane.y0_px = top;
    pane.w_px = pane_w;
    pane.h_px = pane_h;
    pane.x_min = views[v].ox - r_m;
    pane.x_max = views[v].ox + r_m;
    pane.y_min = views[v].oy - r_m;
    pane.y_max = views[v].oy + r_m;
    bounds(*views[v].ax, pane.x_min, pane.x_max);
    bounds(*views[v].bx, pane.x_min, pane.x_max);
    bounds(*views[v].ay, pane.y_min, pane.y_max);
    bounds(*views[v].by, pane.y_min, pane.y_max);
    pad_range(pane.x_min, pane.x_max);
    pad_range(pane.y_min, pane.y_max);
    pane.expand_to_square();

    pane.frame(svg, views[v].title, views[v].xl, views[v].yl);
    pane.circle(svg, views[v].ox, views[v].oy, obstacle.radius, kObstacleStyle);
    pane.circle(svg, views[v].ox, views[v].oy, r_m, kMarginStyle);
    pane.polyline(svg, *views[v].bx, *views[v].by, kDesiredStyle);
    pane.polyline(svg, *views[v].ax, *views[v].ay, kActualStyle);
  }

  Pane hp;
  hp.x0_px = left + 2 * (pane_w + gap);
  hp.y0_px = top;
  hp.w_px = pane_w;
  hp.h_px = pane_h;
  hp.x_min = ts.front();
  hp.x_max = ts.back() > ts.front() ? ts.back() : ts.front() + 1.0;
  hp.y_min = 0.0;
  hp.y_max = 0.0;
  bounds(hs, hp.y_min, hp.y_max);
  pad_range(hp.y_min, hp.y_max);
  hp.frame(svg, "barrier value h(t)", "t [s]", "h [m^2]");
  hp.hline(svg, 0.0, kZeroStyle);
  hp.polyline(svg, ts, hs, kHStyle);

  // Legend under the first pane.
  svg << "<line x1='" << px(left) << "' y1='" << px(height - 12) << "' x2='" << px(left + 30)
      << "' y2='" << px(height - 12) << "' " << kActualStyle << "/>\n";
  svg << "<text x='" << px(left + 36) << "' y='" << px(height - 8)
      << "' font-size='11'>actual</text>\n";
  svg << "<line x1='" << px(left + 90) << "' y1='" << px(height - 12) << "' x2='"
      << px(left + 120) << "' y2='" << px(height - 12) << "' " << kDesiredStyle << "/>\n";
  svg << "<text x='" << px(left + 126) << "' y='" << px(height - 8)
      << "' font-size='11'>desired</text>\n";
  svg << "<text x='" << px(left + 190) << "' y='" << px(height - 8)
      << "' font-size='11'>filled: obstacle, dashed ring: clearance</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write plot file: " + path.string());
  out << svg.str();
}

}  // namespace cbfsim
