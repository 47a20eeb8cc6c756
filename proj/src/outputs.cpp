#include "fedtoe/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedtoe::out {

namespace {

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c", "#f2a535", "#7d5ba6", "#444444"};
constexpr int kPaletteSize = 6;

std::string coord(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

struct Panel {
  double x0, y0, w, h;  // plot rectangle in svg coordinates
};

void render_panel(std::ostringstream& svg, const Panel& p, const std::string& title,
                  const std::vector<Series>& series) {
  std::size_t max_len = 0;
  bool positive = true;
  for (const auto& s : series) {
    max_len = std::max(max_len, s.y.size());
    for (double v : s.y)
      if (!(v > 0.0)) positive = false;
  }
  const bool logscale = positive && max_len > 0;
  auto tr = [&](double v) { return logscale ? std::log10(v) : v; };

  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& s : series)
    for (double v : s.y) {
      const double t = tr(v);
      if (!any) {
        lo = hi = t;
        any = true;
      } else {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
    }
  if (!any || hi - lo < 1e-12) {
    hi = (any ? hi : 1.0) + 0.5;
    lo = (any ? lo : 0.0) - 0.5;
  }

  auto sx = [&](std::size_t i) {
    const double denom = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;
    return p.x0 + p.w * (static_cast<double>(i) / denom);
  };
  auto sy = [&](double v) { return p.y0 + p.h * (1.0 - (tr(v) - lo) / (hi - lo)); };

  svg << "<rect x=\"" << coord(p.x0) << "\" y=\"" << coord(p.y0) << "\" width=\"" << coord(p.w)
      << "\" height=\"" << coord(p.h) << "\" fill=\"none\" stroke=\"#999\"/>\n";
  svg << "<text x=\"" << coord(p.x0 + p.w / 2) << "\" y=\"" << coord(p.y0 - 10)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << title
      << (logscale ? " (log10)" : "") << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fy = p.y0 + p.h * t / 4.0;
    const double val = hi - (hi - lo) * t / 4.0;
    svg << "<line x1=\"" << coord(p.x0 - 4) << "\" y1=\"" << coord(fy) << "\" x2=\""
        << coord(p.x0) << "\" y2=\"" << coord(fy) << "\" stroke=\"#999\"/>\n";
    svg << "<text x=\"" << coord(p.x0 - 8) << "\" y=\"" << coord(fy + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << tick_label(val) << "</text>\n";
  }
  svg << "<text x=\"" << coord(p.x0 + p.w / 2) << "\" y=\"" << coord(p.y0 + p.h + 24)
      << "\" text-anchor=\"middle\" font-size=\"11\">round</text>\n";

  int ci = 0;
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[ci % kPaletteSize]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (i) svg << ' ';
      svg << coord(sx(i)) << ',' << coord(sy(s.y[i]));
    }
    svg << "\"/>\n";
    const double ly = p.y0 + 16.0 + 14.0 * ci;
    svg << "<line x1=\"" << coord(p.x0 + p.w - 120) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(p.x0 + p.w - 100) << "\" y2=\"" << coord(ly) << "\" stroke=\""
        << kPalette[ci % kPaletteSize] << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(p.x0 + p.w - 94) << "\" y=\"" << coord(ly + 4)
        << "\" font-size=\"10\">" << s.name << "</text>\n";
    ++ci;
  }
}

}  // namespace

std::string g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string allocation_csv(const alloc::AllocationSolution& sol) {
  std::ostringstream csv;
  csv << "client_id,d_m,W_hz,B_bits,R_bps,q\n";
  for (const auto& c : sol.clients)
    csv << c.id << ',' << g12(c.d) << ',' << g12(c.w) << ',' << c.b << ',' << g12(c.r) << ','
        << g12(c.q) << '\n';
  csv << "# objective=" << g12(sol.objective) << " iterations=" << sol.iterations
      << " bandwidth_used=" << g12(sol.bandwidth_used) << '\n';
  return csv.str();
}

std::string rounds_jsonl(const std::string& scheme, const engine::RunResult& res) {
  std::ostringstream out;
  for (const auto& r : res.rounds) {
    out << "{\"scheme\":\"" << scheme << "\",\"round\":" << r.round << ",\"loss\":" << g12(r.loss)
        << ",\"grad_sq\":" << g12(r.grad_sq) << ",\"active\":" << r.active
        << ",\"retransmissions\":" << r.retransmissions << ",\"delay_s\":" << g12(r.delay_s)
        << ",\"bits\":" << g12(r.bits) << ",\"qe_mean\":" << g12(r.qe_mean)
        << ",\"qe_max\":" << g12(r.qe_max) << "}\n";
  }
  return out.str();
}

std::string summary_csv(
    const std::vector<std::pair<std::string, const engine::RunResult*>>& runs) {
  std::ostringstream csv;
  csv << "scheme,rounds,initial_loss,final_loss,initial_grad_sq,final_grad_sq,total_bits,"
         "total_delay_s,mean_active,retransmissions\n";
  for (const auto& [name, res] : runs) {
    double active = 0.0;
    long retx = 0;
    for (const auto& r : res->rounds) {
      active += r.active;
      retx += r.retransmissions;
    }
    const std::size_t n = res->rounds.size();
    csv << name << ',' << n << ',' << g12(res->initial_loss) << ','
        << g12(n ? res->rounds.back().loss : res->initial_loss) << ','
        << g12(res->initial_grad_sq) << ','
        << g12(n ? res->rounds.back().grad_sq : res->initial_grad_sq) << ','
        << g12(res->total_bits) << ',' << g12(res->total_delay) << ','
        << g12(n ? active / static_cast<double>(n) : 0.0) << ',' << retx << '\n';
  }
  return csv.str();
}

std::string bound_terms_csv(const stats::BoundBreakdown& t) {
  std::ostringstream csv;
  csv << "term,value\n"
      << "gamma," << g12(t.gamma) << '\n'
      << "k_bar," << g12(t.k_bar) << '\n'
      << "opt_gap," << g12(t.opt_gap) << '\n'
      << "sgd_noise," << g12(t.sgd_noise) << '\n'
      << "quantization," << g12(t.qe) << '\n'
      << "hetero_alpha," << g12(t.hetero_alpha) << '\n'
      << "hetero_beta," << g12(t.hetero_beta) << '\n'
      << "sampling_skew," << g12(t.skew) << '\n'
      << "outage_spread," << g12(t.outage_spread) << '\n'
      << "total," << g12(t.total) << '\n';
  return csv.str();
}

std::string curves_svg(const std::vector<Series>& loss, const std::vector<Series>& grad) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"420\" "
         "viewBox=\"0 0 960 420\">\n"
      << "<rect width=\"960\" height=\"420\" fill=\"white\"/>\n";
  render_panel(svg, {70, 40, 370, 320}, "objective", loss);
  render_panel(svg, {550, 40, 370, 320}, "squared gradient norm", grad);
  svg << "</svg>\n";
  return svg.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << content;
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace fedtoe::out
