#include "phage/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace phage {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void write_trajectory_csv(std::ostream& out, const HistoryTrajectory& traj, const std::vector<std::string>& comments) {
    out << "t,S,Q\n";
    std::string row;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        row.clear();
        fmt::format_to(std::back_inserter(row), "{:.17g},{:.17g},{:.17g}\n", traj.time(i), traj.states[i].S,
                       traj.states[i].Q);
        out << row;
    }
    const auto& pos = traj.positivity;
    out << fmt::format("# positivity: min_S={} min_Q={} excursions={}\n", num(pos.min_S), num(pos.min_Q),
                       pos.excursions.size());
    for (const auto& e : pos.excursions) {
        out << fmt::format("# negative {}: t=[{}, {}] nodes={} min={}\n", e.component, num(e.t_start), num(e.t_end),
                           e.nodes, num(e.min_value));
    }
    out << "# " << kUnitsLegend << "\n";
    for (const auto& c : comments) {
        out << "# " << c << "\n";
    }
}

void write_ensemble_csv(std::ostream& out, const std::vector<ConcentrationEstimate>& rows,
                        const std::vector<std::string>& comments) {
    out << "eps,rho,t_a,t_b,n_paths,exceed,p_hat,ci_lo,ci_hi,failures\n";
    for (const auto& e : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(e.query.eps), num(e.query.rho),
                           num(e.query.interval.lo), num(e.query.interval.hi), e.n_paths, e.exceed_count,
                           num(e.p_hat), num(e.ci_lo), num(e.ci_hi), e.failures);
    }
    out << "# " << kUnitsLegend << "\n";
    for (const auto& c : comments) {
        out << "# " << c << "\n";
    }
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

namespace {

struct Panel {
    double x, y, w, h;
};

// Round-number ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    if (!(hi > lo)) {
        return {lo};
    }
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (raw <= step) {
            break;
        }
    }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
        ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return ticks;
}

void draw_panel(std::string& svg, const Panel& pn, const std::vector<PlotSeries>& series, bool is_S,
                const std::string& ylabel, double t_lo, double t_hi) {
    double y_lo = std::numeric_limits<double>::infinity();
    double y_hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        for (const auto& z : s.traj->states) {
            const double v = is_S ? z.S : z.Q;
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (!(y_hi > y_lo)) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
    auto sx = [&](double t) { return pn.x + (t - t_lo) / (t_hi - t_lo) * pn.w; };
    auto sy = [&](double v) { return pn.y + pn.h - (v - y_lo) / (y_hi - y_lo) * pn.h; };

    svg += fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="none" stroke="#333"/>)",
                       pn.x, pn.y, pn.w, pn.h);
    svg += "\n";
    for (double t : nice_ticks(t_lo, t_hi)) {
        svg += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="#333"/>)", sx(t),
                           pn.y + pn.h, pn.y + pn.h + 5);
        svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="middle">{}</text>)", sx(t),
                           pn.y + pn.h + 18, fmt::format("{:g}", t));
        svg += "\n";
    }
    for (double v : nice_ticks(y_lo, y_hi)) {
        svg += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{2:.2f}" y2="{1:.2f}" stroke="#333"/>)", pn.x - 5,
                           sy(v), pn.x);
        svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="end">{}</text>)", pn.x - 8,
                           sy(v) + 4, fmt::format("{:g}", v));
        svg += "\n";
    }
    svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="13" text-anchor="middle" )"
                       R"x(transform="rotate(-90 {:.2f} {:.2f})">{}</text>)x",
                       pn.x - 48, pn.y + pn.h / 2, pn.x - 48, pn.y + pn.h / 2, xml_escape(ylabel));
    svg += "\n";
    svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="12" text-anchor="middle">t (days)</text>)",
                       pn.x + pn.w / 2, pn.y + pn.h + 34);
    svg += "\n";

    constexpr std::size_t kMaxPoints = 4000;
    for (const auto& s : series) {
        const auto& tr = *s.traj;
        const std::size_t stride = std::max<std::size_t>(1, tr.size() / kMaxPoints);
        std::string pts;
        for (std::size_t i = 0; i < tr.size(); i += stride) {
            const double v = is_S ? tr.states[i].S : tr.states[i].Q;
            fmt::format_to(std::back_inserter(pts), "{:.2f},{:.2f} ", sx(tr.time(i)), sy(v));
        }
        if (!tr.empty() && (tr.size() - 1) % stride != 0) {
            const double v = is_S ? tr.states.back().S : tr.states.back().Q;
            fmt::format_to(std::back_inserter(pts), "{:.2f},{:.2f}", sx(tr.end_time()), sy(v));
        }
        svg += fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>)",
                           xml_escape(s.color), pts);
        svg += "\n";
    }
}

}  // namespace

std::string render_trajectory_svg(const std::vector<PlotSeries>& series, const std::string& title) {
    constexpr double width = 900.0;
    constexpr double height = 720.0;
    double t_lo = std::numeric_limits<double>::infinity();
    double t_hi = -std::numeric_limits<double>::infinity();
    std::vector<PlotSeries> usable;
    for (const auto& s : series) {
        if (s.traj && !s.traj->empty()) {
            usable.push_back(s);
            t_lo = std::min(t_lo, s.traj->t0);
            t_hi = std::max(t_hi, s.traj->end_time());
        }
    }
    if (!(t_hi > t_lo)) {
        t_lo = 0.0;
        t_hi = 1.0;
    }

    std::string svg;
    svg += R"(<?xml version="1.0" encoding="UTF-8"?>)";
    svg += "\n";
    svg += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">)",
                       width, height);
    svg += "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += fmt::format(R"(<text x="{:.1f}" y="24" font-size="15" text-anchor="middle">{}</text>)", width / 2,
                       xml_escape(title));
    svg += "\n";
    if (!usable.empty()) {
        draw_panel(svg, {80, 50, 680, 260}, usable, true, "S (bacteria)", t_lo, t_hi);
        draw_panel(svg, {80, 400, 680, 260}, usable, false, "Q (phage)", t_lo, t_hi);
    }
    double ly = 60;
    for (const auto& s : usable) {
        svg += fmt::format(R"(<line x1="775" y1="{0:.1f}" x2="800" y2="{0:.1f}" stroke="{1}" stroke-width="2"/>)", ly,
                           xml_escape(s.color));
        svg += fmt::format(R"(<text x="805" y="{:.1f}" font-size="12">{}</text>)", ly + 4, xml_escape(s.label));
        svg += "\n";
        ly += 20;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace phage
