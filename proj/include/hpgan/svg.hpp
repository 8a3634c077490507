#pragma once

// SVG 1.1 reporting artifacts: a three-series loss chart and stick-figure
// strips (orthographic x-y projection, frames left to right, divider
// between observed and predicted frames). Output bytes are deterministic:
// all coordinates are printed with fixed precision.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "hpgan/skeleton.hpp"
#include "hpgan/trainer.hpp"

namespace hpgan {

namespace detail {

inline std::string svg_num(double v) { return strfmt("%.2f", v); }

}  // namespace detail

// Line chart of the per-step critic / generator / discriminator losses.
inline std::string loss_chart_svg(const std::vector<LossRow>& history) {
    if (history.empty()) throw ParseError("loss chart: no data rows");
    const double width = 800.0, height = 400.0;
    const double left = 60.0, right = 20.0, top = 40.0, bottom = 40.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double lo = history.front().critic, hi = lo;
    for (const LossRow& r : history) {
        for (const double v : {r.critic, r.generator, r.discriminator}) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double step_lo = static_cast<double>(history.front().step);
    const double step_hi = static_cast<double>(history.back().step);
    const double step_span = std::max(step_hi - step_lo, 1.0);

    auto sx = [&](double step) { return left + (step - step_lo) / step_span * plot_w; };
    auto sy = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

    using detail::svg_num;
    std::string out;
    out += strfmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%s\" height=\"%s\" "
        "viewBox=\"0 0 %s %s\">\n",
        svg_num(width).c_str(), svg_num(height).c_str(), svg_num(width).c_str(), svg_num(height).c_str());
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += strfmt("<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"black\"/>\n", svg_num(left).c_str(),
                  svg_num(top).c_str(), svg_num(left).c_str(), svg_num(top + plot_h).c_str());
    out += strfmt("<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"black\"/>\n", svg_num(left).c_str(),
                  svg_num(top + plot_h).c_str(), svg_num(left + plot_w).c_str(), svg_num(top + plot_h).c_str());
    out += strfmt("<text x=\"%s\" y=\"%s\" font-size=\"11\" text-anchor=\"end\">%s</text>\n",
                  svg_num(left - 4).c_str(), svg_num(sy(hi - pad)).c_str(), svg_num(hi - pad).c_str());
    out += strfmt("<text x=\"%s\" y=\"%s\" font-size=\"11\" text-anchor=\"end\">%s</text>\n",
                  svg_num(left - 4).c_str(), svg_num(sy(lo + pad)).c_str(), svg_num(lo + pad).c_str());
    out += strfmt("<text x=\"%s\" y=\"%s\" font-size=\"11\" text-anchor=\"middle\">step</text>\n",
                  svg_num(left + plot_w / 2).c_str(), svg_num(height - 8).c_str());

    const char* names[3] = {"critic", "generator", "discriminator"};
    const char* colors[3] = {"#c0392b", "#2980b9", "#27ae60"};
    for (int s = 0; s < 3; ++s) {
        std::string points;
        for (const LossRow& r : history) {
            const double v = s == 0 ? r.critic : (s == 1 ? r.generator : r.discriminator);
            points += strfmt("%s,%s ", svg_num(sx(static_cast<double>(r.step))).c_str(), svg_num(sy(v)).c_str());
        }
        if (!points.empty()) points.pop_back();
        out += strfmt("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"%s\"/>\n", colors[s],
                      points.c_str());
        out += strfmt("<text x=\"%s\" y=\"%s\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                      svg_num(left + 8 + 130.0 * s).c_str(), svg_num(top - 12).c_str(), colors[s], names[s]);
    }
    out += "</svg>\n";
    return out;
}

// Stick-figure strip: every frame in its own cell, bones as line segments
// in the x-y plane (y up), a dashed divider after the first `divider`
// frames separating observation from prediction.
inline std::string skeleton_strip_svg(const SkeletonTopology& topology, const std::vector<Pose>& frames,
                                      std::size_t divider) {
    topology.validate();
    if (frames.empty()) throw ParseError("skeleton strip: no frames");
    if (divider > frames.size()) throw ConfigError("skeleton strip: divider beyond the last frame");
    for (const Pose& p : frames)
        if (p.joint_count() != topology.joints)
            throw ShapeError(strfmt("skeleton strip: frame has %zu joints, topology has %zu", p.joint_count(),
                                    topology.joints));

    double x_lo = frames[0].joints[0][0], x_hi = x_lo;
    double y_lo = frames[0].joints[0][1], y_hi = y_lo;
    for (const Pose& p : frames)
        for (const auto& j : p.joints) {
            x_lo = std::min(x_lo, j[0]);
            x_hi = std::max(x_hi, j[0]);
            y_lo = std::min(y_lo, j[1]);
            y_hi = std::max(y_hi, j[1]);
        }
    const double x_span = std::max(x_hi - x_lo, 1e-9);
    const double y_span = std::max(y_hi - y_lo, 1e-9);

    const double cell_h = 160.0, pad = 10.0, gap = 6.0;
    const double scale = (cell_h - 2 * pad) / std::max(x_span, y_span);
    const double cell_w = x_span * scale + 2 * pad;
    const bool has_divider = divider > 0 && divider < frames.size();
    const double width = cell_w * static_cast<double>(frames.size()) +
                         gap * static_cast<double>(frames.size() - 1) + (has_divider ? gap : 0.0);
    const double height = cell_h;

    using detail::svg_num;
    std::string out;
    out += strfmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%s\" height=\"%s\" "
        "viewBox=\"0 0 %s %s\">\n",
        svg_num(width).c_str(), svg_num(height).c_str(), svg_num(width).c_str(), svg_num(height).c_str());
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double divider_x = -1.0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        double cx = static_cast<double>(f) * (cell_w + gap);
        if (has_divider && f >= divider) cx += gap;  // widen the boundary
        if (has_divider && f == divider) divider_x = cx - gap;
        const bool predicted = f >= divider;
        const char* stroke = predicted ? "#c0392b" : "#2c3e50";
        auto px = [&](const std::array<double, 3>& j) { return cx + pad + (j[0] - x_lo) * scale; };
        auto py = [&](const std::array<double, 3>& j) { return pad + (y_hi - j[1]) * scale; };
        for (const auto& [parent, child] : topology.bones) {
            const auto& a = frames[f].joints[parent];
            const auto& b = frames[f].joints[child];
            out += strfmt("<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"%s\" stroke-width=\"1.5\"/>\n",
                          svg_num(px(a)).c_str(), svg_num(py(a)).c_str(), svg_num(px(b)).c_str(),
                          svg_num(py(b)).c_str(), stroke);
        }
        for (const auto& j : frames[f].joints)
            out += strfmt("<circle cx=\"%s\" cy=\"%s\" r=\"2\" fill=\"%s\"/>\n", svg_num(px(j)).c_str(),
                          svg_num(py(j)).c_str(), stroke);
    }
    if (has_divider)
        out += strfmt(
            "<line x1=\"%s\" y1=\"0\" x2=\"%s\" y2=\"%s\" stroke=\"#2980b9\" stroke-width=\"2\" "
            "stroke-dasharray=\"6,4\"/>\n",
            svg_num(divider_x).c_str(), svg_num(divider_x).c_str(), svg_num(height).c_str());
    out += "</svg>\n";
    return out;
}

}  // namespace hpgan
