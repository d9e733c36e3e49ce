#include "slidemil/svg.hpp"

#include <cstdarg>
#include <cstdio>

namespace slidemil::svg {

namespace {

constexpr double kSize = 520.0;
constexpr double kMargin = 60.0;
constexpr double kPlot = kSize - 2 * kMargin;

double sx(double fpr) { return kMargin + fpr * kPlot; }
double sy(double tpr) { return kSize - kMargin - tpr * kPlot; }

void appendf(std::string& out, const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    out += buf;
}

}  // namespace

std::string render_roc(const metrics::RocCurve& curve, double auc, const std::string& title) {
    std::string out;
    appendf(out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
            "viewBox=\"0 0 %.0f %.0f\">\n",
            kSize, kSize, kSize, kSize);
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // gridlines and tick labels every 0.25
    for (int i = 0; i <= 4; ++i) {
        double v = i / 4.0;
        appendf(out,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                sx(v), sy(0.0), sx(v), sy(1.0));
        appendf(out,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                sx(0.0), sy(v), sx(1.0), sy(v));
        appendf(out,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">%.2f</text>\n",
                sx(v), sy(0.0) + 18.0, v);
        appendf(out,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">%.2f</text>\n",
                sx(0.0) - 6.0, sy(v) + 4.0, v);
    }

    // frame and chance diagonal
    appendf(out,
            "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
            "stroke=\"black\" stroke-width=\"1\"/>\n",
            sx(0.0), sy(1.0), kPlot, kPlot);
    appendf(out,
            "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#999999\" "
            "stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n",
            sx(0.0), sy(0.0), sx(1.0), sy(1.0));

    out += "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (i > 0) out += ' ';
        appendf(out, "%.2f,%.2f", sx(curve.points[i].fpr), sy(curve.points[i].tpr));
    }
    out += "\"/>\n";

    appendf(out,
            "<text x=\"%.1f\" y=\"%.1f\" font-size=\"16\" text-anchor=\"middle\" "
            "font-family=\"sans-serif\">%s</text>\n",
            kSize / 2.0, kMargin - 24.0, title.c_str());
    appendf(out,
            "<text x=\"%.1f\" y=\"%.1f\" font-size=\"14\" text-anchor=\"end\" "
            "font-family=\"sans-serif\">AUC = %.3f</text>\n",
            sx(1.0) - 10.0, sy(0.0) - 10.0, auc);
    appendf(out,
            "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
            "font-family=\"sans-serif\">False positive rate</text>\n",
            kSize / 2.0, kSize - 16.0);
    appendf(out,
            "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
            "font-family=\"sans-serif\" transform=\"rotate(-90 %.1f %.1f)\">True positive "
            "rate</text>\n",
            18.0, kSize / 2.0, 18.0, kSize / 2.0);
    out += "</svg>\n";
    return out;
}

}  // namespace slidemil::svg
