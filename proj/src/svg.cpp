#include "svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace autocal::svg {

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string rgb(double r, double g, double b) {
    auto channel = [](double v) { return static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
    return fmt::format("#{:02x}{:02x}{:02x}", channel(r), channel(g), channel(b));
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra) {
    body_ += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"{}{}/>\n", x, y,
                         w, h, fill, extra.empty() ? "" : " ", extra);
}

void Document::circle(double cx, double cy, double r, std::string_view fill, std::string_view extra) {
    body_ += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"{}\"{}{}/>\n", cx, cy, r, fill,
                         extra.empty() ? "" : " ", extra);
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
                    std::string_view extra) {
    body_ += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"{:.2f}\"{}{}/>\n",
        x1, y1, x2, y2, stroke, width, extra.empty() ? "" : " ", extra);
}

void Document::path(std::string_view d, std::string_view stroke, double width, std::string_view extra) {
    body_ += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2f}\"{}{}/>\n", d, stroke, width,
                         extra.empty() ? "" : " ", extra);
}

void Document::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                    std::string_view extra) {
    body_ += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"{:.1f}\" font-family=\"sans-serif\" text-anchor=\"{}\"{}{}>{}</text>\n",
        x, y, size, anchor, extra.empty() ? "" : " ", extra, escape(content));
}

void Document::raw(std::string_view element) {
    body_ += element;
    body_ += '\n';
}

std::string Document::str() const {
    return fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
        "{}</svg>\n",
        width_, height_, width_, height_, body_);
}

}  // namespace autocal::svg
