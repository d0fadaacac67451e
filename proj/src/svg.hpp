#pragma once

// Small SVG document builder. Coordinates are written with two decimals so
// output is stable across runs.

#include <string>
#include <string_view>

namespace autocal::svg {

std::string escape(std::string_view text);
/// "#rrggbb" from channels in [0, 1].
std::string rgb(double r, double g, double b);

class Document {
public:
    Document(double width, double height);

    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {});
    void circle(double cx, double cy, double r, std::string_view fill, std::string_view extra = {});
    void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
              std::string_view extra = {});
    void path(std::string_view d, std::string_view stroke, double width = 1.0, std::string_view extra = {});
    void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start",
              std::string_view extra = {});
    void raw(std::string_view element);

    std::string str() const;

private:
    double width_, height_;
    std::string body_;
};

}  // namespace autocal::svg
