#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcomplete/eval.hpp"
#include "tcomplete/geom.hpp"

namespace tcomplete::plot {

struct Color {
    std::uint8_t r = 0, g = 0, b = 0;
};

// Row-major RGB raster. All drawing clips at the borders, so the output is a
// pure function of the inputs (deterministic bytes for fixed inputs).
class Image {
public:
    Image(int width, int height, Color background = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<std::uint8_t>& rgb() const { return rgb_; }

    void set(int x, int y, Color c);
    void disc(int cx, int cy, int radius, Color c);
    void line(int x0, int y0, int x1, int y1, Color c);
    void hline(int y, Color c);

private:
    int width_, height_;
    std::vector<std::uint8_t> rgb_;
};

// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);

// One square panel per cloud, left to right, sharing one orthographic frame
// (the union bounding box, viewed down the z axis). Labels carry the role of
// each panel for the caller's file naming; they do not render as text.
Image render_panels(const std::vector<const PointCloud*>& clouds, int panel_px = 256);

// Polyline per table row over its columns; the row average is drawn in
// black. Suited to frame-indexed tables (temporal curve, input sweep).
Image render_curves(const eval::Table& table, int width = 640, int height = 400);

}  // namespace tcomplete::plot
