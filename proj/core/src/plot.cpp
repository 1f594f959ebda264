#include "tcomplete/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tcomplete/errors.hpp"

namespace tcomplete::plot {

namespace {

// Fixed series palette (colorblind-safe-ish, deterministic order).
constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
};
constexpr int kPaletteSize = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));

}  // namespace

Image::Image(int width, int height, Color background) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw SizeError("image dimensions must be positive");
    rgb_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < rgb_.size(); i += 3) {
        rgb_[i] = background.r;
        rgb_[i + 1] = background.g;
        rgb_[i + 2] = background.b;
    }
}

void Image::set(int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const std::size_t i =
        (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
         static_cast<std::size_t>(x)) * 3;
    rgb_[i] = c.r;
    rgb_[i + 1] = c.g;
    rgb_[i + 2] = c.b;
}

void Image::disc(int cx, int cy, int radius, Color c) {
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) set(cx + dx, cy + dy, c);
}

void Image::line(int x0, int y0, int x1, int y1, Color c) {
    // Bresenham.
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Image::hline(int y, Color c) {
    for (int x = 0; x < width_; ++x) set(x, y, c);
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb().data()),
              static_cast<std::streamsize>(image.rgb().size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Image render_panels(const std::vector<const PointCloud*>& clouds, int panel_px) {
    if (clouds.empty()) throw EmptyInputError("no clouds to render");
    if (panel_px < 16) throw SizeError("panel size too small");

    // Shared orthographic frame: union bounds over x/y (view down z).
    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    bool any = false;
    for (const PointCloud* cloud : clouds) {
        if (!cloud || cloud->empty()) continue;
        const auto& pts = cloud->pts;
        if (!any) {
            lo_x = pts.col(0).minCoeff();
            hi_x = pts.col(0).maxCoeff();
            lo_y = pts.col(1).minCoeff();
            hi_y = pts.col(1).maxCoeff();
            any = true;
        } else {
            lo_x = std::min(lo_x, pts.col(0).minCoeff());
            hi_x = std::max(hi_x, pts.col(0).maxCoeff());
            lo_y = std::min(lo_y, pts.col(1).minCoeff());
            hi_y = std::max(hi_y, pts.col(1).maxCoeff());
        }
    }
    if (!any) throw EmptyInputError("all clouds are empty");
    const double cx = 0.5 * (lo_x + hi_x);
    const double cy = 0.5 * (lo_y + hi_y);
    const double half = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 0.5 * 1.1;

    const int n = static_cast<int>(clouds.size());
    const int margin = 8;
    Image image(panel_px * n, panel_px);
    const Color frame_color{200, 200, 200};
    for (int p = 0; p < n; ++p) {
        const int x0 = p * panel_px;
        image.line(x0, 0, x0, panel_px - 1, frame_color);
        image.line(x0 + panel_px - 1, 0, x0 + panel_px - 1, panel_px - 1, frame_color);
        image.line(x0, 0, x0 + panel_px - 1, 0, frame_color);
        image.line(x0, panel_px - 1, x0 + panel_px - 1, panel_px - 1, frame_color);
        if (!clouds[static_cast<std::size_t>(p)]) continue;
        const auto& pts = clouds[static_cast<std::size_t>(p)]->pts;
        const Color c = kPalette[p % kPaletteSize];
        const double scale = (panel_px - 2 * margin) / (2.0 * half);
        for (int i = 0; i < pts.rows(); ++i) {
            const int px = x0 + margin +
                           static_cast<int>(std::lround((pts(i, 0) - cx + half) * scale));
            const int py = panel_px - 1 - margin -
                           static_cast<int>(std::lround((pts(i, 1) - cy + half) * scale));
            image.disc(px, py, 1, c);
        }
    }
    return image;
}

Image render_curves(const eval::Table& table, int width, int height) {
    if (table.rows.empty() || table.columns.empty())
        throw EmptyInputError("nothing to plot in table " + table.name);
    Image image(width, height);

    double lo = table.rows[0].values.at(0), hi = lo;
    for (const auto& row : table.rows)
        for (const double v : row.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const int ml = 40, mr = 10, mt = 10, mb = 30;
    const int plot_w = width - ml - mr;
    const int plot_h = height - mt - mb;
    if (plot_w < 10 || plot_h < 10) throw SizeError("curve image too small");

    const auto x_at = [&](std::size_t col) {
        return table.columns.size() == 1
                   ? ml + plot_w / 2
                   : ml + static_cast<int>(std::lround(
                              static_cast<double>(col) * plot_w /
                              static_cast<double>(table.columns.size() - 1)));
    };
    const auto y_at = [&](double v) {
        return mt + static_cast<int>(std::lround((hi - v) / (hi - lo) * plot_h));
    };

    // Light horizontal grid, dark axes.
    for (int g = 0; g <= 4; ++g) {
        const int y = mt + g * plot_h / 4;
        for (int x = ml; x <= ml + plot_w; ++x) image.set(x, y, {230, 230, 230});
    }
    image.line(ml, mt, ml, mt + plot_h, {40, 40, 40});
    image.line(ml, mt + plot_h, ml + plot_w, mt + plot_h, {40, 40, 40});

    const auto draw_series = [&](const eval::Table::Row& row, Color c, int thickness) {
        for (std::size_t col = 0; col + 1 < row.values.size(); ++col) {
            for (int t = 0; t < thickness; ++t)
                image.line(x_at(col), y_at(row.values[col]) + t, x_at(col + 1),
                           y_at(row.values[col + 1]) + t, c);
        }
        for (std::size_t col = 0; col < row.values.size(); ++col)
            image.disc(x_at(col), y_at(row.values[col]), 1 + thickness, c);
    };
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        draw_series(table.rows[r], kPalette[r % kPaletteSize], 1);
    draw_series(table.average_row(), {0, 0, 0}, 2);
    return image;
}

}  // namespace tcomplete::plot
