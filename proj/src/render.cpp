#include "ttt/render.hpp"

#include <algorithm>
#include <cmath>

namespace ttt {

namespace {

double distance_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double t = std::clamp(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    const double ex = px - (ax + t * dx);
    const double ey = py - (ay + t * dy);
    return std::sqrt(ex * ex + ey * ey);
}

bool on_grid_line(int v) {
    for (int core : RenderSpec::kGridLines) {
        if (v >= core - RenderSpec::kGridPad && v <= core + RenderSpec::kGridPad) return true;
    }
    return false;
}

void draw_cross(BoardImage& image, int row, int col) {
    const double lo_x = RenderSpec::kCellPitch * col + RenderSpec::kSymbolMargin;
    const double lo_y = RenderSpec::kCellPitch * row + RenderSpec::kSymbolMargin;
    const double hi_x = RenderSpec::kCellPitch * (col + 1) - RenderSpec::kSymbolMargin;
    const double hi_y = RenderSpec::kCellPitch * (row + 1) - RenderSpec::kSymbolMargin;
    // Only pixels within the stroke reach of the interior square can be inked.
    const int x0 = static_cast<int>(lo_x) - 2, x1 = static_cast<int>(hi_x) + 2;
    const int y0 = static_cast<int>(lo_y) - 2, y1 = static_cast<int>(hi_y) + 2;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double d = std::min(distance_to_segment(px, py, lo_x, lo_y, hi_x, hi_y),
                                      distance_to_segment(px, py, hi_x, lo_y, lo_x, hi_y));
            if (d <= RenderSpec::kStrokeHalfWidth) image.pixels[static_cast<std::size_t>(y * BoardImage::kWidth + x)] = kInk;
        }
    }
}

void draw_ring(BoardImage& image, int row, int col) {
    const double cx = RenderSpec::kCellPitch * col + RenderSpec::kCellPitch / 2.0;
    const double cy = RenderSpec::kCellPitch * row + RenderSpec::kCellPitch / 2.0;
    const double inner = RenderSpec::kRingRadius - RenderSpec::kStrokeHalfWidth;
    const double outer = RenderSpec::kRingRadius + RenderSpec::kStrokeHalfWidth;
    const int x0 = RenderSpec::kCellPitch * col, y0 = RenderSpec::kCellPitch * row;
    for (int y = y0; y < y0 + RenderSpec::kCellPitch; ++y) {
        for (int x = x0; x < x0 + RenderSpec::kCellPitch; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d >= inner && d <= outer) image.pixels[static_cast<std::size_t>(y * BoardImage::kWidth + x)] = kInk;
        }
    }
}

}  // namespace

int BoardImage::ink_count() const {
    return static_cast<int>(std::count(pixels.begin(), pixels.end(), kInk));
}

BoardImage render(const Board& board) {
    BoardImage image;
    for (int y = 0; y < BoardImage::kHeight; ++y) {
        for (int x = 0; x < BoardImage::kWidth; ++x) {
            if (on_grid_line(x) || on_grid_line(y)) image.pixels[static_cast<std::size_t>(y * BoardImage::kWidth + x)] = kInk;
        }
    }
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            switch (board.at(r, c)) {
                case Cell::X: draw_cross(image, r, c); break;
                case Cell::O: draw_ring(image, r, c); break;
                case Cell::Empty: break;
            }
        }
    }
    return image;
}

std::vector<float> image_to_model_input(const BoardImage& image) {
    std::vector<float> out(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), out.begin(),
                   [](std::uint8_t p) { return static_cast<float>(p) / 255.0f; });
    return out;
}

}  // namespace ttt
