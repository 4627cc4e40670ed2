#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttt/game.hpp"

namespace ttt {

/// Fixed rasterization geometry. Bump kVersion whenever any constant changes.
struct RenderSpec {
    static constexpr int kVersion = 1;
    static constexpr int kCanvas = 96;
    static constexpr int kCellPitch = 32;
    static constexpr std::array<int, 4> kGridLines{31, 32, 63, 64};
    // Each listed grid column/row is widened by this much on both sides, giving the 4-px lines 30..33 and 62..65.
    static constexpr int kGridPad = 1;
    static constexpr int kSymbolMargin = 6;
    static constexpr double kStrokeHalfWidth = 1.5;
    static constexpr double kRingRadius = 10.0;
};

inline constexpr std::uint8_t kInk = 0;
inline constexpr std::uint8_t kPaper = 255;

/// 96x96 single-channel binary image, row-major, 0 = ink, 255 = background.
struct BoardImage {
    static constexpr int kWidth = RenderSpec::kCanvas;
    static constexpr int kHeight = RenderSpec::kCanvas;
    static constexpr int kPixels = kWidth * kHeight;

    std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kPixels, kPaper);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y * kWidth + x)]; }
    int ink_count() const;
    friend bool operator==(const BoardImage&, const BoardImage&) = default;
};

BoardImage render(const Board& board);

/// pixel / 255 per entry, row-major [96 * 96].
std::vector<float> image_to_model_input(const BoardImage& image);

/// Grayscale 8-bit PNG encoding of the image.
std::vector<std::uint8_t> encode_png(const BoardImage& image);
/// Decodes any PNG into 8-bit grayscale; throws ParseError on failure or wrong size.
BoardImage decode_png(std::span<const std::uint8_t> bytes);

void write_png_file(const BoardImage& image, const std::string& path);

}  // namespace ttt
