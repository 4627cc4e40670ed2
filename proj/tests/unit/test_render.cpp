#include <set>

#include "doctest.h"
#include "ttt/render.hpp"

using namespace ttt;

namespace {

BoardImage pixel_transpose(const BoardImage& img) {
    BoardImage out;
    for (int y = 0; y < BoardImage::kHeight; ++y)
        for (int x = 0; x < BoardImage::kWidth; ++x)
            out.pixels[static_cast<std::size_t>(x * BoardImage::kWidth + y)] = img.at(x, y);
    return out;
}

}  // namespace

TEST_CASE("empty board shows only the grid") {
    const BoardImage img = render(Board());
    // 8 full columns + 8 full rows, minus the 64 crossings counted twice.
    CHECK(img.ink_count() == 8 * 96 + 8 * 96 - 8 * 8);
    CHECK(img.ink_count() == 1472);
    for (int v : {30, 31, 32, 33, 62, 63, 64, 65}) {
        CHECK(img.at(v, 10) == kInk);
        CHECK(img.at(10, v) == kInk);
    }
    CHECK(img.at(29, 10) == kPaper);
    CHECK(img.at(34, 10) == kPaper);
    CHECK(img.at(10, 66) == kPaper);
    CHECK(img.at(16, 16) == kPaper);
}

TEST_CASE("every board keeps at least the grid ink") {
    for (const auto& b : generate_all_boards()) REQUIRE(render(b).ink_count() >= 1472);
}

TEST_CASE("pixels are strictly binary") {
    for (const char* text : {"XOXOXOXOX", "XXXOOO___", "_________"}) {
        for (auto p : render(Board::parse(text)).pixels) CHECK((p == kInk || p == kPaper));
    }
}

TEST_CASE("a mark only inks the interior of its own cell") {
    const BoardImage base = render(Board());
    for (int idx = 0; idx < 9; ++idx) {
        for (Cell mark : {Cell::X, Cell::O}) {
            Board b;
            b.set(idx, mark);
            const BoardImage img = render(b);
            const int r = idx / 3, c = idx % 3;
            int added = 0;
            for (int y = 0; y < 96; ++y) {
                for (int x = 0; x < 96; ++x) {
                    if (img.at(x, y) == base.at(x, y)) continue;
                    REQUIRE(img.at(x, y) == kInk);
                    const bool inside = x > 32 * c + 1 && x < 32 * (c + 1) - 1 && y > 32 * r + 1 && y < 32 * (r + 1) - 1;
                    REQUIRE(inside);
                    ++added;
                }
            }
            CHECK(added > 40);
        }
    }
}

TEST_CASE("render is injective over all 19,683 boards") {
    std::set<std::vector<std::uint8_t>> seen;
    for (const auto& b : generate_all_boards()) seen.insert(render(b).pixels);
    CHECK(seen.size() == 19683);
}

TEST_CASE("transposing the board transposes the image") {
    for (const char* text : {"XO_______", "X_O_X_O__", "XOXOOXXXO", "__O_X____"}) {
        const Board b = Board::parse(text);
        CHECK(render(b.transposed()) == pixel_transpose(render(b)));
    }
}

TEST_CASE("render is deterministic") {
    const Board b = Board::parse("XO_XO_X__");
    CHECK(render(b) == render(b));
}

TEST_CASE("model input scales pixels to [0, 1]") {
    const BoardImage img = render(Board::parse("X________"));
    const auto in = image_to_model_input(img);
    REQUIRE(in.size() == 96u * 96u);
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(in[i] == (img.pixels[i] == kInk ? 0.0f : 1.0f));
}

TEST_CASE("PNG round-trip is lossless") {
    for (const char* text : {"_________", "XOXOXOXOX", "O_X_O_X_O"}) {
        const BoardImage img = render(Board::parse(text));
        const auto png = encode_png(img);
        REQUIRE(png.size() > 8);
        CHECK(png[1] == 'P');
        CHECK(decode_png(png) == img);
    }
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(decode_png(junk), Error);
}
