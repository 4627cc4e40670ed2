#include <png.h>

#include <fstream>

#include "ttt/render.hpp"

namespace ttt {

std::vector<std::uint8_t> encode_png(const BoardImage& image) {
    png_image header{};
    header.version = PNG_IMAGE_VERSION;
    header.width = BoardImage::kWidth;
    header.height = BoardImage::kHeight;
    header.format = PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&header, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::IoError, std::string("png sizing failed: ") + header.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&header, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::IoError, std::string("png encode failed: ") + header.message);
    }
    out.resize(size);
    return out;
}

BoardImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image header{};
    header.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&header, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::ParseError, std::string("png header: ") + header.message);
    }
    if (header.width != BoardImage::kWidth || header.height != BoardImage::kHeight) {
        png_image_free(&header);
        throw Error(ErrorCode::ParseError, "png is not 96x96");
    }
    header.format = PNG_FORMAT_GRAY;
    BoardImage image;
    if (!png_image_finish_read(&header, nullptr, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::ParseError, std::string("png decode: ") + header.message);
    }
    return image;
}

void write_png_file(const BoardImage& image, const std::string& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace ttt
