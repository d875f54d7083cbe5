#include "cardioaug/png_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <png.h>
#include <unistd.h>

#include "cardioaug/errors.hpp"

namespace cardioaug {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Released on every exit path, including libpng failures.
struct ImageGuard {
    png_image image{};
    ImageGuard() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~ImageGuard() { png_image_free(&image); }
};

fs::path temp_sibling(const fs::path &path) {
    static std::atomic<unsigned long> counter{0};
    return path.parent_path() /
           (path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
}

} // namespace

void write_file_atomic(const fs::path &path, std::string_view bytes) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const fs::path tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

GrayPng read_gray_png(const fs::path &path) {
    const auto bytes = slurp(path);
    ImageGuard g;
    if (!png_image_begin_read_from_memory(&g.image, bytes.data(), bytes.size())) {
        throw IoError("cannot decode " + path.string() + ": " + g.image.message);
    }
    if (g.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) {
        throw IoError("expected a grayscale PNG without alpha: " + path.string());
    }
    GrayPng out;
    out.width = static_cast<int>(g.image.width);
    out.height = static_cast<int>(g.image.height);
    const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
    if (g.image.format & PNG_FORMAT_FLAG_LINEAR) {
        g.image.format = PNG_FORMAT_LINEAR_Y;
        out.bit_depth = 16;
        out.samples.resize(n);
        if (!png_image_finish_read(&g.image, nullptr, out.samples.data(), 0, nullptr)) {
            throw IoError("cannot decode " + path.string() + ": " + g.image.message);
        }
    } else {
        g.image.format = PNG_FORMAT_GRAY;
        out.bit_depth = 8;
        std::vector<std::uint8_t> buf(n);
        if (!png_image_finish_read(&g.image, nullptr, buf.data(), 0, nullptr)) {
            throw IoError("cannot decode " + path.string() + ": " + g.image.message);
        }
        out.samples.assign(buf.begin(), buf.end());
    }
    return out;
}

bool png_header_readable(const fs::path &path) {
    std::vector<unsigned char> bytes;
    try {
        bytes = slurp(path);
    } catch (const IoError &) {
        return false;
    }
    ImageGuard g;
    return png_image_begin_read_from_memory(&g.image, bytes.data(), bytes.size()) != 0;
}

Image2D read_image_raw(const fs::path &path, Spacing2D spacing) {
    const GrayPng png = read_gray_png(path);
    std::vector<double> v(png.samples.begin(), png.samples.end());
    return Image2D(png.width, png.height, std::move(v), spacing);
}

Image2D read_image_unit(const fs::path &path, Spacing2D spacing) {
    const GrayPng png = read_gray_png(path);
    const double scale = png.max_code();
    std::vector<double> v(png.samples.size());
    std::transform(png.samples.begin(), png.samples.end(), v.begin(),
                   [scale](std::uint16_t s) { return static_cast<double>(s) / scale; });
    return Image2D(png.width, png.height, std::move(v), spacing);
}

LabelMask2D read_mask(const fs::path &path) {
    const GrayPng png = read_gray_png(path);
    if (png.bit_depth != 8) {
        throw IoError("label masks must be 8-bit PNGs: " + path.string());
    }
    std::vector<std::uint8_t> labels(png.samples.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (png.samples[i] > kMaxLabel) {
            throw IoError("label value " + std::to_string(png.samples[i]) + " outside {0,1,2,3} in " + path.string());
        }
        labels[i] = static_cast<std::uint8_t>(png.samples[i]);
    }
    return LabelMask2D(png.width, png.height, std::move(labels));
}

void write_gray_png(const fs::path &path, const GrayPng &png) {
    ImageGuard g;
    g.image.width = static_cast<png_uint_32>(png.width);
    g.image.height = static_cast<png_uint_32>(png.height);
    png_alloc_size_t size = 0;
    std::vector<unsigned char> buffer;
    std::vector<std::uint8_t> narrow;
    const void *pixels = png.samples.data();
    if (png.bit_depth == 16) {
        g.image.format = PNG_FORMAT_LINEAR_Y;
    } else {
        g.image.format = PNG_FORMAT_GRAY;
        narrow.assign(png.samples.begin(), png.samples.end());
        pixels = narrow.data();
    }
    if (!png_image_write_to_memory(&g.image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw IoError("cannot encode " + path.string() + ": " + g.image.message);
    }
    buffer.resize(size);
    if (!png_image_write_to_memory(&g.image, buffer.data(), &size, 0, pixels, 0, nullptr)) {
        throw IoError("cannot encode " + path.string() + ": " + g.image.message);
    }
    write_file_atomic(path, std::string_view(reinterpret_cast<const char *>(buffer.data()), size));
}

void write_image_unit16(const fs::path &path, const Image2D &image) {
    GrayPng png{image.width(), image.height(), 16, {}};
    png.samples.resize(image.size());
    std::transform(image.values().begin(), image.values().end(), png.samples.begin(), [](double v) {
        return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    });
    write_gray_png(path, png);
}

void write_mask(const fs::path &path, const LabelMask2D &mask) {
    GrayPng png{mask.width(), mask.height(), 8, {}};
    png.samples.assign(mask.labels().begin(), mask.labels().end());
    write_gray_png(path, png);
}

} // namespace cardioaug
