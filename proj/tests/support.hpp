// Shared helpers for the unit suites.

#pragma once

#include <atomic>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cardioaug/grid.hpp"
#include "cardioaug/png_io.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("cardioaug_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const fs::path &path() const noexcept { return path_; }
    fs::path operator/(const std::string &rel) const { return path_ / rel; }

  private:
    fs::path path_;
};

inline cardioaug::Image2D random_image(int w, int h, std::mt19937_64 &rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (double &x : v) {
        x = u(rng);
    }
    return cardioaug::Image2D(w, h, std::move(v));
}

/// 16-bit grayscale PNG with the given raw codes.
inline void write_raw16(const fs::path &path, int w, int h, const std::vector<std::uint16_t> &codes) {
    cardioaug::GrayPng png;
    png.width = w;
    png.height = h;
    png.bit_depth = 16;
    png.samples = codes;
    fs::create_directories(path.parent_path());
    cardioaug::write_gray_png(path, png);
}

inline std::string read_text(const fs::path &p) {
    std::FILE *f = std::fopen(p.c_str(), "rb");
    if (!f) {
        return {};
    }
    std::string s;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) {
        s.append(buf, n);
    }
    std::fclose(f);
    return s;
}

} // namespace testsupport
