// grid.hpp - raster types, affine geometry and resampling shared by every stage
// of the pipeline.
//
// Conventions:
//   - storage is row-major, index = row * width + col.
//   - pixel (row, col) has its center at continuous coordinate (x = col, y = row).
//   - an Affine2D maps OUTPUT coordinates to INPUT coordinates (pull mapping).

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cardioaug {

/// Physical size of one pixel.
struct Spacing2D {
    double row_mm = 1.0;
    double col_mm = 1.0;

    bool operator==(const Spacing2D &) const = default;
};

/// Class labels of the cardiac segmentation.
enum class Label : std::uint8_t { Background = 0, LV = 1, MYO = 2, RV = 3 };

inline constexpr std::uint8_t kMaxLabel = 3;

class Image2D {
  public:
    Image2D() = default;
    Image2D(int width, int height, Spacing2D spacing = {}, double fill = 0.0);
    Image2D(int width, int height, std::vector<double> values, Spacing2D spacing = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    Spacing2D spacing() const noexcept { return spacing_; }

    double operator()(int row, int col) const { return values_[index(row, col)]; }
    double &operator()(int row, int col) { return values_[index(row, col)]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    bool operator==(const Image2D &) const = default;

  private:
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    Spacing2D spacing_{};
    std::vector<double> values_;
};

/// Per-pixel class labels in {0,1,2,3}.
class LabelMask2D {
  public:
    LabelMask2D() = default;
    LabelMask2D(int width, int height);
    LabelMask2D(int width, int height, std::vector<std::uint8_t> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::uint8_t operator()(int row, int col) const { return labels_[index(row, col)]; }
    void set(int row, int col, std::uint8_t label);

    std::span<const std::uint8_t> labels() const noexcept { return labels_; }

    bool operator==(const LabelMask2D &) const = default;

  private:
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> labels_;
};

/// Binary weight per pixel, 1 on labelled foreground.
class AttentionMask {
  public:
    AttentionMask() = default;
    AttentionMask(int width, int height, std::vector<double> weights);

    static AttentionMask from_labels(const LabelMask2D &mask);
    static AttentionMask ones(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const double> weights() const noexcept { return weights_; }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> weights_;
};

/// 2x3 affine map, [a b tx; c d ty], applied as
///   x_in = a*x + b*y + tx,  y_in = c*x + d*y + ty.
struct Affine2D {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static Affine2D identity() { return {}; }
    static Affine2D from_linear(double a, double b, double c, double d, double tx = 0.0, double ty = 0.0) {
        return Affine2D{{a, b, tx, c, d, ty}};
    }
    /// Pull mapping that moves image content by (dx, dy).
    static Affine2D shift_content(double dx, double dy) { return from_linear(1, 0, 0, 1, -dx, -dy); }
    /// Linear map L applied about the point (cx, cy): p -> L (p - c) + c.
    static Affine2D about_center(double a, double b, double c, double d, double cx, double cy);

    double determinant() const noexcept { return m[0] * m[4] - m[1] * m[3]; }
    bool invertible() const noexcept;
    Affine2D inverse() const;

    /// Composition: (*this * rhs)(p) = this(rhs(p)).
    Affine2D operator*(const Affine2D &rhs) const noexcept;

    std::array<double, 2> apply(double x, double y) const noexcept {
        return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
    }

    bool operator==(const Affine2D &) const = default;
};

/// Max absolute entry difference.
double max_abs_difference(const Affine2D &lhs, const Affine2D &rhs) noexcept;

enum class Interpolation { Bilinear, Nearest };

/// Resamples `image` on its own grid; output(p) = image(a(p)). Samples falling
/// outside the input take `fill`. Throws std::invalid_argument on a singular map.
Image2D warp(const Image2D &image, const Affine2D &a, Interpolation interp, double fill = 0.0);

/// Nearest-neighbour resampling of labels, out-of-bounds -> background.
LabelMask2D warp_mask(const LabelMask2D &mask, const Affine2D &a);

/// Center of the pixel grid in continuous coordinates.
inline std::array<double, 2> grid_center(int width, int height) noexcept {
    return {(width - 1) * 0.5, (height - 1) * 0.5};
}

} // namespace cardioaug
