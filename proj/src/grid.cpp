#include "cardioaug/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cardioaug {

namespace {

constexpr double kMinDeterminant = 1e-12;

void check_dims(int width, int height) {
    if (width < 0 || height < 0) {
        throw std::invalid_argument("negative raster dimensions");
    }
}

// floor() for values well inside the int range, without a libm call.
inline int fast_floor(double x) noexcept {
    const int t = static_cast<int>(x);
    return t - (x < t);
}

std::size_t pixel_count(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

} // namespace

Image2D::Image2D(int width, int height, Spacing2D spacing, double fill)
    : width_(width), height_(height), spacing_(spacing) {
    check_dims(width, height);
    if (!(spacing.row_mm > 0.0) || !(spacing.col_mm > 0.0)) {
        throw std::invalid_argument("pixel spacing must be positive");
    }
    values_.assign(pixel_count(width, height), fill);
}

Image2D::Image2D(int width, int height, std::vector<double> values, Spacing2D spacing)
    : width_(width), height_(height), spacing_(spacing), values_(std::move(values)) {
    check_dims(width, height);
    if (!(spacing.row_mm > 0.0) || !(spacing.col_mm > 0.0)) {
        throw std::invalid_argument("pixel spacing must be positive");
    }
    if (values_.size() != pixel_count(width, height)) {
        throw std::invalid_argument("image value count " + std::to_string(values_.size()) +
                                    " does not match " + std::to_string(width) + "x" + std::to_string(height));
    }
}

LabelMask2D::LabelMask2D(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    labels_.assign(pixel_count(width, height), 0);
}

LabelMask2D::LabelMask2D(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
    check_dims(width, height);
    if (labels_.size() != pixel_count(width, height)) {
        throw std::invalid_argument("label count does not match mask dimensions");
    }
    if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t l) { return l > kMaxLabel; })) {
        throw std::invalid_argument("label values must be in {0,1,2,3}");
    }
}

void LabelMask2D::set(int row, int col, std::uint8_t label) {
    if (label > kMaxLabel) {
        throw std::invalid_argument("label values must be in {0,1,2,3}");
    }
    labels_[index(row, col)] = label;
}

AttentionMask::AttentionMask(int width, int height, std::vector<double> weights)
    : width_(width), height_(height), weights_(std::move(weights)) {
    check_dims(width, height);
    if (weights_.size() != pixel_count(width, height)) {
        throw std::invalid_argument("attention mask size does not match dimensions");
    }
    if (std::any_of(weights_.begin(), weights_.end(), [](double w) { return w != 0.0 && w != 1.0; })) {
        throw std::invalid_argument("attention weights must be binary");
    }
}

AttentionMask AttentionMask::from_labels(const LabelMask2D &mask) {
    std::vector<double> w(mask.size());
    std::transform(mask.labels().begin(), mask.labels().end(), w.begin(),
                   [](std::uint8_t l) { return l != 0 ? 1.0 : 0.0; });
    return AttentionMask(mask.width(), mask.height(), std::move(w));
}

AttentionMask AttentionMask::ones(int width, int height) {
    return AttentionMask(width, height, std::vector<double>(pixel_count(width, height), 1.0));
}

Affine2D Affine2D::about_center(double a, double b, double c, double d, double cx, double cy) {
    return from_linear(a, b, c, d, cx - (a * cx + b * cy), cy - (c * cx + d * cy));
}

bool Affine2D::invertible() const noexcept {
    const double det = determinant();
    return std::isfinite(det) && std::abs(det) > kMinDeterminant;
}

Affine2D Affine2D::inverse() const {
    if (!invertible()) {
        throw std::invalid_argument("degenerate transform");
    }
    const double det = determinant();
    const double ia = m[4] / det;
    const double ib = -m[1] / det;
    const double ic = -m[3] / det;
    const double id = m[0] / det;
    return from_linear(ia, ib, ic, id, -(ia * m[2] + ib * m[5]), -(ic * m[2] + id * m[5]));
}

Affine2D Affine2D::operator*(const Affine2D &r) const noexcept {
    const auto &l = m;
    return from_linear(l[0] * r.m[0] + l[1] * r.m[3], l[0] * r.m[1] + l[1] * r.m[4], //
                       l[3] * r.m[0] + l[4] * r.m[3], l[3] * r.m[1] + l[4] * r.m[4], //
                       l[0] * r.m[2] + l[1] * r.m[5] + l[2], l[3] * r.m[2] + l[4] * r.m[5] + l[5]);
}

double max_abs_difference(const Affine2D &lhs, const Affine2D &rhs) noexcept {
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.m.size(); ++i) {
        worst = std::max(worst, std::abs(lhs.m[i] - rhs.m[i]));
    }
    return worst;
}

Image2D warp(const Image2D &image, const Affine2D &a, Interpolation interp, double fill) {
    if (!a.invertible()) {
        throw std::invalid_argument("degenerate transform");
    }
    if (image.empty()) {
        throw std::invalid_argument("cannot warp an empty image");
    }
    const int w = image.width();
    const int h = image.height();
    const auto src = image.values();
    Image2D out(w, h, image.spacing(), fill);
    auto dst = out.values();

    auto at = [&](int ix, int iy) -> double {
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) {
            return fill;
        }
        return src[static_cast<std::size_t>(iy) * w + ix];
    };

    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const double x = a.m[0] * col + a.m[1] * row + a.m[2];
            const double y = a.m[3] * col + a.m[4] * row + a.m[5];
            double v = fill;
            if (interp == Interpolation::Nearest) {
                const double tx = x + 0.5;
                const double ty = y + 0.5;
                // Truncation equals floor for the non-negative values kept here.
                if (tx >= 0.0 && ty >= 0.0 && tx < w && ty < h) {
                    v = src[static_cast<std::size_t>(ty) * w + static_cast<std::size_t>(tx)];
                }
            } else if (x > -1.0 && y > -1.0 && x < w && y < h) {
                const int x0 = fast_floor(x);
                const int y0 = fast_floor(y);
                const double fx = x - x0;
                const double fy = y - y0;
                double v00, v10, v01, v11;
                if (x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h) {
                    const double *p = &src[static_cast<std::size_t>(y0) * w + x0];
                    v00 = p[0];
                    v10 = p[1];
                    v01 = p[w];
                    v11 = p[w + 1];
                } else {
                    v00 = at(x0, y0);
                    v10 = at(x0 + 1, y0);
                    v01 = at(x0, y0 + 1);
                    v11 = at(x0 + 1, y0 + 1);
                }
                const double top = (1.0 - fx) * v00 + fx * v10;
                const double bottom = (1.0 - fx) * v01 + fx * v11;
                v = (1.0 - fy) * top + fy * bottom;
            }
            dst[static_cast<std::size_t>(row) * w + col] = v;
        }
    }
    return out;
}

LabelMask2D warp_mask(const LabelMask2D &mask, const Affine2D &a) {
    if (!a.invertible()) {
        throw std::invalid_argument("degenerate transform");
    }
    const int w = mask.width();
    const int h = mask.height();
    const auto src = mask.labels();
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const double rx = a.m[0] * col + a.m[1] * row + a.m[2] + 0.5;
            const double ry = a.m[3] * col + a.m[4] * row + a.m[5] + 0.5;
            if (rx >= 0.0 && ry >= 0.0 && rx < w && ry < h) {
                out[static_cast<std::size_t>(row) * w + col] =
                    src[static_cast<std::size_t>(ry) * w + static_cast<std::size_t>(rx)];
            }
        }
    }
    return LabelMask2D(w, h, std::move(out));
}

} // namespace cardioaug
