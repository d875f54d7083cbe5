#include "cardioaug/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cardioaug {

namespace {

// Half-sample symmetric reflection: ... b a | a b c ... c | c b ...
int reflect_index(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - 1 - i;
}

std::pair<double, double> value_range(std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

} // namespace

void NlmParams::validate() const {
    if (patch_radius < 1) {
        throw std::invalid_argument("nlm patch_radius must be >= 1");
    }
    if (search_radius < patch_radius) {
        throw std::invalid_argument("nlm search_radius must be >= patch_radius");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw std::invalid_argument("nlm filtering strength h must be > 0");
    }
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("nlm sigma must be >= 0");
    }
}

Image2D nlm_denoise(const Image2D &image, const NlmParams &p) {
    p.validate();
    if (image.empty()) {
        throw std::invalid_argument("cannot denoise an empty image");
    }
    const auto [vmin, vmax] = value_range(image.values());
    if (vmin == vmax) {
        return image;
    }
    const double h = p.relative_h ? p.h * (vmax - vmin) : p.h;
    const double inv_h2 = 1.0 / (h * h);
    const double bias = 2.0 * p.sigma * p.sigma;

    const int w = image.width();
    const int ht = image.height();
    const int pr = p.patch_radius;
    const int sr = p.search_radius;

    // Reflect-padded copy so patch reads need no bounds logic.
    const int pw = w + 2 * pr;
    const int ph = ht + 2 * pr;
    std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
    for (int r = 0; r < ph; ++r) {
        const int sr_row = reflect_index(r - pr, ht);
        for (int c = 0; c < pw; ++c) {
            padded[static_cast<std::size_t>(r) * pw + c] = image(sr_row, reflect_index(c - pr, w));
        }
    }
    const double patch_norm = 1.0 / static_cast<double>((2 * pr + 1) * (2 * pr + 1));

    Image2D out(w, ht, image.spacing());
    for (int row = 0; row < ht; ++row) {
        const int r0 = std::max(0, row - sr);
        const int r1 = std::min(ht - 1, row + sr);
        for (int col = 0; col < w; ++col) {
            const int c0 = std::max(0, col - sr);
            const int c1 = std::min(w - 1, col + sr);
            double weight_sum = 0.0;
            double acc = 0.0;
            for (int qr = r0; qr <= r1; ++qr) {
                for (int qc = c0; qc <= c1; ++qc) {
                    double d2 = 0.0;
                    for (int u = 0; u <= 2 * pr; ++u) {
                        const double *a = &padded[static_cast<std::size_t>(row + u) * pw + col];
                        const double *b = &padded[static_cast<std::size_t>(qr + u) * pw + qc];
                        for (int v = 0; v <= 2 * pr; ++v) {
                            const double diff = a[v] - b[v];
                            d2 += diff * diff;
                        }
                    }
                    d2 *= patch_norm;
                    const double wgt = std::exp(-std::max(d2 - bias, 0.0) * inv_h2);
                    weight_sum += wgt;
                    acc += wgt * image(qr, qc);
                }
            }
            out(row, col) = std::clamp(acc / weight_sum, vmin, vmax);
        }
    }
    return out;
}

Image2D normalize_intensity(const Image2D &image) {
    if (image.empty()) {
        throw std::invalid_argument("cannot normalize an empty image");
    }
    const auto [vmin, vmax] = value_range(image.values());
    Image2D out(image.width(), image.height(), image.spacing());
    if (vmin == vmax) {
        return out;
    }
    const double range = vmax - vmin;
    std::transform(image.values().begin(), image.values().end(), out.values().begin(),
                   [&](double v) { return (v - vmin) / range; });
    return out;
}

CroppedSlice crop_or_pad(const Image2D &image, const std::optional<LabelMask2D> &mask, int target_height,
                         int target_width) {
    if (target_height <= 0 || target_width <= 0) {
        throw std::invalid_argument("crop/pad target must be positive");
    }
    if (mask && (mask->width() != image.width() || mask->height() != image.height())) {
        throw std::invalid_argument("image and mask dimensions differ");
    }
    // Offset of output pixel 0 in input coordinates; negative means padding.
    // floor division keeps the extra pixel on the high side for odd surpluses.
    auto offset = [](int in, int target) {
        const int surplus = in - target;
        return surplus >= 0 ? surplus / 2 : -((-surplus) / 2);
    };
    const int row_off = offset(image.height(), target_height);
    const int col_off = offset(image.width(), target_width);

    Image2D out_img(target_width, target_height, image.spacing(), 0.0);
    std::optional<LabelMask2D> out_mask;
    if (mask) {
        out_mask.emplace(target_width, target_height);
    }
    for (int r = 0; r < target_height; ++r) {
        const int sr = r + row_off;
        if (sr < 0 || sr >= image.height()) {
            continue;
        }
        for (int c = 0; c < target_width; ++c) {
            const int sc = c + col_off;
            if (sc < 0 || sc >= image.width()) {
                continue;
            }
            out_img(r, c) = image(sr, sc);
            if (mask) {
                out_mask->set(r, c, (*mask)(sr, sc));
            }
        }
    }
    return {std::move(out_img), std::move(out_mask)};
}

CroppedSlice preprocess_slice(const Image2D &image, const std::optional<LabelMask2D> &mask, const NlmParams &p,
                              int target) {
    return crop_or_pad(normalize_intensity(nlm_denoise(image, p)), mask, target);
}

} // namespace cardioaug
