#include "cardioaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cardioaug {

namespace {

int reflect_index(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double &v : k) {
        v /= sum;
    }
    return k;
}

// out[c] = sum_k kernel[k] * line[c + k], accumulated tap by tap.
void accumulate_taps(const std::vector<double> &kernel, const double *__restrict line, double *__restrict out, int n) {
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        const double kv = kernel[k];
        const double *__restrict src = line + k;
        for (int c = 0; c < n; ++c) {
            out[c] += kv * src[c];
        }
    }
}

Slot slot_of(TransformKind kind) noexcept {
    switch (kind) {
    case TransformKind::Blur:
    case TransformKind::Sharpen:
        return Slot::BlurSharpen;
    case TransformKind::IntensityShift:
        return Slot::IntensityShift;
    case TransformKind::Gamma:
        return Slot::Gamma;
    case TransformKind::Shear:
        return Slot::Shear;
    case TransformKind::Rotate:
        return Slot::Rotate;
    case TransformKind::Scale:
        return Slot::Scale;
    }
    return Slot::BlurSharpen;
}

void check_range(const char *name, const ParamRange &r, const ParamRange &paper, bool allow_override) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw std::invalid_argument(std::string("invalid range for ") + name);
    }
    if (!allow_override && (r.lo < paper.lo || r.hi > paper.hi)) {
        throw std::invalid_argument(std::string("range for ") + name + " exceeds the default range");
    }
}

void clamp_unit(Image2D &img) {
    for (double &v : img.values()) {
        v = std::clamp(v, 0.0, 1.0);
    }
}

} // namespace

std::string_view to_string(TransformKind kind) noexcept {
    switch (kind) {
    case TransformKind::Blur:
        return "blur";
    case TransformKind::Sharpen:
        return "sharpen";
    case TransformKind::IntensityShift:
        return "intensity_shift";
    case TransformKind::Gamma:
        return "gamma";
    case TransformKind::Shear:
        return "shear";
    case TransformKind::Rotate:
        return "rotate";
    case TransformKind::Scale:
        return "scale";
    }
    return "unknown";
}

TransformKind transform_kind_from_string(std::string_view name) {
    for (auto k : {TransformKind::Blur, TransformKind::Sharpen, TransformKind::IntensityShift, TransformKind::Gamma,
                   TransformKind::Shear, TransformKind::Rotate, TransformKind::Scale}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("unknown transform kind: " + std::string(name));
}

bool is_spatial(TransformKind kind) noexcept {
    return kind == TransformKind::Shear || kind == TransformKind::Rotate || kind == TransformKind::Scale;
}

void AugmentPolicy::validate() const {
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("inclusion probabilities must be in [0, 1]");
        }
    }
    const AugmentRanges paper{};
    check_range("sigma", ranges.sigma, paper.sigma, allow_range_override);
    check_range("shift", ranges.shift, paper.shift, allow_range_override);
    check_range("gamma", ranges.gamma, paper.gamma, allow_range_override);
    check_range("shear", ranges.shear, paper.shear, allow_range_override);
    check_range("rotate", ranges.rotate_deg, paper.rotate_deg, allow_range_override);
    check_range("scale", ranges.scale, paper.scale, allow_range_override);
    check_range("sharpen_amount", ranges.sharpen_amount, paper.sharpen_amount, allow_range_override);
    if (!(ranges.sigma.lo > 0.0) || !(ranges.gamma.lo > 0.0) || !(ranges.scale.lo > -1.0) ||
        !(ranges.sharpen_amount.lo >= 0.0)) {
        throw std::invalid_argument("range admits invalid transform parameters");
    }
}

void validate_stack(const TransformStack &stack) {
    int last = -1;
    for (const auto &t : stack) {
        const int s = static_cast<int>(slot_of(t.kind));
        if (s <= last) {
            throw std::invalid_argument("transform stack is not in canonical order or repeats a slot");
        }
        last = s;
    }
}

Image2D gaussian_blur(const Image2D &image, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("gaussian sigma must be > 0");
    }
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = image.width();
    const int h = image.height();
    if (image.empty()) {
        return image;
    }

    // Horizontal pass through a reflected line buffer.
    std::vector<double> tmp(image.size(), 0.0);
    std::vector<double> line(static_cast<std::size_t>(w + 2 * radius));
    const auto src = image.values();
    for (int r = 0; r < h; ++r) {
        const double *row = &src[static_cast<std::size_t>(r) * w];
        for (int i = 0; i < w + 2 * radius; ++i) {
            line[static_cast<std::size_t>(i)] = row[reflect_index(i - radius, w)];
        }
        accumulate_taps(kernel, line.data(), &tmp[static_cast<std::size_t>(r) * w], w);
    }

    // Vertical pass accumulates whole rows.
    Image2D out(w, h, image.spacing(), 0.0);
    auto dst = out.values();
    for (int r = 0; r < h; ++r) {
        double *__restrict orow = &dst[static_cast<std::size_t>(r) * w];
        for (int k = -radius; k <= radius; ++k) {
            const double kv = kernel[static_cast<std::size_t>(k + radius)];
            const double *__restrict irow = &tmp[static_cast<std::size_t>(reflect_index(r + k, h)) * w];
            for (int c = 0; c < w; ++c) {
                orow[c] += kv * irow[c];
            }
        }
    }
    return out;
}

Image2D unsharp_mask(const Image2D &image, double sigma, double amount) {
    if (!(amount >= 0.0)) {
        throw std::invalid_argument("unsharp amount must be >= 0");
    }
    const Image2D blurred = gaussian_blur(image, sigma);
    Image2D out = image;
    auto o = out.values();
    const auto b = blurred.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = std::clamp(o[i] + amount * (o[i] - b[i]), 0.0, 1.0);
    }
    return out;
}

Image2D intensity_shift(const Image2D &image, double delta) {
    Image2D out = image;
    for (double &v : out.values()) {
        v = std::clamp(v + delta, 0.0, 1.0);
    }
    return out;
}

Image2D gamma_correct(const Image2D &image, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("gamma must be > 0");
    }
    Image2D out = image;
    for (double &v : out.values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("gamma requires normalized input");
        }
        v = std::pow(v, gamma);
    }
    return out;
}

Affine2D build_spatial_affine(const TransformStack &specs, int width, int height) {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
    for (const auto &s : specs) {
        double ma = 1.0, mb = 0.0, mc = 0.0, md = 1.0;
        switch (s.kind) {
        case TransformKind::Shear:
            mb = s.value;
            break;
        case TransformKind::Rotate: {
            const double t = s.value * std::numbers::pi / 180.0;
            ma = std::cos(t);
            mb = -std::sin(t);
            mc = std::sin(t);
            md = std::cos(t);
            break;
        }
        case TransformKind::Scale:
            ma = md = 1.0 + s.value;
            break;
        default:
            throw std::invalid_argument("non-spatial transform passed to build_spatial_affine: " +
                                        std::string(to_string(s.kind)));
        }
        // Later specs wrap earlier ones: L <- M * L.
        const double na = ma * a + mb * c;
        const double nb = ma * b + mb * d;
        const double nc = mc * a + md * c;
        const double nd = mc * b + md * d;
        a = na, b = nb, c = nc, d = nd;
    }
    if (specs.empty()) {
        return Affine2D::identity();
    }
    const auto [cx, cy] = grid_center(width, height);
    return Affine2D::about_center(a, b, c, d, cx, cy);
}

TransformStack sample_stack(const AugmentPolicy &policy, RandomStream &stream) {
    const auto &r = policy.ranges;
    const auto &p = policy.probabilities;
    TransformStack stack;
    stack.reserve(kSlotCount);
    // Every slot always consumes its inclusion draw so the stream layout is fixed.
    if (stream.bernoulli(p[0])) {
        const bool blur = stream.uniform() < 0.5;
        const double sigma = stream.uniform(r.sigma.lo, r.sigma.hi);
        if (blur) {
            stack.push_back({TransformKind::Blur, sigma, 0.0});
        } else {
            stack.push_back({TransformKind::Sharpen, sigma, stream.uniform(r.sharpen_amount.lo, r.sharpen_amount.hi)});
        }
    }
    if (stream.bernoulli(p[1])) {
        stack.push_back({TransformKind::IntensityShift, stream.uniform(r.shift.lo, r.shift.hi), 0.0});
    }
    if (stream.bernoulli(p[2])) {
        stack.push_back({TransformKind::Gamma, stream.uniform(r.gamma.lo, r.gamma.hi), 0.0});
    }
    if (stream.bernoulli(p[3])) {
        stack.push_back({TransformKind::Shear, stream.uniform(r.shear.lo, r.shear.hi), 0.0});
    }
    if (stream.bernoulli(p[4])) {
        stack.push_back({TransformKind::Rotate, stream.uniform(r.rotate_deg.lo, r.rotate_deg.hi), 0.0});
    }
    if (stream.bernoulli(p[5])) {
        stack.push_back({TransformKind::Scale, stream.uniform(r.scale.lo, r.scale.hi), 0.0});
    }
    return stack;
}

SlicePair apply_stack(const SlicePair &pair, const TransformStack &stack) {
    if (pair.image.width() != pair.mask.width() || pair.image.height() != pair.mask.height()) {
        throw std::invalid_argument("image and mask are not aligned");
    }
    validate_stack(stack);
    if (stack.empty()) {
        return pair;
    }

    Image2D image = pair.image;
    TransformStack spatial;
    for (const auto &t : stack) {
        switch (t.kind) {
        case TransformKind::Blur:
            image = gaussian_blur(image, t.value);
            clamp_unit(image);
            break;
        case TransformKind::Sharpen:
            image = unsharp_mask(image, t.value, t.amount);
            break;
        case TransformKind::IntensityShift:
            image = intensity_shift(image, t.value);
            break;
        case TransformKind::Gamma:
            image = gamma_correct(image, t.value);
            break;
        default:
            spatial.push_back(t);
        }
    }
    if (spatial.empty()) {
        return {std::move(image), pair.mask};
    }
    const Affine2D a = build_spatial_affine(spatial, image.width(), image.height());
    return {warp(image, a, Interpolation::Bilinear, 0.0), warp_mask(pair.mask, a)};
}

} // namespace cardioaug
