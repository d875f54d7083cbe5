#include "cardioaug/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cardioaug {

namespace {

void check_finite(const RealGrid &g) {
    for (double v : g.values()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("grid contains non-finite values");
        }
    }
}

void check_shapes(const RealGrid &a, const RealGrid &b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("shape mismatch between loss operands");
    }
}

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Shared body of the two L1 terms; weights == nullptr means an all-ones mask.
LossValue l1_impl(const RealGrid &x, const RealGrid &x_rec, const double *weights) {
    check_shapes(x, x_rec);
    check_finite(x);
    check_finite(x_rec);
    const std::size_t n = x.size();
    const int ch = x.channels();
    std::vector<double> terms(n);
    RealGrid grad(x.height(), x.width(), ch);
    const auto xv = x.values();
    const auto rv = x_rec.values();
    auto gv = grad.values();
    const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = weights ? weights[i / static_cast<std::size_t>(ch)] : 1.0;
        const double r = xv[i] - rv[i];
        terms[i] = std::abs(r) * m;
        gv[i] = -sign(r) * m * inv_n;
    }
    return {stable_sum(terms) * inv_n, std::move(grad)};
}

} // namespace

RealGrid::RealGrid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1) {
        throw std::invalid_argument("invalid grid shape");
    }
    values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

RealGrid::RealGrid(int height, int width, int channels, std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    if (height < 0 || width < 0 || channels < 1) {
        throw std::invalid_argument("invalid grid shape");
    }
    if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("grid value count does not match its shape");
    }
}

void ClassWeights::validate() const {
    bool any_positive = false;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("class weights must be finite and >= 0");
        }
        any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) {
        throw std::invalid_argument("at least one class weight must be > 0");
    }
}

double stable_sum(std::span<const double> v) noexcept {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

LossValue masked_l1(const RealGrid &x, const RealGrid &x_rec, const AttentionMask &m) {
    if (m.height() != x.height() || m.width() != x.width()) {
        throw std::invalid_argument("shape mismatch between loss operands and mask");
    }
    return l1_impl(x, x_rec, m.weights().data());
}

LossValue plain_l1(const RealGrid &y, const RealGrid &y_rec) { return l1_impl(y, y_rec, nullptr); }

LossValue attention_rec_loss(const RealGrid &x, const RealGrid &x_rec, const AttentionMask &m, const RealGrid &y,
                             const RealGrid &y_rec) {
    LossValue source = masked_l1(x, x_rec, m);
    const LossValue target = plain_l1(y, y_rec);
    return {source.value + target.value, std::move(source.gradient)};
}

LossValue composite_rec_loss(const LossValue &global_loss, const LossValue &attention_loss, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("lambda must be >= 0");
    }
    LossValue out{global_loss.value + lambda * attention_loss.value, std::nullopt};
    const auto &g = global_loss.gradient;
    const auto &a = attention_loss.gradient;
    if (g && a) {
        check_shapes(*g, *a);
        RealGrid combined = *g;
        auto cv = combined.values();
        const auto av = a->values();
        for (std::size_t i = 0; i < cv.size(); ++i) {
            cv[i] += lambda * av[i];
        }
        out.gradient = std::move(combined);
    } else if (g) {
        out.gradient = *g;
    } else if (a) {
        RealGrid scaled = *a;
        for (double &v : scaled.values()) {
            v *= lambda;
        }
        out.gradient = std::move(scaled);
    }
    return out;
}

LossValue weighted_cross_entropy(const RealGrid &probs, const LabelMask2D &labels, const ClassWeights &w,
                                 CrossEntropyOptions opts) {
    w.validate();
    if (probs.channels() != 4 || probs.height() != labels.height() || probs.width() != labels.width()) {
        throw std::invalid_argument("probabilities must be H x W x 4 and match the label mask");
    }
    check_finite(probs);
    const std::size_t pixels = labels.size();
    const double inv_n = pixels > 0 ? 1.0 / static_cast<double>(pixels) : 0.0;
    const auto pv = probs.values();
    const auto lv = labels.labels();
    std::vector<double> terms(pixels);
    RealGrid grad(probs.height(), probs.width(), 4);
    auto gv = grad.values();
    for (std::size_t i = 0; i < pixels; ++i) {
        const double *p = &pv[i * 4];
        if (opts.check_simplex) {
            const double s = p[0] + p[1] + p[2] + p[3];
            if (std::abs(s - 1.0) > 1e-6) {
                throw std::invalid_argument("class probabilities do not sum to 1 at pixel " + std::to_string(i));
            }
        }
        const std::uint8_t l = lv[i];
        if (!(p[l] > 0.0)) {
            throw std::domain_error("log of non-positive probability");
        }
        terms[i] = -w.w[l] * std::log(p[l]);
        gv[i * 4 + l] = -w.w[l] * inv_n / p[l];
    }
    return {stable_sum(terms) * inv_n, std::move(grad)};
}

RealGrid finite_diff_grad(const ScalarLoss &loss_fn, const RealGrid &input, double h) {
    RealGrid grad(input.height(), input.width(), input.channels());
    RealGrid probe = input;
    auto pv = probe.values();
    auto gv = grad.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double orig = pv[i];
        pv[i] = orig + h;
        const double up = loss_fn(probe);
        pv[i] = orig - h;
        const double down = loss_fn(probe);
        pv[i] = orig;
        gv[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace cardioaug
