// losses.hpp - reconstruction and segmentation loss kernels with analytic
// gradients.
//
// Expectations are realized as arithmetic means over all grid elements, so a
// loss value is independent of image size. Reductions use compensated
// summation and are deterministic for a given input.

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cardioaug/grid.hpp"

namespace cardioaug {

/// Dense real array of shape (height, width, channels), channel fastest.
class RealGrid {
  public:
    RealGrid() = default;
    RealGrid(int height, int width, int channels = 1, double fill = 0.0);
    RealGrid(int height, int width, int channels, std::vector<double> values);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator()(int row, int col, int ch = 0) const { return values_[index(row, col, ch)]; }
    double &operator()(int row, int col, int ch = 0) { return values_[index(row, col, ch)]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    bool same_shape(const RealGrid &o) const noexcept {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

  private:
    std::size_t index(int row, int col, int ch) const noexcept {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 1;
    std::vector<double> values_;
};

/// Per-class weights for background, LV, MYO and RV.
struct ClassWeights {
    std::array<double, 4> w{0.19, 0.24, 0.31, 0.26};

    void validate() const;
};

struct LossValue {
    double value = 0.0;
    std::optional<RealGrid> gradient;
};

/// Neumaier-compensated sum.
double stable_sum(std::span<const double> v) noexcept;

/// mean(|x - x_rec| * m). Gradient is with respect to x_rec:
/// -sign(x - x_rec) * m / N, with sign(0) = 0. The mask broadcasts over channels.
LossValue masked_l1(const RealGrid &x, const RealGrid &x_rec, const AttentionMask &m);

/// mean(|y - y_rec|), gradient with respect to y_rec.
LossValue plain_l1(const RealGrid &y, const RealGrid &y_rec);

/// masked_l1(x, x_rec, m) + plain_l1(y, y_rec); gradient with respect to x_rec.
LossValue attention_rec_loss(const RealGrid &x, const RealGrid &x_rec, const AttentionMask &m, const RealGrid &y,
                             const RealGrid &y_rec);

inline constexpr double kDefaultLambda = 0.5;

/// global + lambda * attention. Gradients combine linearly; a missing
/// gradient counts as zero.
LossValue composite_rec_loss(const LossValue &global_loss, const LossValue &attention_loss,
                             double lambda = kDefaultLambda);

struct CrossEntropyOptions {
    /// Check that probabilities sum to 1 per pixel (tolerance 1e-6).
    bool check_simplex = true;
};

/// mean over pixels of -w[label] * ln(probs[label]); `probs` has 4 channels.
/// Gradient with respect to probs: -w[label] / (N * p) at the true class.
LossValue weighted_cross_entropy(const RealGrid &probs, const LabelMask2D &labels, const ClassWeights &w,
                                 CrossEntropyOptions opts = {});

using ScalarLoss = std::function<double(const RealGrid &)>;

/// Central differences (L(x + h e_i) - L(x - h e_i)) / 2h for every element.
RealGrid finite_diff_grad(const ScalarLoss &loss_fn, const RealGrid &input, double h = 1e-4);

} // namespace cardioaug
