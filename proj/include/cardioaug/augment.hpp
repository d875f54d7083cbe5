// augment.hpp - stacked intensity/spatial augmentation applied jointly to an
// image and its label mask.
//
// A stack is applied in canonical order:
//   blur|sharpen -> intensity shift -> gamma -> (shear, rotate, scale)
// where the spatial transforms are composed into one affine and resampled once.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardioaug/grid.hpp"
#include "cardioaug/rng.hpp"

namespace cardioaug {

enum class TransformKind { Blur, Sharpen, IntensityShift, Gamma, Shear, Rotate, Scale };

std::string_view to_string(TransformKind kind) noexcept;
TransformKind transform_kind_from_string(std::string_view name);

bool is_spatial(TransformKind kind) noexcept;

/// One parameterized transform. `value` is sigma (Blur/Sharpen), delta
/// (IntensityShift), gamma, shear/scale magnitude m, or rotation in degrees.
/// `amount` is only used by Sharpen.
struct TransformSpec {
    TransformKind kind = TransformKind::Blur;
    double value = 0.0;
    double amount = 0.0;

    bool operator==(const TransformSpec &) const = default;
};

using TransformStack = std::vector<TransformSpec>;

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    bool operator==(const ParamRange &) const = default;
};

/// The six sampling slots, in canonical order.
enum class Slot { BlurSharpen = 0, IntensityShift, Gamma, Shear, Rotate, Scale };
inline constexpr std::size_t kSlotCount = 6;

struct AugmentRanges {
    ParamRange sigma{0.1, 2.0};
    ParamRange shift{-0.05, 0.05};
    ParamRange gamma{0.6, 1.7};
    ParamRange shear{-0.1, 0.1};
    ParamRange rotate_deg{-15.0, 15.0};
    ParamRange scale{-0.1, 0.1};
    ParamRange sharpen_amount{0.5, 1.5};

    bool operator==(const AugmentRanges &) const = default;
};

struct AugmentPolicy {
    std::array<double, kSlotCount> probabilities{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    AugmentRanges ranges{};
    /// Ranges wider than the defaults are rejected unless this is set.
    bool allow_range_override = false;

    void validate() const;
    bool operator==(const AugmentPolicy &) const = default;
};

/// Validates kinds, ordering and the single blur/sharpen slot.
void validate_stack(const TransformStack &stack);

struct SlicePair {
    Image2D image;
    LabelMask2D mask;
};

/// Separable Gaussian, radius ceil(3 sigma), unit-sum kernel, half-sample
/// symmetric reflection at the borders.
Image2D gaussian_blur(const Image2D &image, double sigma);

/// clamp(image + amount * (image - blur(image, sigma)), 0, 1).
Image2D unsharp_mask(const Image2D &image, double sigma, double amount);

/// clamp(image + delta, 0, 1).
Image2D intensity_shift(const Image2D &image, double delta);

/// image^gamma; requires values in [0, 1].
Image2D gamma_correct(const Image2D &image, double gamma);

/// Composes Shear/Rotate/Scale specs (in list order, first applied first)
/// about the image center. Pull-mapping linear parts:
///   Shear(m)  = [1 m; 0 1]    (column coordinate sheared by row)
///   Rotate(t) = [cos t  -sin t; sin t  cos t]
///   Scale(m)  = (1 + m) I
Affine2D build_spatial_affine(const TransformStack &specs, int width, int height);

/// Draws one stack: each slot included with its probability, blur vs sharpen
/// by a fair coin, parameters uniform in their ranges.
TransformStack sample_stack(const AugmentPolicy &policy, RandomStream &stream);

/// Intensity transforms on the image only (clamped after each), then one
/// bilinear/nearest resampling pass with the composed spatial affine.
SlicePair apply_stack(const SlicePair &pair, const TransformStack &stack);

} // namespace cardioaug
