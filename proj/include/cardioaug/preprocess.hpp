// preprocess.hpp - per-slice denoising, intensity normalization and crop/pad.

#pragma once

#include <optional>
#include <utility>

#include "cardioaug/grid.hpp"

namespace cardioaug {

inline constexpr int kCanvasSize = 256;

/// Non-local means parameters. When `relative_h` is set the filtering strength
/// is `h * (max - min)` of the slice being filtered.
struct NlmParams {
    int patch_radius = 1;
    int search_radius = 5;
    double h = 0.08;
    bool relative_h = true;
    /// Noise standard deviation for the max(d^2 - 2 sigma^2, 0) compensation.
    double sigma = 0.0;

    void validate() const;
};

/// Non-local means. Patch distance is the mean squared difference over a
/// (2r+1)^2 patch with half-sample symmetric reflection at the borders; the
/// search window is clipped to the image.
Image2D nlm_denoise(const Image2D &image, const NlmParams &p);

/// Min-max rescale to [0, 1]; a constant slice maps to all zeros.
Image2D normalize_intensity(const Image2D &image);

struct CroppedSlice {
    Image2D image;
    std::optional<LabelMask2D> mask;
};

/// Center crop / symmetric zero pad to `target_height` x `target_width`.
/// Odd surpluses put the extra pixel on the high-index side.
CroppedSlice crop_or_pad(const Image2D &image, const std::optional<LabelMask2D> &mask, int target_height,
                         int target_width);

inline CroppedSlice crop_or_pad(const Image2D &image, const std::optional<LabelMask2D> &mask,
                                int target = kCanvasSize) {
    return crop_or_pad(image, mask, target, target);
}

/// nlm_denoise -> normalize_intensity -> crop_or_pad.
CroppedSlice preprocess_slice(const Image2D &image, const std::optional<LabelMask2D> &mask, const NlmParams &p,
                              int target = kCanvasSize);

} // namespace cardioaug
