// postprocess.hpp - per-class connected components and small-structure removal.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cardioaug/grid.hpp"

namespace cardioaug {

struct Spacing3D {
    double slice_mm = 1.0;
    double row_mm = 1.0;
    double col_mm = 1.0;

    bool operator==(const Spacing3D &) const = default;
};

/// Stack of equally-sized label slices.
class LabelVolume {
  public:
    LabelVolume() = default;
    LabelVolume(std::vector<LabelMask2D> slices, Spacing3D spacing = {});
    LabelVolume(int depth, int height, int width, Spacing3D spacing = {});

    int depth() const noexcept { return static_cast<int>(slices_.size()); }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(depth()) * static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    Spacing3D spacing() const noexcept { return spacing_; }
    LabelVolume with_spacing(Spacing3D spacing) const;

    std::uint8_t at(int z, int row, int col) const { return slices_[static_cast<std::size_t>(z)](row, col); }
    void set(int z, int row, int col, std::uint8_t label) { slices_[static_cast<std::size_t>(z)].set(row, col, label); }

    const std::vector<LabelMask2D> &slices() const noexcept { return slices_; }
    bool same_shape(const LabelVolume &o) const noexcept {
        return depth() == o.depth() && height_ == o.height_ && width_ == o.width_;
    }

    bool operator==(const LabelVolume &) const = default;

  private:
    std::vector<LabelMask2D> slices_;
    int height_ = 0;
    int width_ = 0;
    Spacing3D spacing_{};
};

enum class Connectivity { Planar8, Volumetric26 };

std::string_view to_string(Connectivity c) noexcept;
Connectivity connectivity_from_string(std::string_view s);

/// Component id per voxel (0 = not of the class), ids 1..count assigned in
/// scan order (z, row, col) of each component's first voxel.
struct ComponentLabeling {
    std::vector<std::int32_t> ids;
    std::vector<std::size_t> sizes; // sizes[id - 1]
    std::size_t count() const noexcept { return sizes.size(); }
};

ComponentLabeling connected_components(const LabelVolume &vol, std::uint8_t cls, Connectivity connectivity);

struct ComponentEntry {
    std::int32_t id = 0;
    std::size_t voxels = 0;
    bool removed = false;
};

/// Components of LV, MYO and RV (index 0, 1, 2).
struct ComponentReport {
    std::array<std::vector<ComponentEntry>, 3> per_class;
    std::size_t min_voxels = 0;
    Connectivity connectivity = Connectivity::Volumetric26;

    bool empty() const noexcept;
};

inline constexpr std::size_t kDefaultMinVoxels = 30;

struct CleanedVolume {
    LabelVolume volume;
    ComponentReport report;
};

/// Relabels every component with fewer than `min_voxels` voxels to background,
/// each class independently.
CleanedVolume remove_small_components(const LabelVolume &vol, std::size_t min_voxels = kDefaultMinVoxels,
                                      Connectivity connectivity = Connectivity::Volumetric26);

} // namespace cardioaug
