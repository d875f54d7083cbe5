#include "cardioaug/postprocess.hpp"

#include <stdexcept>
#include <string>

namespace cardioaug {

LabelVolume::LabelVolume(std::vector<LabelMask2D> slices, Spacing3D spacing)
    : slices_(std::move(slices)), spacing_(spacing) {
    if (!(spacing.slice_mm > 0.0 && spacing.row_mm > 0.0 && spacing.col_mm > 0.0)) {
        throw std::invalid_argument("volume spacing must be positive");
    }
    if (!slices_.empty()) {
        height_ = slices_.front().height();
        width_ = slices_.front().width();
        for (const auto &s : slices_) {
            if (s.height() != height_ || s.width() != width_) {
                throw std::invalid_argument("all slices of a volume must share their dimensions");
            }
        }
    }
}

LabelVolume::LabelVolume(int depth, int height, int width, Spacing3D spacing)
    : LabelVolume(std::vector<LabelMask2D>(static_cast<std::size_t>(depth), LabelMask2D(width, height)), spacing) {
    height_ = height;
    width_ = width;
}

LabelVolume LabelVolume::with_spacing(Spacing3D spacing) const {
    LabelVolume v = *this;
    if (!(spacing.slice_mm > 0.0 && spacing.row_mm > 0.0 && spacing.col_mm > 0.0)) {
        throw std::invalid_argument("volume spacing must be positive");
    }
    v.spacing_ = spacing;
    return v;
}

std::string_view to_string(Connectivity c) noexcept { return c == Connectivity::Planar8 ? "2d8" : "3d26"; }

Connectivity connectivity_from_string(std::string_view s) {
    if (s == "2d8") {
        return Connectivity::Planar8;
    }
    if (s == "3d26") {
        return Connectivity::Volumetric26;
    }
    throw std::invalid_argument("unknown connectivity '" + std::string(s) + "' (expected 2d8 or 3d26)");
}

bool ComponentReport::empty() const noexcept {
    for (const auto &c : per_class) {
        if (!c.empty()) {
            return false;
        }
    }
    return true;
}

ComponentLabeling connected_components(const LabelVolume &vol, std::uint8_t cls, Connectivity connectivity) {
    if (cls == 0) {
        throw std::invalid_argument("background has no components");
    }
    if (cls > kMaxLabel) {
        throw std::invalid_argument("class id out of range");
    }
    const int d = vol.depth();
    const int h = vol.height();
    const int w = vol.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    ComponentLabeling out;
    out.ids.assign(vol.voxel_count(), 0);

    const int dz_lo = connectivity == Connectivity::Volumetric26 ? -1 : 0;
    const int dz_hi = connectivity == Connectivity::Volumetric26 ? 1 : 0;

    // Flood fill from each unvisited voxel in scan order.
    std::vector<std::size_t> frontier;
    for (int z = 0; z < d; ++z) {
        const auto labels = vol.slices()[static_cast<std::size_t>(z)].labels();
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t seed = static_cast<std::size_t>(z) * plane + p;
            if (labels[p] != cls || out.ids[seed] != 0) {
                continue;
            }
            const auto id = static_cast<std::int32_t>(out.sizes.size() + 1);
            std::size_t size = 0;
            out.ids[seed] = id;
            frontier.assign(1, seed);
            while (!frontier.empty()) {
                const std::size_t cur = frontier.back();
                frontier.pop_back();
                ++size;
                const int cz = static_cast<int>(cur / plane);
                const int cr = static_cast<int>((cur % plane) / w);
                const int cc = static_cast<int>(cur % w);
                for (int dz = dz_lo; dz <= dz_hi; ++dz) {
                    const int nz = cz + dz;
                    if (nz < 0 || nz >= d) {
                        continue;
                    }
                    const auto nlabels = vol.slices()[static_cast<std::size_t>(nz)].labels();
                    for (int dr = -1; dr <= 1; ++dr) {
                        const int nr = cr + dr;
                        if (nr < 0 || nr >= h) {
                            continue;
                        }
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int nc = cc + dc;
                            if (nc < 0 || nc >= w) {
                                continue;
                            }
                            const std::size_t np = static_cast<std::size_t>(nr) * w + nc;
                            const std::size_t n = static_cast<std::size_t>(nz) * plane + np;
                            if (nlabels[np] == cls && out.ids[n] == 0) {
                                out.ids[n] = id;
                                frontier.push_back(n);
                            }
                        }
                    }
                }
            }
            out.sizes.push_back(size);
        }
    }
    return out;
}

CleanedVolume remove_small_components(const LabelVolume &vol, std::size_t min_voxels, Connectivity connectivity) {
    if (min_voxels < 1) {
        throw std::invalid_argument("min_voxels must be >= 1");
    }
    CleanedVolume result{vol, {}};
    result.report.min_voxels = min_voxels;
    result.report.connectivity = connectivity;

    const int h = vol.height();
    const int w = vol.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::uint8_t cls = 1; cls <= kMaxLabel; ++cls) {
        const ComponentLabeling cc = connected_components(vol, cls, connectivity);
        auto &entries = result.report.per_class[cls - 1];
        for (std::size_t i = 0; i < cc.count(); ++i) {
            entries.push_back({static_cast<std::int32_t>(i + 1), cc.sizes[i], cc.sizes[i] < min_voxels});
        }
        for (std::size_t v = 0; v < cc.ids.size(); ++v) {
            const std::int32_t id = cc.ids[v];
            if (id != 0 && entries[static_cast<std::size_t>(id - 1)].removed) {
                const int z = static_cast<int>(v / plane);
                const int r = static_cast<int>((v % plane) / w);
                const int c = static_cast<int>(v % w);
                result.volume.set(z, r, c, 0);
            }
        }
    }
    return result;
}

} // namespace cardioaug
