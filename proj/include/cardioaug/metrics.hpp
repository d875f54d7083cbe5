// metrics.hpp - per-class Dice and Hausdorff distance in physical space, and the
// per-vendor aggregate report.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardioaug/postprocess.hpp"

namespace cardioaug {

enum class Vendor { A = 0, B, C, D };
inline constexpr std::size_t kVendorCount = 4;

std::string_view to_string(Vendor v) noexcept;
Vendor vendor_from_string(std::string_view s);

/// Evaluated structures in report order.
inline constexpr std::array<std::uint8_t, 3> kEvaluatedClasses{1, 2, 3};
std::string_view class_name(std::uint8_t cls);

/// 2|P n T| / (|P| + |T|); 1 when both are empty.
double dice(const LabelVolume &pred, const LabelVolume &truth, std::uint8_t cls);

enum class HdMode { Max, P95 };
std::string_view to_string(HdMode m) noexcept;
HdMode hd_mode_from_string(std::string_view s);

struct HausdorffResult {
    double mm = 0.0;
    /// Exactly one boundary set was empty; `mm` holds the volume diagonal.
    bool sentinel = false;
};

/// Boundary voxels of class `cls`: class voxels with at least one face
/// neighbour (6 in 3D, 4 for single-slice volumes) outside the class or
/// outside the volume. Coordinates are (z, row, col) indices.
std::vector<std::array<int, 3>> boundary_voxels(const LabelVolume &vol, std::uint8_t cls);

/// Symmetric Hausdorff distance between the boundary sets, in millimetres.
/// P95 takes the larger of the two directed 95th percentiles.
HausdorffResult hausdorff(const LabelVolume &pred, const LabelVolume &truth, std::uint8_t cls,
                          HdMode mode = HdMode::Max);

struct MetricCell {
    std::optional<double> dice_pct;
    std::optional<double> hd_mm;
    std::size_t subjects = 0;
    std::size_t hd_sentinels = 0;
};

struct SubjectMetrics {
    std::string id;
    Vendor vendor = Vendor::A;
    std::array<double, 3> dice{};
    std::array<HausdorffResult, 3> hd{};
};

struct MetricRow {
    std::string method;
    std::array<std::array<MetricCell, 3>, kVendorCount> cells{}; // [vendor][class]
    std::vector<SubjectMetrics> subjects;
};

struct MetricReport {
    HdMode hd_mode = HdMode::Max;
    std::vector<MetricRow> rows;
};

struct SubjectTag {
    std::string id;
    Vendor vendor = Vendor::A;
};

/// Per (vendor, class) means of Dice (x100) and HD over subjects with ground
/// truth. Vendors without any truth get empty cells. Throws when a prediction
/// or truth has no manifest entry, or a truth has no prediction.
MetricRow evaluate_dataset(const std::map<std::string, LabelVolume> &predictions,
                           const std::map<std::string, LabelVolume> &truths, const std::vector<SubjectTag> &subjects,
                           HdMode mode, std::string method = "Ours");

/// Header plus one line per row. Columns: method, hd_mode, then for vendor
/// A..D, class LV, MYO, RV: Dice (%, one decimal) then HD (mm, two decimals).
std::string report_to_csv(const MetricReport &report);
std::string report_to_json(const MetricReport &report);

} // namespace cardioaug
