// manifest.hpp - JSON dataset manifest.
//
//   {
//     "schema_version": 1,
//     "role": "images",                 // or "predictions"
//     "subjects": [
//       { "id": "A001", "vendor": "A", "annotated": true, "phase": "ED",
//         "spacing_mm": {"slice": 10.0, "row": 1.25, "col": 1.25},
//         "slices": ["A001/s00.png", ...],
//         "masks":  ["A001/m00.png", ...] }
//     ]
//   }
//
// Relative paths are resolved against the manifest's directory. Prediction
// manifests carry masks only; their spacing may be omitted.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cardioaug/metrics.hpp"
#include "cardioaug/postprocess.hpp"

namespace cardioaug {

inline constexpr int kManifestSchemaVersion = 1;

enum class ManifestRole { Images, Predictions };

struct SubjectEntry {
    std::string id;
    Vendor vendor = Vendor::A;
    bool annotated = false;
    std::string phase;
    std::optional<Spacing3D> spacing;
    std::vector<std::filesystem::path> slices; // absolute after loading
    std::vector<std::filesystem::path> masks;

    Spacing2D slice_spacing() const;
};

struct DatasetManifest {
    ManifestRole role = ManifestRole::Images;
    std::vector<SubjectEntry> subjects;

    const SubjectEntry *find(const std::string &id) const;
    std::vector<SubjectTag> tags() const;
};

enum class FileCheck { None, Exists, Header };

/// Parses and validates; throws ValidationError naming the offending subject.
DatasetManifest parse_manifest(const std::string &json_text, const std::filesystem::path &base_dir,
                               FileCheck check = FileCheck::Header);
DatasetManifest load_manifest(const std::filesystem::path &path, FileCheck check = FileCheck::Header);

/// Serializes with paths written relative to `base_dir` when possible.
std::string manifest_to_json(const DatasetManifest &m, const std::filesystem::path &base_dir);
void save_manifest(const std::filesystem::path &path, const DatasetManifest &m);

/// Label volume assembled from a subject's mask files.
LabelVolume load_label_volume(const SubjectEntry &subject, const Spacing3D &fallback_spacing = {});

} // namespace cardioaug
