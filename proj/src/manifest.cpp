#include "cardioaug/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cardioaug/errors.hpp"
#include "cardioaug/png_io.hpp"

namespace cardioaug {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string subject_label(const json &s, std::size_t index) {
    if (s.is_object() && s.contains("id") && s["id"].is_string()) {
        return s["id"].get<std::string>();
    }
    return "#" + std::to_string(index);
}

std::vector<fs::path> read_paths(const json &s, const char *key, const fs::path &base, const std::string &who) {
    std::vector<fs::path> out;
    if (!s.contains(key)) {
        return out;
    }
    if (!s[key].is_array()) {
        throw ValidationError(std::string("schema error: '") + key + "' must be an array: subject " + who);
    }
    for (const auto &p : s[key]) {
        if (!p.is_string()) {
            throw ValidationError(std::string("schema error: '") + key + "' entries must be strings: subject " + who);
        }
        fs::path path = p.get<std::string>();
        out.push_back(path.is_absolute() ? path : (base / path).lexically_normal());
    }
    return out;
}

void check_files(const std::vector<fs::path> &paths, FileCheck check, const std::string &who) {
    for (const auto &p : paths) {
        if (check == FileCheck::None) {
            return;
        }
        if (!fs::is_regular_file(p)) {
            throw ValidationError("missing file " + p.string() + ": subject " + who);
        }
        if (check == FileCheck::Header && !png_header_readable(p)) {
            throw ValidationError("undecodable PNG " + p.string() + ": subject " + who);
        }
    }
}

fs::path relative_if_possible(const fs::path &p, const fs::path &base) {
    if (base.empty()) {
        return p;
    }
    const fs::path rel = p.lexically_relative(base);
    return rel.empty() ? p : rel;
}

} // namespace

Spacing2D SubjectEntry::slice_spacing() const {
    const Spacing3D s = spacing.value_or(Spacing3D{});
    return {s.row_mm, s.col_mm};
}

const SubjectEntry *DatasetManifest::find(const std::string &id) const {
    for (const auto &s : subjects) {
        if (s.id == id) {
            return &s;
        }
    }
    return nullptr;
}

std::vector<SubjectTag> DatasetManifest::tags() const {
    std::vector<SubjectTag> out;
    for (const auto &s : subjects) {
        out.push_back({s.id, s.vendor});
    }
    return out;
}

DatasetManifest parse_manifest(const std::string &json_text, const fs::path &base_dir, FileCheck check) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError("schema error: manifest must be a JSON object");
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer() ||
        doc["schema_version"].get<int>() != kManifestSchemaVersion) {
        throw ValidationError("schema error: schema_version must be " + std::to_string(kManifestSchemaVersion));
    }
    DatasetManifest m;
    const std::string role = doc.value("role", "images");
    if (role == "images") {
        m.role = ManifestRole::Images;
    } else if (role == "predictions") {
        m.role = ManifestRole::Predictions;
    } else {
        throw ValidationError("schema error: role must be 'images' or 'predictions'");
    }
    if (!doc.contains("subjects") || !doc["subjects"].is_array()) {
        throw ValidationError("schema error: 'subjects' array is required");
    }

    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto &s : doc["subjects"]) {
        const std::string who = subject_label(s, index++);
        if (!s.is_object()) {
            throw ValidationError("schema error: subject entries must be objects: subject " + who);
        }
        SubjectEntry e;
        if (!s.contains("id") || !s["id"].is_string() || s["id"].get<std::string>().empty()) {
            throw ValidationError("schema error: missing id: subject " + who);
        }
        e.id = s["id"].get<std::string>();
        if (!seen.insert(e.id).second) {
            throw ValidationError("duplicate subject id: subject " + who);
        }
        if (!s.contains("vendor") || !s["vendor"].is_string()) {
            throw ValidationError("schema error: missing vendor: subject " + who);
        }
        try {
            e.vendor = vendor_from_string(s["vendor"].get<std::string>());
        } catch (const std::invalid_argument &ex) {
            throw ValidationError(std::string("schema error: ") + ex.what() + ": subject " + who);
        }
        if (s.contains("annotated") && !s["annotated"].is_boolean()) {
            throw ValidationError("schema error: 'annotated' must be a boolean: subject " + who);
        }
        e.annotated = s.value("annotated", m.role == ManifestRole::Predictions);
        e.phase = s.value("phase", "");
        if (s.contains("spacing_mm")) {
            const auto &sp = s["spacing_mm"];
            if (!sp.is_object() || !sp.contains("slice") || !sp.contains("row") || !sp.contains("col") ||
                !sp["slice"].is_number() || !sp["row"].is_number() || !sp["col"].is_number()) {
                throw ValidationError("schema error: spacing_mm needs numeric slice/row/col: subject " + who);
            }
            Spacing3D v{sp["slice"].get<double>(), sp["row"].get<double>(), sp["col"].get<double>()};
            if (!(v.slice_mm > 0.0 && v.row_mm > 0.0 && v.col_mm > 0.0)) {
                throw ValidationError("spacing must be positive: subject " + who);
            }
            e.spacing = v;
        } else if (m.role == ManifestRole::Images) {
            throw ValidationError("schema error: missing spacing_mm: subject " + who);
        }
        e.slices = read_paths(s, "slices", base_dir, who);
        e.masks = read_paths(s, "masks", base_dir, who);

        if (m.role == ManifestRole::Images) {
            if (e.annotated && e.masks.size() != e.slices.size()) {
                throw ValidationError("mask count mismatch: subject " + e.id);
            }
            if (!e.annotated && !e.masks.empty()) {
                throw ValidationError("unannotated subject lists masks: subject " + e.id);
            }
        } else if (e.masks.empty()) {
            throw ValidationError("prediction subject has no masks: subject " + e.id);
        }
        check_files(e.slices, check, e.id);
        check_files(e.masks, check, e.id);
        m.subjects.push_back(std::move(e));
    }
    return m;
}

DatasetManifest load_manifest(const fs::path &path, FileCheck check) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open manifest " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), fs::absolute(path).parent_path(), check);
}

std::string manifest_to_json(const DatasetManifest &m, const fs::path &base_dir) {
    json subjects = json::array();
    for (const auto &s : m.subjects) {
        json e = {{"id", s.id}, {"vendor", to_string(s.vendor)}, {"annotated", s.annotated}};
        if (!s.phase.empty()) {
            e["phase"] = s.phase;
        }
        if (s.spacing) {
            e["spacing_mm"] = {{"slice", s.spacing->slice_mm}, {"row", s.spacing->row_mm}, {"col", s.spacing->col_mm}};
        }
        json slices = json::array();
        for (const auto &p : s.slices) {
            slices.push_back(relative_if_possible(p, base_dir).generic_string());
        }
        json masks = json::array();
        for (const auto &p : s.masks) {
            masks.push_back(relative_if_possible(p, base_dir).generic_string());
        }
        if (m.role == ManifestRole::Images || !s.slices.empty()) {
            e["slices"] = slices;
        }
        if (!s.masks.empty()) {
            e["masks"] = masks;
        }
        subjects.push_back(std::move(e));
    }
    json doc = {{"schema_version", kManifestSchemaVersion},
                {"role", m.role == ManifestRole::Images ? "images" : "predictions"},
                {"subjects", subjects}};
    return doc.dump(2) + "\n";
}

void save_manifest(const fs::path &path, const DatasetManifest &m) {
    write_file_atomic(path, manifest_to_json(m, fs::absolute(path).parent_path()));
}

LabelVolume load_label_volume(const SubjectEntry &subject, const Spacing3D &fallback_spacing) {
    std::vector<LabelMask2D> slices;
    slices.reserve(subject.masks.size());
    for (const auto &p : subject.masks) {
        slices.push_back(read_mask(p));
    }
    try {
        return LabelVolume(std::move(slices), subject.spacing.value_or(fallback_spacing));
    } catch (const std::invalid_argument &e) {
        throw IoError(std::string(e.what()) + ": subject " + subject.id);
    }
}

} // namespace cardioaug
