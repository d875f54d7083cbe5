#include "cardioaug/config.hpp"

#include <fstream>
#include <sstream>

#include "cardioaug/errors.hpp"

namespace cardioaug {

using nlohmann::json;

namespace {

constexpr std::array<const char *, kSlotCount> kSlotNames{"blur_sharpen", "intensity_shift", "gamma",
                                                          "shear",        "rotate",          "scale"};

json range_json(const ParamRange &r) { return json::array({r.lo, r.hi}); }

void read_range(const json &j, const char *key, ParamRange &r) {
    if (!j.contains(key)) {
        return;
    }
    const auto &v = j.at(key);
    if (!v.is_array() || v.size() != 2) {
        throw ValidationError(std::string("range '") + key + "' must be [lo, hi]");
    }
    r = {v[0].get<double>(), v[1].get<double>()};
}

template <typename T> void read_opt(const json &j, const char *key, T &out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

} // namespace

void PipelineConfig::validate() const {
    try {
        nlm.validate();
        augment.validate();
    } catch (const std::invalid_argument &e) {
        throw ValidationError(e.what());
    }
    if (postprocess.min_voxels < 1) {
        throw ValidationError("postprocess.min_voxels must be >= 1");
    }
}

void to_json(json &j, const TransformSpec &t) {
    j = {{"kind", to_string(t.kind)}, {"value", t.value}};
    if (t.kind == TransformKind::Sharpen) {
        j["amount"] = t.amount;
    }
}

void from_json(const json &j, TransformSpec &t) {
    t.kind = transform_kind_from_string(j.at("kind").get<std::string>());
    t.value = j.at("value").get<double>();
    t.amount = t.kind == TransformKind::Sharpen ? j.at("amount").get<double>() : 0.0;
}

void to_json(json &j, const AugmentPolicy &p) {
    json probs = json::object();
    for (std::size_t i = 0; i < kSlotCount; ++i) {
        probs[kSlotNames[i]] = p.probabilities[i];
    }
    const auto &r = p.ranges;
    j = {{"probabilities", probs},
         {"ranges",
          {{"sigma", range_json(r.sigma)},
           {"shift", range_json(r.shift)},
           {"gamma", range_json(r.gamma)},
           {"shear", range_json(r.shear)},
           {"rotate_deg", range_json(r.rotate_deg)},
           {"scale", range_json(r.scale)},
           {"sharpen_amount", range_json(r.sharpen_amount)}}},
         {"allow_range_override", p.allow_range_override}};
}

void from_json(const json &j, AugmentPolicy &p) {
    if (j.contains("probabilities")) {
        const auto &probs = j.at("probabilities");
        if (probs.is_number()) {
            p.probabilities.fill(probs.get<double>());
        } else {
            for (std::size_t i = 0; i < kSlotCount; ++i) {
                read_opt(probs, kSlotNames[i], p.probabilities[i]);
            }
        }
    }
    if (j.contains("ranges")) {
        const auto &r = j.at("ranges");
        read_range(r, "sigma", p.ranges.sigma);
        read_range(r, "shift", p.ranges.shift);
        read_range(r, "gamma", p.ranges.gamma);
        read_range(r, "shear", p.ranges.shear);
        read_range(r, "rotate_deg", p.ranges.rotate_deg);
        read_range(r, "scale", p.ranges.scale);
        read_range(r, "sharpen_amount", p.ranges.sharpen_amount);
    }
    read_opt(j, "allow_range_override", p.allow_range_override);
}

void to_json(json &j, const NlmParams &p) {
    j = {{"patch_radius", p.patch_radius},
         {"search_radius", p.search_radius},
         {"h", p.h},
         {"relative_h", p.relative_h},
         {"sigma", p.sigma}};
}

void from_json(const json &j, NlmParams &p) {
    read_opt(j, "patch_radius", p.patch_radius);
    read_opt(j, "search_radius", p.search_radius);
    read_opt(j, "h", p.h);
    read_opt(j, "relative_h", p.relative_h);
    read_opt(j, "sigma", p.sigma);
}

void to_json(json &j, const PipelineConfig &c) {
    j = {{"nlm", c.nlm},
         {"augment", c.augment},
         {"postprocess",
          {{"min_voxels", c.postprocess.min_voxels}, {"connectivity", to_string(c.postprocess.connectivity)}}},
         {"metrics", {{"hd_mode", to_string(c.metrics.hd_mode)}, {"method", c.metrics.method}}},
         {"seed", c.seed},
         {"output_dir", c.output_dir}};
}

void from_json(const json &j, PipelineConfig &c) {
    if (j.contains("nlm")) {
        from_json(j.at("nlm"), c.nlm);
    }
    if (j.contains("augment")) {
        from_json(j.at("augment"), c.augment);
    }
    if (j.contains("postprocess")) {
        const auto &p = j.at("postprocess");
        read_opt(p, "min_voxels", c.postprocess.min_voxels);
        if (p.contains("connectivity")) {
            c.postprocess.connectivity = connectivity_from_string(p.at("connectivity").get<std::string>());
        }
    }
    if (j.contains("metrics")) {
        const auto &m = j.at("metrics");
        if (m.contains("hd_mode")) {
            c.metrics.hd_mode = hd_mode_from_string(m.at("hd_mode").get<std::string>());
        }
        read_opt(m, "method", c.metrics.method);
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "output_dir", c.output_dir);
}

void to_json(json &j, const SeedSpec &s) {
    j = {{"global_seed", s.global_seed}, {"subject", s.subject}, {"slice", s.slice}, {"epoch", s.epoch}};
}

void from_json(const json &j, SeedSpec &s) {
    s.global_seed = j.at("global_seed").get<std::uint64_t>();
    s.subject = j.at("subject").get<std::string>();
    s.slice = j.at("slice").get<std::uint32_t>();
    s.epoch = j.at("epoch").get<std::uint32_t>();
}

void to_json(json &j, const ComponentReport &r) {
    json classes = json::object();
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
        json list = json::array();
        for (const auto &e : r.per_class[k]) {
            list.push_back({{"id", e.id}, {"voxels", e.voxels}, {"removed", e.removed}});
        }
        classes[std::string(class_name(static_cast<std::uint8_t>(k + 1)))] = list;
    }
    j = {{"min_voxels", r.min_voxels}, {"connectivity", to_string(r.connectivity)}, {"classes", classes}};
}

json stack_to_json(const TransformStack &stack) {
    json arr = json::array();
    for (const auto &t : stack) {
        arr.push_back(t);
    }
    return arr;
}

TransformStack stack_from_json(const json &j) {
    TransformStack stack;
    for (const auto &t : j) {
        stack.push_back(t.get<TransformSpec>());
    }
    validate_stack(stack);
    return stack;
}

PipelineConfig parse_config(const std::string &json_text) {
    PipelineConfig c;
    try {
        from_json(json::parse(json_text), c);
    } catch (const json::exception &e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace cardioaug
