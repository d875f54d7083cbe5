// config.hpp - pipeline configuration and JSON forms of policies and stacks.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cardioaug/augment.hpp"
#include "cardioaug/metrics.hpp"
#include "cardioaug/postprocess.hpp"
#include "cardioaug/preprocess.hpp"

namespace cardioaug {

struct PostprocessSettings {
    std::size_t min_voxels = kDefaultMinVoxels;
    Connectivity connectivity = Connectivity::Volumetric26;
};

struct MetricSettings {
    HdMode hd_mode = HdMode::Max;
    std::string method = "Ours";
};

struct PipelineConfig {
    NlmParams nlm{};
    AugmentPolicy augment{};
    PostprocessSettings postprocess{};
    MetricSettings metrics{};
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    void validate() const;
};

void to_json(nlohmann::json &j, const TransformSpec &t);
void from_json(const nlohmann::json &j, TransformSpec &t);
void to_json(nlohmann::json &j, const AugmentPolicy &p);
void from_json(const nlohmann::json &j, AugmentPolicy &p);
void to_json(nlohmann::json &j, const NlmParams &p);
void from_json(const nlohmann::json &j, NlmParams &p);
void to_json(nlohmann::json &j, const PipelineConfig &c);
void from_json(const nlohmann::json &j, PipelineConfig &c);
void to_json(nlohmann::json &j, const SeedSpec &s);
void from_json(const nlohmann::json &j, SeedSpec &s);
void to_json(nlohmann::json &j, const ComponentReport &r);

nlohmann::json stack_to_json(const TransformStack &stack);
TransformStack stack_from_json(const nlohmann::json &j);

/// Missing keys keep their defaults. Throws ValidationError.
PipelineConfig parse_config(const std::string &json_text);
PipelineConfig load_config(const std::filesystem::path &path);

} // namespace cardioaug
