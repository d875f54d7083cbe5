// pipeline.hpp - batch drivers behind the command-line subcommands.
//
// Every driver fans work out over a fixed number of worker threads, but all
// outputs (files and JSON records) depend only on the inputs, the config and
// the seed, never on the thread count.

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cardioaug/config.hpp"
#include "cardioaug/errors.hpp"
#include "cardioaug/manifest.hpp"

namespace cardioaug {

/// Runs fn(0..n-1) on up to `threads` workers. Exceptions escaping `fn` are
/// rethrown after all workers finish (first by index).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn);

struct Failure {
    std::string subject;
    int slice = -1;
    std::string message;
};

struct RunSummary {
    std::size_t written = 0;
    std::vector<Failure> failures;

    int exit_code() const noexcept { return failures.empty() ? kExitOk : kExitPartialFailure; }
};

/// Writes images/<subject>/slice_NNN.png (16-bit), masks/<subject>/slice_NNN.png,
/// manifest.json (the preprocessed dataset) and provenance.json.
RunSummary run_preprocess(const DatasetManifest &manifest, const PipelineConfig &config,
                          const std::filesystem::path &out_dir, int threads = 1);

struct AugmentOptions {
    int epochs = 1;
    int threads = 1;
    /// Skip unannotated subjects instead of failing validation.
    bool annotated_only = false;
};

/// For each annotated (subject, slice, epoch) writes
///   <subject>/slice_NNN_eEE_image.png, _mask.png and _recipe.json
/// under `out_dir`, plus provenance.json. Input images are read as [0, 1]
/// (sample / max code), i.e. the output of run_preprocess.
RunSummary run_augment(const DatasetManifest &manifest, const PipelineConfig &config,
                       const std::filesystem::path &out_dir, const AugmentOptions &opts);

/// Re-applies a recipe to its source slice and writes the pair into
/// `out_dir`. Returns true when both outputs hash to the recorded digests.
bool replay_recipe(const std::filesystem::path &recipe_path, const std::filesystem::path &out_dir);

struct EvaluateOptions {
    bool postprocess = false;
    int threads = 1;
};

struct EvaluateResult {
    MetricReport report;
    std::filesystem::path csv_path;
    std::filesystem::path json_path;
};

/// Optional small-component removal (cleaned masks written to
/// postprocessed/<subject>/), then per-vendor metrics written as report.csv
/// and report.json.
EvaluateResult run_evaluate(const DatasetManifest &predictions, const DatasetManifest &truths,
                            const PipelineConfig &config, const std::filesystem::path &out_dir,
                            const EvaluateOptions &opts);

/// Cleans every subject's masks; writes <subject>/slice_NNN.png,
/// <subject>/components.json and a predictions manifest.
RunSummary run_postprocess(const DatasetManifest &manifest, const PipelineConfig &config,
                           const std::filesystem::path &out_dir, int threads = 1);

struct BenchResult {
    std::size_t pairs = 0;
    int threads = 1;
    double seconds = 0.0;
    double pairs_per_second = 0.0;
    double pairs_per_second_per_core = 0.0;
};

/// Augments `pairs` synthetic 256x256 pairs with every slot forced on.
BenchResult run_bench(std::size_t pairs, int threads, std::uint64_t seed = 0);

/// Synthetic normalized slice with elliptical LV/MYO/RV structures.
SlicePair synthetic_cardiac_pair(int size, std::uint64_t seed);

} // namespace cardioaug
