#include "cardioaug/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cardioaug/hashing.hpp"
#include "cardioaug/png_io.hpp"

namespace cardioaug {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slice_name(std::size_t slice) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slice_%03zu", slice);
    return buf;
}

std::string epoch_suffix(int epoch) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_e%02d", epoch);
    return buf;
}

struct SliceTask {
    std::size_t subject = 0;
    std::size_t slice = 0;
};

std::vector<SliceTask> slice_tasks(const DatasetManifest &m) {
    std::vector<SliceTask> tasks;
    for (std::size_t s = 0; s < m.subjects.size(); ++s) {
        for (std::size_t i = 0; i < m.subjects[s].slices.size(); ++i) {
            tasks.push_back({s, i});
        }
    }
    return tasks;
}

json failures_json(const std::vector<Failure> &failures) {
    json arr = json::array();
    for (const auto &f : failures) {
        arr.push_back({{"subject", f.subject}, {"slice", f.slice}, {"error", f.message}});
    }
    return arr;
}

void write_json(const fs::path &path, const json &j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

// Collects per-task failures in task order.
class FailureLog {
  public:
    explicit FailureLog(std::size_t n) : slots_(n) {}
    void record(std::size_t task, Failure f) { slots_[task] = std::move(f); }
    std::vector<Failure> collect() const {
        std::vector<Failure> out;
        for (const auto &f : slots_) {
            if (f) {
                out.push_back(*f);
            }
        }
        return out;
    }

  private:
    std::vector<std::optional<Failure>> slots_;
};

} // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn) {
    if (n == 0) {
        return;
    }
    const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(n)));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back(body);
        }
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

RunSummary run_preprocess(const DatasetManifest &manifest, const PipelineConfig &config, const fs::path &out_dir,
                          int threads) {
    config.validate();
    fs::create_directories(out_dir);
    const auto tasks = slice_tasks(manifest);
    std::vector<json> entries(tasks.size());
    FailureLog failures(tasks.size());

    parallel_for(tasks.size(), threads, [&](std::size_t t) {
        const SubjectEntry &subj = manifest.subjects[tasks[t].subject];
        const std::size_t i = tasks[t].slice;
        try {
            const Image2D raw = read_image_raw(subj.slices[i], subj.slice_spacing());
            std::optional<LabelMask2D> mask;
            if (subj.annotated) {
                mask = read_mask(subj.masks[i]);
            }
            const CroppedSlice result = preprocess_slice(raw, mask, config.nlm);
            const fs::path img_rel = fs::path("images") / subj.id / (slice_name(i) + ".png");
            write_image_unit16(out_dir / img_rel, result.image);
            json e = {{"subject", subj.id},
                      {"slice", i},
                      {"input", subj.slices[i].generic_string()},
                      {"input_sha256", sha256_file(subj.slices[i])},
                      {"output", img_rel.generic_string()},
                      {"output_sha256", sha256_file(out_dir / img_rel)}};
            if (result.mask) {
                const fs::path mask_rel = fs::path("masks") / subj.id / (slice_name(i) + ".png");
                write_mask(out_dir / mask_rel, *result.mask);
                e["mask_input"] = subj.masks[i].generic_string();
                e["mask_input_sha256"] = sha256_file(subj.masks[i]);
                e["mask_output"] = mask_rel.generic_string();
                e["mask_output_sha256"] = sha256_file(out_dir / mask_rel);
            }
            entries[t] = std::move(e);
        } catch (const std::exception &ex) {
            failures.record(t, {subj.id, static_cast<int>(i), ex.what()});
        }
    });

    RunSummary summary;
    summary.failures = failures.collect();
    std::set<std::string> failed;
    for (const auto &f : summary.failures) {
        failed.insert(f.subject);
    }

    DatasetManifest out_manifest;
    out_manifest.role = ManifestRole::Images;
    for (const auto &subj : manifest.subjects) {
        if (failed.contains(subj.id)) {
            continue;
        }
        SubjectEntry e = subj;
        e.slices.clear();
        e.masks.clear();
        for (std::size_t i = 0; i < subj.slices.size(); ++i) {
            e.slices.push_back(fs::absolute(out_dir / "images" / subj.id / (slice_name(i) + ".png")));
            if (subj.annotated) {
                e.masks.push_back(fs::absolute(out_dir / "masks" / subj.id / (slice_name(i) + ".png")));
            }
        }
        out_manifest.subjects.push_back(std::move(e));
    }
    save_manifest(out_dir / "manifest.json", out_manifest);

    json prov_entries = json::array();
    for (auto &e : entries) {
        if (!e.is_null()) {
            prov_entries.push_back(std::move(e));
            ++summary.written;
        }
    }
    write_json(out_dir / "provenance.json", {{"stage", "preprocess"},
                                             {"nlm", config.nlm},
                                             {"target_size", kCanvasSize},
                                             {"entries", prov_entries},
                                             {"failures", failures_json(summary.failures)}});
    return summary;
}

RunSummary run_augment(const DatasetManifest &manifest, const PipelineConfig &config, const fs::path &out_dir,
                       const AugmentOptions &opts) {
    config.validate();
    if (opts.epochs < 0) {
        throw ValidationError("epochs must be >= 0");
    }
    DatasetManifest selected;
    for (const auto &s : manifest.subjects) {
        if (!s.annotated) {
            if (opts.annotated_only) {
                continue;
            }
            throw ValidationError("augmentation requires annotated subjects: subject " + s.id);
        }
        selected.subjects.push_back(s);
    }
    RunSummary summary;
    if (opts.epochs == 0) {
        return summary;
    }
    fs::create_directories(out_dir);

    const auto tasks = slice_tasks(selected);
    std::vector<json> entries(tasks.size() * static_cast<std::size_t>(opts.epochs));
    FailureLog failures(tasks.size());

    parallel_for(tasks.size(), opts.threads, [&](std::size_t t) {
        const SubjectEntry &subj = selected.subjects[tasks[t].subject];
        const std::size_t i = tasks[t].slice;
        try {
            const SlicePair source{read_image_unit(subj.slices[i], subj.slice_spacing()), read_mask(subj.masks[i])};
            const fs::path src_image = fs::absolute(subj.slices[i]).lexically_normal();
            const fs::path src_mask = fs::absolute(subj.masks[i]).lexically_normal();
            const std::string src_image_hash = sha256_file(src_image);
            const std::string src_mask_hash = sha256_file(src_mask);
            for (int epoch = 0; epoch < opts.epochs; ++epoch) {
                const SeedSpec seed{config.seed, subj.id, static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(epoch)};
                RandomStream stream = make_stream(seed);
                const TransformStack stack = sample_stack(config.augment, stream);
                const SlicePair out = apply_stack(source, stack);

                const std::string stem = slice_name(i) + epoch_suffix(epoch);
                const fs::path img_rel = fs::path(subj.id) / (stem + "_image.png");
                const fs::path mask_rel = fs::path(subj.id) / (stem + "_mask.png");
                const fs::path recipe_rel = fs::path(subj.id) / (stem + "_recipe.json");
                write_image_unit16(out_dir / img_rel, out.image);
                write_mask(out_dir / mask_rel, out.mask);
                const std::string img_hash = sha256_file(out_dir / img_rel);
                const std::string mask_hash = sha256_file(out_dir / mask_rel);

                const json recipe = {{"schema_version", 1},
                                     {"subject", subj.id},
                                     {"vendor", to_string(subj.vendor)},
                                     {"slice", i},
                                     {"epoch", epoch},
                                     {"seed", seed},
                                     {"source_image", src_image.generic_string()},
                                     {"source_image_sha256", src_image_hash},
                                     {"source_mask", src_mask.generic_string()},
                                     {"source_mask_sha256", src_mask_hash},
                                     {"stack", stack_to_json(stack)},
                                     {"outputs",
                                      {{"image", img_rel.generic_string()},
                                       {"image_sha256", img_hash},
                                       {"mask", mask_rel.generic_string()},
                                       {"mask_sha256", mask_hash}}}};
                write_json(out_dir / recipe_rel, recipe);
                entries[t * static_cast<std::size_t>(opts.epochs) + static_cast<std::size_t>(epoch)] = {
                    {"subject", subj.id},
                    {"slice", i},
                    {"epoch", epoch},
                    {"recipe", recipe_rel.generic_string()},
                    {"recipe_sha256", sha256_file(out_dir / recipe_rel)},
                    {"image_sha256", img_hash},
                    {"mask_sha256", mask_hash}};
            }
        } catch (const std::exception &ex) {
            failures.record(t, {subj.id, static_cast<int>(i), ex.what()});
        }
    });

    summary.failures = failures.collect();
    json prov_entries = json::array();
    for (auto &e : entries) {
        if (!e.is_null()) {
            prov_entries.push_back(std::move(e));
            ++summary.written;
        }
    }
    write_json(out_dir / "provenance.json", {{"stage", "augment"},
                                             {"seed", config.seed},
                                             {"epochs", opts.epochs},
                                             {"policy", config.augment},
                                             {"entries", prov_entries},
                                             {"failures", failures_json(summary.failures)}});
    return summary;
}

bool replay_recipe(const fs::path &recipe_path, const fs::path &out_dir) {
    const json recipe = read_json(recipe_path);
    try {
        const fs::path src_image = recipe.at("source_image").get<std::string>();
        const fs::path src_mask = recipe.at("source_mask").get<std::string>();
        if (sha256_file(src_image) != recipe.at("source_image_sha256").get<std::string>() ||
            sha256_file(src_mask) != recipe.at("source_mask_sha256").get<std::string>()) {
            throw ValidationError("source slice no longer matches the recipe: " + recipe_path.string());
        }
        const TransformStack stack = stack_from_json(recipe.at("stack"));
        const SlicePair out = apply_stack({read_image_unit(src_image), read_mask(src_mask)}, stack);
        const auto &outputs = recipe.at("outputs");
        const fs::path img = out_dir / outputs.at("image").get<std::string>();
        const fs::path mask = out_dir / outputs.at("mask").get<std::string>();
        write_image_unit16(img, out.image);
        write_mask(mask, out.mask);
        return sha256_file(img) == outputs.at("image_sha256").get<std::string>() &&
               sha256_file(mask) == outputs.at("mask_sha256").get<std::string>();
    } catch (const json::exception &e) {
        throw ValidationError("malformed recipe " + recipe_path.string() + ": " + e.what());
    } catch (const std::invalid_argument &e) {
        throw ValidationError("malformed recipe " + recipe_path.string() + ": " + e.what());
    }
}

namespace {

void write_cleaned_subject(const fs::path &dir, const CleanedVolume &cleaned, SubjectEntry &entry) {
    entry.masks.clear();
    entry.slices.clear();
    for (std::size_t z = 0; z < cleaned.volume.slices().size(); ++z) {
        const fs::path p = dir / (slice_name(z) + ".png");
        write_mask(p, cleaned.volume.slices()[z]);
        entry.masks.push_back(fs::absolute(p));
    }
    json report = cleaned.report;
    write_json(dir / "components.json", report);
}

} // namespace

EvaluateResult run_evaluate(const DatasetManifest &predictions, const DatasetManifest &truths,
                            const PipelineConfig &config, const fs::path &out_dir, const EvaluateOptions &opts) {
    config.validate();
    fs::create_directories(out_dir);

    std::vector<std::string> unmatched;
    for (const auto &p : predictions.subjects) {
        if (!truths.find(p.id)) {
            unmatched.push_back(p.id);
        }
    }
    for (const auto &t : truths.subjects) {
        if (t.annotated && !predictions.find(t.id)) {
            unmatched.push_back(t.id);
        }
    }
    if (!unmatched.empty()) {
        std::string msg = "unmatched subject ids:";
        for (const auto &id : unmatched) {
            msg += " " + id;
        }
        throw ValidationError(msg);
    }

    const std::size_t n = predictions.subjects.size();
    std::vector<LabelVolume> pred_volumes(n);
    std::vector<std::optional<LabelVolume>> truth_volumes(n);
    std::vector<SubjectEntry> cleaned_entries(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
        const SubjectEntry &p = predictions.subjects[i];
        const SubjectEntry &t = *truths.find(p.id);
        const Spacing3D spacing = t.spacing.value_or(Spacing3D{});
        LabelVolume pred = load_label_volume(p, spacing);
        if (opts.postprocess) {
            CleanedVolume cleaned =
                remove_small_components(pred, config.postprocess.min_voxels, config.postprocess.connectivity);
            cleaned_entries[i] = p;
            write_cleaned_subject(out_dir / "postprocessed" / p.id, cleaned, cleaned_entries[i]);
            pred = std::move(cleaned.volume);
        }
        if (t.annotated) {
            truth_volumes[i] = load_label_volume(t, spacing);
        }
        pred_volumes[i] = std::move(pred);
    });

    if (opts.postprocess) {
        DatasetManifest cleaned;
        cleaned.role = ManifestRole::Predictions;
        cleaned.subjects = cleaned_entries;
        save_manifest(out_dir / "postprocessed" / "manifest.json", cleaned);
    }

    std::map<std::string, LabelVolume> pred_map, truth_map;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string &id = predictions.subjects[i].id;
        if (truth_volumes[i]) {
            truth_map.emplace(id, std::move(*truth_volumes[i]));
        }
        pred_map.emplace(id, std::move(pred_volumes[i]));
    }

    EvaluateResult result;
    result.report.hd_mode = config.metrics.hd_mode;
    try {
        result.report.rows.push_back(
            evaluate_dataset(pred_map, truth_map, truths.tags(), config.metrics.hd_mode, config.metrics.method));
    } catch (const std::invalid_argument &e) {
        throw ValidationError(e.what());
    }
    result.csv_path = out_dir / "report.csv";
    result.json_path = out_dir / "report.json";
    write_file_atomic(result.csv_path, report_to_csv(result.report));
    write_file_atomic(result.json_path, report_to_json(result.report));
    return result;
}

RunSummary run_postprocess(const DatasetManifest &manifest, const PipelineConfig &config, const fs::path &out_dir,
                           int threads) {
    config.validate();
    fs::create_directories(out_dir);
    const std::size_t n = manifest.subjects.size();
    std::vector<std::optional<SubjectEntry>> written(n);
    FailureLog failures(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const SubjectEntry &s = manifest.subjects[i];
        try {
            if (s.masks.empty()) {
                throw ValidationError("subject has no masks to postprocess");
            }
            const CleanedVolume cleaned = remove_small_components(load_label_volume(s), config.postprocess.min_voxels,
                                                                  config.postprocess.connectivity);
            SubjectEntry e = s;
            write_cleaned_subject(out_dir / s.id, cleaned, e);
            written[i] = std::move(e);
        } catch (const std::exception &ex) {
            failures.record(i, {s.id, -1, ex.what()});
        }
    });
    RunSummary summary;
    summary.failures = failures.collect();
    DatasetManifest out;
    out.role = ManifestRole::Predictions;
    for (auto &w : written) {
        if (w) {
            summary.written += w->masks.size();
            out.subjects.push_back(std::move(*w));
        }
    }
    save_manifest(out_dir / "manifest.json", out);
    return summary;
}

SlicePair synthetic_cardiac_pair(int size, std::uint64_t seed) {
    RandomStream rng(mix64(seed ^ 0x6a09e667f3bcc909ULL));
    const double s = size / 256.0;
    const double cx = size * 0.5 + rng.uniform(-8.0, 8.0) * s;
    const double cy = size * 0.5 + rng.uniform(-8.0, 8.0) * s;
    const double lv_r = rng.uniform(16.0, 22.0) * s;
    const double myo_r = lv_r + rng.uniform(6.0, 9.0) * s;
    const double rv_cx = cx - (myo_r + rng.uniform(10.0, 16.0) * s);
    const double rv_a = rng.uniform(14.0, 20.0) * s;
    const double rv_b = rng.uniform(22.0, 30.0) * s;

    Image2D image(size, size);
    LabelMask2D mask(size, size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double dx = c - cx;
            const double dy = r - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            const double ex = (c - rv_cx) / rv_a;
            const double ey = (r - cy) / rv_b;
            double v = 0.15 + 0.1 * std::sin(c * 0.05) * std::cos(r * 0.04);
            std::uint8_t label = 0;
            if (d <= lv_r) {
                v = 0.85;
                label = 1;
            } else if (d <= myo_r) {
                v = 0.35;
                label = 2;
            } else if (ex * ex + ey * ey <= 1.0) {
                v = 0.75;
                label = 3;
            }
            image(r, c) = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
            mask.set(r, c, label);
        }
    }
    return {std::move(image), std::move(mask)};
}

BenchResult run_bench(std::size_t pairs, int threads, std::uint64_t seed) {
    constexpr std::size_t kDistinctInputs = 8;
    std::vector<SlicePair> inputs;
    for (std::size_t i = 0; i < std::min(pairs, kDistinctInputs); ++i) {
        inputs.push_back(synthetic_cardiac_pair(kCanvasSize, seed + i));
    }
    AugmentPolicy policy;
    policy.probabilities.fill(1.0);
    std::vector<double> checksums(pairs, 0.0);

    const auto start = std::chrono::steady_clock::now();
    parallel_for(pairs, threads, [&](std::size_t i) {
        RandomStream stream = make_stream({seed, "bench", static_cast<std::uint32_t>(i), 0});
        const SlicePair out = apply_stack(inputs[i % inputs.size()], sample_stack(policy, stream));
        checksums[i] = out.image.values()[out.image.size() / 2];
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    BenchResult r;
    r.pairs = pairs;
    r.threads = std::max(1, threads);
    r.seconds = secs;
    r.pairs_per_second = secs > 0.0 ? static_cast<double>(pairs) / secs : 0.0;
    const int cores = std::min<int>(r.threads, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    r.pairs_per_second_per_core = r.pairs_per_second / cores;
    return r;
}

} // namespace cardioaug
