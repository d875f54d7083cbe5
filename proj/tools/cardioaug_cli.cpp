// cardioaug - command-line front end for preprocessing, stacked augmentation,
// postprocessing, evaluation and the loss-kernel self check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cardioaug/errors.hpp"
#include "cardioaug/losscheck.hpp"
#include "cardioaug/pipeline.hpp"
#include "cardioaug/png_io.hpp"

namespace fs = std::filesystem;
using namespace cardioaug;

namespace {

struct CommonFlags {
    std::string manifest;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::optional<std::string> hd_mode;
    std::optional<std::string> connectivity;
};

void add_common(CLI::App *cmd, CommonFlags &f, bool needs_manifest) {
    auto *m = cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON)");
    if (needs_manifest) {
        m->required();
    }
    cmd->add_option("--config", f.config, "Pipeline config (JSON)");
    cmd->add_option("--out", f.out, "Output directory (default: config output_dir)");
    cmd->add_option("--seed", f.seed, "Global seed (overrides config)");
    cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
}

PipelineConfig resolve_config(const CommonFlags &f) {
    PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
    if (f.seed) {
        c.seed = *f.seed;
    }
    try {
        if (f.hd_mode) {
            c.metrics.hd_mode = hd_mode_from_string(*f.hd_mode);
        }
        if (f.connectivity) {
            c.postprocess.connectivity = connectivity_from_string(*f.connectivity);
        }
    } catch (const std::invalid_argument &e) {
        throw ValidationError(e.what());
    }
    c.validate();
    return c;
}

fs::path out_dir(const CommonFlags &f, const PipelineConfig &c) { return f.out.empty() ? fs::path(c.output_dir) : fs::path(f.out); }

int report_summary(const char *stage, const RunSummary &s) {
    std::cerr << stage << ": wrote " << s.written << " item(s), " << s.failures.size() << " failure(s)\n";
    for (const auto &f : s.failures) {
        std::cerr << "  error: subject " << f.subject;
        if (f.slice >= 0) {
            std::cerr << " slice " << f.slice;
        }
        std::cerr << ": " << f.message << "\n";
    }
    return s.exit_code();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Cardiac MR slice preprocessing, stacked augmentation and segmentation evaluation"};
    app.require_subcommand(1);

    CommonFlags pre_flags, aug_flags, eval_flags, post_flags, check_flags, bench_flags;

    auto *pre = app.add_subcommand("preprocess", "Denoise, normalize and crop/pad every slice to 256x256");
    add_common(pre, pre_flags, true);

    auto *aug = app.add_subcommand("augment", "Write stacked augmentations and replay recipes");
    add_common(aug, aug_flags, false);
    int epochs = 1;
    bool annotated_only = false;
    std::string replay;
    aug->add_option("--epochs", epochs, "Augmented copies per slice")->check(CLI::NonNegativeNumber);
    aug->add_flag("--annotated-only", annotated_only, "Skip unannotated subjects instead of failing");
    aug->add_option("--replay", replay, "Replay a recipe file into --out and verify its hashes");

    auto *eval = app.add_subcommand("evaluate", "Per-vendor Dice and Hausdorff report");
    add_common(eval, eval_flags, true);
    std::string pred_manifest;
    bool postprocess_flag = false;
    eval->add_option("--predictions", pred_manifest, "Prediction manifest (role: predictions)")->required();
    eval->add_flag("--postprocess", postprocess_flag, "Remove small components before scoring");
    eval->add_option("--hd-mode", eval_flags.hd_mode, "Hausdorff variant: max or p95");
    eval->add_option("--connectivity", eval_flags.connectivity, "Component connectivity: 2d8 or 3d26");

    auto *post = app.add_subcommand("postprocess", "Remove components smaller than min_voxels");
    add_common(post, post_flags, true);
    post->add_option("--connectivity", post_flags.connectivity, "Component connectivity: 2d8 or 3d26");

    auto *check = app.add_subcommand("losscheck", "Verify loss kernels and their gradients");
    add_common(check, check_flags, false);

    auto *bench = app.add_subcommand("bench", "Measure augmentation throughput on synthetic 256x256 pairs");
    add_common(bench, bench_flags, false);
    std::size_t bench_pairs = 1000;
    bench->add_option("--pairs", bench_pairs, "Number of pairs to augment");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pre) {
            const PipelineConfig cfg = resolve_config(pre_flags);
            const auto manifest = load_manifest(pre_flags.manifest, FileCheck::Exists);
            return report_summary("preprocess", run_preprocess(manifest, cfg, out_dir(pre_flags, cfg), pre_flags.threads));
        }
        if (*aug) {
            const PipelineConfig cfg = resolve_config(aug_flags);
            if (!replay.empty()) {
                const bool ok = replay_recipe(replay, out_dir(aug_flags, cfg));
                std::cerr << "replay: " << (ok ? "outputs match recorded hashes" : "HASH MISMATCH") << "\n";
                return ok ? kExitOk : kExitCheckFailure;
            }
            if (aug_flags.manifest.empty()) {
                throw ValidationError("augment needs --manifest (or --replay)");
            }
            const auto manifest = load_manifest(aug_flags.manifest, FileCheck::Exists);
            AugmentOptions opts{epochs, aug_flags.threads, annotated_only};
            return report_summary("augment", run_augment(manifest, cfg, out_dir(aug_flags, cfg), opts));
        }
        if (*eval) {
            const PipelineConfig cfg = resolve_config(eval_flags);
            const auto truths = load_manifest(eval_flags.manifest, FileCheck::Exists);
            const auto preds = load_manifest(pred_manifest, FileCheck::Exists);
            const auto result =
                run_evaluate(preds, truths, cfg, out_dir(eval_flags, cfg), {postprocess_flag, eval_flags.threads});
            std::cout << report_to_csv(result.report);
            return kExitOk;
        }
        if (*post) {
            const PipelineConfig cfg = resolve_config(post_flags);
            const auto manifest = load_manifest(post_flags.manifest, FileCheck::Exists);
            return report_summary("postprocess",
                                  run_postprocess(manifest, cfg, out_dir(post_flags, cfg), post_flags.threads));
        }
        if (*check) {
            const PipelineConfig cfg = resolve_config(check_flags);
            const LossCheckReport r = run_losscheck({.seed = cfg.seed});
            const std::string text = r.to_json();
            if (!check_flags.out.empty()) {
                write_file_atomic(fs::path(check_flags.out) / "losscheck.json", text);
            }
            std::cout << text;
            return r.passed() ? kExitOk : kExitCheckFailure;
        }
        if (*bench) {
            const PipelineConfig cfg = resolve_config(bench_flags);
            const BenchResult r = run_bench(bench_pairs, bench_flags.threads, cfg.seed);
            std::cout << nlohmann::json{{"pairs", r.pairs},
                                        {"threads", r.threads},
                                        {"seconds", r.seconds},
                                        {"pairs_per_second", r.pairs_per_second},
                                        {"pairs_per_second_per_core", r.pairs_per_second_per_core}}
                             .dump(2)
                      << "\n";
            return kExitOk;
        }
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartialFailure;
    }
    return kExitOk;
}
