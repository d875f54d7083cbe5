// Acceptance runner: one PASS/FAIL line per release criterion. Exit status is
// the number of failed criteria (0 = all passed).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "cardioaug/augment.hpp"
#include "cardioaug/hashing.hpp"
#include "cardioaug/losscheck.hpp"
#include "cardioaug/losses.hpp"
#include "cardioaug/metrics.hpp"
#include "cardioaug/png_io.hpp"
#include "cardioaug/postprocess.hpp"
#include "cardioaug/preprocess.hpp"
#include "oracles.hpp"
#include "support.hpp"

#ifndef CARDIOAUG_CLI
#error "CARDIOAUG_CLI must name the command-line binary"
#endif

using namespace cardioaug;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int run_cli(const std::string &args, const fs::path &log) {
    const std::string cmd = std::string("\"") + CARDIOAUG_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> hash_tree(const fs::path &root) {
    std::map<std::string, std::string> out;
    if (!fs::exists(root)) {
        return out;
    }
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
        }
    }
    return out;
}

LabelVolume random_volume(std::mt19937_64 &rng, int d, int h, int w, Spacing3D s, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> lab(1, 3);
    LabelVolume v(d, h, w, s);
    for (int z = 0; z < d; ++z) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (u(rng) < density) {
                    v.set(z, r, c, static_cast<std::uint8_t>(lab(rng)));
                }
            }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------

Outcome loss_kernel_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const LossCheckReport r = run_losscheck({});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t failed = 0;
    std::string first;
    for (const auto &c : r.checks) {
        if (!c.passed) {
            ++failed;
            if (first.empty()) {
                first = c.name;
            }
        }
    }
    const bool ok = r.passed() && r.max_relative_gradient_error < 1e-4 && secs < 10.0;
    return {ok, std::to_string(r.checks.size()) + " checks, " + std::to_string(failed) + " failed" +
                    (first.empty() ? "" : " (first: " + first + ")") + ", max rel grad err " +
                    fmt("%.2e", r.max_relative_gradient_error) + " over " + std::to_string(r.gradient_points) +
                    " points, " + fmt("%.2f", secs) + " s"};
}

Outcome composite_linearity() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto grid = [&](int h, int w) {
        std::vector<double> v(static_cast<std::size_t>(h) * w);
        for (double &x : v) {
            x = u(rng);
        }
        return RealGrid(h, w, 1, std::move(v));
    };
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const RealGrid x = grid(6, 5), xr = grid(6, 5), y = grid(6, 5), yr = grid(6, 5);
        std::vector<double> mw(30);
        for (std::size_t k = 0; k < mw.size(); ++k) {
            mw[k] = (rng() & 1) ? 1.0 : 0.0;
        }
        const LossValue g = plain_l1(y, xr);
        const LossValue a = attention_rec_loss(x, xr, AttentionMask(5, 6, mw), y, yr);
        for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
            worst = std::max(worst, std::abs(composite_rec_loss(g, a, lambda).value - (g.value + lambda * a.value)));
        }
    }
    const bool default_ok = composite_rec_loss({1.0, {}}, {0.5, {}}).value == 1.25;
    return {worst <= 1e-12 && default_ok && kDefaultLambda == 0.5,
            "max |composite - (g + lambda a)| = " + fmt("%.2e", worst) + " over 100 pairs x 4 lambdas; default lambda " +
                fmt("%.2f", kDefaultLambda)};
}

Outcome range_conformance() {
    const AugmentPolicy policy;
    std::size_t outside = 0, both = 0, params = 0;
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    for (std::uint32_t i = 0; i < 100000; ++i) {
        RandomStream s = make_stream({2024, "range", i, 0});
        const TransformStack st = sample_stack(policy, s);
        bool blur = false, sharpen = false;
        for (const auto &t : st) {
            ++params;
            bool ok = true;
            switch (t.kind) {
            case TransformKind::Blur:
                blur = true;
                ok = in(t.value, 0.1, 2.0);
                break;
            case TransformKind::Sharpen:
                sharpen = true;
                ok = in(t.value, 0.1, 2.0) && in(t.amount, 0.5, 1.5);
                break;
            case TransformKind::IntensityShift:
                ok = in(t.value, -0.05, 0.05);
                break;
            case TransformKind::Gamma:
                ok = in(t.value, 0.6, 1.7);
                break;
            case TransformKind::Shear:
                ok = in(t.value, -0.1, 0.1);
                break;
            case TransformKind::Rotate:
                ok = in(t.value, -15.0, 15.0);
                break;
            case TransformKind::Scale:
                ok = in(t.value, -0.1, 0.1);
                break;
            }
            outside += !ok;
        }
        both += blur && sharpen;
    }
    return {outside == 0 && both == 0, "100000 stacks, " + std::to_string(params) + " parameters, " +
                                           std::to_string(outside) + " out of range, " + std::to_string(both) +
                                           " with blur and sharpen"};
}

Outcome alignment() {
    const int n = 128;
    AugmentPolicy policy;
    policy.probabilities.fill(1.0);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> centre(44.0, 84.0), radius(8.0, 18.0);
    int within = 0;
    double worst = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const double cx = centre(rng), cy = centre(rng), rx = radius(rng), ry = radius(rng);
        Image2D img(n, n);
        LabelMask2D mask(n, n);
        double sx = 0.0, sy = 0.0, count = 0.0;
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const double q = (c - cx) * (c - cx) / (rx * rx) + (r - cy) * (r - cy) / (ry * ry);
                img(r, c) = 0.1 + 0.8 * std::exp(-q);
                if (q <= 1.0) {
                    mask.set(r, c, q < 0.4 ? 1 : 2);
                    sx += c;
                    sy += r;
                    count += 1.0;
                }
            }
        }
        RandomStream s = make_stream({7, "align", static_cast<std::uint32_t>(t), 0});
        const TransformStack st = sample_stack(policy, s);
        const SlicePair out = apply_stack({img, mask}, st);
        TransformStack spatial;
        for (const auto &x : st) {
            if (is_spatial(x.kind)) {
                spatial.push_back(x);
            }
        }
        // Content moves by the inverse of the pull mapping.
        const auto expected = build_spatial_affine(spatial, n, n).inverse().apply(sx / count, sy / count);
        double ox = 0.0, oy = 0.0, on = 0.0;
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                if (out.mask(r, c) != 0) {
                    ox += c;
                    oy += r;
                    on += 1.0;
                }
            }
        }
        const double err = on > 0 ? std::hypot(ox / on - expected[0], oy / on - expected[1]) : INFINITY;
        worst = std::max(worst, err);
        within += err <= 1.0;
    }
    const double frac = within / static_cast<double>(trials);
    return {frac >= 0.995, std::to_string(within) + "/" + std::to_string(trials) + " within 1 px (" +
                               fmt("%.1f", 100.0 * frac) + "%), worst " + fmt("%.3f", worst) + " px"};
}

// Raw 16-bit slices plus masks; returns the manifest path.
fs::path write_raw_dataset(const fs::path &root, int subjects, int slices, int w, int h) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> noise(0, 300);
    json subs = json::array();
    for (int s = 0; s < subjects; ++s) {
        const std::string id = "S" + std::to_string(s);
        json sl = json::array(), ms = json::array();
        for (int i = 0; i < slices; ++i) {
            std::vector<std::uint16_t> raw(static_cast<std::size_t>(w) * h);
            std::vector<std::uint8_t> lab(raw.size(), 0);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    const double d2 = (r - h / 2.0 - i) * (r - h / 2.0 - i) + (c - w / 2.0 + s) * (c - w / 2.0 + s);
                    const auto k = static_cast<std::size_t>(r) * w + c;
                    raw[k] = static_cast<std::uint16_t>(800 + noise(rng) + (d2 < 80 ? 2000 : 0));
                    lab[k] = d2 < 30 ? 1 : (d2 < 80 ? 2 : 0);
                }
            }
            const std::string ir = id + "/i" + std::to_string(i) + ".png";
            const std::string mr = id + "/m" + std::to_string(i) + ".png";
            testsupport::write_raw16(root / ir, w, h, raw);
            write_mask(root / mr, LabelMask2D(w, h, lab));
            sl.push_back(ir);
            ms.push_back(mr);
        }
        subs.push_back({{"id", id},
                        {"vendor", "A"},
                        {"annotated", true},
                        {"phase", "ED"},
                        {"spacing_mm", {{"slice", 8.0}, {"row", 1.3}, {"col", 1.3}}},
                        {"slices", sl},
                        {"masks", ms}});
    }
    const fs::path p = root / "raw.json";
    std::ofstream(p) << json{{"schema_version", 1}, {"role", "images"}, {"subjects", subs}}.dump(2);
    return p;
}

Outcome determinism(const fs::path &work) {
    const fs::path root = work / "determinism";
    fs::create_directories(root);
    const fs::path manifest = write_raw_dataset(root, 2, 3, 72, 60);
    if (run_cli("preprocess --manifest \"" + manifest.string() + "\" --out \"" + (root / "pre").string() +
                    "\" --threads 2",
                root / "pre.log") != 0) {
        return {false, "preprocess failed, see " + (root / "pre.log").string()};
    }
    const std::string pre = (root / "pre" / "manifest.json").string();
    std::vector<std::map<std::string, std::string>> trees;
    for (const auto &[name, threads] : {std::pair{"t1a", 1}, std::pair{"t8", 8}, std::pair{"t1b", 1}}) {
        const fs::path out = root / name;
        const int rc = run_cli("augment --manifest \"" + pre + "\" --epochs 2 --seed 99 --threads " +
                                   std::to_string(threads) + " --out \"" + out.string() + "\"",
                               root / (std::string(name) + ".log"));
        if (rc != 0) {
            return {false, std::string("augment exited ") + std::to_string(rc) + " for " + name};
        }
        trees.push_back(hash_tree(out));
    }
    std::size_t images = 0;
    for (const auto &[k, v] : trees[0]) {
        images += k.size() > 10 && k.compare(k.size() - 10, 10, "_image.png") == 0;
    }
    const bool same = trees[0] == trees[1] && trees[0] == trees[2];
    return {same && images == 12, std::to_string(trees[0].size()) + " files (" + std::to_string(images) +
                                      " augmented images) hashed; 1-thread vs 8-thread vs 1-thread rerun " +
                                      (same ? "identical" : "DIFFER")};
}

Outcome preprocess_conformance() {
    std::mt19937_64 rng(8);
    int bad_shape = 0, bad_range = 0;
    for (auto [w, h] : {std::pair{1, 1}, std::pair{7, 300}, std::pair{256, 256}, std::pair{300, 300}, std::pair{513, 97},
                        std::pair{255, 257}}) {
        const Image2D img = testsupport::random_image(w, h, rng, 0.0, 4000.0);
        const auto out = preprocess_slice(img, LabelMask2D(w, h), NlmParams{});
        bad_shape += out.image.width() != 256 || out.image.height() != 256 || out.mask->width() != 256 ||
                     out.mask->height() != 256;
        for (double v : out.image.values()) {
            bad_range += !(v >= 0.0 && v <= 1.0);
        }
    }
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Image2D img = testsupport::random_image(15, 15, rng, 0.0, 1000.0);
        const NlmParams p;
        const Image2D a = nlm_denoise(img, p);
        const Image2D b = oracle::nlm(img, p.patch_radius, p.search_radius, p.h, p.sigma);
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
        }
    }
    int nonzero = 0;
    for (auto [w, h] : {std::pair{5, 5}, std::pair{300, 200}, std::pair{256, 256}}) {
        const auto out = preprocess_slice(Image2D(w, h, {}, 1234.5), std::nullopt, NlmParams{});
        for (double v : out.image.values()) {
            nonzero += v != 0.0;
        }
    }
    return {bad_shape == 0 && bad_range == 0 && worst <= 1e-6 && nonzero == 0,
            "6 sizes: " + std::to_string(bad_shape) + " wrong shape, " + std::to_string(bad_range) +
                " values outside [0,1]; NLM vs oracle max diff " + fmt("%.2e", worst) +
                " on 20 images; constant inputs: " + std::to_string(nonzero) + " nonzero outputs"};
}

Outcome postprocess_threshold() {
    bool threshold_ok = true;
    for (auto conn : {Connectivity::Planar8, Connectivity::Volumetric26}) {
        for (std::size_t size : {29u, 30u}) {
            LabelVolume v(3, 8, 8);
            // Snake through three slices so the component is volumetric.
            for (std::size_t i = 0; i < size; ++i) {
                const int z = conn == Connectivity::Volumetric26 ? static_cast<int>(i / 10) : 0;
                const int k = conn == Connectivity::Volumetric26 ? static_cast<int>(i % 10) : static_cast<int>(i);
                v.set(z, k / 8, k % 8, 1);
            }
            const auto cleaned = remove_small_components(v, 30, conn);
            const bool kept = cleaned.volume == v;
            const bool removed = cleaned.volume == LabelVolume(3, 8, 8);
            threshold_ok = threshold_ok && (size == 29 ? removed : kept);
        }
    }
    std::mt19937_64 rng(16);
    std::uniform_int_distribution<int> side(1, 16);
    int mismatches = 0, not_idempotent = 0;
    for (int t = 0; t < 100; ++t) {
        const LabelVolume v = random_volume(rng, side(rng), side(rng), side(rng), {}, 0.15 + 0.3 * (t % 3));
        for (auto conn : {Connectivity::Planar8, Connectivity::Volumetric26}) {
            for (std::uint8_t cls = 1; cls <= 3; ++cls) {
                mismatches += connected_components(v, cls, conn).ids !=
                              oracle::component_ids(v, cls, conn == Connectivity::Volumetric26);
            }
            const auto once = remove_small_components(v, 30, conn);
            not_idempotent += !(remove_small_components(once.volume, 30, conn).volume == once.volume);
        }
    }
    return {threshold_ok && mismatches == 0 && not_idempotent == 0,
            std::string("29 removed / 30 kept: ") + (threshold_ok ? "yes" : "NO") + "; union-find mismatches " +
                std::to_string(mismatches) + " of 600 labelings; non-idempotent " + std::to_string(not_idempotent)};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> side(1, 12);
    std::uniform_real_distribution<double> sp(0.5, 3.0);
    int dice_bad = 0;
    double hd_worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int d = side(rng), h = side(rng), w = side(rng);
        const Spacing3D s{sp(rng), sp(rng), sp(rng)};
        const LabelVolume p = random_volume(rng, d, h, w, s, 0.1 + 0.1 * (t % 5));
        const LabelVolume q = random_volume(rng, d, h, w, s, 0.1 + 0.1 * (t % 4));
        for (std::uint8_t cls : kEvaluatedClasses) {
            dice_bad += dice(p, q, cls) != oracle::dice(p, q, cls);
            hd_worst = std::max(hd_worst, std::abs(hausdorff(p, q, cls).mm - oracle::hausdorff_max(p, q, cls)));
        }
    }
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    double scale_worst = 0.0;
    int scale_dice_bad = 0;
    for (int t = 0; t < 20; ++t) {
        const int d = side(rng), h = side(rng), w = side(rng);
        const Spacing3D s{sp(rng), sp(rng), sp(rng)};
        const double c = scale(rng);
        const Spacing3D cs{s.slice_mm * c, s.row_mm * c, s.col_mm * c};
        const LabelVolume p = random_volume(rng, d, h, w, s, 0.3);
        const LabelVolume q = random_volume(rng, d, h, w, s, 0.3);
        for (std::uint8_t cls : kEvaluatedClasses) {
            scale_worst = std::max(scale_worst, std::abs(hausdorff(p.with_spacing(cs), q.with_spacing(cs), cls).mm -
                                                         c * hausdorff(p, q, cls).mm));
            scale_dice_bad += dice(p.with_spacing(cs), q.with_spacing(cs), cls) != dice(p, q, cls);
        }
    }
    return {dice_bad == 0 && hd_worst <= 1e-9 && scale_worst <= 1e-9 && scale_dice_bad == 0,
            "100 pairs: dice mismatches " + std::to_string(dice_bad) + ", max HD error " + fmt("%.2e", hd_worst) +
                " mm; 20 scalings: max HD error " + fmt("%.2e", scale_worst) + " mm, dice changes " +
                std::to_string(scale_dice_bad)};
}

LabelMask2D block_mask(int n, int r0, int c0, int side, std::uint8_t cls) {
    LabelMask2D m(n, n);
    for (int r = r0; r < r0 + side; ++r) {
        for (int c = c0; c < c0 + side; ++c) {
            m.set(r, c, cls);
        }
    }
    return m;
}

Outcome report_fidelity(const fs::path &work) {
    const fs::path root = work / "report";
    fs::create_directories(root);
    const int n = 16;
    const std::vector<std::uint16_t> flat(static_cast<std::size_t>(n) * n, 1000);
    struct Subj {
        std::string id, vendor;
        std::optional<LabelMask2D> truth;
        LabelMask2D pred;
    };
    const LabelMask2D lv = block_mask(n, 4, 4, 4, 1);
    std::vector<Subj> subs{
        {"A1", "A", lv, lv},                       // Dice 1, HD 0
        {"A2", "A", lv, block_mask(n, 4, 6, 4, 1)}, // shifted 2 columns: Dice 0.5, HD 2 * 1.25 mm
        {"B1", "B", block_mask(n, 2, 2, 6, 2), block_mask(n, 2, 2, 6, 2)},
        {"C1", "C", std::nullopt, lv},
        {"D1", "D", std::nullopt, lv},
    };
    json truths = json::array(), preds = json::array();
    for (const auto &s : subs) {
        const std::string img = "img/" + s.id + ".png";
        testsupport::write_raw16(root / img, n, n, flat);
        json t = {{"id", s.id},
                  {"vendor", s.vendor},
                  {"annotated", s.truth.has_value()},
                  {"phase", "ES"},
                  {"spacing_mm", {{"slice", 10.0}, {"row", 1.0}, {"col", 1.25}}},
                  {"slices", {img}}};
        if (s.truth) {
            const std::string m = "gt/" + s.id + ".png";
            fs::create_directories(root / "gt");
            write_mask(root / m, *s.truth);
            t["masks"] = {m};
        }
        truths.push_back(t);
        const std::string pm = "pred/" + s.id + ".png";
        fs::create_directories(root / "pred");
        write_mask(root / pm, s.pred);
        preds.push_back({{"id", s.id}, {"vendor", s.vendor}, {"annotated", true}, {"masks", {pm}}});
    }
    std::ofstream(root / "truth.json") << json{{"schema_version", 1}, {"role", "images"}, {"subjects", truths}}.dump(2);
    std::ofstream(root / "pred.json") << json{{"schema_version", 1}, {"role", "predictions"}, {"subjects", preds}}.dump(2);

    const int rc = run_cli("evaluate --manifest \"" + (root / "truth.json").string() + "\" --predictions \"" +
                               (root / "pred.json").string() + "\" --out \"" + (root / "out").string() + "\"",
                           root / "evaluate.log");
    if (rc != 0) {
        return {false, "evaluate exited " + std::to_string(rc)};
    }
    const std::string csv = testsupport::read_text(root / "out" / "report.csv");

    std::string header = "method,hd_mode";
    for (const char *v : {"A", "B", "C", "D"}) {
        for (const char *c : {"LV", "MYO", "RV"}) {
            header += std::string(",") + v + "_" + c + "_Dice(%)," + v + "_" + c + "_HD(mm)";
        }
    }
    const std::string row = "Ours,max"
                            ",75.0,1.25,100.0,0.00,100.0,0.00"
                            ",100.0,0.00,100.0,0.00,100.0,0.00"
                            ",n/a,n/a,n/a,n/a,n/a,n/a"
                            ",n/a,n/a,n/a,n/a,n/a,n/a";
    const std::string expected = header + "\n" + row + "\n";
    const bool ok = csv == expected;
    std::string detail = "26 columns";
    detail += ok ? "; every cell matches the hand-computed values" : "; got:\n" + csv + "expected:\n" + expected;
    return {ok, detail};
}

Outcome performance(const fs::path &work) {
    const fs::path log = work / "bench.json";
    const int rc = run_cli("bench --pairs 1000 --threads 1", log);
    if (rc != 0) {
        return {false, "bench exited " + std::to_string(rc)};
    }
    const json j = json::parse(testsupport::read_text(log));
    const double rate = j.at("pairs_per_second_per_core").get<double>();
    return {rate >= 200.0, fmt("%.1f", rate) + " pairs/s/core on 256x256 (target >= 200)"};
}

} // namespace

int main() {
    testsupport::TempDir work("acceptance");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"loss-kernel suite", loss_kernel_suite},
        {"composite-loss linearity", composite_linearity},
        {"augmentation range conformance", range_conformance},
        {"alignment property", alignment},
        {"determinism", [&] { return determinism(work.path()); }},
        {"preprocess conformance", preprocess_conformance},
        {"postprocess threshold", postprocess_threshold},
        {"metric oracles", metric_oracles},
        {"report fidelity", [&] { return report_fidelity(work.path()); }},
        {"performance", [&] { return performance(work.path()); }},
    };
    int failed = 0;
    for (const auto &[name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %-32s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
