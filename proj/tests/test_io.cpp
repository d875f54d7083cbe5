#include <doctest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "cardioaug/config.hpp"
#include "cardioaug/errors.hpp"
#include "cardioaug/hashing.hpp"
#include "cardioaug/manifest.hpp"
#include "cardioaug/pipeline.hpp"
#include "cardioaug/png_io.hpp"
#include "support.hpp"

using namespace cardioaug;
using nlohmann::json;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct SubjectSpec {
    std::string id;
    std::string vendor = "A";
    int slices = 2;
    int width = 40;
    int height = 32;
    bool annotated = true;
    int masks = -1; // -1: one per slice when annotated
};

// Writes raw 16-bit slices and label masks under `root` and returns the
// manifest JSON with paths relative to `root`.
json write_dataset(const fs::path &root, const std::vector<SubjectSpec> &specs, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> code(0, 4000);
    json subjects = json::array();
    for (const auto &s : specs) {
        json slices = json::array(), masks = json::array();
        for (int i = 0; i < s.slices; ++i) {
            std::vector<std::uint16_t> raw(static_cast<std::size_t>(s.width) * s.height);
            std::vector<std::uint8_t> lab(raw.size(), 0);
            for (int r = 0; r < s.height; ++r) {
                for (int c = 0; c < s.width; ++c) {
                    const double d2 = (r - s.height / 2.0) * (r - s.height / 2.0) + (c - s.width / 2.0) * (c - s.width / 2.0);
                    raw[static_cast<std::size_t>(r) * s.width + c] =
                        static_cast<std::uint16_t>(500 + code(rng) / 10 + (d2 < 60 ? 2500 : 0));
                    lab[static_cast<std::size_t>(r) * s.width + c] = d2 < 30 ? 1 : (d2 < 60 ? 2 : 0);
                }
            }
            const std::string img_rel = s.id + "/img_" + std::to_string(i) + ".png";
            testsupport::write_raw16(root / img_rel, s.width, s.height, raw);
            slices.push_back(img_rel);
            const int n_masks = s.masks < 0 ? (s.annotated ? s.slices : 0) : s.masks;
            if (i < n_masks) {
                const std::string mask_rel = s.id + "/mask_" + std::to_string(i) + ".png";
                write_mask(root / mask_rel, LabelMask2D(s.width, s.height, lab));
                masks.push_back(mask_rel);
            }
        }
        json e = {{"id", s.id},
                  {"vendor", s.vendor},
                  {"annotated", s.annotated},
                  {"phase", "ED"},
                  {"spacing_mm", {{"slice", 10.0}, {"row", 1.25}, {"col", 1.25}}},
                  {"slices", slices}};
        if (!masks.empty()) {
            e["masks"] = masks;
        }
        subjects.push_back(e);
    }
    return {{"schema_version", 1}, {"role", "images"}, {"subjects", subjects}};
}

fs::path save(const fs::path &root, const json &j, const std::string &name = "manifest.json") {
    const fs::path p = root / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

std::map<std::string, std::string> hash_tree(const fs::path &root) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
        }
    }
    return out;
}

std::size_t count_suffix(const fs::path &root, const std::string &suffix) {
    std::size_t n = 0;
    if (!fs::exists(root)) {
        return 0;
    }
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        const std::string name = e.path().filename().string();
        n += e.is_regular_file() && name.size() >= suffix.size() &&
             name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    }
    return n;
}

} // namespace

TEST_CASE("sha256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("png round trips") {
    TempDir tmp("png");
    std::mt19937_64 rng(3);
    const Image2D img = testsupport::random_image(37, 21, rng);
    write_image_unit16(tmp / "img.png", img);
    const GrayPng raw = read_gray_png(tmp / "img.png");
    CHECK(raw.bit_depth == 16);
    CHECK(raw.width == 37);
    CHECK(raw.height == 21);
    const Image2D back = read_image_unit(tmp / "img.png");
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(std::abs(back.values()[i] - img.values()[i]) <= 0.5 / 65535.0 + 1e-12);
    }

    std::vector<std::uint8_t> lab(12 * 5);
    for (std::size_t i = 0; i < lab.size(); ++i) {
        lab[i] = static_cast<std::uint8_t>(i % 4);
    }
    const LabelMask2D mask(12, 5, lab);
    write_mask(tmp / "mask.png", mask);
    CHECK(read_mask(tmp / "mask.png") == mask);
    CHECK(read_gray_png(tmp / "mask.png").bit_depth == 8);

    GrayPng bad;
    bad.width = 2;
    bad.height = 1;
    bad.samples = {0, 9};
    write_gray_png(tmp / "bad.png", bad);
    CHECK_THROWS(read_mask(tmp / "bad.png"));

    std::ofstream(tmp / "junk.png") << "not a png at all";
    CHECK_FALSE(png_header_readable(tmp / "junk.png"));
    CHECK_THROWS(read_gray_png(tmp / "junk.png"));
    CHECK_THROWS(read_gray_png(tmp / "absent.png"));
}

TEST_CASE("manifest loading and validation") {
    TempDir tmp("manifest");
    const json good = write_dataset(tmp.path(), {{"A001", "A"}, {"C001", "C", 2, 40, 32, false}});
    const DatasetManifest m = load_manifest(save(tmp.path(), good));
    REQUIRE(m.subjects.size() == 2);
    CHECK(m.subjects[0].slices[0] == tmp.path() / "A001/img_0.png");
    CHECK(m.subjects[1].vendor == Vendor::C);
    CHECK_FALSE(m.subjects[1].annotated);
    CHECK(m.subjects[0].spacing->col_mm == 1.25);

    // Serialization round trip.
    const DatasetManifest again = parse_manifest(manifest_to_json(m, tmp.path()), tmp.path());
    CHECK(again.subjects[0].slices == m.subjects[0].slices);
    CHECK(again.subjects[0].masks == m.subjects[0].masks);

    const json mismatch = write_dataset(tmp.path(), {{"S", "A", 10, 8, 8, true, 9}});
    CHECK_THROWS_WITH_AS(parse_manifest(mismatch.dump(), tmp.path()), "mask count mismatch: subject S",
                         ValidationError);

    json vendor = good;
    vendor["subjects"][0]["vendor"] = "E";
    CHECK_THROWS_WITH_AS(parse_manifest(vendor.dump(), tmp.path()), doctest::Contains("schema error"),
                         ValidationError);

    json missing = good;
    missing["subjects"][1]["slices"][0] = "C001/nope.png";
    CHECK_THROWS_WITH_AS(parse_manifest(missing.dump(), tmp.path()), doctest::Contains("subject C001"),
                         ValidationError);

    json dup = good;
    dup["subjects"][1]["id"] = "A001";
    CHECK_THROWS_AS(parse_manifest(dup.dump(), tmp.path()), ValidationError);

    json version = good;
    version["schema_version"] = 2;
    CHECK_THROWS_AS(parse_manifest(version.dump(), tmp.path()), ValidationError);

    CHECK_THROWS_AS(parse_manifest("{not json", tmp.path()), ValidationError);
    CHECK_THROWS_AS(load_manifest(tmp / "absent.json"), ValidationError);
}

TEST_CASE("config round trip and validation") {
    PipelineConfig c;
    c.seed = 77;
    c.nlm.h = 0.05;
    c.augment.probabilities[4] = 0.9;
    c.postprocess.min_voxels = 12;
    c.postprocess.connectivity = Connectivity::Planar8;
    c.metrics.hd_mode = HdMode::P95;
    const json j = c;
    const PipelineConfig back = parse_config(j.dump());
    CHECK(json(back) == j);

    CHECK(parse_config("{}").seed == 0);
    CHECK_THROWS_AS(parse_config(R"({"augment": {"ranges": {"gamma": [0.1, 3.0]}}})"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"nlm": {"h": -1}})"), ValidationError);
    CHECK_THROWS_AS(parse_config("[1, 2"), ValidationError);
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto &h : hits) {
        CHECK(h.load() == 1);
    }
    CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
        if (i == 7) {
            throw std::runtime_error("boom");
        }
    }));
}

TEST_CASE("preprocess writes 256x256 outputs deterministically") {
    TempDir tmp("pre");
    const json j = write_dataset(tmp.path(), {{"A001", "A", 10, 300, 200}});
    const DatasetManifest m = load_manifest(save(tmp.path(), j));
    PipelineConfig cfg;
    cfg.nlm.search_radius = 2;

    const RunSummary s1 = run_preprocess(m, cfg, tmp / "out1", 1);
    CHECK(s1.failures.empty());
    CHECK(s1.exit_code() == kExitOk);
    CHECK(count_suffix(tmp / "out1/images", ".png") == 10);
    CHECK(count_suffix(tmp / "out1/masks", ".png") == 10);
    for (int i = 0; i < 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "slice_%03d.png", i);
        const GrayPng png = read_gray_png(tmp / ("out1/images/A001/" + std::string(name)));
        CHECK(png.width == 256);
        CHECK(png.height == 256);
        CHECK(png.bit_depth == 16);
    }
    const DatasetManifest out = load_manifest(tmp / "out1/manifest.json");
    CHECK(out.subjects.size() == 1);
    CHECK(out.subjects[0].masks.size() == 10);
    const json prov = json::parse(testsupport::read_text(tmp / "out1/provenance.json"));
    CHECK(prov.at("entries").size() == 10);

    run_preprocess(m, cfg, tmp / "out2", 3);
    auto h1 = hash_tree(tmp / "out1");
    auto h2 = hash_tree(tmp / "out2");
    h1.erase("manifest.json"); // holds absolute output paths
    h2.erase("manifest.json");
    CHECK(h1 == h2);
}

TEST_CASE("preprocess on an empty manifest") {
    TempDir tmp("empty");
    const DatasetManifest m = parse_manifest(R"({"schema_version":1,"role":"images","subjects":[]})", tmp.path());
    const RunSummary s = run_preprocess(m, PipelineConfig{}, tmp / "out");
    CHECK(s.written == 0);
    CHECK(s.exit_code() == kExitOk);
    CHECK(count_suffix(tmp / "out", ".png") == 0);
}

TEST_CASE("a corrupt slice fails only its subject") {
    TempDir tmp("corrupt");
    const json j = write_dataset(tmp.path(), {{"A001", "A", 3, 30, 30}, {"B001", "B", 3, 30, 30}});
    // Valid signature and header, truncated body.
    const fs::path victim = tmp / "B001/img_1.png";
    std::string bytes = testsupport::read_text(victim);
    bytes.resize(40);
    std::ofstream(victim, std::ios::binary) << bytes;
    const DatasetManifest m = parse_manifest(j.dump(), tmp.path(), FileCheck::Exists);
    const RunSummary s = run_preprocess(m, PipelineConfig{}, tmp / "out", 2);
    REQUIRE(s.failures.size() == 1);
    CHECK(s.failures[0].subject == "B001");
    CHECK(s.exit_code() == kExitPartialFailure);
    CHECK(count_suffix(tmp / "out/images/A001", ".png") == 3);
    const DatasetManifest out = load_manifest(tmp / "out/manifest.json");
    REQUIRE(out.subjects.size() == 1);
    CHECK(out.subjects[0].id == "A001");
}

TEST_CASE("augment counts, replay and determinism") {
    TempDir tmp("aug");
    const json j = write_dataset(tmp.path(), {{"A001", "A", 5, 48, 40}});
    const DatasetManifest raw = load_manifest(save(tmp.path(), j));
    PipelineConfig cfg;
    cfg.seed = 123;
    cfg.nlm.search_radius = 1;
    REQUIRE(run_preprocess(raw, cfg, tmp / "pre").failures.empty());
    const DatasetManifest m = load_manifest(tmp / "pre/manifest.json");

    const RunSummary none = run_augment(m, cfg, tmp / "e0", {0, 1, false});
    CHECK(none.written == 0);
    CHECK(count_suffix(tmp / "e0", ".png") == 0);

    const RunSummary two = run_augment(m, cfg, tmp / "e2", {2, 1, false});
    CHECK(two.failures.empty());
    CHECK(count_suffix(tmp / "e2", "_image.png") == 10);
    CHECK(count_suffix(tmp / "e2", "_mask.png") == 10);
    CHECK(count_suffix(tmp / "e2", "_recipe.json") == 10);

    run_augment(m, cfg, tmp / "e2b", {2, 4, false});
    CHECK(hash_tree(tmp / "e2") == hash_tree(tmp / "e2b"));

    cfg.seed = 124;
    run_augment(m, cfg, tmp / "e2c", {2, 1, false});
    CHECK(hash_tree(tmp / "e2") != hash_tree(tmp / "e2c"));

    const fs::path recipe = tmp / "e2/A001/slice_003_e01_recipe.json";
    REQUIRE(fs::exists(recipe));
    CHECK(replay_recipe(recipe, tmp / "replay"));
    CHECK(sha256_file(tmp / "replay/A001/slice_003_e01_image.png") ==
          sha256_file(tmp / "e2/A001/slice_003_e01_image.png"));
    CHECK(sha256_file(tmp / "replay/A001/slice_003_e01_mask.png") ==
          sha256_file(tmp / "e2/A001/slice_003_e01_mask.png"));

    // A recipe whose recorded hash no longer matches.
    json r = json::parse(testsupport::read_text(recipe));
    r["stack"] = json::array();
    std::ofstream(tmp / "tampered.json") << r.dump();
    CHECK_FALSE(replay_recipe(tmp / "tampered.json", tmp / "replay2"));
}

TEST_CASE("augment refuses unannotated subjects unless asked to skip them") {
    TempDir tmp("unannot");
    const json j = write_dataset(tmp.path(), {{"A001", "A", 1, 20, 20}, {"C001", "C", 1, 20, 20, false}});
    const DatasetManifest m = load_manifest(save(tmp.path(), j));
    CHECK_THROWS_AS(run_augment(m, PipelineConfig{}, tmp / "out", {1, 1, false}), ValidationError);
    const RunSummary s = run_augment(m, PipelineConfig{}, tmp / "out2", {1, 1, true});
    CHECK(s.failures.empty());
    CHECK(count_suffix(tmp / "out2", "_image.png") == 1);
}

TEST_CASE("evaluate with postprocessing removes a small island") {
    TempDir tmp("eval");
    const json truth_json = write_dataset(tmp.path(), {{"A001", "A", 2, 40, 40}, {"B001", "B", 2, 40, 40}});
    const DatasetManifest truths = load_manifest(save(tmp.path(), truth_json, "truth.json"));

    // Predictions: copies of the truth masks, with a 10-voxel RV island in A001.
    json pj = {{"schema_version", 1}, {"role", "predictions"}, {"subjects", json::array()}};
    for (const auto &s : truths.subjects) {
        json masks = json::array();
        for (std::size_t i = 0; i < s.masks.size(); ++i) {
            LabelMask2D m = read_mask(s.masks[i]);
            if (s.id == "A001" && i == 0) {
                for (int k = 0; k < 10; ++k) {
                    m.set(2, 2 + k, 3);
                }
            }
            const std::string rel = "pred/" + s.id + "_" + std::to_string(i) + ".png";
            write_mask(tmp / rel, m);
            masks.push_back(rel);
        }
        pj["subjects"].push_back({{"id", s.id}, {"vendor", to_string(s.vendor)}, {"annotated", true}, {"masks", masks}});
    }
    const DatasetManifest preds = load_manifest(save(tmp.path(), pj, "pred.json"));

    PipelineConfig cfg;
    const EvaluateResult raw = run_evaluate(preds, truths, cfg, tmp / "raw", {false, 1});
    const EvaluateResult clean = run_evaluate(preds, truths, cfg, tmp / "clean", {true, 2});
    const auto &raw_rv = raw.report.rows.at(0).cells[0][2];
    const auto &clean_rv = clean.report.rows.at(0).cells[0][2];
    // RV is absent from the truth, so the island turns Dice 1 into 0.
    CHECK(*raw_rv.dice_pct == 0.0);
    CHECK(*clean_rv.dice_pct == 100.0);
    CHECK(*clean.report.rows.at(0).cells[0][0].dice_pct == 100.0);
    CHECK(*clean.report.rows.at(0).cells[1][1].hd_mm == 0.0);

    const LabelMask2D cleaned = read_mask(tmp / "clean/postprocessed/A001/slice_000.png");
    for (int k = 0; k < 10; ++k) {
        CHECK(cleaned(2, 2 + k) == 0);
    }
    CHECK(fs::exists(tmp / "clean/postprocessed/A001/components.json"));

    const std::string csv = testsupport::read_text(clean.csv_path);
    CHECK(csv.find("C_LV_Dice(%)") != std::string::npos);
    CHECK(csv.find("n/a") != std::string::npos);
    const json rep = json::parse(testsupport::read_text(clean.json_path));
    CHECK(rep.is_object());

    // Unmatched ids are reported.
    json orphan = pj;
    orphan["subjects"][0]["id"] = "Z999";
    const DatasetManifest bad = parse_manifest(orphan.dump(), tmp.path());
    CHECK_THROWS_WITH_AS(run_evaluate(bad, truths, cfg, tmp / "bad", {false, 1}), doctest::Contains("Z999"),
                         ValidationError);
}

TEST_CASE("postprocess subcommand driver") {
    TempDir tmp("post");
    LabelMask2D m(20, 20);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
            m.set(r + 5, c + 5, 1);
        }
    }
    m.set(0, 19, 2);
    write_mask(tmp / "p/s0.png", m);
    const json pj = {{"schema_version", 1},
                     {"role", "predictions"},
                     {"subjects", {{{"id", "X"}, {"vendor", "D"}, {"annotated", true}, {"masks", {"p/s0.png"}}}}}};
    const DatasetManifest preds = load_manifest(save(tmp.path(), pj, "pred.json"));
    const RunSummary s = run_postprocess(preds, PipelineConfig{}, tmp / "out");
    CHECK(s.failures.empty());
    const LabelMask2D out = read_mask(tmp / "out/X/slice_000.png");
    CHECK(out(0, 19) == 0);
    CHECK(out(5, 5) == 1);
    const DatasetManifest back = load_manifest(tmp / "out/manifest.json");
    CHECK(back.role == ManifestRole::Predictions);
}

TEST_CASE("synthetic pairs and bench") {
    const SlicePair p = synthetic_cardiac_pair(256, 4);
    CHECK(p.image.width() == 256);
    std::set<int> labels(p.mask.labels().begin(), p.mask.labels().end());
    CHECK(labels == std::set<int>{0, 1, 2, 3});
    const BenchResult r = run_bench(8, 1, 0);
    CHECK(r.pairs == 8);
    CHECK(r.pairs_per_second > 0.0);
}
