#include "cardioaug/losscheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string_view>

#include <json.hpp>

#include "cardioaug/losses.hpp"
#include "cardioaug/rng.hpp"

namespace cardioaug {

namespace {

std::string fmt(const char *f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Agreement to 6 significant figures.
bool close6(double got, double want) {
    char a[32], b[32];
    std::snprintf(a, sizeof a, "%.6g", got);
    std::snprintf(b, sizeof b, "%.6g", want);
    return std::string_view(a) == std::string_view(b);
}

RealGrid grid(int h, int w, std::vector<double> v) { return RealGrid(h, w, 1, std::move(v)); }

RealGrid random_grid(RandomStream &rng, int h, int w, int c = 1) {
    RealGrid g(h, w, c);
    for (double &v : g.values()) {
        v = rng.uniform();
    }
    return g;
}

AttentionMask random_mask(RandomStream &rng, int h, int w) {
    std::vector<double> m(static_cast<std::size_t>(h) * w);
    for (double &v : m) {
        v = rng.bernoulli(0.6) ? 1.0 : 0.0;
    }
    return AttentionMask(w, h, std::move(m));
}

double relative_error(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < 1e-12) {
        return 0.0;
    }
    return std::abs(analytic - numeric) / scale;
}

struct GradientTally {
    double max_rel = 0.0;
    std::size_t points = 0;
};

// Compares analytic and central-difference gradients; `skip(i)` excludes points.
void compare_gradients(const RealGrid &analytic, const RealGrid &numeric, const std::function<bool(std::size_t)> &skip,
                       GradientTally &tally) {
    const auto a = analytic.values();
    const auto n = numeric.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (skip(i)) {
            continue;
        }
        tally.max_rel = std::max(tally.max_rel, relative_error(a[i], n[i]));
        ++tally.points;
    }
}

} // namespace

bool LossCheckReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const LossCheck &c) { return c.passed; });
}

std::string LossCheckReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &c : checks) {
        arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    return nlohmann::json{{"passed", passed()},
                          {"max_relative_gradient_error", max_relative_gradient_error},
                          {"gradient_points", gradient_points},
                          {"seconds", seconds},
                          {"checks", arr}}
               .dump(2) +
           "\n";
}

LossCheckReport run_losscheck(const LossCheckOptions &opts) {
    const auto start = std::chrono::steady_clock::now();
    LossCheckReport report;
    auto check = [&](std::string name, bool ok, std::string detail = {}) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
    };
    auto guarded = [&](const std::string &name, const std::function<void()> &fn) {
        try {
            fn();
        } catch (const std::exception &e) {
            check(name, false, std::string("exception: ") + e.what());
        }
    };

    // Worked examples.
    guarded("masked_l1 examples", [&] {
        const RealGrid x = grid(2, 2, {1, 0, 0, 1});
        const RealGrid xr = grid(2, 2, {0.5, 0, 0, 0});
        const AttentionMask m(2, 2, {1, 0, 0, 1});
        const double v = masked_l1(x, xr, m).value;
        const double same = masked_l1(x, x, m).value;
        const double zero_mask = masked_l1(x, xr, AttentionMask(2, 2, {0, 0, 0, 0})).value;
        check("masked_l1 examples", close6(v, 0.375) && same == 0.0 && zero_mask == 0.0,
              "hand example = " + fmt("%.9g", v));
    });
    guarded("plain_l1 examples", [&] {
        const double v = plain_l1(grid(1, 2, {0, 1}), grid(1, 2, {1, 0})).value;
        const double same = plain_l1(grid(1, 2, {0.3, 0.7}), grid(1, 2, {0.3, 0.7})).value;
        check("plain_l1 examples", close6(v, 1.0) && same == 0.0, "hand example = " + fmt("%.9g", v));
    });
    guarded("attention_rec_loss examples", [&] {
        const RealGrid x = grid(2, 2, {1, 0, 0, 1});
        const AttentionMask m(2, 2, {1, 0, 0, 1});
        const double zero = attention_rec_loss(x, x, m, grid(1, 2, {0, 1}), grid(1, 2, {0, 1})).value;
        const double v = attention_rec_loss(x, x, m, grid(1, 2, {0, 1}), grid(1, 2, {1, 0})).value;
        check("attention_rec_loss examples", zero == 0.0 && close6(v, 1.0), "target-only = " + fmt("%.9g", v));
    });
    guarded("composite_rec_loss examples", [&] {
        const double v = composite_rec_loss({1.0, {}}, {0.5, {}}, 0.5).value;
        const double no_att = composite_rec_loss({0.7, {}}, {0.0, {}}).value;
        const double lam0 = composite_rec_loss({0.7, {}}, {123.0, {}}, 0.0).value;
        check("composite_rec_loss examples", close6(v, 1.25) && no_att == 0.7 && lam0 == 0.7,
              "global=1, attention=0.5 -> " + fmt("%.9g", v));
    });
    guarded("weighted_cross_entropy examples", [&] {
        const ClassWeights w;
        RealGrid onehot(1, 2, 4);
        onehot(0, 0, 1) = 1.0;
        onehot(0, 1, 3) = 1.0;
        const double zero = weighted_cross_entropy(onehot, LabelMask2D(2, 1, {1, 3}), w).value;
        const double uniform = weighted_cross_entropy(RealGrid(1, 1, 4, 0.25), LabelMask2D(1, 1, {1}), w).value;
        RealGrid two(1, 2, 4);
        two(0, 0, 0) = 1.0;
        two(0, 1, 0) = 0.5;
        two(0, 1, 3) = 0.5;
        const double mixed = weighted_cross_entropy(two, LabelMask2D(2, 1, {0, 3}), w).value;
        check("weighted_cross_entropy examples",
              zero == 0.0 && close6(uniform, 0.332711) && close6(mixed, 0.0901091),
              "uniform LV = " + fmt("%.9g", uniform) + ", BG+RV = " + fmt("%.9g", mixed));
    });
    guarded("finite_diff_grad examples", [&] {
        const RealGrid x = grid(1, 2, {1, 2});
        const RealGrid g_mean = finite_diff_grad(
            [](const RealGrid &g) { return stable_sum(g.values()) / static_cast<double>(g.size()); }, x, opts.fd_step);
        const RealGrid g_sq = finite_diff_grad(
            [](const RealGrid &g) {
                double s = 0.0;
                for (double v : g.values()) s += v * v;
                return s / static_cast<double>(g.size());
            },
            x, opts.fd_step);
        const bool ok = std::abs(g_mean(0, 0) - 0.5) < 1e-9 && std::abs(g_mean(0, 1) - 0.5) < 1e-9 &&
                        std::abs(g_sq(0, 0) - 1.0) < 1e-6 && std::abs(g_sq(0, 1) - 2.0) < 1e-6;
        check("finite_diff_grad examples", ok);
    });

    // Gradient fidelity on seeded random grids.
    const double h = opts.fd_step;
    GradientTally l1_tally, masked_tally, composite_tally, ce_tally;
    guarded("gradient checks", [&] {
        RandomStream base(mix64(opts.seed ^ 0x243f6a8885a308d3ULL));
        for (int k = 0; k < opts.random_grids; ++k) {
            RandomStream rng = base.split(static_cast<std::uint64_t>(k));
            const int rows = 3 + static_cast<int>(rng.uniform() * 6);
            const int cols = 3 + static_cast<int>(rng.uniform() * 6);
            const RealGrid target = random_grid(rng, rows, cols);
            const RealGrid rec = random_grid(rng, rows, cols);
            const AttentionMask mask = random_mask(rng, rows, cols);
            auto near_kink = [&](std::size_t i) { return std::abs(target.values()[i] - rec.values()[i]) < 10.0 * h; };

            compare_gradients(*plain_l1(target, rec).gradient,
                              finite_diff_grad([&](const RealGrid &r) { return plain_l1(target, r).value; }, rec, h),
                              near_kink, l1_tally);
            compare_gradients(
                *masked_l1(target, rec, mask).gradient,
                finite_diff_grad([&](const RealGrid &r) { return masked_l1(target, r, mask).value; }, rec, h),
                near_kink, masked_tally);
            compare_gradients(*composite_rec_loss(plain_l1(target, rec), masked_l1(target, rec, mask)).gradient,
                              finite_diff_grad(
                                  [&](const RealGrid &r) {
                                      return composite_rec_loss(plain_l1(target, r), masked_l1(target, r, mask)).value;
                                  },
                                  rec, h),
                              near_kink, composite_tally);

            // Softmax of bounded scores keeps every probability well inside (0, 1).
            RealGrid probs(rows, cols, 4);
            std::vector<std::uint8_t> labels(static_cast<std::size_t>(rows) * cols);
            for (std::size_t p = 0; p < labels.size(); ++p) {
                double z[4];
                double sum = 0.0;
                for (double &s : z) {
                    s = std::exp(rng.uniform(-1.0, 1.0));
                    sum += s;
                }
                for (int c = 0; c < 4; ++c) {
                    probs.values()[p * 4 + c] = z[c] / sum;
                }
                labels[p] = static_cast<std::uint8_t>(rng.uniform() * 4.0);
            }
            const LabelMask2D lm(cols, rows, labels);
            const ClassWeights w;
            compare_gradients(*weighted_cross_entropy(probs, lm, w).gradient,
                              finite_diff_grad(
                                  [&](const RealGrid &p) {
                                      return weighted_cross_entropy(p, lm, w, {.check_simplex = false}).value;
                                  },
                                  probs, h),
                              [](std::size_t) { return false; }, ce_tally);
        }
        auto grad_check = [&](const char *name, const GradientTally &t) {
            report.max_relative_gradient_error = std::max(report.max_relative_gradient_error, t.max_rel);
            report.gradient_points += t.points;
            check(name, t.points > 0 && t.max_rel < opts.gradient_tolerance,
                  "max relative error " + fmt("%.3e", t.max_rel) + " over " + std::to_string(t.points) + " points");
        };
        grad_check("plain_l1 gradient vs finite differences", l1_tally);
        grad_check("masked_l1 gradient vs finite differences", masked_tally);
        grad_check("composite gradient vs finite differences", composite_tally);
        grad_check("weighted_cross_entropy gradient vs finite differences", ce_tally);
    });

    guarded("composite linearity in lambda", [&] {
        RandomStream rng(mix64(opts.seed ^ 0x13198a2e03707344ULL));
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double g = rng.uniform(0.0, 2.0);
            const double a = rng.uniform(0.0, 2.0);
            for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
                worst = std::max(worst, std::abs(composite_rec_loss({g, {}}, {a, {}}, lambda).value - (g + lambda * a)));
            }
        }
        check("composite linearity in lambda", worst <= 1e-12, "max deviation " + fmt("%.3e", worst));
    });

    guarded("all-zero mask annihilates attention term", [&] {
        RandomStream rng(mix64(opts.seed ^ 0xa4093822299f31d0ULL));
        const RealGrid x = random_grid(rng, 8, 8);
        const RealGrid xr = random_grid(rng, 8, 8);
        const AttentionMask zero(8, 8, std::vector<double>(64, 0.0));
        const LossValue v = masked_l1(x, xr, zero);
        const bool grad_zero =
            std::all_of(v.gradient->values().begin(), v.gradient->values().end(), [](double g) { return g == 0.0; });
        check("all-zero mask annihilates attention term", v.value == 0.0 && grad_zero);
    });

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace cardioaug
