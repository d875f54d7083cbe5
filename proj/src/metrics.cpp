#include "cardioaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cardioaug {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const LabelVolume &pred, const LabelVolume &truth, std::uint8_t cls) {
    if (!pred.same_shape(truth)) {
        throw std::invalid_argument("prediction and truth volumes differ in shape");
    }
    if (cls < 1 || cls > kMaxLabel) {
        throw std::invalid_argument("metric class must be 1, 2 or 3");
    }
}

// Lower envelope of parabolas: out[q] = min_p f[p] + (s (q - p))^2.
void edt_1d(const double *f, double *out, int n, std::ptrdiff_t stride, double s, std::vector<int> &v,
            std::vector<double> &z, std::vector<double> &line) {
    line.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        line[static_cast<std::size_t>(i)] = f[i * stride];
    }
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        const double fq = line[static_cast<std::size_t>(q)];
        if (fq == kInf) {
            continue;
        }
        const double xq = s * q;
        double boundary = -kInf;
        while (k >= 0) {
            const int p = v[static_cast<std::size_t>(k)];
            const double xp = s * p;
            boundary = ((fq + xq * xq) - (line[static_cast<std::size_t>(p)] + xp * xp)) / (2.0 * (xq - xp));
            if (boundary <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = k == 0 ? -kInf : boundary;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) {
            out[q * stride] = kInf;
        }
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = s * q;
        while (z[static_cast<std::size_t>(j) + 1] < xq) {
            ++j;
        }
        const int p = v[static_cast<std::size_t>(j)];
        const double dx = s * (q - p);
        out[q * stride] = line[static_cast<std::size_t>(p)] + dx * dx;
    }
}

// Squared distance (mm^2) from every voxel to the nearest seed voxel.
std::vector<double> squared_distance_field(const std::vector<std::array<int, 3>> &seeds, int d, int h, int w,
                                           const Spacing3D &sp) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> field(static_cast<std::size_t>(d) * plane, kInf);
    for (const auto &s : seeds) {
        field[static_cast<std::size_t>(s[0]) * plane + static_cast<std::size_t>(s[1]) * w + s[2]] = 0.0;
    }
    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> line;
    for (int zz = 0; zz < d; ++zz) {
        for (int r = 0; r < h; ++r) {
            double *base = &field[zz * plane + static_cast<std::size_t>(r) * w];
            edt_1d(base, base, w, 1, sp.col_mm, v, z, line);
        }
    }
    for (int zz = 0; zz < d; ++zz) {
        for (int c = 0; c < w; ++c) {
            double *base = &field[zz * plane + c];
            edt_1d(base, base, h, w, sp.row_mm, v, z, line);
        }
    }
    if (d > 1) {
        for (std::size_t p = 0; p < plane; ++p) {
            double *base = &field[p];
            edt_1d(base, base, d, static_cast<std::ptrdiff_t>(plane), sp.slice_mm, v, z, line);
        }
    }
    return field;
}

std::vector<double> directed_distances(const std::vector<std::array<int, 3>> &from, const std::vector<double> &field,
                                       int h, int w) {
    std::vector<double> out;
    out.reserve(from.size());
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (const auto &p : from) {
        out.push_back(std::sqrt(field[static_cast<std::size_t>(p[0]) * plane + static_cast<std::size_t>(p[1]) * w + p[2]]));
    }
    return out;
}

double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

std::string format_fixed(const std::optional<double> &v, int decimals) {
    if (!v) {
        return "n/a";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
    return buf;
}

} // namespace

std::string_view to_string(Vendor v) noexcept {
    static constexpr std::array<std::string_view, 4> names{"A", "B", "C", "D"};
    return names[static_cast<std::size_t>(v)];
}

Vendor vendor_from_string(std::string_view s) {
    if (s == "A") return Vendor::A;
    if (s == "B") return Vendor::B;
    if (s == "C") return Vendor::C;
    if (s == "D") return Vendor::D;
    throw std::invalid_argument("vendor must be one of A, B, C, D (got '" + std::string(s) + "')");
}

std::string_view class_name(std::uint8_t cls) {
    switch (cls) {
    case 1:
        return "LV";
    case 2:
        return "MYO";
    case 3:
        return "RV";
    default:
        throw std::invalid_argument("no name for class " + std::to_string(cls));
    }
}

std::string_view to_string(HdMode m) noexcept { return m == HdMode::Max ? "max" : "p95"; }

HdMode hd_mode_from_string(std::string_view s) {
    if (s == "max") return HdMode::Max;
    if (s == "p95") return HdMode::P95;
    throw std::invalid_argument("unknown HD mode '" + std::string(s) + "' (expected max or p95)");
}

double dice(const LabelVolume &pred, const LabelVolume &truth, std::uint8_t cls) {
    check_pair(pred, truth, cls);
    std::size_t p_count = 0, t_count = 0, both = 0;
    for (int z = 0; z < pred.depth(); ++z) {
        const auto pl = pred.slices()[static_cast<std::size_t>(z)].labels();
        const auto tl = truth.slices()[static_cast<std::size_t>(z)].labels();
        for (std::size_t i = 0; i < pl.size(); ++i) {
            const bool p = pl[i] == cls;
            const bool t = tl[i] == cls;
            p_count += p;
            t_count += t;
            both += p && t;
        }
    }
    if (p_count + t_count == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(p_count + t_count);
}

std::vector<std::array<int, 3>> boundary_voxels(const LabelVolume &vol, std::uint8_t cls) {
    std::vector<std::array<int, 3>> out;
    const int d = vol.depth();
    const int h = vol.height();
    const int w = vol.width();
    const bool volumetric = d > 1;
    auto outside = [&](int z, int r, int c) {
        return z < 0 || z >= d || r < 0 || r >= h || c < 0 || c >= w || vol.at(z, r, c) != cls;
    };
    for (int z = 0; z < d; ++z) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (vol.at(z, r, c) != cls) {
                    continue;
                }
                const bool edge = outside(z, r - 1, c) || outside(z, r + 1, c) || outside(z, r, c - 1) ||
                                  outside(z, r, c + 1) || (volumetric && (outside(z - 1, r, c) || outside(z + 1, r, c)));
                if (edge) {
                    out.push_back({z, r, c});
                }
            }
        }
    }
    return out;
}

HausdorffResult hausdorff(const LabelVolume &pred, const LabelVolume &truth, std::uint8_t cls, HdMode mode) {
    check_pair(pred, truth, cls);
    if (!(pred.spacing() == truth.spacing())) {
        throw std::invalid_argument("prediction and truth volumes differ in spacing");
    }
    const auto pb = boundary_voxels(pred, cls);
    const auto tb = boundary_voxels(truth, cls);
    if (pb.empty() && tb.empty()) {
        return {0.0, false};
    }
    const Spacing3D sp = pred.spacing();
    if (pb.empty() || tb.empty()) {
        const double dz = pred.depth() * sp.slice_mm;
        const double dy = pred.height() * sp.row_mm;
        const double dx = pred.width() * sp.col_mm;
        return {std::sqrt(dz * dz + dy * dy + dx * dx), true};
    }
    const int d = pred.depth();
    const int h = pred.height();
    const int w = pred.width();
    const auto to_truth = directed_distances(pb, squared_distance_field(tb, d, h, w, sp), h, w);
    const auto to_pred = directed_distances(tb, squared_distance_field(pb, d, h, w, sp), h, w);
    if (mode == HdMode::Max) {
        return {std::max(*std::max_element(to_truth.begin(), to_truth.end()),
                         *std::max_element(to_pred.begin(), to_pred.end())),
                false};
    }
    return {std::max(percentile(to_truth, 0.95), percentile(to_pred, 0.95)), false};
}

MetricRow evaluate_dataset(const std::map<std::string, LabelVolume> &predictions,
                           const std::map<std::string, LabelVolume> &truths, const std::vector<SubjectTag> &subjects,
                           HdMode mode, std::string method) {
    std::map<std::string, Vendor> vendor_of;
    for (const auto &s : subjects) {
        vendor_of.emplace(s.id, s.vendor);
    }
    std::vector<std::string> unmatched;
    for (const auto &[id, _] : predictions) {
        if (!vendor_of.contains(id)) {
            unmatched.push_back(id);
        }
    }
    for (const auto &[id, _] : truths) {
        if (!vendor_of.contains(id) || !predictions.contains(id)) {
            unmatched.push_back(id);
        }
    }
    if (!unmatched.empty()) {
        std::sort(unmatched.begin(), unmatched.end());
        unmatched.erase(std::unique(unmatched.begin(), unmatched.end()), unmatched.end());
        std::string msg = "unmatched subject ids:";
        for (const auto &id : unmatched) {
            msg += " " + id;
        }
        throw std::invalid_argument(msg);
    }

    MetricRow row;
    row.method = std::move(method);
    std::array<std::array<std::vector<double>, 3>, kVendorCount> dice_acc, hd_acc;
    for (const auto &s : subjects) {
        const auto truth = truths.find(s.id);
        if (truth == truths.end()) {
            continue;
        }
        const LabelVolume &pred = predictions.at(s.id);
        SubjectMetrics sm{s.id, s.vendor, {}, {}};
        const auto v = static_cast<std::size_t>(s.vendor);
        for (std::size_t k = 0; k < kEvaluatedClasses.size(); ++k) {
            const std::uint8_t cls = kEvaluatedClasses[k];
            sm.dice[k] = dice(pred, truth->second, cls);
            sm.hd[k] = hausdorff(pred, truth->second, cls, mode);
            dice_acc[v][k].push_back(100.0 * sm.dice[k]);
            hd_acc[v][k].push_back(sm.hd[k].mm);
            row.cells[v][k].hd_sentinels += sm.hd[k].sentinel;
            row.cells[v][k].subjects += 1;
        }
        row.subjects.push_back(std::move(sm));
    }
    for (std::size_t v = 0; v < kVendorCount; ++v) {
        for (std::size_t k = 0; k < 3; ++k) {
            auto &cell = row.cells[v][k];
            if (cell.subjects == 0) {
                continue;
            }
            double ds = 0.0, hs = 0.0;
            for (double x : dice_acc[v][k]) ds += x;
            for (double x : hd_acc[v][k]) hs += x;
            cell.dice_pct = ds / static_cast<double>(cell.subjects);
            cell.hd_mm = hs / static_cast<double>(cell.subjects);
        }
    }
    return row;
}

std::string report_to_csv(const MetricReport &report) {
    std::ostringstream os;
    os << "method,hd_mode";
    for (std::size_t v = 0; v < kVendorCount; ++v) {
        for (std::uint8_t cls : kEvaluatedClasses) {
            const auto prefix = std::string(to_string(static_cast<Vendor>(v))) + "_" + std::string(class_name(cls));
            os << ',' << prefix << "_Dice(%)" << ',' << prefix << "_HD(mm)";
        }
    }
    os << '\n';
    for (const auto &row : report.rows) {
        os << row.method << ',' << to_string(report.hd_mode);
        for (std::size_t v = 0; v < kVendorCount; ++v) {
            for (std::size_t k = 0; k < 3; ++k) {
                const auto &cell = row.cells[v][k];
                os << ',' << format_fixed(cell.dice_pct, 1) << ',' << format_fixed(cell.hd_mm, 2);
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string report_to_json(const MetricReport &report) {
    using nlohmann::json;
    json rows = json::array();
    for (const auto &row : report.rows) {
        json cells = json::array();
        for (std::size_t v = 0; v < kVendorCount; ++v) {
            for (std::size_t k = 0; k < 3; ++k) {
                const auto &cell = row.cells[v][k];
                cells.push_back({{"vendor", to_string(static_cast<Vendor>(v))},
                                 {"class", class_name(kEvaluatedClasses[k])},
                                 {"dice_pct", cell.dice_pct ? json(*cell.dice_pct) : json("n/a")},
                                 {"hd_mm", cell.hd_mm ? json(*cell.hd_mm) : json("n/a")},
                                 {"subjects", cell.subjects},
                                 {"hd_sentinels", cell.hd_sentinels}});
            }
        }
        json subjects = json::array();
        for (const auto &s : row.subjects) {
            json per_class = json::object();
            for (std::size_t k = 0; k < 3; ++k) {
                per_class[std::string(class_name(kEvaluatedClasses[k]))] = {
                    {"dice", s.dice[k]}, {"hd_mm", s.hd[k].mm}, {"hd_sentinel", s.hd[k].sentinel}};
            }
            subjects.push_back({{"id", s.id}, {"vendor", to_string(s.vendor)}, {"classes", per_class}});
        }
        rows.push_back({{"method", row.method}, {"cells", cells}, {"subjects", subjects}});
    }
    return json{{"hd_mode", to_string(report.hd_mode)}, {"rows", rows}}.dump(2) + "\n";
}

} // namespace cardioaug
