#include "raterlab/style.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "raterlab/csv.hpp"
#include "raterlab/distance.hpp"
#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"
#include "raterlab/morphology.hpp"
#include "raterlab/parallel.hpp"
#include "raterlab/preprocess.hpp"

namespace raterlab {

namespace {

void require_nonempty(std::span<const CountPair> c) {
    if (c.empty()) throw Error("style metric: no images");
}

double diff(const CountPair& c) { return static_cast<double>(c.rater) - static_cast<double>(c.consensus); }

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> differences(std::span<const CountPair> counts) {
    std::vector<double> d;
    d.reserve(counts.size());
    for (const auto& c : counts) d.push_back(diff(c));
    return d;
}

std::vector<double> relative_differences(std::span<const CountPair> counts, std::size_t& skipped) {
    std::vector<double> d;
    skipped = 0;
    for (const auto& c : counts) {
        if (c.consensus == 0) {
            ++skipped;
            continue;
        }
        d.push_back(diff(c) / static_cast<double>(c.consensus));
    }
    return d;
}

}  // namespace

double bias(std::span<const CountPair> counts) {
    require_nonempty(counts);
    return mean(differences(counts));
}

double consistency(std::span<const CountPair> counts) {
    require_nonempty(counts);
    return population_std(differences(counts));
}

RelativeMetric relative_bias(std::span<const CountPair> counts) {
    require_nonempty(counts);
    RelativeMetric r;
    const auto d = relative_differences(counts, r.skipped);
    if (!d.empty()) r.value = mean(d);
    return r;
}

RelativeMetric relative_consistency(std::span<const CountPair> counts) {
    require_nonempty(counts);
    RelativeMetric r;
    const auto d = relative_differences(counts, r.skipped);
    if (!d.empty()) r.value = population_std(d);
    return r;
}

std::vector<CountPair> count_pairs(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks) {
    if (rater_masks.empty()) throw Error("style metric: no images");
    if (rater_masks.size() != consensus_masks.size())
        throw Error("style metric: " + std::to_string(rater_masks.size()) + " rater masks vs " +
                    std::to_string(consensus_masks.size()) + " consensus masks");
    std::vector<CountPair> out;
    out.reserve(rater_masks.size());
    for (std::size_t i = 0; i < rater_masks.size(); ++i) {
        require_same_geometry(rater_masks[i], consensus_masks[i], "style metric");
        out.push_back({positive_count(rater_masks[i]), positive_count(consensus_masks[i])});
    }
    return out;
}

double bias(std::span<const Volume> r, std::span<const Volume> c) { return bias(count_pairs(r, c)); }
double consistency(std::span<const Volume> r, std::span<const Volume> c) { return consistency(count_pairs(r, c)); }
RelativeMetric relative_bias(std::span<const Volume> r, std::span<const Volume> c) {
    return relative_bias(count_pairs(r, c));
}
RelativeMetric relative_consistency(std::span<const Volume> r, std::span<const Volume> c) {
    return relative_consistency(count_pairs(r, c));
}

// ---------------------------------------------------------------------------
// ASSD

namespace {

using Point = std::array<double, 3>;

std::vector<std::size_t> boundary_indices(const Volume& m) {
    const Volume b = morph::inner_boundary(m);
    auto v = b.mask_values();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i]) idx.push_back(i);
    return idx;
}

Point position(const Geometry& g, std::size_t i) {
    const std::size_t x = i % g.nx();
    const std::size_t y = (i / g.nx()) % g.ny();
    const std::size_t z = i / (g.nx() * g.ny());
    return {static_cast<double>(x) * g.spacing[0], static_cast<double>(y) * g.spacing[1],
            static_cast<double>(z) * g.spacing[2]};
}

double mean_brute(const Geometry& g, const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
    std::vector<Point> targets;
    targets.reserve(to.size());
    for (auto i : to) targets.push_back(position(g, i));
    double sum = 0.0;
    for (auto i : from) {
        const Point p = position(g, i);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& t : targets) {
            const double dx = p[0] - t[0], dy = p[1] - t[1], dz = p[2] - t[2];
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
}

double mean_edt(const Geometry& g, const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
    const auto d2 = squared_distance_map(g, to);
    double sum = 0.0;
    for (auto i : from) sum += std::sqrt(d2[i]);
    return sum / static_cast<double>(from.size());
}

}  // namespace

std::optional<double> assd(const Volume& a, const Volume& b, AssdMethod method) {
    require_same_geometry(a, b, "assd");
    const auto ba = boundary_indices(a);
    const auto bb = boundary_indices(b);
    if (ba.empty() || bb.empty()) return std::nullopt;
    const Geometry& g = a.geometry();
    if (method == AssdMethod::Auto)
        method = static_cast<double>(ba.size()) * static_cast<double>(bb.size()) <= 4e6 ? AssdMethod::BruteForce
                                                                                       : AssdMethod::DistanceTransform;
    if (method == AssdMethod::BruteForce) return 0.5 * (mean_brute(g, ba, bb) + mean_brute(g, bb, ba));
    return 0.5 * (mean_edt(g, ba, bb) + mean_edt(g, bb, ba));
}

// ---------------------------------------------------------------------------
// Style tables

ConsensusScope ConsensusScope::parse(const std::string& text) {
    if (text == "global") return global();
    if (text.rfind("center:", 0) == 0 && text.size() > 7) return center(text.substr(7));
    if (text.rfind("raters:", 0) == 0 && text.size() > 7) {
        std::vector<std::string> ids;
        std::string cur;
        for (char c : text.substr(7)) {
            if (c == ',') {
                if (!cur.empty()) ids.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) ids.push_back(cur);
        return custom(std::move(ids));
    }
    throw Error("invalid consensus scope '" + text + "' (expected global, center:<id> or raters:<a,b,...>)");
}

std::string ConsensusScope::describe() const {
    switch (kind) {
        case Kind::Global:
            return "global";
        case Kind::Center:
            return "center:" + center_id;
        case Kind::Custom: {
            std::string s = "raters:";
            for (std::size_t i = 0; i < raters.size(); ++i) s += (i ? "," : "") + raters[i];
            return s;
        }
    }
    return "?";
}

RaterFilter ConsensusScope::filter() const {
    switch (kind) {
        case Kind::Global:
            return [](const std::string&, const std::string&) { return true; };
        case Kind::Center:
            return [c = center_id](const std::string&, const std::string& center) { return center == c; };
        case Kind::Custom:
            return [ids = std::set<std::string>(raters.begin(), raters.end())](const std::string& r,
                                                                                const std::string&) {
                return ids.count(r) > 0;
            };
    }
    return {};
}

StyleTable style_table(const DatasetManifest& manifest, FusionMethod method, const ConsensusScope& scope,
                       const StyleOptions& options) {
    const auto filter = scope.filter();
    const auto& subjects = manifest.subjects();

    // Per subject: rater id -> per-image counts against that subject's consensus.
    std::vector<std::map<std::string, std::vector<CountPair>>> per_subject(subjects.size());
    parallel_for(subjects.size(), options.threads, [&](std::size_t s) {
        auto masks = load_subject_masks(manifest, subjects[s].subject_id, filter);
        if (masks.empty()) return;
        std::vector<Volume> vols;
        for (const auto& m : masks) vols.push_back(m.mask);
        const FusionResult fused = masks.size() == 1 && method == FusionMethod::Majority
                                       ? majority_vote(vols)
                                       : fuse(vols, method, options.staple);
        const Volume& cons = fused.consensus;
        for (const auto& m : masks) {
            require_same_geometry(m.mask, cons, "style_table");
            auto& out = per_subject[s][m.rater_id];
            if (!options.slice_wise) {
                out.push_back({positive_count(m.mask), positive_count(cons)});
                continue;
            }
            const auto rs = slices(m.mask);
            const auto cs = slices(cons);
            for (std::size_t z = 0; z < rs.size(); ++z)
                out.push_back({positive_count(rs[z]), positive_count(cs[z])});
        }
    });

    std::map<std::string, std::vector<CountPair>> by_rater;
    for (auto& subj : per_subject)
        for (auto& [rater, counts] : subj) by_rater[rater].insert(by_rater[rater].end(), counts.begin(), counts.end());
    if (by_rater.empty()) throw Error("style_table: scope " + scope.describe() + " selects no raters");

    StyleTable table;
    table.consensus_method = method;
    table.consensus_scope = scope;
    table.slice_wise = options.slice_wise;
    for (const auto& [rater, counts] : by_rater) {
        RaterStyle row;
        row.rater_id = rater;
        row.center_id = manifest.center_of(rater);
        row.bias = bias(counts);
        row.consistency = consistency(counts);
        const auto rb = relative_bias(counts);
        const auto rc = relative_consistency(counts);
        row.relative_bias = rb.value;
        row.relative_consistency = rc.value;
        row.skipped_images = rb.skipped;
        row.n_images = counts.size();
        table.rows.push_back(std::move(row));
    }
    return table;
}

static const csv::Row kStyleHeader{"rater_id",      "center_id",         "n_images",
                                   "bias",          "consistency",       "relative_bias",
                                   "relative_consistency", "skipped_images"};

std::string style_table_csv(const StyleTable& table) {
    std::string out = csv::join(kStyleHeader) + "\n";
    for (const auto& r : table.rows) {
        out += csv::join({r.rater_id, r.center_id, std::to_string(r.n_images), csv::number(r.bias),
                          csv::number(r.consistency), csv::number(r.relative_bias),
                          csv::number(r.relative_consistency), std::to_string(r.skipped_images)}) +
               "\n";
    }
    return out;
}

StyleTable parse_style_csv(const std::string& text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw Error("style csv: empty file");
    const auto& h = rows.front();
    const std::size_t c_r = csv::column(h, "rater_id"), c_c = csv::column(h, "center_id"),
                      c_n = csv::column(h, "n_images"), c_b = csv::column(h, "bias"),
                      c_k = csv::column(h, "consistency");
    const auto opt_col = [&](const char* name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i] == name) return i;
        return std::nullopt;
    };
    const auto c_rb = opt_col("relative_bias"), c_rc = opt_col("relative_consistency"),
               c_s = opt_col("skipped_images");
    StyleTable t;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != h.size()) throw Error("style csv: row " + std::to_string(i) + " has wrong column count");
        RaterStyle s;
        s.rater_id = r[c_r];
        s.center_id = r[c_c];
        s.n_images = static_cast<std::size_t>(csv::to_double(r[c_n], "n_images"));
        s.bias = csv::to_double(r[c_b], "bias");
        s.consistency = csv::to_double(r[c_k], "consistency");
        if (c_rb) s.relative_bias = csv::to_optional_double(r[*c_rb], "relative_bias");
        if (c_rc) s.relative_consistency = csv::to_optional_double(r[*c_rc], "relative_consistency");
        if (c_s) s.skipped_images = static_cast<std::size_t>(csv::to_double(r[*c_s], "skipped_images"));
        t.rows.push_back(std::move(s));
    }
    std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) { return a.rater_id < b.rater_id; });
    return t;
}

}  // namespace raterlab
