#include "raterlab/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "raterlab/csv.hpp"
#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"

namespace raterlab {

double dice(const Volume& a, const Volume& b) {
    require_same_geometry(a, b, "dice");
    const auto na = kernels::count_nonzero(a.mask_values());
    const auto nb = kernels::count_nonzero(b.mask_values());
    if (na + nb == 0) return 1.0;
    const auto both = kernels::count_and(a.mask_values(), b.mask_values());
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

namespace {

struct Moments {
    double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
};

Moments moments(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size()) throw Error(std::string(what) + ": x and y differ in length");
    if (x.size() < 3) throw Error(std::string(what) + ": needs at least 3 points");
    Moments m;
    const double n = static_cast<double>(x.size());
    m.mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    m.my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(std::string(what) + ": non-finite value");
        const double dx = x[i] - m.mx, dy = y[i] - m.my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    if (!(m.sxx > 0.0)) throw Error(std::string(what) + ": degenerate variance in x");
    if (!(m.syy > 0.0)) throw Error(std::string(what) + ": degenerate variance in y (SS_tot = 0)");
    return m;
}

}  // namespace

RegressionResult ols_r2(std::span<const double> x, std::span<const double> y) {
    const Moments m = moments(x, y, "ols_r2");
    RegressionResult r;
    r.n = x.size();
    r.slope = m.sxy / m.sxx;
    r.intercept = m.my - r.slope * m.mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (r.intercept + r.slope * x[i]);
        ss_res += e * e;
    }
    r.r_squared = std::clamp(1.0 - ss_res / m.syy, 0.0, 1.0);
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const Moments m = moments(x, y, "pearson");
    return m.sxy / std::sqrt(m.sxx * m.syy);
}

// ---------------------------------------------------------------------------

std::string to_string(ModelScope s) {
    switch (s) {
        case ModelScope::Rater: return "rater";
        case ModelScope::CenterConsensus: return "center-consensus";
        case ModelScope::GlobalConsensus: return "global-consensus";
    }
    return "?";
}

std::string ModelSpec::truth_label() const {
    switch (scope) {
        case ModelScope::Rater: return "rater:" + rater_id;
        case ModelScope::CenterConsensus: return "center:" + center_id;
        case ModelScope::GlobalConsensus: return "global";
    }
    return {};
}

RaterFilter ModelSpec::filter() const {
    switch (scope) {
        case ModelScope::Rater:
            return [r = rater_id](const std::string& id, const std::string&) { return id == r; };
        case ModelScope::CenterConsensus:
            return [c = center_id](const std::string&, const std::string& center) { return center == c; };
        case ModelScope::GlobalConsensus:
            return [](const std::string&, const std::string&) { return true; };
    }
    return {};
}

ModelSpec parse_model_id(const std::string& model_id, const std::map<std::string, std::string>& center_by_rater) {
    static const std::string kCenter = "consensus:center:";
    ModelSpec s;
    s.model_id = model_id;
    if (model_id == "consensus:global") {
        s.scope = ModelScope::GlobalConsensus;
    } else if (model_id.rfind(kCenter, 0) == 0) {
        s.scope = ModelScope::CenterConsensus;
        s.center_id = model_id.substr(kCenter.size());
        if (s.center_id.empty()) throw Error("model id '" + model_id + "': empty center");
    } else if (model_id.rfind("consensus:", 0) == 0) {
        throw Error("unknown consensus model id '" + model_id + "'");
    } else {
        s.scope = ModelScope::Rater;
        s.rater_id = model_id;
        const auto it = center_by_rater.find(model_id);
        if (it != center_by_rater.end()) s.center_id = it->second;
    }
    return s;
}

std::vector<ModelSpec> model_specs(const DatasetManifest& manifest, bool with_consensus) {
    std::vector<ModelSpec> out;
    for (const auto& r : manifest.rater_ids())
        out.push_back({r, ModelScope::Rater, manifest.center_of(r), r});
    if (with_consensus) {
        for (const auto& c : manifest.center_ids())
            out.push_back({"consensus:center:" + c, ModelScope::CenterConsensus, c, {}});
        out.push_back({"consensus:global", ModelScope::GlobalConsensus, {}, {}});
    }
    return out;
}

std::optional<Volume> model_target(const DatasetManifest& manifest, const ModelSpec& spec,
                                   const std::string& subject_id, FusionMethod method, const StapleParams& staple) {
    auto masks = load_subject_masks(manifest, subject_id, spec.filter());
    if (masks.empty()) return std::nullopt;
    if (masks.size() == 1) return std::move(masks.front().mask);
    std::vector<Volume> vols;
    for (auto& m : masks) vols.push_back(std::move(m.mask));
    return fuse(vols, method, staple).consensus;
}

// ---------------------------------------------------------------------------

namespace {

const csv::Row kUncHeader{"rater_id", "image_id", "mean_entropy_union", "mean_entropy_all", "n_samples", "seed"};
const csv::Row kDiceHeader{"model_id", "image_id", "dice", "both_empty"};

std::uint64_t to_u64(const std::string& field, const char* column) {
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw Error(fmt::format("csv: column {}: '{}' is not a nonnegative integer", column, field));
    }
}

}  // namespace

std::string uncertainty_csv(std::span<const UncertaintyRow> rows) {
    std::string out = csv::join(kUncHeader) + "\n";
    for (const auto& r : rows)
        out += csv::join({r.model_id, r.image_id, csv::number(r.mean_entropy_union), csv::number(r.mean_entropy_all),
                          std::to_string(r.n_samples), std::to_string(r.seed)}) +
               "\n";
    return out;
}

std::vector<UncertaintyRow> parse_uncertainty_csv(const std::string& text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw Error("uncertainty csv: empty file");
    const auto& h = rows.front();
    const std::size_t c_m = csv::column(h, "rater_id"), c_i = csv::column(h, "image_id"),
                      c_u = csv::column(h, "mean_entropy_union"), c_a = csv::column(h, "mean_entropy_all"),
                      c_n = csv::column(h, "n_samples"), c_s = csv::column(h, "seed");
    std::vector<UncertaintyRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != h.size()) throw Error(fmt::format("uncertainty csv: row {} has {} fields", i + 1, r.size()));
        out.push_back({r[c_m], r[c_i], csv::to_optional_double(r[c_u], "mean_entropy_union"),
                       csv::to_double(r[c_a], "mean_entropy_all"), to_u64(r[c_n], "n_samples"),
                       to_u64(r[c_s], "seed")});
    }
    return out;
}

std::string dice_csv(std::span<const DiceRow> rows) {
    std::string out = csv::join(kDiceHeader) + "\n";
    for (const auto& r : rows)
        out += csv::join({r.model_id, r.image_id, csv::number(r.dice), r.both_empty ? "1" : "0"}) + "\n";
    return out;
}

std::vector<DiceRow> parse_dice_csv(const std::string& text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw Error("dice csv: empty file");
    const auto& h = rows.front();
    const std::size_t c_m = csv::column(h, "model_id"), c_i = csv::column(h, "image_id"), c_d = csv::column(h, "dice");
    std::optional<std::size_t> c_e;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] == "both_empty") c_e = i;
    std::vector<DiceRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != h.size()) throw Error(fmt::format("dice csv: row {} has {} fields", i + 1, r.size()));
        const double d = csv::to_double(r[c_d], "dice");
        if (d < 0.0 || d > 1.0) throw Error(fmt::format("dice csv: row {}: dice {} outside [0, 1]", i + 1, d));
        out.push_back({r[c_m], r[c_i], d, c_e && r[*c_e] == "1"});
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

int scope_rank(ModelScope s) { return static_cast<int>(s); }

}  // namespace

std::vector<ModelSummary> summarize_models(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                                           std::span<const DiceRow> dice_rows) {
    std::map<std::string, std::string> center_by_rater;
    for (const auto& r : styles.rows) center_by_rater[r.rater_id] = r.center_id;

    struct Acc {
        std::vector<double> u, a, d;
        std::size_t empty = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& r : styles.rows) acc[r.rater_id];
    for (const auto& r : uncertainty) {
        auto& a = acc[r.model_id];
        if (r.mean_entropy_union) a.u.push_back(*r.mean_entropy_union);
        a.a.push_back(r.mean_entropy_all);
    }
    for (const auto& r : dice_rows) {
        auto& a = acc[r.model_id];
        a.d.push_back(r.dice);
        a.empty += r.both_empty;
    }
    std::vector<ModelSummary> out;
    for (const auto& [id, a] : acc) {
        ModelSummary m;
        m.spec = parse_model_id(id, center_by_rater);
        m.uncertainty = mean_of(a.u);
        m.uncertainty_all = mean_of(a.a);
        m.dice = mean_of(a.d);
        m.n_uncertainty_images = a.a.size();
        m.n_dice_images = a.d.size();
        m.n_empty_pairs = a.empty;
        out.push_back(std::move(m));
    }
    std::stable_sort(out.begin(), out.end(), [](const ModelSummary& x, const ModelSummary& y) {
        if (x.spec.scope != y.spec.scope) return scope_rank(x.spec.scope) < scope_rank(y.spec.scope);
        return x.spec.model_id < y.spec.model_id;
    });
    return out;
}

ComparisonTable consensus_comparison(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                                     std::span<const DiceRow> dice_rows) {
    const auto models = summarize_models(styles, uncertainty, dice_rows);
    ComparisonTable t;
    std::vector<double> rater_u, rater_d;
    std::set<std::string> centers, center_models;
    bool have_global = false;
    std::optional<double> global_u;
    for (const auto& m : models) {
        ComparisonRow row{to_string(m.spec.scope), m.spec.model_id, m.spec.center_id, m.spec.truth_label(),
                          m.spec.truth_label(), m.dice, m.uncertainty};
        switch (m.spec.scope) {
            case ModelScope::Rater:
                if (m.uncertainty) rater_u.push_back(*m.uncertainty);
                else t.flags.push_back("no uncertainty for rater model " + m.spec.model_id);
                if (m.dice) rater_d.push_back(*m.dice);
                if (!m.spec.center_id.empty()) centers.insert(m.spec.center_id);
                break;
            case ModelScope::CenterConsensus:
                center_models.insert(m.spec.center_id);
                break;
            case ModelScope::GlobalConsensus:
                have_global = true;
                global_u = m.uncertainty;
                break;
        }
        if (m.n_empty_pairs > 0)
            t.flags.push_back(fmt::format("{}: {} image(s) with both masks empty scored Dice 1", m.spec.model_id,
                                          m.n_empty_pairs));
        t.rows.push_back(std::move(row));
    }
    const std::size_t n_raters = rater_u.size() + std::count_if(models.begin(), models.end(), [](const auto& m) {
                                     return m.spec.scope == ModelScope::Rater && !m.uncertainty;
                                 });
    if (n_raters >= 2) {
        ComparisonRow avg{"raters-average", "raters-average", "", "each rater", "each rater", mean_of(rater_d),
                          mean_of(rater_u)};
        // Table order: single raters, their average, then consensus models.
        const auto it = std::find_if(t.rows.begin(), t.rows.end(), [](const ComparisonRow& r) { return r.scope != "rater"; });
        t.rows.insert(it, std::move(avg));
    }
    for (const auto& c : centers)
        if (!center_models.count(c)) t.flags.push_back("missing center-consensus model for center " + c);
    if (!have_global) t.flags.push_back("missing global-consensus model");

    const auto mean_rater = mean_of(rater_u);
    if (!global_u || !mean_rater) {
        t.flags.push_back("uncertainty ratio undefined: needs global-consensus and single-rater uncertainties");
    } else if (!(*mean_rater > 0.0)) {
        t.flags.push_back("uncertainty ratio undefined: mean single-rater uncertainty is 0");
    } else {
        t.uncertainty_ratio = *global_u / *mean_rater;
    }
    return t;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json regression_json(const std::vector<double>& x, const std::vector<double>& y, const std::string& xname,
                     const std::string& yname) {
    json j;
    j["x"] = xname;
    j["y"] = yname;
    try {
        const auto r = ols_r2(x, y);
        j["slope"] = r.slope;
        j["intercept"] = r.intercept;
        j["r_squared"] = r.r_squared;
        j["n"] = r.n;
    } catch (const Error& e) {
        j["slope"] = nullptr;
        j["intercept"] = nullptr;
        j["r_squared"] = nullptr;
        j["n"] = x.size();
        j["flag"] = e.what();
    }
    return j;
}

}  // namespace

Report build_report(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                    std::span<const DiceRow> dice_rows, const std::string& metadata_json) {
    Report rep;
    const auto models = summarize_models(styles, uncertainty, dice_rows);
    const auto table = consensus_comparison(styles, uncertainty, dice_rows);
    std::map<std::string, const ModelSummary*> by_id;
    for (const auto& m : models) by_id[m.spec.model_id] = &m;

    // Style scatter.
    std::string fig1 = csv::join({"rater_id", "center_id", "bias", "consistency"}) + "\n";
    for (const auto& r : styles.rows)
        fig1 += csv::join({r.rater_id, r.center_id, csv::number(r.bias), csv::number(r.consistency)}) + "\n";
    rep.plot_csvs["fig1_style.csv"] = fig1;

    // Rater models against rater bias.
    std::string fig2 = csv::join({"rater_id", "center_id", "bias", "uncertainty", "uncertainty_all"}) + "\n";
    std::string fig4 = csv::join({"rater_id", "center_id", "bias", "dice"}) + "\n";
    std::vector<double> ub, uy, db, dy;
    for (const auto& r : styles.rows) {
        const auto it = by_id.find(r.rater_id);
        const ModelSummary* m = it == by_id.end() ? nullptr : it->second;
        const auto u = m ? m->uncertainty : std::nullopt;
        const auto ua = m ? m->uncertainty_all : std::nullopt;
        const auto d = m ? m->dice : std::nullopt;
        fig2 += csv::join({r.rater_id, r.center_id, csv::number(r.bias), csv::number(u), csv::number(ua)}) + "\n";
        fig4 += csv::join({r.rater_id, r.center_id, csv::number(r.bias), csv::number(d)}) + "\n";
        if (u) {
            ub.push_back(r.bias);
            uy.push_back(*u);
        }
        if (d) {
            db.push_back(r.bias);
            dy.push_back(*d);
        }
    }
    rep.plot_csvs["fig2_unc_vs_bias.csv"] = fig2;
    rep.plot_csvs["fig4_dice_vs_bias.csv"] = fig4;

    std::string fig5 = csv::join({"scope", "model_id", "center_id", "uncertainty"}) + "\n";
    std::string tab1 = csv::join({"scope", "model_id", "center_id", "trained_on", "evaluated_on", "dice"}) + "\n";
    for (const auto& r : table.rows) {
        fig5 += csv::join({r.scope, r.model_id, r.center_id, csv::number(r.uncertainty)}) + "\n";
        tab1 += csv::join({r.scope, r.model_id, r.center_id, r.trained_on, r.evaluated_on, csv::number(r.dice)}) + "\n";
    }
    rep.plot_csvs["fig5_consensus.csv"] = fig5;
    rep.plot_csvs["table1_dice.csv"] = tab1;

    // Per center: raters' mean against the center and global consensus models.
    const auto global = by_id.count("consensus:global") ? by_id["consensus:global"]->uncertainty : std::nullopt;
    std::map<std::string, std::vector<double>> center_u;
    std::set<std::string> center_ids;
    for (const auto& r : styles.rows) {
        center_ids.insert(r.center_id);
        const auto it = by_id.find(r.rater_id);
        if (it != by_id.end() && it->second->uncertainty) center_u[r.center_id].push_back(*it->second->uncertainty);
    }
    std::string fig7 = csv::join({"center_id", "n_raters", "mean_rater_uncertainty", "center_consensus_uncertainty",
                                  "global_consensus_uncertainty"}) +
                       "\n";
    json per_center = json::array();
    for (const auto& c : center_ids) {
        const auto it = by_id.find("consensus:center:" + c);
        const auto cu = it == by_id.end() ? std::nullopt : it->second->uncertainty;
        const auto mu = mean_of(center_u[c]);
        const auto n = std::count_if(styles.rows.begin(), styles.rows.end(), [&](const RaterStyle& r) { return r.center_id == c; });
        fig7 += csv::join({c, std::to_string(n), csv::number(mu), csv::number(cu), csv::number(global)}) + "\n";
        per_center.push_back({{"center_id", c},
                              {"n_raters", n},
                              {"mean_rater_uncertainty", opt(mu)},
                              {"center_consensus_uncertainty", opt(cu)},
                              {"global_consensus_uncertainty", opt(global)}});
    }
    rep.plot_csvs["fig7_per_center.csv"] = fig7;

    json j;
    j["metadata"] = json::parse(metadata_json);
    j["entropy_unit"] = "nats";
    j["consensus_method"] = to_string(styles.consensus_method);
    j["consensus_scope"] = styles.consensus_scope.describe();
    j["dice_empty_pair_rule"] = "two empty masks score 1";
    j["regressions"] = {{"uncertainty_vs_bias", regression_json(ub, uy, "bias", "uncertainty")},
                        {"dice_vs_bias", regression_json(db, dy, "bias", "dice")}};
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"scope", r.scope},
                        {"model_id", r.model_id},
                        {"center_id", r.center_id},
                        {"trained_on", r.trained_on},
                        {"evaluated_on", r.evaluated_on},
                        {"dice", opt(r.dice)},
                        {"uncertainty", opt(r.uncertainty)}});
    j["comparison"] = {{"rows", rows},
                       {"uncertainty_ratio", opt(table.uncertainty_ratio)},
                       {"uncertainty_reduction",
                        table.uncertainty_ratio ? json(1.0 - *table.uncertainty_ratio) : json(nullptr)}};
    j["per_center"] = per_center;
    j["flags"] = table.flags;
    json files = json::array();
    for (const auto& [name, _] : rep.plot_csvs) files.push_back(name);
    j["plot_files"] = files;
    rep.json = j.dump(2) + "\n";
    return rep;
}

}  // namespace raterlab
